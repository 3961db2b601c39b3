//! Square uniform planar array (UPA) responses and steering vectors.
//!
//! Element `(p, q)` of a `side x side` array (flat index `p * side + q`) has
//! phase `-2 pi D (p u + q v)` with `D = 0.5` wavelengths, where
//! `u = cos(phi) sin(theta)` is the horizontal and `v = sin(phi)` the vertical
//! direction cosine for azimuth `theta` and elevation `phi`.

use super::ChannelError;
use crate::scenario::square_side;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Element spacing in wavelengths.
pub const ELEMENT_SPACING: f64 = 0.5;

/// Direction cosines `(u, v)` of azimuth `theta`, elevation `phi`.
#[inline]
pub fn direction(theta: f64, phi: f64) -> (f64, f64) {
    (phi.cos() * theta.sin(), phi.sin())
}

fn side_of(n: usize) -> Result<usize, ChannelError> {
    square_side(n).ok_or(ChannelError::NotPerfectSquare(n))
}

/// Unit-modulus array response toward `(theta, phi)`.
pub fn array_response(n: usize, theta: f64, phi: f64) -> Result<Vec<Complex64>, ChannelError> {
    let side = side_of(n)?;
    let (u, v) = direction(theta, phi);
    let k = 2.0 * PI * ELEMENT_SPACING;
    let mut out = Vec::with_capacity(n);
    for p in 0..side {
        for q in 0..side {
            out.push(Complex64::from_polar(1.0, -k * (p as f64 * u + q as f64 * v)));
        }
    }
    Ok(out)
}

/// A unit-norm beamforming vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    weights: Vec<Complex64>,
    side: usize,
    theta: f64,
    phi: f64,
}

impl BeamVector {
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Steering angles `(theta, phi)`.
    pub fn angles(&self) -> (f64, f64) {
        (self.theta, self.phi)
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `w^H a`.
    pub fn inner(&self, a: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(a).map(|(w, x)| w.conj() * x).sum()
    }

    /// Multiply every weight by `exp(j phase)`.
    pub fn rotated(&self, phase: f64) -> BeamVector {
        let r = Complex64::from_polar(1.0, phase);
        BeamVector {
            weights: self.weights.iter().map(|w| w * r).collect(),
            ..self.clone()
        }
    }

    /// Arbitrary unit-norm weights, for tests and external callers.
    pub fn from_weights(weights: Vec<Complex64>) -> Result<BeamVector, ChannelError> {
        let side = side_of(weights.len())?;
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(ChannelError::DimensionMismatch {
                expected: weights.len(),
                got: 0,
            });
        }
        Ok(BeamVector {
            weights: weights.into_iter().map(|w| w / norm).collect(),
            side,
            theta: f64::NAN,
            phi: f64::NAN,
        })
    }
}

/// Steering vector of an `n`-element square UPA pointed at `(theta, phi)`:
/// the array response scaled by `1/sqrt(n)`.
pub fn steering_vector(n: usize, theta: f64, phi: f64) -> Result<BeamVector, ChannelError> {
    let side = side_of(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let weights = array_response(n, theta, phi)?.into_iter().map(|a| a * scale).collect();
    Ok(BeamVector {
        weights,
        side,
        theta,
        phi,
    })
}

#[inline]
fn geometric_sum(side: usize, x: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, -x);
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..side {
        acc += term;
        term *= step;
    }
    acc
}

/// `w^H a` for a steering vector with direction cosines `beam` and an array
/// response with direction cosines `ray`, on a `side x side` array. The UPA
/// phase is separable, so this costs two `side`-term geometric sums.
#[inline]
pub fn array_factor(side: usize, beam: (f64, f64), ray: (f64, f64)) -> Complex64 {
    let k = 2.0 * PI * ELEMENT_SPACING;
    let x = k * (ray.0 - beam.0);
    let y = k * (ray.1 - beam.1);
    geometric_sum(side, x) * geometric_sum(side, y) / side as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_angle_is_flat() {
        let w = steering_vector(4, 0.0, 0.0).unwrap();
        for x in w.weights() {
            assert!((x - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn not_a_square() {
        assert!(matches!(steering_vector(8, 0.0, 0.0), Err(ChannelError::NotPerfectSquare(8))));
        assert!(matches!(steering_vector(0, 0.0, 0.0), Err(ChannelError::NotPerfectSquare(0))));
    }

    #[test]
    fn boresight_gain_of_64_elements() {
        let w = steering_vector(64, 0.3, 0.1).unwrap();
        let a = array_response(64, 0.3, 0.1).unwrap();
        let gain_db = 10.0 * w.inner(&a).norm_sqr().log10();
        assert!((gain_db - 10.0 * 64f64.log10()).abs() < 1e-9);
        assert!((gain_db - 18.06).abs() < 0.01);
    }

    #[test]
    fn matched_inner_product_is_sqrt_n() {
        for n in [1, 4, 16, 64, 256] {
            let w = steering_vector(n, 1.1, -0.2).unwrap();
            let a = array_response(n, 1.1, -0.2).unwrap();
            assert!((w.inner(&a).norm_sqr() - n as f64).abs() < 1e-8 * n as f64);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn steering_vectors_have_unit_norm(k in 0usize..5, theta in 0.0..2.0 * PI, phi in -PI / 2.0..PI / 2.0) {
            let n = [1usize, 4, 16, 64, 256][k];
            let w = steering_vector(n, theta, phi).unwrap();
            prop_assert_eq!(w.len(), n);
            prop_assert!((w.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn separable_factor_matches_dense_product(
            k in 0usize..4, bt in 0.0..2.0 * PI, bp in -0.5f64..0.5, rt in 0.0..2.0 * PI, rp in -0.5f64..0.5
        ) {
            let n = [4usize, 16, 64, 256][k];
            let w = steering_vector(n, bt, bp).unwrap();
            let a = array_response(n, rt, rp).unwrap();
            let dense = w.inner(&a);
            let fast = array_factor(w.side(), direction(bt, bp), direction(rt, rp));
            prop_assert!((dense - fast).norm() < 1e-9, "{} vs {}", dense, fast);
        }
    }
}
