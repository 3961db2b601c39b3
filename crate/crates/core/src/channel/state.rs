//! Distance-dependent LOS / NLOS / outage classification and log-distance path loss.

use super::ChannelError;
use crate::scenario::{CarrierSpec, ChannelParams};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkState {
    Los,
    Nlos,
    Outage,
}

impl LinkState {
    pub fn name(self) -> &'static str {
        match self {
            LinkState::Los => "los",
            LinkState::Nlos => "nlos",
            LinkState::Outage => "outage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateProbs {
    pub outage: f64,
    pub los: f64,
    pub nlos: f64,
}

/// State probabilities at distance `d` meters:
/// `p_out = max(0, 1 - exp(-a_out d + b_out))`, `p_los = (1 - p_out) exp(-a_los d)`,
/// `p_nlos = 1 - p_out - p_los`.
pub fn link_state_probs(d: f64, params: &ChannelParams) -> Result<StateProbs, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    let outage = (1.0 - (-params.outage_a * d + params.outage_b).exp()).max(0.0);
    let los = (1.0 - outage) * (-params.los_a * d).exp();
    let nlos = (1.0 - outage - los).max(0.0);
    Ok(StateProbs { outage, los, nlos })
}

/// Draw a state from [`link_state_probs`] with one uniform variate.
pub fn sample_state<R: Rng + ?Sized>(d: f64, params: &ChannelParams, rng: &mut R) -> Result<LinkState, ChannelError> {
    let p = link_state_probs(d, params)?;
    let u: f64 = rng.random();
    Ok(if u < p.outage {
        LinkState::Outage
    } else if u < p.outage + p.los {
        LinkState::Los
    } else {
        LinkState::Nlos
    })
}

/// `alpha + beta * 10 log10(d) + shadow`, parameters chosen by carrier and state.
pub fn pathloss_db(d: f64, state: LinkState, spec: &CarrierSpec, shadow_db: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    let p = match state {
        LinkState::Los => spec.pathloss_los,
        LinkState::Nlos => spec.pathloss_nlos,
        LinkState::Outage => return Err(ChannelError::OutageLink),
    };
    Ok(p.alpha_db + p.beta * 10.0 * d.log10() + shadow_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AccessMode, Carrier};
    use crate::seed::stream;
    use proptest::prelude::*;

    fn params() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn probs_at_100m() {
        // exponent -3.34 + 5.2 > 0, so no outage
        let p = link_state_probs(100.0, &params()).unwrap();
        assert_eq!(p.outage, 0.0);
        assert!((p.los - 0.225_372_655_539_439).abs() < 1e-12);
        assert!((p.los - (-1.49f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn probs_at_200m() {
        let p = link_state_probs(200.0, &params()).unwrap();
        assert!((p.outage - 0.772_362_311_616_187).abs() < 1e-12);
        assert!((p.los - 0.011_562_363_287_468_5).abs() < 1e-12);
        assert!((p.nlos - 0.216_075_325_096_344).abs() < 1e-12);
    }

    #[test]
    fn probs_near_zero_and_far() {
        let p = link_state_probs(1e-9, &params()).unwrap();
        assert_eq!(p.outage, 0.0);
        assert!(p.los > 1.0 - 1e-9 && p.nlos < 1e-9);
        let far = link_state_probs(500.0, &params()).unwrap();
        assert!((far.outage - (1.0 - (-11.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn non_positive_distance_is_rejected() {
        assert!(matches!(link_state_probs(0.0, &params()), Err(ChannelError::NonPositiveDistance(_))));
        assert!(matches!(link_state_probs(-3.0, &params()), Err(ChannelError::NonPositiveDistance(_))));
    }

    #[test]
    fn pathloss_examples() {
        let low = CarrierSpec::default_for(Carrier::Low, AccessMode::Exclusive);
        let high = CarrierSpec::default_for(Carrier::High, AccessMode::Pooled);
        assert!((pathloss_db(100.0, LinkState::Nlos, &low, 0.0).unwrap() - 130.0).abs() < 1e-9);
        let expect = 69.8 + 20.0 * 50f64.log10();
        assert!((pathloss_db(50.0, LinkState::Los, &high, 0.0).unwrap() - expect).abs() < 1e-9);
        assert!((pathloss_db(50.0, LinkState::Los, &high, 0.0).unwrap() - 103.78).abs() < 5e-3);
        assert_eq!(pathloss_db(1.0, LinkState::Los, &low, 0.0).unwrap(), 61.4);
        assert_eq!(pathloss_db(1.0, LinkState::Los, &low, 2.5).unwrap(), 63.9);
        assert!(matches!(pathloss_db(10.0, LinkState::Outage, &low, 0.0), Err(ChannelError::OutageLink)));
    }

    #[test]
    fn empirical_state_frequencies_match() {
        for d in [60.0, 150.0, 200.0, 260.0] {
            let p = link_state_probs(d, &params()).unwrap();
            let mut rng = stream(d as u64);
            let n = 100_000;
            let mut counts = [0usize; 3];
            for _ in 0..n {
                match sample_state(d, &params(), &mut rng).unwrap() {
                    LinkState::Outage => counts[0] += 1,
                    LinkState::Los => counts[1] += 1,
                    LinkState::Nlos => counts[2] += 1,
                }
            }
            for (c, q) in counts.iter().zip([p.outage, p.los, p.nlos]) {
                let sigma = (n as f64 * q * (1.0 - q)).sqrt();
                let diff = (*c as f64 - n as f64 * q).abs();
                assert!(diff <= 3.0 * sigma + 1.0, "d={d}: {c} vs {}", n as f64 * q);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn probabilities_are_a_distribution(d in 1e-6f64..2_000.0) {
            let p = link_state_probs(d, &params()).unwrap();
            for q in [p.outage, p.los, p.nlos] {
                prop_assert!((0.0..=1.0).contains(&q));
            }
            prop_assert!((p.outage + p.los + p.nlos - 1.0).abs() < 1e-12);
        }
    }
}
