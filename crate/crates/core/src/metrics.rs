//! Percentiles, ratios and pooled per-scheme statistics.

use crate::scenario::AccessScheme;
use std::collections::BTreeMap;
use thiserror::Error;

/// Percentiles reported by default.
pub const REPORTED_PERCENTILES: [f64; 3] = [5.0, 50.0, 95.0];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    EmptySamples,
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("reports come from different configurations or seeds")]
    MixedConfigs,
    #[error("no reports to aggregate")]
    NoReports,
}

/// Nearest-rank percentile of an ascending slice: the sample at 1-based index
/// `ceil(p / 100 * n)`, clamped to `[1, n]`.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64, MetricsError> {
    if sorted.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(MetricsError::InvalidPercentile(p));
    }
    let n = sorted.len();
    // p * n is exact for integer p, so no rounding noise reaches ceil
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// `value / baseline`; `None` unless the baseline is positive.
pub fn ratio_vs_baseline(value: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| value / baseline)
}

/// Empirical CDF points `(x, F(x))` of an ascending slice, one per distinct value.
pub fn ecdf(sorted: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].total_cmp(&b[j]).is_le() {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Convergence diagnostics of one repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepDiagnostics {
    pub repetition: usize,
    pub steps: usize,
    pub converged: bool,
    pub final_low_fraction: f64,
}

/// Pooled statistics of one access scheme.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemeStats {
    /// Per-UE rates, ascending; uncovered UEs contribute zeros.
    pub rates: Vec<f64>,
    /// Serving-link SINR of covered UEs, dB, ascending.
    pub sinr_db: Vec<f64>,
    /// UEs-per-BS count -> number of BSs.
    pub ue_per_bs: BTreeMap<usize, usize>,
    pub uncovered: usize,
    /// Sorted by repetition.
    pub diagnostics: Vec<RepDiagnostics>,
}

impl SchemeStats {
    /// Statistics of a single repetition.
    pub fn single(rates: Vec<f64>, sinr_db: Vec<f64>, bs_loads: &[usize], uncovered: usize, diag: RepDiagnostics) -> Self {
        let mut ue_per_bs = BTreeMap::new();
        for &n in bs_loads {
            *ue_per_bs.entry(n).or_insert(0) += 1;
        }
        SchemeStats {
            rates: sorted(rates),
            sinr_db: sorted(sinr_db),
            ue_per_bs,
            uncovered,
            diagnostics: vec![diag],
        }
    }

    pub fn merge(&self, other: &SchemeStats) -> SchemeStats {
        let mut ue_per_bs = self.ue_per_bs.clone();
        for (&k, &v) in &other.ue_per_bs {
            *ue_per_bs.entry(k).or_insert(0) += v;
        }
        let mut diagnostics: Vec<RepDiagnostics> = self.diagnostics.iter().chain(&other.diagnostics).copied().collect();
        diagnostics.sort_by_key(|d| d.repetition);
        SchemeStats {
            rates: merge_sorted(&self.rates, &other.rates),
            sinr_db: merge_sorted(&self.sinr_db, &other.sinr_db),
            ue_per_bs,
            uncovered: self.uncovered + other.uncovered,
            diagnostics,
        }
    }

    pub fn percentile(&self, p: f64) -> Result<f64, MetricsError> {
        percentile(&self.rates, p)
    }

    pub fn mean_rate(&self) -> Option<f64> {
        (!self.rates.is_empty()).then(|| self.rates.iter().sum::<f64>() / self.rates.len() as f64)
    }

    /// Mean UEs per BS over every BS of every repetition.
    pub fn mean_ue_per_bs(&self) -> Option<f64> {
        let bs: usize = self.ue_per_bs.values().sum();
        let ues: usize = self.ue_per_bs.iter().map(|(k, v)| k * v).sum();
        (bs > 0).then(|| ues as f64 / bs as f64)
    }

    pub fn mean_low_fraction(&self) -> Option<f64> {
        let n = self.diagnostics.len();
        (n > 0).then(|| self.diagnostics.iter().map(|d| d.final_low_fraction).sum::<f64>() / n as f64)
    }

    pub fn converged_share(&self) -> Option<f64> {
        let n = self.diagnostics.len();
        (n > 0).then(|| self.diagnostics.iter().filter(|d| d.converged).count() as f64 / n as f64)
    }
}

/// Statistics of every scheme of a run, tagged with the configuration
/// fingerprint and seed they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub fingerprint: u64,
    pub seed: u64,
    pub schemes: BTreeMap<AccessScheme, SchemeStats>,
}

impl MetricsReport {
    pub fn new(fingerprint: u64, seed: u64) -> Self {
        MetricsReport {
            fingerprint,
            seed,
            schemes: BTreeMap::new(),
        }
    }

    pub fn repetitions(&self) -> usize {
        self.schemes.values().map(|s| s.diagnostics.len()).max().unwrap_or(0)
    }

    pub fn scheme(&self, s: AccessScheme) -> Option<&SchemeStats> {
        self.schemes.get(&s)
    }

    /// Pool two reports. Associative and independent of argument order.
    pub fn merge(&self, other: &MetricsReport) -> Result<MetricsReport, MetricsError> {
        if self.fingerprint != other.fingerprint || self.seed != other.seed {
            return Err(MetricsError::MixedConfigs);
        }
        let mut schemes = self.schemes.clone();
        for (k, v) in &other.schemes {
            let merged = match schemes.get(k) {
                Some(mine) => mine.merge(v),
                None => v.clone(),
            };
            schemes.insert(*k, merged);
        }
        Ok(MetricsReport {
            fingerprint: self.fingerprint,
            seed: self.seed,
            schemes,
        })
    }

    /// Ratio of `scheme`'s percentile to the licensed baseline's.
    pub fn ratio_vs_licensed(&self, scheme: AccessScheme, p: f64) -> Option<f64> {
        let v = self.scheme(scheme)?.percentile(p).ok()?;
        let base = self.scheme(AccessScheme::Licensed)?.percentile(p).ok()?;
        ratio_vs_baseline(v, base)
    }
}

/// Pool per-repetition reports.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    let (first, rest) = reports.split_first().ok_or(MetricsError::NoReports)?;
    rest.iter().try_fold(first.clone(), |acc, r| acc.merge(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(rep: usize) -> RepDiagnostics {
        RepDiagnostics {
            repetition: rep,
            steps: 10,
            converged: true,
            final_low_fraction: 0.5,
        }
    }

    fn report(rep: usize, rates: Vec<f64>) -> MetricsReport {
        let mut r = MetricsReport::new(1, 2);
        r.schemes.insert(AccessScheme::Hybrid, SchemeStats::single(rates, vec![], &[1, 2], 0, diag(rep)));
        r
    }

    #[test]
    fn percentile_examples() {
        let grid: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&grid, 5.0), Ok(5.0));
        assert_eq!(percentile(&grid, 95.0), Ok(95.0));
        assert_eq!(percentile(&grid, 0.0), Ok(1.0));
        assert_eq!(percentile(&grid, 100.0), Ok(100.0));
        assert_eq!(percentile(&[7.0], 37.0), Ok(7.0));
        assert_eq!(percentile(&sorted(vec![3.0, 1.0, 2.0]), 50.0), Ok(2.0));
        assert_eq!(percentile(&[], 5.0), Err(MetricsError::EmptySamples));
        assert_eq!(percentile(&[1.0], 101.0), Err(MetricsError::InvalidPercentile(101.0)));
    }

    #[test]
    fn ratio_examples() {
        assert!((ratio_vs_baseline(0.4492, 0.3848).unwrap() - 1.17).abs() < 0.005);
        assert!((ratio_vs_baseline(0.0190, 0.0362).unwrap() - 0.52).abs() < 0.005);
        assert_eq!(ratio_vs_baseline(3.0, 3.0), Some(1.0));
        assert_eq!(ratio_vs_baseline(3.0, 0.0), None);
    }

    #[test]
    fn histogram_examples() {
        let s = SchemeStats::single(vec![1.0; 7], vec![], &[7], 0, diag(0));
        assert_eq!(s.ue_per_bs, BTreeMap::from([(7, 1)]));
        let none = SchemeStats::single(vec![0.0; 5], vec![], &[0, 0], 5, diag(0));
        assert_eq!(none.ue_per_bs, BTreeMap::from([(0, 2)]));
        assert_eq!(none.uncovered, 5);
        assert_eq!(none.mean_ue_per_bs(), Some(0.0));
    }

    #[test]
    fn aggregate_identity_and_mixed() {
        let a = report(0, vec![3.0, 1.0]);
        assert_eq!(aggregate(std::slice::from_ref(&a)), Ok(a.clone()));
        let mut b = report(1, vec![2.0]);
        b.seed = 99;
        assert_eq!(aggregate(&[a, b]), Err(MetricsError::MixedConfigs));
        assert_eq!(aggregate(&[]), Err(MetricsError::NoReports));
    }

    #[test]
    fn ecdf_is_a_distribution() {
        let pts = ecdf(&[1.0, 1.0, 2.0, 5.0]);
        assert_eq!(pts, vec![(1.0, 0.5), (2.0, 0.75), (5.0, 1.0)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn pooled_percentile_matches_concatenation(
            a in prop::collection::vec(0.0f64..1e9, 1..40),
            b in prop::collection::vec(0.0f64..1e9, 1..40),
            p in 0.0f64..=100.0,
        ) {
            let merged = aggregate(&[report(0, a.clone()), report(1, b.clone())]).unwrap();
            let mut all = a.clone();
            all.extend(&b);
            all.sort_by(f64::total_cmp);
            let stats = merged.scheme(AccessScheme::Hybrid).unwrap();
            prop_assert_eq!(stats.percentile(p).unwrap(), percentile(&all, p).unwrap());
            let p5 = stats.percentile(5.0).unwrap();
            let p50 = stats.percentile(50.0).unwrap();
            let p95 = stats.percentile(95.0).unwrap();
            prop_assert!(p5 <= p50 && p50 <= p95);
        }

        #[test]
        fn merge_is_associative_and_commutative(
            a in prop::collection::vec(0.0f64..1e3, 0..10),
            b in prop::collection::vec(0.0f64..1e3, 0..10),
            c in prop::collection::vec(0.0f64..1e3, 0..10),
        ) {
            let (ra, rb, rc) = (report(0, a), report(1, b), report(2, c));
            let left = ra.merge(&rb).unwrap().merge(&rc).unwrap();
            let right = ra.merge(&rb.merge(&rc).unwrap()).unwrap();
            let swapped = rc.merge(&ra).unwrap().merge(&rb).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(&left, &swapped);
        }

        #[test]
        fn ecdf_nondecreasing(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let pts = ecdf(&sorted(v));
            prop_assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert!(pts.iter().all(|p| p.1 > 0.0 && p.1 <= 1.0));
            prop_assert_eq!(pts.last().unwrap().1, 1.0);
        }
    }
}
