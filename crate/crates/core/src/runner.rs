//! Monte Carlo repetitions: topology, links and association per repetition,
//! with every scheme evaluated on the same draws.

use crate::association::{initial_association, run_to_convergence, AssocError, ChannelCache, Network};
use crate::channel::LinkTable;
use crate::deployment::sample_topology;
use crate::metrics::{MetricsReport, RepDiagnostics, SchemeStats};
use crate::scenario::{AccessScheme, Carrier, ScenarioConfig};
use crate::seed::{derive_seed, derived_stream};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Association(#[from] AssocError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("no schemes requested")]
    NoSchemes,
}

/// Final state of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeOutcome {
    pub operator: usize,
    pub ue_id: usize,
    pub rate_bps: f64,
    /// `None` for uncovered UEs.
    pub sinr_db: Option<f64>,
    pub serving: Option<(usize, Carrier)>,
}

/// One scheme evaluated in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: AccessScheme,
    pub repetition: usize,
    pub ues: Vec<UeOutcome>,
    pub trace: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    /// UEs per BS, summed over carriers.
    pub bs_load: Vec<usize>,
}

impl SchemeRun {
    pub fn uncovered(&self) -> usize {
        self.ues.iter().filter(|u| u.serving.is_none()).count()
    }

    pub fn stats(&self) -> SchemeStats {
        SchemeStats::single(
            self.ues.iter().map(|u| u.rate_bps).collect(),
            self.ues.iter().filter_map(|u| u.sinr_db).collect(),
            &self.bs_load,
            self.uncovered(),
            RepDiagnostics {
                repetition: self.repetition,
                steps: self.steps,
                converged: self.converged,
                final_low_fraction: *self.trace.last().unwrap_or(&0.0),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutput {
    pub repetition: usize,
    pub n_bs: usize,
    pub n_ue: usize,
    pub runs: Vec<SchemeRun>,
}

/// Seed of repetition `rep`.
pub fn repetition_seed(base: u64, rep: usize) -> u64 {
    derive_seed(base, &[("rep", rep as u64)])
}

/// Run one repetition for each scheme in `schemes`. Topology, links and the
/// association stream depend only on `(base_seed, rep)`.
pub fn run_repetition(
    cfg: &ScenarioConfig,
    schemes: &[AccessScheme],
    base_seed: u64,
    rep: usize,
) -> Result<RepetitionOutput, RunError> {
    let rs = repetition_seed(base_seed, rep);
    let topo = sample_topology(cfg, &mut derived_stream(rs, &[("topology", 0)]));
    let links = LinkTable::realize(&topo, cfg, derive_seed(rs, &[("links", 0)]));
    let cache = ChannelCache::build(&topo, &links, cfg);
    let mut runs = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let scfg = scheme.apply(cfg);
        let net = Network::new(&cache, &scfg)?;
        let mut rng = derived_stream(rs, &[("association", 0)]);
        let mut asg = initial_association(&net, &mut rng);
        let conv = run_to_convergence(&net, &mut asg, &mut rng);
        let ues = (0..topo.n_ue())
            .map(|j| {
                let served = net.served_rate(&asg, j);
                UeOutcome {
                    operator: topo.ue[j].operator,
                    ue_id: j,
                    rate_bps: served.map_or(0.0, |(r, _)| r),
                    sinr_db: served.map(|(_, s)| s.db()),
                    serving: asg.serving(j),
                }
            })
            .collect();
        runs.push(SchemeRun {
            scheme,
            repetition: rep,
            ues,
            trace: conv.trace,
            steps: conv.steps,
            converged: conv.converged,
            bs_load: (0..topo.n_bs()).map(|k| asg.bs_count(k)).collect(),
        });
    }
    Ok(RepetitionOutput {
        repetition: rep,
        n_bs: topo.n_bs(),
        n_ue: topo.n_ue(),
        runs,
    })
}

/// Run repetitions `0..reps` on `threads` workers (`None`: all cores). Output
/// is ordered by repetition whatever the completion order.
pub fn run_repetitions(
    cfg: &ScenarioConfig,
    schemes: &[AccessScheme],
    reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<RepetitionOutput>, RunError> {
    if schemes.is_empty() {
        return Err(RunError::NoSchemes);
    }
    let job = || (0..reps).into_par_iter().map(|r| run_repetition(cfg, schemes, seed, r)).collect();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::Pool(e.to_string()))?
            .install(job),
        None => job(),
    }
}

/// Pooled statistics of a set of repetitions.
pub fn report(cfg: &ScenarioConfig, seed: u64, outputs: &[RepetitionOutput]) -> MetricsReport {
    let mut rep = MetricsReport::new(cfg.fingerprint(), seed);
    for out in outputs {
        for run in &out.runs {
            let s = run.stats();
            let merged = match rep.schemes.get(&run.scheme) {
                Some(prev) => prev.merge(&s),
                None => s,
            };
            rep.schemes.insert(run.scheme, merged);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.area_km2 = 0.1;
        c
    }

    #[test]
    fn schemes_share_topology() {
        let out = run_repetition(&small(), &AccessScheme::ALL, 3, 0).unwrap();
        assert_eq!(out.runs.len(), 3);
        let ops: Vec<Vec<usize>> = out.runs.iter().map(|r| r.ues.iter().map(|u| u.operator).collect()).collect();
        assert!(ops.windows(2).all(|w| w[0] == w[1]));
        // coverage does not depend on the scheme
        let cov: Vec<usize> = out.runs.iter().map(|r| r.uncovered()).collect();
        assert!(cov.windows(2).all(|w| w[0] == w[1]));
        // one scheme alone reproduces its run inside the joint evaluation
        let alone = run_repetition(&small(), &[AccessScheme::Pooled], 3, 0).unwrap();
        assert_eq!(alone.runs[0], out.runs[2]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = run_repetitions(&small(), &[AccessScheme::Hybrid], 3, 11, Some(1)).unwrap();
        let b = run_repetitions(&small(), &[AccessScheme::Hybrid], 3, 11, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|o| o.repetition).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn sample_count_is_ue_total() {
        let outs = run_repetitions(&small(), &[AccessScheme::Licensed], 2, 5, Some(1)).unwrap();
        let rep = report(&small(), 5, &outs);
        let total: usize = outs.iter().map(|o| o.n_ue).sum();
        assert_eq!(rep.scheme(AccessScheme::Licensed).unwrap().rates.len(), total);
        assert_eq!(rep.repetitions(), 2);
    }

    #[test]
    fn no_schemes_is_an_error() {
        assert!(matches!(run_repetitions(&small(), &[], 1, 0, None), Err(RunError::NoSchemes)));
    }
}
