//! Greedy cell/carrier updates and the randomized fixed-point loop.

use super::{AssocError, Assignment, Network};
use crate::scenario::{AssociationPolicy, Carrier};
use rand::Rng;
use std::io::Write;

/// Best pair among `pairs` (visited in BS-then-carrier order); the first
/// maximum wins, so ties go to the lowest BS and then the lowest carrier.
fn argmax<I: Iterator<Item = (usize, Carrier)>>(net: &Network, asg: &Assignment, ue: usize, pairs: I) -> Option<(usize, Carrier)> {
    let mut best: Option<(f64, (usize, Carrier))> = None;
    for (bs, c) in pairs {
        let r = net.rate(asg, ue, bs, c);
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, (bs, c)));
        }
    }
    best.map(|(_, p)| p)
}

/// Move `ue` to the own-operator pair `(i, c)` maximizing its rate, with the
/// rest of the assignment frozen. The UE is detached first if needed.
pub fn greedy_joint_update(net: &Network, asg: &mut Assignment, ue: usize) -> Result<(usize, Carrier), AssocError> {
    asg.remove(ue);
    let cache = net.cache();
    if !cache.is_covered(ue) {
        asg.set_covered(ue, false);
        return Err(AssocError::Uncovered(ue));
    }
    let pairs = cache.candidates(ue).flat_map(|bs| Carrier::ALL.map(|c| (bs, c)));
    let (bs, c) = argmax(net, asg, ue, pairs).expect("covered UE has a candidate");
    asg.assign(ue, bs, c);
    Ok((bs, c))
}

/// Carrier-only variant: the BS stays at the UE's anchor.
pub fn greedy_carrier_update(net: &Network, asg: &mut Assignment, ue: usize) -> Result<Carrier, AssocError> {
    asg.remove(ue);
    if !net.cache().is_covered(ue) {
        asg.set_covered(ue, false);
        return Err(AssocError::Uncovered(ue));
    }
    let bs = asg.anchor(ue).ok_or(AssocError::NoAnchor(ue))?;
    let (_, c) = argmax(net, asg, ue, Carrier::ALL.into_iter().map(|c| (bs, c))).expect("two carriers");
    asg.assign(ue, bs, c);
    Ok(c)
}

fn update(net: &Network, asg: &mut Assignment, ue: usize) -> Result<(usize, Carrier), AssocError> {
    match net.params().policy {
        AssociationPolicy::Joint => greedy_joint_update(net, asg, ue),
        AssociationPolicy::CarrierOnly => {
            let c = greedy_carrier_update(net, asg, ue)?;
            Ok((asg.anchor(ue).expect("anchored"), c))
        }
    }
}

/// Attach every covered UE to its minimum-path-loss BS, carrier drawn
/// Bernoulli with the configured low-carrier probability. One uniform is drawn
/// per covered UE in index order.
pub fn initial_association<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Assignment {
    let cache = net.cache();
    let mut asg = Assignment::new(cache.n_bs(), cache.n_ue());
    let p_low = net.initial_low_prob();
    for ue in 0..cache.n_ue() {
        let Some(bs) = net.initial_bs(ue) else { continue };
        let u: f64 = rng.random();
        let c = if u < p_low { Carrier::Low } else { Carrier::High };
        asg.set_covered(ue, true);
        asg.set_anchor(ue, Some(bs));
        asg.assign(ue, bs, c);
    }
    asg
}

/// Outcome of [`run_to_convergence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    /// Low-carrier share of covered UEs; entry 0 is the initial state, entry
    /// `n` follows step `n`.
    pub trace: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

impl Convergence {
    pub fn final_fraction(&self) -> f64 {
        *self.trace.last().unwrap_or(&0.0)
    }
}

fn spread(window: &[f64]) -> f64 {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// Repeatedly pick a covered UE uniformly at random (with replacement) and
/// re-run the configured greedy update until the low-carrier share varies by
/// less than the tolerance over the last `window` steps, or the step budget
/// runs out.
pub fn run_to_convergence<R: Rng + ?Sized>(net: &Network, asg: &mut Assignment, rng: &mut R) -> Convergence {
    let covered: Vec<usize> = (0..asg.n_ue()).filter(|&u| asg.is_covered(u)).collect();
    let n_cov = covered.len();
    let mut trace = vec![asg.frac_low(n_cov)];
    if n_cov == 0 {
        return Convergence {
            trace,
            steps: 0,
            converged: true,
        };
    }
    let params = net.params();
    let max_it = net.max_iterations();
    // a budget shorter than the window would otherwise never converge
    let window = params.window.min(max_it).max(1);
    for step in 1..=max_it {
        let ue = covered[rng.random_range(0..n_cov)];
        update(net, asg, ue).expect("covered UE stays covered");
        trace.push(asg.frac_low(n_cov));
        if step >= window && spread(&trace[step + 1 - window..]) < params.tolerance {
            return Convergence {
                trace,
                steps: step,
                converged: true,
            };
        }
    }
    Convergence {
        trace,
        steps: max_it,
        converged: false,
    }
}

/// Whether one more greedy update of `ue` leaves its pair unchanged. The
/// assignment is restored either way.
pub fn is_stable(net: &Network, asg: &mut Assignment, ue: usize) -> bool {
    let Some(before) = asg.serving(ue) else { return true };
    let after = update(net, asg, ue).ok();
    asg.assign(ue, before.0, before.1);
    after == Some(before)
}

/// Two-column `step fraction` text.
pub fn write_trace<W: Write>(trace: &[f64], mut w: W) -> std::io::Result<()> {
    for (step, f) in trace.iter().enumerate() {
        writeln!(w, "{step} {f:.8e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::ChannelCache;
    use crate::channel::{LinkRealization, LinkState, LinkTable};
    use crate::deployment::{sample_topology, Node, Point, Topology};
    use crate::scenario::ScenarioConfig;
    use crate::seed::stream;

    fn random_net(seed: u64, area: f64) -> (ScenarioConfig, Topology, LinkTable) {
        let mut cfg = ScenarioConfig::default();
        cfg.area_km2 = area;
        let topo = sample_topology(&cfg, &mut stream(seed));
        let links = LinkTable::realize(&topo, &cfg, seed);
        (cfg, topo, links)
    }

    fn single_cell() -> (ScenarioConfig, Topology, LinkTable) {
        let mut cfg = ScenarioConfig::default();
        cfg.operators = 1;
        let topo = Topology::new(
            cfg.side_m(),
            1,
            vec![Node {
                operator: 0,
                pos: Point::new(0.0, 0.0),
            }],
            vec![Node {
                operator: 0,
                pos: Point::new(30.0, 0.0),
            }],
        );
        let mut c = cfg.clone();
        c.channel.mean_clusters = 0.0;
        let link = crate::channel::link::realize_link_in_state(30.0, Point::default(), (0.0, 0.0), LinkState::Los, &c, &mut stream(1));
        (cfg, topo, LinkTable::from_links(1, vec![link]))
    }

    #[test]
    fn single_ue_single_bs() {
        let (cfg, topo, links) = single_cell();
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let mut asg = initial_association(&net, &mut stream(3));
        assert_eq!(asg.serving(0).unwrap().0, 0);
        let (bs, c) = greedy_joint_update(&net, &mut asg, 0).unwrap();
        assert_eq!(bs, 0);
        let other = Carrier::ALL[1 - c.index()];
        assert!(net.rate(&asg, 0, 0, c) >= net.rate(&asg, 0, 0, other));
        let conv = run_to_convergence(&net, &mut asg, &mut stream(4));
        assert!(conv.converged);
        assert_eq!(conv.steps, net.max_iterations());
        assert!(conv.trace[1..].windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn equal_carriers_tie_to_low() {
        let (mut cfg, topo, mut links) = single_cell();
        // make both carriers identical
        cfg.carriers[1] = crate::scenario::CarrierSpec {
            id: Carrier::High,
            ..cfg.carriers[0].clone()
        };
        let l = links.get_mut(0, 0);
        let pl = l.pathloss_db.unwrap();
        l.pathloss_db = Some([pl[0], pl[0]]);
        for cl in &mut l.clusters {
            cl.gains[1] = cl.gains[0];
        }
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let mut asg = initial_association(&net, &mut stream(1));
        assert_eq!(greedy_carrier_update(&net, &mut asg, 0), Ok(Carrier::Low));
        assert_eq!(greedy_joint_update(&net, &mut asg, 0), Ok((0, Carrier::Low)));
    }

    #[test]
    fn uncovered_ue_is_flagged() {
        let (cfg, topo, mut links) = single_cell();
        *links.get_mut(0, 0) = LinkRealization {
            state: LinkState::Outage,
            pathloss_db: None,
            clusters: Vec::new(),
            ..links.get(0, 0).clone()
        };
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let mut asg = initial_association(&net, &mut stream(1));
        assert!(!asg.is_covered(0));
        assert_eq!(asg.uncovered_count(), 1);
        assert_eq!(greedy_joint_update(&net, &mut asg, 0), Err(AssocError::Uncovered(0)));
        assert_eq!(greedy_carrier_update(&net, &mut asg, 0), Err(AssocError::Uncovered(0)));
        let conv = run_to_convergence(&net, &mut asg, &mut stream(2));
        assert!(conv.converged && conv.steps == 0);
    }

    #[test]
    fn initial_probability_extremes() {
        let (mut cfg, topo, links) = random_net(5, 0.1);
        let cache = ChannelCache::build(&topo, &links, &cfg);
        for (p, want) in [(1.0, Carrier::Low), (0.0, Carrier::High)] {
            cfg.initial_low_prob = p;
            let net = Network::new(&cache, &cfg).unwrap();
            let asg = initial_association(&net, &mut stream(9));
            for u in 0..topo.n_ue() {
                if let Some((bs, c)) = asg.serving(u) {
                    assert_eq!(c, want);
                    assert_eq!(Some(bs), net.initial_bs(u));
                    let best = cache
                        .candidates(u)
                        .map(|k| cache.pathloss_db(k, u, Carrier::Low).unwrap())
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(cache.pathloss_db(bs, u, Carrier::Low).unwrap(), best);
                }
            }
        }
    }

    #[test]
    fn loop_conserves_load_and_is_deterministic() {
        let (cfg, topo, links) = random_net(6, 0.1);
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let run = || {
            let mut asg = initial_association(&net, &mut stream(1));
            let conv = run_to_convergence(&net, &mut asg, &mut stream(2));
            (asg, conv)
        };
        let (a, ca) = run();
        let (b, cb) = run();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert!(a.is_consistent());
        assert_eq!(a.assigned_count() + a.uncovered_count(), topo.n_ue());
        for m in 0..topo.operators() {
            for &u in topo.ue_of(m) {
                if let Some((bs, _)) = a.serving(u) {
                    assert_eq!(topo.bs[bs].operator, m);
                }
            }
        }
        assert_eq!(ca.trace.len(), ca.steps + 1);
    }

    #[test]
    fn greedy_choice_dominates_frozen_alternatives() {
        let (cfg, topo, links) = random_net(7, 0.1);
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let mut asg = initial_association(&net, &mut stream(1));
        let mut rng = stream(3);
        for _ in 0..200 {
            let u = rng.random_range(0..topo.n_ue());
            asg.remove(u);
            let frozen = asg.clone();
            let Ok((bs, c)) = greedy_joint_update(&net, &mut asg, u) else { continue };
            let chosen = net.rate(&frozen, u, bs, c);
            for k in cache.candidates(u) {
                for cc in Carrier::ALL {
                    assert!(chosen >= net.rate(&frozen, u, k, cc));
                }
            }
        }
    }

    #[test]
    fn converged_state_is_mostly_stable() {
        let (cfg, topo, links) = random_net(8, 0.3);
        let cache = ChannelCache::build(&topo, &links, &cfg);
        let net = Network::new(&cache, &cfg).unwrap();
        let mut asg = initial_association(&net, &mut stream(1));
        let conv = run_to_convergence(&net, &mut asg, &mut stream(2));
        assert!(conv.converged);
        let mut rng = stream(5);
        let covered: Vec<usize> = (0..topo.n_ue()).filter(|&u| asg.is_covered(u)).collect();
        let probes = 500;
        let stable = (0..probes)
            .filter(|_| is_stable(&net, &mut asg, covered[rng.random_range(0..covered.len())]))
            .count();
        assert!(stable as f64 / probes as f64 > 0.9, "{stable}/{probes}");
    }

    #[test]
    fn trace_text() {
        let mut buf = Vec::new();
        write_trace(&[0.5, 0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 5.00000000e-1\n1 2.50000000e-1\n");
    }
}
