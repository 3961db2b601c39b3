//! SINR, rates, greedy cell/carrier selection and the iterative association loop.

mod greedy;
mod network;

pub use greedy::{
    greedy_carrier_update, greedy_joint_update, initial_association, is_stable, run_to_convergence, write_trace,
    Convergence,
};
pub use network::{ChannelCache, Network};

use crate::scenario::Carrier;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AssocError {
    #[error("UE {0} has no non-outage link to its own operator")]
    Uncovered(usize),
    #[error("link from BS {bs} to UE {ue} is in outage")]
    OutageLink { bs: usize, ue: usize },
    #[error("BS {bs} cannot serve UE {ue}: different operator")]
    ForeignOperator { bs: usize, ue: usize },
    #[error("UE {0} has no anchor BS for carrier-only updates")]
    NoAnchor(usize),
    #[error("carrier {carrier}: cache built for {cached} elements, scenario has {given}")]
    AntennaMismatch {
        carrier: &'static str,
        cached: usize,
        given: usize,
    },
}

/// Signal, interference and noise powers of one link, milliwatts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub signal_mw: f64,
    pub interference_mw: f64,
    pub noise_mw: f64,
}

impl SinrSample {
    pub fn gamma(&self) -> f64 {
        self.signal_mw / (self.interference_mw + self.noise_mw)
    }

    pub fn db(&self) -> f64 {
        10.0 * self.gamma().log10()
    }
}

/// `W / (1 + others) * log2(1 + gamma)`, where `others` excludes the UE itself.
pub fn shared_rate(bandwidth_hz: f64, others: usize, gamma: f64) -> f64 {
    bandwidth_hz / (1 + others) as f64 * (1.0 + gamma).log2()
}

/// Cell-carrier assignment of every UE plus per-(BS, carrier) loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    serving: Vec<Option<(usize, Carrier)>>,
    covered: Vec<bool>,
    anchor: Vec<Option<usize>>,
    served: Vec<[Vec<usize>; 2]>,
    pos: Vec<usize>,
    n_low: usize,
}

impl Assignment {
    /// Everyone uncovered and unassigned.
    pub fn new(n_bs: usize, n_ue: usize) -> Assignment {
        Assignment {
            serving: vec![None; n_ue],
            covered: vec![false; n_ue],
            anchor: vec![None; n_ue],
            served: vec![[Vec::new(), Vec::new()]; n_bs],
            pos: vec![usize::MAX; n_ue],
            n_low: 0,
        }
    }

    pub fn n_ue(&self) -> usize {
        self.serving.len()
    }

    pub fn n_bs(&self) -> usize {
        self.served.len()
    }

    pub fn serving(&self, ue: usize) -> Option<(usize, Carrier)> {
        self.serving[ue]
    }

    pub fn is_covered(&self, ue: usize) -> bool {
        self.covered[ue]
    }

    pub fn set_covered(&mut self, ue: usize, covered: bool) {
        self.covered[ue] = covered;
    }

    /// BS fixed by the initial association.
    pub fn anchor(&self, ue: usize) -> Option<usize> {
        self.anchor[ue]
    }

    pub fn set_anchor(&mut self, ue: usize, bs: Option<usize>) {
        self.anchor[ue] = bs;
    }

    /// `N_i^(c)`.
    pub fn load(&self, bs: usize, c: Carrier) -> usize {
        self.served[bs][c.index()].len()
    }

    /// UEs currently on `(bs, c)`.
    pub fn served(&self, bs: usize, c: Carrier) -> &[usize] {
        &self.served[bs][c.index()]
    }

    /// UEs on `bs`, summed over carriers.
    pub fn bs_count(&self, bs: usize) -> usize {
        self.served[bs][0].len() + self.served[bs][1].len()
    }

    pub fn assign(&mut self, ue: usize, bs: usize, c: Carrier) {
        self.remove(ue);
        let list = &mut self.served[bs][c.index()];
        self.pos[ue] = list.len();
        list.push(ue);
        self.serving[ue] = Some((bs, c));
        if c == Carrier::Low {
            self.n_low += 1;
        }
    }

    /// Detach `ue` and return its previous pair.
    pub fn remove(&mut self, ue: usize) -> Option<(usize, Carrier)> {
        let (bs, c) = self.serving[ue].take()?;
        let list = &mut self.served[bs][c.index()];
        let p = self.pos[ue];
        list.swap_remove(p);
        if p < list.len() {
            self.pos[list[p]] = p;
        }
        self.pos[ue] = usize::MAX;
        if c == Carrier::Low {
            self.n_low -= 1;
        }
        Some((bs, c))
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|c| **c).count()
    }

    pub fn uncovered_count(&self) -> usize {
        self.n_ue() - self.covered_count()
    }

    pub fn assigned_count(&self) -> usize {
        self.serving.iter().filter(|s| s.is_some()).count()
    }

    /// Share of covered UEs on the low carrier.
    pub fn frac_low(&self, covered: usize) -> f64 {
        if covered == 0 {
            0.0
        } else {
            self.n_low as f64 / covered as f64
        }
    }

    /// Loads add up and every list entry points back to its UE.
    pub fn is_consistent(&self) -> bool {
        let total: usize = (0..self.n_bs()).map(|b| self.bs_count(b)).sum();
        if total != self.assigned_count() {
            return false;
        }
        for (b, lists) in self.served.iter().enumerate() {
            for (ci, list) in lists.iter().enumerate() {
                for (p, &u) in list.iter().enumerate() {
                    if self.pos[u] != p || self.serving[u] != Some((b, Carrier::from_index(ci))) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert!((shared_rate(250e6, 0, 3.0) - 500e6).abs() < 1e-6);
        assert!((shared_rate(1e9, 9, 1.0) - 100e6).abs() < 1e-6);
        assert_eq!(shared_rate(1e9, 4, 0.0), 0.0);
    }

    #[test]
    fn sinr_example() {
        // 30 dBm, 100 dB path loss, 1024 gain, 250 MHz at -167 dBm/Hz
        let s = SinrSample {
            signal_mw: 1e3 * 1e-10 * 1024.0,
            interference_mw: 0.0,
            noise_mw: 10f64.powf(-16.7) * 2.5e8,
        };
        assert!((s.gamma() - 20_528.629).abs() < 1e-2, "{}", s.gamma());
        assert!((s.db() - 43.1236).abs() < 1e-3);
        let equal = SinrSample {
            signal_mw: 2.0,
            interference_mw: 2.0,
            noise_mw: 0.0,
        };
        assert_eq!(equal.gamma(), 1.0);
    }

    #[test]
    fn assignment_bookkeeping() {
        let mut a = Assignment::new(2, 4);
        a.assign(0, 0, Carrier::Low);
        a.assign(1, 0, Carrier::Low);
        a.assign(2, 1, Carrier::High);
        a.assign(3, 0, Carrier::Low);
        assert_eq!(a.load(0, Carrier::Low), 3);
        assert_eq!(a.remove(1), Some((0, Carrier::Low)));
        assert_eq!(a.remove(1), None);
        assert!(a.is_consistent());
        a.assign(0, 1, Carrier::High);
        assert_eq!(a.served(1, Carrier::High), &[2, 0]);
        assert_eq!(a.load(0, Carrier::Low), 1);
        assert!(a.is_consistent());
        for u in 0..4 {
            a.set_covered(u, true);
        }
        assert_eq!(a.frac_low(4), 0.25);
    }
}
