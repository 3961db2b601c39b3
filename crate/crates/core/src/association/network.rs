//! Precomputed beam factors and the SINR / rate evaluation built on them.
//!
//! For a victim UE `v`, a candidate serving BS `i` and a visible BS `k`, the
//! gain of `k`'s beam toward its own UE `j'` seen through `v`'s beam toward `i`
//! is `|sum_l g_l r_l conj(t_l)|^2`, summed over the clusters `l` of link
//! `(k, v)`. `r_l` depends on `(v, i, k, l)` and `t_l` on `(k, j', v, l)`; both
//! are array factors of the separable UPA and are tabulated once per
//! repetition. Access modes only decide which terms enter the sum, so one
//! cache serves every scheme.

use super::{shared_rate, AssocError, Assignment, SinrSample};
use crate::channel::{array_factor, LinkTable};
use crate::deployment::Topology;
use crate::scenario::{square_side, AccessMode, AssociationParams, Carrier, InitialBsRule, ScenarioConfig};
use num_complex::Complex64;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Default)]
struct UeCache {
    /// Visible (non-outage) BSs, ascending.
    vis: Vec<usize>,
    pl_db: [Vec<f64>; 2],
    pl_gain: [Vec<f64>; 2],
    /// Cluster offsets of each visible link, `vis.len() + 1` entries.
    cl_off: Vec<usize>,
    /// Offsets into `t`, `vis.len() + 1` entries.
    tx_off: Vec<usize>,
    /// Positions in `vis` of own-operator BSs.
    cand: Vec<usize>,
    serving_gain: [Vec<f64>; 2],
    /// `g_l * r_l`, indexed `cand * n_cl + cl_off[b] + l`.
    rg: [Vec<Complex64>; 2],
    /// `t_l`, indexed `tx_off[b] + slot * K_b + l`.
    t: [Vec<Complex64>; 2],
}

impl UeCache {
    fn n_cl(&self) -> usize {
        *self.cl_off.last().unwrap_or(&0)
    }
}

/// Per-repetition tables shared by every access scheme.
#[derive(Debug, Clone)]
pub struct ChannelCache {
    n_bs: usize,
    n_ue: usize,
    bs_op: Vec<usize>,
    ue_op: Vec<usize>,
    /// `(bs, ue)` element counts per carrier.
    elements: [(usize, usize); 2],
    vis_pos: Vec<usize>,
    cand_pos: Vec<usize>,
    slot: Vec<usize>,
    slot_ues: Vec<Vec<usize>>,
    ues: Vec<UeCache>,
}

impl ChannelCache {
    pub fn build(topo: &Topology, links: &LinkTable, cfg: &ScenarioConfig) -> ChannelCache {
        let (n_bs, n_ue) = (topo.n_bs(), topo.n_ue());
        assert_eq!((links.n_bs(), links.n_ue()), (n_bs, n_ue), "link table does not match topology");
        let bs_op: Vec<usize> = topo.bs.iter().map(|n| n.operator).collect();
        let ue_op: Vec<usize> = topo.ue.iter().map(|n| n.operator).collect();
        let elements = Carrier::ALL.map(|c| (cfg.carrier(c).bs_elements, cfg.carrier(c).ue_elements));
        let sides = elements.map(|(b, u)| {
            (
                square_side(b).expect("validated element count"),
                square_side(u).expect("validated element count"),
            )
        });

        // strongest-cluster direction cosines of every visible link
        let mut serve_dir = vec![None; n_bs * n_ue];
        for k in 0..n_bs {
            for j in 0..n_ue {
                let l = links.get(k, j);
                if let Some(s) = l.strongest_cluster() {
                    let cl = &l.clusters[s];
                    serve_dir[k * n_ue + j] = Some((cl.tx_direction(), cl.rx_direction()));
                }
            }
        }

        let mut slot = vec![NONE; n_bs * n_ue];
        let mut slot_ues = vec![Vec::new(); n_bs];
        for k in 0..n_bs {
            for j in 0..n_ue {
                if ue_op[j] == bs_op[k] && serve_dir[k * n_ue + j].is_some() {
                    slot[k * n_ue + j] = slot_ues[k].len();
                    slot_ues[k].push(j);
                }
            }
        }

        let mut vis_pos = vec![NONE; n_bs * n_ue];
        let mut cand_pos = vec![NONE; n_bs * n_ue];
        let mut ues = Vec::with_capacity(n_ue);
        for v in 0..n_ue {
            let mut u = UeCache::default();
            u.cl_off.push(0);
            u.tx_off.push(0);
            for k in 0..n_bs {
                let l = links.get(k, v);
                if l.is_outage() {
                    continue;
                }
                let b = u.vis.len();
                vis_pos[k * n_ue + v] = b;
                if bs_op[k] == ue_op[v] {
                    cand_pos[k * n_ue + v] = u.cand.len();
                    u.cand.push(b);
                }
                u.vis.push(k);
                for c in Carrier::ALL {
                    let pl = l.pathloss(c).expect("visible link");
                    u.pl_db[c.index()].push(pl);
                    u.pl_gain[c.index()].push(10f64.powf(-pl / 10.0));
                }
                let kc = l.clusters.len();
                u.cl_off.push(u.cl_off[b] + kc);
                u.tx_off.push(u.tx_off[b] + slot_ues[k].len() * kc);
            }
            let n_cl = u.n_cl();
            let n_t = *u.tx_off.last().expect("non-empty");
            for c in Carrier::ALL {
                let ci = c.index();
                let (bs_side, ue_side) = sides[ci];
                let mut t = Vec::with_capacity(n_t);
                for (b, &k) in u.vis.iter().enumerate() {
                    let l = links.get(k, v);
                    for &jp in &slot_ues[k] {
                        let (beam, _) = serve_dir[k * n_ue + jp].expect("slot implies visible");
                        for cl in &l.clusters {
                            t.push(array_factor(bs_side, beam, cl.tx_direction()));
                        }
                    }
                    debug_assert_eq!(t.len(), u.tx_off[b + 1]);
                }
                let mut rg = Vec::with_capacity(u.cand.len() * n_cl);
                for &a_b in &u.cand {
                    let i = u.vis[a_b];
                    let (_, beam) = serve_dir[i * n_ue + v].expect("candidate is visible");
                    for &k in &u.vis {
                        for cl in &links.get(k, v).clusters {
                            rg.push(cl.gain(c) * array_factor(ue_side, beam, cl.rx_direction()));
                        }
                    }
                }
                let mut sg = Vec::with_capacity(u.cand.len());
                for (a, &a_b) in u.cand.iter().enumerate() {
                    let i = u.vis[a_b];
                    let s = slot[i * n_ue + v];
                    let kc = u.cl_off[a_b + 1] - u.cl_off[a_b];
                    let r0 = a * n_cl + u.cl_off[a_b];
                    let t0 = u.tx_off[a_b] + s * kc;
                    let acc: Complex64 = (0..kc).map(|l| rg[r0 + l] * t[t0 + l].conj()).sum();
                    sg.push(acc.norm_sqr());
                }
                u.t[ci] = t;
                u.rg[ci] = rg;
                u.serving_gain[ci] = sg;
            }
            ues.push(u);
        }
        ChannelCache {
            n_bs,
            n_ue,
            bs_op,
            ue_op,
            elements,
            vis_pos,
            cand_pos,
            slot,
            slot_ues,
            ues,
        }
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn n_ue(&self) -> usize {
        self.n_ue
    }

    pub fn bs_operator(&self, bs: usize) -> usize {
        self.bs_op[bs]
    }

    pub fn ue_operator(&self, ue: usize) -> usize {
        self.ue_op[ue]
    }

    /// Own-operator BSs with a non-outage link to `ue`, ascending.
    pub fn candidates(&self, ue: usize) -> impl Iterator<Item = usize> + '_ {
        let u = &self.ues[ue];
        u.cand.iter().map(move |&b| u.vis[b])
    }

    pub fn n_candidates(&self, ue: usize) -> usize {
        self.ues[ue].cand.len()
    }

    /// BSs of any operator with a non-outage link to `ue`, ascending.
    pub fn visible(&self, ue: usize) -> &[usize] {
        &self.ues[ue].vis
    }

    pub fn is_covered(&self, ue: usize) -> bool {
        !self.ues[ue].cand.is_empty()
    }

    pub fn pathloss_db(&self, bs: usize, ue: usize, c: Carrier) -> Option<f64> {
        let b = self.vis_pos[bs * self.n_ue + ue];
        (b != NONE).then(|| self.ues[ue].pl_db[c.index()][b])
    }

    /// Gain of the serving link with beams on its strongest cluster.
    pub fn serving_gain(&self, bs: usize, ue: usize, c: Carrier) -> Option<f64> {
        let a = self.cand_pos[bs * self.n_ue + ue];
        (a != NONE).then(|| self.ues[ue].serving_gain[c.index()][a])
    }

    /// Own-operator UEs with a non-outage link to `bs`, in slot order.
    pub fn slot_ues(&self, bs: usize) -> &[usize] {
        &self.slot_ues[bs]
    }

    /// Approximate heap footprint of the factor tables, bytes.
    pub fn table_bytes(&self) -> usize {
        self.ues
            .iter()
            .map(|u| (u.rg[0].len() + u.rg[1].len() + u.t[0].len() + u.t[1].len()) * 16)
            .sum()
    }
}

/// A [`ChannelCache`] evaluated under one scheme's carrier modes and bandwidths.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    cache: &'a ChannelCache,
    modes: [AccessMode; 2],
    bandwidth: [f64; 2],
    tx_mw: [f64; 2],
    noise_mw: [f64; 2],
    params: AssociationParams,
    initial_low_prob: f64,
}

impl<'a> Network<'a> {
    pub fn new(cache: &'a ChannelCache, cfg: &ScenarioConfig) -> Result<Network<'a>, AssocError> {
        for c in Carrier::ALL {
            let spec = cfg.carrier(c);
            let (bs, ue) = cache.elements[c.index()];
            for (cached, given) in [(bs, spec.bs_elements), (ue, spec.ue_elements)] {
                if cached != given {
                    return Err(AssocError::AntennaMismatch {
                        carrier: c.name(),
                        cached,
                        given,
                    });
                }
            }
        }
        let per = |f: &dyn Fn(Carrier) -> f64| [f(Carrier::Low), f(Carrier::High)];
        Ok(Network {
            cache,
            modes: [cfg.carrier(Carrier::Low).mode, cfg.carrier(Carrier::High).mode],
            bandwidth: per(&|c| cfg.bandwidth(c)),
            tx_mw: per(&|c| 10f64.powf(cfg.carrier(c).bs_tx_power_dbm / 10.0)),
            noise_mw: per(&|c| 10f64.powf(cfg.noise_dbm(c) / 10.0)),
            params: cfg.association.clone(),
            initial_low_prob: cfg.initial_low_prob,
        })
    }

    pub fn cache(&self) -> &ChannelCache {
        self.cache
    }

    pub fn params(&self) -> &AssociationParams {
        &self.params
    }

    pub fn initial_low_prob(&self) -> f64 {
        self.initial_low_prob
    }

    pub fn mode(&self, c: Carrier) -> AccessMode {
        self.modes[c.index()]
    }

    /// Per-operator bandwidth `W^(c)`.
    pub fn bandwidth(&self, c: Carrier) -> f64 {
        self.bandwidth[c.index()]
    }

    pub fn noise_mw(&self, c: Carrier) -> f64 {
        self.noise_mw[c.index()]
    }

    pub fn tx_mw(&self, c: Carrier) -> f64 {
        self.tx_mw[c.index()]
    }

    /// Step budget of the association loop.
    pub fn max_iterations(&self) -> usize {
        self.params
            .max_iterations
            .unwrap_or(self.params.iterations_per_ue * self.cache.n_ue)
    }

    /// Initial BS of a covered UE: smallest path loss under the configured rule,
    /// lowest index on ties.
    pub fn initial_bs(&self, ue: usize) -> Option<usize> {
        let u = &self.cache.ues[ue];
        let mut best: Option<(f64, usize)> = None;
        for &b in &u.cand {
            let pl = match self.params.initial_bs {
                InitialBsRule::LowCarrier => u.pl_db[0][b],
                InitialBsRule::MinOverCarriers => u.pl_db[0][b].min(u.pl_db[1][b]),
            };
            if best.is_none_or(|(p, _)| pl < p) {
                best = Some((pl, u.vis[b]));
            }
        }
        best.map(|(_, k)| k)
    }

    fn candidate_index(&self, ue: usize, bs: usize) -> Result<usize, AssocError> {
        let c = self.cache;
        let a = c.cand_pos[bs * c.n_ue + ue];
        if a != NONE {
            Ok(a)
        } else if c.bs_op[bs] != c.ue_op[ue] {
            Err(AssocError::ForeignOperator { bs, ue })
        } else {
            Err(AssocError::OutageLink { bs, ue })
        }
    }

    /// `sum_{j' on (k,c)} |w_rx^H H_kv w_tx(j')|^2`, with `w_rx` the beam of
    /// `v` toward candidate `a`, visible BS at position `b`.
    #[inline]
    fn gain_sum(&self, asg: &Assignment, v: usize, a: usize, b: usize, c: Carrier) -> f64 {
        let cache = self.cache;
        let u = &cache.ues[v];
        let k = u.vis[b];
        let served = asg.served(k, c);
        if served.is_empty() {
            return 0.0;
        }
        let ci = c.index();
        let kc = u.cl_off[b + 1] - u.cl_off[b];
        let r0 = a * u.n_cl() + u.cl_off[b];
        let rg = &u.rg[ci][r0..r0 + kc];
        let t = &u.t[ci];
        let base = u.tx_off[b];
        let mut sum = 0.0;
        for &jp in served {
            let s = cache.slot[k * cache.n_ue + jp];
            debug_assert!(s != NONE, "served UE must be a slot of its BS");
            let t0 = base + s * kc;
            let acc: Complex64 = rg.iter().zip(&t[t0..t0 + kc]).map(|(x, y)| x * y.conj()).sum();
            sum += acc.norm_sqr();
        }
        sum
    }

    /// Mean interference gain `G_bar` of BS `k` on carrier `c` toward UE `ue`
    /// whose receive beam points at candidate BS `bs`. Zero when `k` is silent
    /// on `c` or its link to `ue` is in outage.
    pub fn mean_interference_gain(
        &self,
        asg: &Assignment,
        ue: usize,
        bs: usize,
        k: usize,
        c: Carrier,
    ) -> Result<f64, AssocError> {
        let a = self.candidate_index(ue, bs)?;
        let b = self.cache.vis_pos[k * self.cache.n_ue + ue];
        let n = asg.load(k, c);
        if b == NONE || n == 0 {
            return Ok(0.0);
        }
        Ok(self.gain_sum(asg, ue, a, b, c) / n as f64)
    }

    fn interference(&self, asg: &Assignment, v: usize, a: usize, c: Carrier) -> f64 {
        let cache = self.cache;
        let u = &cache.ues[v];
        let serving_b = u.cand[a];
        let exclusive = self.modes[c.index()] == AccessMode::Exclusive;
        let op = cache.ue_op[v];
        let pl = &u.pl_gain[c.index()];
        let mut total = 0.0;
        for (b, &k) in u.vis.iter().enumerate() {
            if b == serving_b || (exclusive && cache.bs_op[k] != op) {
                continue;
            }
            let n = asg.load(k, c);
            if n == 0 {
                continue;
            }
            total += pl[b] * self.gain_sum(asg, v, a, b, c) / n as f64;
        }
        total * self.tx_mw[c.index()]
    }

    /// SINR of `ue` served by `bs` on `c` under the current assignment.
    pub fn sinr(&self, asg: &Assignment, ue: usize, bs: usize, c: Carrier) -> Result<SinrSample, AssocError> {
        let a = self.candidate_index(ue, bs)?;
        let u = &self.cache.ues[ue];
        let ci = c.index();
        Ok(SinrSample {
            signal_mw: self.tx_mw[ci] * u.pl_gain[ci][u.cand[a]] * u.serving_gain[ci][a],
            interference_mw: self.interference(asg, ue, a, c),
            noise_mw: self.noise_mw[ci],
        })
    }

    /// Rate `ue` would get by joining `(bs, c)`; the UE itself is not counted in
    /// the current load. Zero for infeasible pairs.
    pub fn rate(&self, asg: &Assignment, ue: usize, bs: usize, c: Carrier) -> f64 {
        match self.sinr(asg, ue, bs, c) {
            Ok(s) => {
                let others = asg.served(bs, c).iter().filter(|&&x| x != ue).count();
                shared_rate(self.bandwidth(c), others, s.gamma())
            }
            Err(_) => 0.0,
        }
    }

    /// Rate and SINR of `ue` on its current pair; `None` when unassigned.
    pub fn served_rate(&self, asg: &Assignment, ue: usize) -> Option<(f64, SinrSample)> {
        let (bs, c) = asg.serving(ue)?;
        let s = self.sinr(asg, ue, bs, c).ok()?;
        Some((self.rate(asg, ue, bs, c), s))
    }
}
