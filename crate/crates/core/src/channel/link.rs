//! Per-link channel realizations and beamformed gains.
//!
//! A link carries one state draw shared by both carriers, an independent
//! shadowing draw per carrier, and a set of single-ray clusters whose angles
//! are shared by both carriers while the complex gains are drawn per carrier.
//! The MIMO matrix is never stored; `H = sum_k g_k a_rx(k) a_tx(k)^H` is
//! evaluated through its cluster factorization.

use super::beam::{array_response, direction, steering_vector, BeamVector};
use super::state::{pathloss_db, sample_state, LinkState};
use super::ChannelError;
use crate::deployment::{wrapped_distance, Point, Topology};
use crate::scenario::{Carrier, CarrierSpec, ScenarioConfig};
use crate::seed::{derive_seed, stream};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Links shorter than this are evaluated at this distance.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// One propagation cluster (a single ray).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub power_fraction: f64,
    pub tx_theta: f64,
    pub tx_phi: f64,
    pub rx_theta: f64,
    pub rx_phi: f64,
    /// Small-scale complex gain per carrier, `E|g|^2 = power_fraction`.
    pub gains: [Complex64; 2],
}

impl Cluster {
    pub fn tx_direction(&self) -> (f64, f64) {
        direction(self.tx_theta, self.tx_phi)
    }

    pub fn rx_direction(&self) -> (f64, f64) {
        direction(self.rx_theta, self.rx_phi)
    }

    pub fn gain(&self, c: Carrier) -> Complex64 {
        self.gains[c.index()]
    }
}

/// Channel between one BS (nearest wrap-around replica) and one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub state: LinkState,
    pub distance_m: f64,
    /// Replica translation applied to the BS.
    pub offset: Point,
    /// Geometric azimuth of the UE seen from the BS, and of the BS seen from the UE.
    pub boresight: (f64, f64),
    /// Path loss per carrier in dB, shadowing included. Empty in outage.
    pub pathloss_db: Option<[f64; 2]>,
    pub clusters: Vec<Cluster>,
}

impl LinkRealization {
    pub fn is_outage(&self) -> bool {
        self.state == LinkState::Outage
    }

    pub fn pathloss(&self, c: Carrier) -> Result<f64, ChannelError> {
        self.pathloss_db.map(|pl| pl[c.index()]).ok_or(ChannelError::OutageLink)
    }

    /// Index of the cluster with the largest power fraction; lowest index on ties.
    pub fn strongest_cluster(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, cl) in self.clusters.iter().enumerate() {
            match best {
                Some(b) if self.clusters[b].power_fraction >= cl.power_fraction => {}
                _ => best = Some(k),
            }
        }
        best
    }

    /// Readable dump of the cluster set.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "state={} d={:.3}m offset=({:.1},{:.1}) pl={:?}",
            self.state.name(),
            self.distance_m,
            self.offset.x,
            self.offset.y,
            self.pathloss_db
        );
        let _ = writeln!(s, "k power tx_theta tx_phi rx_theta rx_phi |g_low|^2 |g_high|^2");
        for (k, c) in self.clusters.iter().enumerate() {
            let _ = writeln!(
                s,
                "{k} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6e} {:.6e}",
                c.power_fraction,
                c.tx_theta,
                c.tx_phi,
                c.rx_theta,
                c.rx_phi,
                c.gains[0].norm_sqr(),
                c.gains[1].norm_sqr()
            );
        }
        s
    }
}

fn cn<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * (variance / 2.0).sqrt()
}

/// Draw a cluster set for a non-outage link.
pub fn sample_clusters<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<Cluster> {
    let ch = &cfg.channel;
    let k = if ch.mean_clusters > 0.0 {
        let draw: f64 = Poisson::new(ch.mean_clusters).expect("positive mean").sample(rng);
        (draw as usize).max(1)
    } else {
        1
    };
    let jitter = Normal::new(0.0, ch.power_jitter_db).expect("finite jitter");
    let raw: Vec<f64> = (0..k)
        .map(|i| {
            let z: f64 = jitter.sample(rng);
            10f64.powf(-(i as f64 * ch.power_decay_db + z) / 10.0)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let el = ch.max_elevation_rad;
    raw.into_iter()
        .map(|p| {
            let power_fraction = p / total;
            let tx_theta = rng.random::<f64>() * 2.0 * PI;
            let tx_phi = (rng.random::<f64>() * 2.0 - 1.0) * el;
            let rx_theta = rng.random::<f64>() * 2.0 * PI;
            let rx_phi = (rng.random::<f64>() * 2.0 - 1.0) * el;
            let gains = [cn(power_fraction, rng), cn(power_fraction, rng)];
            Cluster {
                power_fraction,
                tx_theta,
                tx_phi,
                rx_theta,
                rx_phi,
                gains,
            }
        })
        .collect()
}

/// Realize the link between `bs` and `ue` on a torus of side `cfg.side_m()`.
pub fn realize_link<R: Rng + ?Sized>(bs: Point, ue: Point, cfg: &ScenarioConfig, rng: &mut R) -> LinkRealization {
    let (d, offset) = wrapped_distance(bs, ue, cfg.side_m());
    let d_eval = d.max(MIN_DISTANCE_M);
    let state = sample_state(d_eval, &cfg.channel, rng).expect("positive distance");
    let src = bs + offset;
    let az = (ue.y - src.y).atan2(ue.x - src.x).rem_euclid(2.0 * PI);
    let boresight = (az, (az + PI).rem_euclid(2.0 * PI));
    realize_link_in_state(d_eval, offset, boresight, state, cfg, rng)
}

/// Realize a link with a given state (used for forced-state tests and by [`realize_link`]).
pub fn realize_link_in_state<R: Rng + ?Sized>(
    d: f64,
    offset: Point,
    boresight: (f64, f64),
    state: LinkState,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> LinkRealization {
    if state == LinkState::Outage {
        return LinkRealization {
            state,
            distance_m: d,
            offset,
            boresight,
            pathloss_db: None,
            clusters: Vec::new(),
        };
    }
    let mut pl = [0.0; 2];
    for c in Carrier::ALL {
        let spec = cfg.carrier(c);
        let sigma = match state {
            LinkState::Los => spec.pathloss_los.sigma_db,
            _ => spec.pathloss_nlos.sigma_db,
        };
        let shadow: f64 = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        pl[c.index()] = pathloss_db(d, state, spec, shadow).expect("non-outage");
    }
    let clusters = sample_clusters(cfg, rng);
    LinkRealization {
        state,
        distance_m: d,
        offset,
        boresight,
        pathloss_db: Some(pl),
        clusters,
    }
}

/// `|w_rx^H H w_tx|^2` for arbitrary beams.
pub fn beamformed_gain(
    link: &LinkRealization,
    spec: &CarrierSpec,
    w_tx: &BeamVector,
    w_rx: &BeamVector,
) -> Result<f64, ChannelError> {
    if link.is_outage() {
        return Err(ChannelError::OutageLink);
    }
    if w_tx.len() != spec.bs_elements {
        return Err(ChannelError::DimensionMismatch {
            expected: spec.bs_elements,
            got: w_tx.len(),
        });
    }
    if w_rx.len() != spec.ue_elements {
        return Err(ChannelError::DimensionMismatch {
            expected: spec.ue_elements,
            got: w_rx.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for cl in &link.clusters {
        let a_rx = array_response(spec.ue_elements, cl.rx_theta, cl.rx_phi)?;
        let a_tx = array_response(spec.bs_elements, cl.tx_theta, cl.tx_phi)?;
        acc += cl.gain(spec.id) * w_rx.inner(&a_rx) * w_tx.inner(&a_tx).conj();
    }
    let gain = acc.norm_sqr();
    debug_assert!({
        let bound = (spec.bs_elements * spec.ue_elements * link.clusters.len()) as f64
            * link.clusters.iter().map(|c| c.gain(spec.id).norm_sqr()).sum::<f64>();
        gain <= bound * (1.0 + 1e-9) + 1e-300
    });
    Ok(gain)
}

/// TX and RX steering vectors aimed at the strongest cluster.
pub fn serving_beams(link: &LinkRealization, spec: &CarrierSpec) -> Result<(BeamVector, BeamVector), ChannelError> {
    let k = link.strongest_cluster().ok_or(ChannelError::OutageLink)?;
    let cl = &link.clusters[k];
    Ok((
        steering_vector(spec.bs_elements, cl.tx_theta, cl.tx_phi)?,
        steering_vector(spec.ue_elements, cl.rx_theta, cl.rx_phi)?,
    ))
}

/// Realizations of every BS-UE pair of a topology, `links[bs * n_ue + ue]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n_ue: usize,
    links: Vec<LinkRealization>,
}

impl LinkTable {
    /// Realize all links; link `(bs, ue)` draws from its own stream keyed by
    /// `(seed, operator, bs, ue)`, so the table does not depend on evaluation order.
    pub fn realize(topo: &Topology, cfg: &ScenarioConfig, seed: u64) -> LinkTable {
        let mut links = Vec::with_capacity(topo.n_bs() * topo.n_ue());
        for (k, bs) in topo.bs.iter().enumerate() {
            for (j, ue) in topo.ue.iter().enumerate() {
                let s = derive_seed(
                    seed,
                    &[("operator", bs.operator as u64), ("bs", k as u64), ("ue", j as u64)],
                );
                links.push(realize_link(bs.pos, ue.pos, cfg, &mut stream(s)));
            }
        }
        LinkTable { n_ue: topo.n_ue(), links }
    }

    pub fn from_links(n_ue: usize, links: Vec<LinkRealization>) -> LinkTable {
        assert!(n_ue == 0 || links.len() % n_ue == 0);
        LinkTable { n_ue, links }
    }

    #[inline]
    pub fn get(&self, bs: usize, ue: usize) -> &LinkRealization {
        &self.links[bs * self.n_ue + ue]
    }

    pub fn get_mut(&mut self, bs: usize, ue: usize) -> &mut LinkRealization {
        &mut self.links[bs * self.n_ue + ue]
    }

    pub fn n_ue(&self) -> usize {
        self.n_ue
    }

    pub fn n_bs(&self) -> usize {
        if self.n_ue == 0 {
            0
        } else {
            self.links.len() / self.n_ue
        }
    }
}
