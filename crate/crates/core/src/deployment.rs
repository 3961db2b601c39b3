//! Per-operator Poisson deployment of BSs and UEs over a square region, and
//! toroidal (3 x 3 wrap-around) distance computation.

use crate::scenario::ScenarioConfig;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

/// A BS or UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub operator: usize,
    pub pos: Point,
}

/// BS and UE positions of every operator. BSs and UEs carry global indices;
/// nodes of operator `m` are contiguous and ordered by operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub side_m: f64,
    pub bs: Vec<Node>,
    pub ue: Vec<Node>,
    bs_by_op: Vec<Vec<usize>>,
    ue_by_op: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(side_m: f64, operators: usize, bs: Vec<Node>, ue: Vec<Node>) -> Topology {
        let mut bs_by_op = vec![Vec::new(); operators];
        let mut ue_by_op = vec![Vec::new(); operators];
        for (i, n) in bs.iter().enumerate() {
            bs_by_op[n.operator].push(i);
        }
        for (j, n) in ue.iter().enumerate() {
            ue_by_op[n.operator].push(j);
        }
        Topology {
            side_m,
            bs,
            ue,
            bs_by_op,
            ue_by_op,
        }
    }

    pub fn operators(&self) -> usize {
        self.bs_by_op.len()
    }

    /// `I_m`, BS indices of operator `m`.
    pub fn bs_of(&self, m: usize) -> &[usize] {
        &self.bs_by_op[m]
    }

    /// `J_m`, UE indices of operator `m`.
    pub fn ue_of(&self, m: usize) -> &[usize] {
        &self.ue_by_op[m]
    }

    pub fn n_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn n_ue(&self) -> usize {
        self.ue.len()
    }

    /// Plain-text dump: one `operator,kind,x,y` row per node.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# side_m={:.17e}", self.side_m)?;
        writeln!(w, "operator,node,x,y")?;
        for (kind, nodes) in [("bs", &self.bs), ("ue", &self.ue)] {
            for n in nodes.iter() {
                writeln!(w, "{},{},{:.17e},{:.17e}", n.operator, kind, n.pos.x, n.pos.y)?;
            }
        }
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut buf = Vec::new();
        self.write_table(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }

    /// Inverse of [`Topology::write_table`].
    pub fn read_table<R: Read>(r: R) -> Result<Topology, TopologyError> {
        let mut side = None;
        let mut bs = Vec::new();
        let mut ue = Vec::new();
        let fmt_err = |line: usize, reason: &str| TopologyError::Format {
            line,
            reason: reason.to_string(),
        };
        for (idx, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line == "operator,node,x,y" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("side_m=") {
                    side = Some(v.parse::<f64>().map_err(|_| fmt_err(lineno, "bad side_m"))?);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(fmt_err(lineno, "expected 4 columns"));
            }
            let operator = fields[0].parse().map_err(|_| fmt_err(lineno, "bad operator"))?;
            let x = fields[2].parse().map_err(|_| fmt_err(lineno, "bad x"))?;
            let y = fields[3].parse().map_err(|_| fmt_err(lineno, "bad y"))?;
            let node = Node {
                operator,
                pos: Point::new(x, y),
            };
            match fields[1] {
                "bs" => bs.push(node),
                "ue" => ue.push(node),
                _ => return Err(fmt_err(lineno, "node must be bs or ue")),
            }
        }
        let side = side.ok_or_else(|| fmt_err(0, "missing side_m header"))?;
        let operators = bs.iter().chain(&ue).map(|n| n.operator + 1).max().unwrap_or(0);
        Ok(Topology::new(side, operators, bs, ue))
    }
}

/// Number of Poisson redraws before a BS count of one is forced.
const MAX_EMPTY_REDRAWS: usize = 64;

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Point {
    Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Sample independent BS and UE PPPs for every operator. Each operator gets at
/// least one BS: empty draws are redrawn, and forced to one when the mean is so
/// small that redraws keep failing.
pub fn sample_topology<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Topology {
    let side = cfg.side_m();
    let bs_mean = cfg.bs_density * cfg.area_km2;
    let ue_mean = cfg.ue_density * cfg.area_km2;
    let mut bs = Vec::new();
    let mut ue = Vec::new();
    for m in 0..cfg.operators {
        let mut n_bs = 0;
        for _ in 0..MAX_EMPTY_REDRAWS {
            n_bs = poisson_count(bs_mean, rng);
            if n_bs > 0 {
                break;
            }
        }
        let n_bs = n_bs.max(1);
        let n_ue = poisson_count(ue_mean, rng);
        bs.extend((0..n_bs).map(|_| Node {
            operator: m,
            pos: uniform_point(side, rng),
        }));
        ue.extend((0..n_ue).map(|_| Node {
            operator: m,
            pos: uniform_point(side, rng),
        }));
    }
    Topology::new(side, cfg.operators, bs, ue)
}

/// The nine replica translations `{-L, 0, L}^2`, identity first.
pub fn wrap_offsets(side: f64) -> [Point; 9] {
    let mut out = [Point::default(); 9];
    let steps = [0.0, -side, side];
    let mut k = 0;
    for dx in steps {
        for dy in steps {
            out[k] = Point::new(dx, dy);
            k += 1;
        }
    }
    out
}

/// Distance from `ue` to the nearest replica of `bs`, and the replica offset.
/// Ties keep the earlier offset in [`wrap_offsets`] order.
pub fn wrapped_distance(bs: Point, ue: Point, side: f64) -> (f64, Point) {
    let mut best = (f64::INFINITY, Point::default());
    for off in wrap_offsets(side) {
        let d = (bs + off).dist(ue);
        if d < best.0 {
            best = (d, off);
        }
    }
    best
}

/// Short human summary, mostly for logs.
pub fn describe(topo: &Topology) -> String {
    let mut s = String::new();
    for m in 0..topo.operators() {
        let _ = write!(s, "op{m}: {} BS / {} UE; ", topo.bs_of(m).len(), topo.ue_of(m).len());
    }
    s
}
