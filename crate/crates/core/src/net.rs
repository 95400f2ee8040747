//! Greedy 1-nets of Euclidean balls, nearest-point queries and the product
//! net with its Mazur image `f`.
//!
//! A net is built greedily from a deterministic candidate stream: the points
//! of `h * Z^n` inside the closed ball of radius `R`, ordered by norm and
//! then lexicographically (so `0` comes first). A candidate is accepted when
//! it is at distance `>= 1` from every accepted point. All distance tests
//! during construction are exact integer computations on lattice
//! coordinates.
//!
//! Two streams exist:
//!
//! * [`CandidateLattice::Half`] (`h = 1/2`): the default. The resulting net
//!   is materialized and queried by brute force or a k-d tree.
//! * [`CandidateLattice::Integer`] (`h = 1`): every candidate is accepted,
//!   so the net is `Z^n ∩ B_R` and is kept implicit. It is selected
//!   automatically when the half-lattice stream would exceed the candidate
//!   budget.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mazur::mazur;
use crate::seed::{self, Rng};
use crate::space::{ProductPoint, ProductShape, RealVector};

/// Identifier of a net point. For materialized nets this is the acceptance
/// rank; for implicit integer-lattice nets it is a zig-zag mixed-radix code
/// of the lattice coordinates. In both cases the origin has id 0.
pub type PointId = u64;

/// Default limit on half-lattice candidates before falling back to the
/// integer stream.
pub const DEFAULT_MAX_CANDIDATES: u64 = 2_000_000;

/// Point count above which materialized nets get a k-d tree.
const INDEX_THRESHOLD: usize = 64;

/// Candidate stream of the greedy construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateLattice {
    #[serde(rename = "half-lattice-v1")]
    Half,
    #[serde(rename = "integer-lattice-v1")]
    Integer,
}

impl CandidateLattice {
    pub fn tag(self) -> &'static str {
        match self {
            CandidateLattice::Half => "half-lattice-v1",
            CandidateLattice::Integer => "integer-lattice-v1",
        }
    }

    /// Lattice coordinates are multiplied by this to get points.
    fn spacing(self) -> f64 {
        match self {
            CandidateLattice::Half => 0.5,
            CandidateLattice::Integer => 1.0,
        }
    }

    /// Squared radius in lattice units: `|z|^2 <= r2` iff `|h z| <= R`.
    fn radius2(self, radius: f64) -> i64 {
        let r = radius / self.spacing();
        (r * r + 1e-9).floor() as i64
    }

    /// Squared separation threshold in lattice units (distance 1).
    fn sep2(self) -> i64 {
        match self {
            CandidateLattice::Half => 4,
            CandidateLattice::Integer => 1,
        }
    }
}

/// Parameters of [`build_greedy_net`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub dim: usize,
    pub radius: f64,
    pub seed: u64,
    /// Force a stream; `None` picks `Half` unless it exceeds the budget.
    pub lattice: Option<CandidateLattice>,
    pub max_candidates: u64,
}

impl NetConfig {
    pub fn new(dim: usize, radius: f64, seed: u64) -> Self {
        NetConfig {
            dim,
            radius,
            seed,
            lattice: None,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }

    pub fn with_lattice(mut self, lattice: CandidateLattice) -> Self {
        self.lattice = Some(lattice);
        self
    }
}

#[derive(Debug)]
enum Storage {
    Explicit {
        /// Lattice coordinates of accepted points, flattened, acceptance order.
        keys: Vec<i32>,
        points: Vec<f64>,
        index: Option<KdTree>,
    },
    IntegerLattice {
        /// Half-width of the coordinate box, `floor(R)`.
        half_width: i64,
        count: u64,
    },
}

/// A built 1-separated, 1-covering subset of a closed Euclidean ball
/// containing the origin.
#[derive(Debug)]
pub struct NetHandle {
    dim: usize,
    radius: f64,
    seed: u64,
    lattice: CandidateLattice,
    separation: f64,
    storage: Storage,
}

/// Metadata written next to a persisted net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSidecar {
    pub dim: usize,
    pub radius: f64,
    /// Minimum pairwise distance; absent for a single-point net.
    pub separation: Option<f64>,
    pub seed: u64,
    pub candidate_stream: CandidateLattice,
    pub points: u64,
}

/// Number of integer vectors in `dim` dimensions with squared norm `<= r2`.
pub fn count_lattice_points(dim: usize, r2: i64) -> u64 {
    if r2 < 0 {
        return 0;
    }
    let m = r2 as usize;
    let mut counts = vec![0u64; m + 1];
    counts[0] = 1;
    for _ in 0..dim {
        let mut next = vec![0u64; m + 1];
        for (s, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut z = 0usize;
            while s + z * z <= m {
                let mult = if z == 0 { 1 } else { 2 };
                next[s + z * z] = next[s + z * z].saturating_add(c.saturating_mul(mult));
                z += 1;
            }
        }
        counts = next;
    }
    counts.iter().fold(0u64, |a, &c| a.saturating_add(c))
}

/// All integer vectors with `|z|^2 <= r2`, sorted by squared norm and then
/// lexicographically.
fn enumerate_candidates(dim: usize, r2: i64) -> Vec<Vec<i32>> {
    fn rec(dim: usize, budget: i64, prefix: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        let m = (budget as f64).sqrt().floor() as i32;
        for c in -m..=m {
            let used = (c as i64) * (c as i64);
            if used > budget {
                continue;
            }
            prefix.push(c);
            rec(dim, budget - used, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, r2, &mut Vec::with_capacity(dim), &mut out);
    out.sort_by(|a, b| norm2(a).cmp(&norm2(b)).then_with(|| a.cmp(b)));
    out
}

fn norm2(z: &[i32]) -> i64 {
    z.iter().map(|&c| (c as i64) * (c as i64)).sum()
}

/// Nonzero integer offsets with squared norm `< sep2`.
fn close_offsets(dim: usize, sep2: i64) -> Vec<Vec<i32>> {
    enumerate_candidates(dim, sep2 - 1)
        .into_iter()
        .filter(|z| z.iter().any(|&c| c != 0))
        .collect()
}

/// Build the greedy net of the closed ball of radius `radius` in `R^dim`.
pub fn build_greedy_net(cfg: &NetConfig) -> Result<NetHandle> {
    if cfg.dim == 0 {
        return Err(Error::invalid("net dimension must be >= 1"));
    }
    if !(cfg.radius.is_finite() && cfg.radius >= 0.0) {
        return Err(Error::invalid(format!(
            "net radius must be >= 0, got {}",
            cfg.radius
        )));
    }
    let lattice = match cfg.lattice {
        Some(l) => l,
        None => {
            let half = count_lattice_points(cfg.dim, CandidateLattice::Half.radius2(cfg.radius));
            if half <= cfg.max_candidates {
                CandidateLattice::Half
            } else {
                CandidateLattice::Integer
            }
        }
    };
    match lattice {
        CandidateLattice::Half => build_explicit(cfg, lattice),
        CandidateLattice::Integer => {
            let r2 = lattice.radius2(cfg.radius);
            let count = count_lattice_points(cfg.dim, r2);
            Ok(NetHandle {
                dim: cfg.dim,
                radius: cfg.radius,
                seed: cfg.seed,
                lattice,
                separation: if count > 1 { 1.0 } else { f64::INFINITY },
                storage: Storage::IntegerLattice {
                    half_width: (cfg.radius + 1e-9).floor() as i64,
                    count,
                },
            })
        }
    }
}

fn build_explicit(cfg: &NetConfig, lattice: CandidateLattice) -> Result<NetHandle> {
    let r2 = lattice.radius2(cfg.radius);
    let total = count_lattice_points(cfg.dim, r2);
    if total > cfg.max_candidates.max(1) && cfg.lattice == Some(lattice) {
        return Err(Error::Resource(format!(
            "{} candidates exceed the budget of {}",
            total, cfg.max_candidates
        )));
    }
    let candidates = enumerate_candidates(cfg.dim, r2);
    let offsets = close_offsets(cfg.dim, lattice.sep2());
    let mut accepted: HashSet<Vec<i32>> = HashSet::new();
    let mut keys: Vec<i32> = Vec::new();
    let mut probe = vec![0i32; cfg.dim];
    for c in &candidates {
        let blocked = offsets.iter().any(|d| {
            for ((slot, a), b) in probe.iter_mut().zip(c).zip(d) {
                *slot = a + b;
            }
            accepted.contains(&probe)
        });
        if !blocked {
            accepted.insert(c.clone());
            keys.extend_from_slice(c);
        }
    }
    let h = lattice.spacing();
    let points: Vec<f64> = keys.iter().map(|&k| k as f64 * h).collect();
    let n_points = keys.len() / cfg.dim;
    let separation = explicit_separation(&keys, cfg.dim, lattice, &accepted);
    let index = (n_points > INDEX_THRESHOLD).then(|| KdTree::new(&points, cfg.dim));
    Ok(NetHandle {
        dim: cfg.dim,
        radius: cfg.radius,
        seed: cfg.seed,
        lattice,
        separation,
        storage: Storage::Explicit {
            keys,
            points,
            index,
        },
    })
}

/// Exact minimum pairwise distance of a lattice point set. Small sets are
/// scanned pair by pair; larger ones enumerate every lattice offset up to
/// squared length `4 * sep2`, which is exhaustive for pairs closer than 2
/// lattice separations.
fn explicit_separation(
    keys: &[i32],
    dim: usize,
    lattice: CandidateLattice,
    accepted: &HashSet<Vec<i32>>,
) -> f64 {
    let n = keys.len() / dim;
    if n < 2 {
        return f64::INFINITY;
    }
    let h = lattice.spacing();
    let mut best = i64::MAX;
    if n <= 20_000 {
        for i in 0..n {
            let a = &keys[i * dim..(i + 1) * dim];
            for j in (i + 1)..n {
                let b = &keys[j * dim..(j + 1) * dim];
                let d: i64 = a.iter().zip(b).map(|(x, y)| ((x - y) as i64).pow(2)).sum();
                best = best.min(d);
            }
        }
    } else {
        let offsets = close_offsets(dim, 4 * lattice.sep2());
        let mut probe = vec![0i32; dim];
        for i in 0..n {
            let a = &keys[i * dim..(i + 1) * dim];
            for d in &offsets {
                let len = norm2(d);
                if len >= best {
                    break;
                }
                for ((slot, x), y) in probe.iter_mut().zip(a).zip(d) {
                    *slot = x + y;
                }
                if accepted.contains(&probe) {
                    best = len;
                }
            }
        }
        if best == i64::MAX {
            best = 4 * lattice.sep2();
        }
    }
    (best as f64).sqrt() * h
}

/// k-d tree over a materialized point set.
#[derive(Debug)]
struct KdTree {
    nodes: Vec<KdNode>,
    /// Point ids, grouped so that every leaf owns a contiguous run.
    order: Vec<u32>,
}

#[derive(Debug)]
enum KdNode {
    Leaf { start: u32, end: u32 },
    Split { axis: usize, value: f64, right: u32 },
}

const KD_LEAF: usize = 8;

impl KdTree {
    fn new(points: &[f64], dim: usize) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..(points.len() / dim) as u32).collect(),
        };
        let n = tree.order.len();
        tree.build(points, dim, 0, n);
        tree
    }

    /// Median split on the axis of widest spread; the left child directly
    /// follows its parent, the right child's index is stored.
    fn build(&mut self, points: &[f64], dim: usize, start: usize, end: usize) -> usize {
        let at = self.nodes.len();
        if end - start <= KD_LEAF {
            self.nodes.push(KdNode::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return at;
        }
        let coord = |id: u32, axis: usize| points[id as usize * dim + axis];
        let axis = (0..dim)
            .max_by(|&a, &b| {
                let spread = |x: usize| {
                    let (lo, hi) = self.order[start..end]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &id| {
                            (lo.min(coord(id, x)), hi.max(coord(id, x)))
                        });
                    hi - lo
                };
                spread(a).total_cmp(&spread(b)).then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            coord(x, axis).total_cmp(&coord(y, axis)).then(x.cmp(&y))
        });
        let value = coord(self.order[mid], axis);
        self.nodes.push(KdNode::Split {
            axis,
            value,
            right: 0,
        });
        self.build(points, dim, start, mid);
        let right = self.build(points, dim, mid, end) as u32;
        if let KdNode::Split { right: r, .. } = &mut self.nodes[at] {
            *r = right;
        }
        at
    }

    /// Exact nearest point; ties go to the lowest id.
    fn nearest(&self, points: &[f64], dim: usize, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.visit(0, points, dim, q, &mut best);
        best
    }

    fn visit(&self, node: usize, points: &[f64], dim: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &j in &self.order[start as usize..end as usize] {
                    let j = j as usize;
                    let d2 = dist2(&points[j * dim..(j + 1) * dim], q);
                    if d2 < best.1 || (d2 == best.1 && j < best.0) {
                        *best = (j, d2);
                    }
                }
            }
            KdNode::Split { axis, value, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.visit(near, points, dim, q, best);
                if diff * diff <= best.1 {
                    self.visit(far, points, dim, q, best);
                }
            }
        }
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Zig-zag digit of an integer coordinate: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ...
fn zigzag(c: i64) -> u64 {
    if c > 0 {
        (2 * c - 1) as u64
    } else {
        (-2 * c) as u64
    }
}

fn unzigzag(d: u64) -> i64 {
    if d % 2 == 1 {
        d.div_ceil(2) as i64
    } else {
        -((d / 2) as i64)
    }
}

impl NetHandle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn candidate_stream(&self) -> CandidateLattice {
        self.lattice
    }

    /// Exact minimum pairwise distance (`inf` for a single point).
    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn len(&self) -> u64 {
        match &self.storage {
            Storage::Explicit { keys, .. } => (keys.len() / self.dim) as u64,
            Storage::IntegerLattice { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Documented slack of the empirical covering check: the covering radius
    /// of the ball is at most `1 + covering_slack()`.
    pub fn covering_slack(&self) -> f64 {
        (self.dim as f64).sqrt() / 4.0
    }

    fn radix(half_width: i64) -> u64 {
        (2 * half_width + 1) as u64
    }

    fn decode_lattice(&self, id: PointId, half_width: i64) -> Option<Vec<i64>> {
        let base = Self::radix(half_width);
        let mut rest = id;
        let mut z = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            z.push(unzigzag(rest % base));
            rest /= base;
        }
        if rest != 0 {
            return None;
        }
        let n2: i64 = z.iter().map(|c| c * c).sum();
        (n2 <= self.lattice.radius2(self.radius)).then_some(z)
    }

    fn encode_lattice(z: &[i64], half_width: i64) -> PointId {
        let base = Self::radix(half_width);
        z.iter().rev().fold(0u64, |acc, &c| acc * base + zigzag(c))
    }

    pub fn contains_id(&self, id: PointId) -> bool {
        match &self.storage {
            Storage::Explicit { .. } => id < self.len(),
            Storage::IntegerLattice { half_width, .. } => {
                self.decode_lattice(id, *half_width).is_some()
            }
        }
    }

    pub fn point(&self, id: PointId) -> Result<RealVector> {
        match &self.storage {
            Storage::Explicit { points, .. } => {
                if id >= self.len() {
                    return Err(Error::invalid(format!(
                        "net point index {id} out of range (net has {} points)",
                        self.len()
                    )));
                }
                let i = id as usize;
                Ok(RealVector::from_finite(
                    points[i * self.dim..(i + 1) * self.dim].to_vec(),
                ))
            }
            Storage::IntegerLattice { half_width, .. } => {
                let z = self.decode_lattice(id, *half_width).ok_or_else(|| {
                    Error::invalid(format!("net point id {id} is not in the net"))
                })?;
                Ok(RealVector::from_finite(
                    z.into_iter().map(|c| c as f64).collect(),
                ))
            }
        }
    }

    /// Points in id order. Materialized nets iterate in acceptance order.
    pub fn iter_points(&self) -> Box<dyn Iterator<Item = (PointId, RealVector)> + '_> {
        match &self.storage {
            Storage::Explicit { points, .. } => Box::new(
                points
                    .chunks(self.dim)
                    .enumerate()
                    .map(|(i, p)| (i as PointId, RealVector::from_finite(p.to_vec()))),
            ),
            Storage::IntegerLattice { half_width, .. } => {
                let r2 = self.lattice.radius2(self.radius);
                let hw = *half_width;
                Box::new(
                    enumerate_candidates(self.dim, r2)
                        .into_iter()
                        .map(move |z| {
                            let z: Vec<i64> = z.into_iter().map(i64::from).collect();
                            let id = Self::encode_lattice(&z, hw);
                            (
                                id,
                                RealVector::from_finite(z.into_iter().map(|c| c as f64).collect()),
                            )
                        }),
                )
            }
        }
    }

    /// Draw a net point uniformly at random.
    pub fn sample_id(&self, rng: &mut Rng) -> PointId {
        match &self.storage {
            Storage::Explicit { .. } => rng.random_range(0..self.len()),
            Storage::IntegerLattice { half_width, .. } => {
                let r2 = self.lattice.radius2(self.radius);
                let hw = *half_width;
                loop {
                    let z: Vec<i64> = (0..self.dim).map(|_| rng.random_range(-hw..=hw)).collect();
                    if z.iter().map(|c| c * c).sum::<i64>() <= r2 {
                        return Self::encode_lattice(&z, hw);
                    }
                }
            }
        }
    }

    /// A net point minimizing the Euclidean distance to `query`, ties broken
    /// by the lowest id.
    pub fn nearest(&self, query: &RealVector) -> Result<(PointId, RealVector, f64)> {
        if query.dim() != self.dim {
            return Err(Error::invalid(format!(
                "query of dimension {} against a net of dimension {}",
                query.dim(),
                self.dim
            )));
        }
        let (id, d2) = self.nearest_raw(query.as_slice());
        Ok((id, self.point(id)?, d2.sqrt()))
    }

    /// Nearest id and squared distance for a raw coordinate slice.
    pub(crate) fn nearest_raw(&self, q: &[f64]) -> (PointId, f64) {
        match &self.storage {
            Storage::Explicit { points, index, .. } => {
                if let Some(index) = index {
                    let (i, d2) = index.nearest(points, self.dim, q);
                    return (i as PointId, d2);
                }
                let mut best = (0usize, f64::INFINITY);
                for (i, p) in points.chunks(self.dim).enumerate() {
                    let d2 = dist2(p, q);
                    if d2 < best.1 {
                        best = (i, d2);
                    }
                }
                (best.0 as PointId, best.1)
            }
            Storage::IntegerLattice { half_width, .. } => self.nearest_lattice(q, *half_width),
        }
    }

    /// Exact nearest point of `Z^n ∩ B_R`: a feasible start point bounds the
    /// search radius, then a branch-and-bound enumeration collects every
    /// feasible lattice point within that radius.
    fn nearest_lattice(&self, q: &[f64], half_width: i64) -> (PointId, f64) {
        let r2 = self.lattice.radius2(self.radius);
        let rounded: Vec<i64> = q.iter().map(|c| c.round() as i64).collect();
        let feasible = rounded.iter().map(|c| c * c).sum::<i64>() <= r2;
        if feasible
            && q.iter()
                .zip(&rounded)
                .all(|(x, z)| (x - *z as f64).abs() < 0.5)
        {
            let d2 = q
                .iter()
                .zip(&rounded)
                .map(|(x, z)| (x - *z as f64).powi(2))
                .sum();
            return (Self::encode_lattice(&rounded, half_width), d2);
        }
        let start = if feasible {
            rounded
        } else {
            let mut z = rounded;
            while z.iter().map(|c| c * c).sum::<i64>() > r2 {
                // shrink the coordinate that was pushed furthest outward
                let i = (0..z.len())
                    .max_by(|&a, &b| {
                        let ea = z[a].abs() as f64 - q[a].abs().min(z[a].abs() as f64);
                        let eb = z[b].abs() as f64 - q[b].abs().min(z[b].abs() as f64);
                        ea.partial_cmp(&eb)
                            .unwrap()
                            .then(z[a].abs().cmp(&z[b].abs()))
                    })
                    .unwrap();
                z[i] -= z[i].signum();
            }
            z
        };
        let bound = q
            .iter()
            .zip(&start)
            .map(|(x, z)| (x - *z as f64).powi(2))
            .sum::<f64>();
        let mut best = (Self::encode_lattice(&start, half_width), bound);
        let mut cur = Vec::with_capacity(self.dim);
        self.branch(q, r2, half_width, 0.0, 0, &mut cur, &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn branch(
        &self,
        q: &[f64],
        r2: i64,
        half_width: i64,
        partial: f64,
        norm: i64,
        cur: &mut Vec<i64>,
        best: &mut (PointId, f64),
    ) {
        let i = cur.len();
        if i == q.len() {
            let id = Self::encode_lattice(cur, half_width);
            if partial < best.1 || (partial == best.1 && id < best.0) {
                *best = (id, partial);
            }
            return;
        }
        let slack = (best.1 - partial).max(0.0).sqrt() * (1.0 + 1e-12) + 1e-12;
        let lo = ((q[i] - slack).ceil() as i64).max(-half_width);
        let hi = ((q[i] + slack).floor() as i64).min(half_width);
        for c in lo..=hi {
            let n2 = norm + c * c;
            if n2 > r2 {
                continue;
            }
            let d = partial + (q[i] - c as f64).powi(2);
            if d > best.1 {
                continue;
            }
            cur.push(c);
            self.branch(q, r2, half_width, d, n2, cur, best);
            cur.pop();
        }
    }

    /// Re-check maximality against the candidate stream: every candidate is
    /// a net point or lies at distance `< 1` from one. Materialized nets only.
    pub fn verify_maximality(&self) -> Result<bool> {
        match &self.storage {
            Storage::IntegerLattice { .. } => Ok(true),
            Storage::Explicit { keys, .. } => {
                let accepted: HashSet<&[i32]> = keys.chunks(self.dim).collect();
                let offsets = close_offsets(self.dim, self.lattice.sep2());
                let r2 = self.lattice.radius2(self.radius);
                let mut probe = vec![0i32; self.dim];
                for c in enumerate_candidates(self.dim, r2) {
                    if accepted.contains(c.as_slice()) {
                        continue;
                    }
                    let covered = offsets.iter().any(|d| {
                        for ((slot, a), b) in probe.iter_mut().zip(&c).zip(d) {
                            *slot = a + b;
                        }
                        accepted.contains(probe.as_slice())
                    });
                    if !covered {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    pub fn sidecar(&self) -> NetSidecar {
        NetSidecar {
            dim: self.dim,
            radius: self.radius,
            separation: self.separation.is_finite().then_some(self.separation),
            seed: self.seed,
            candidate_stream: self.lattice,
            points: self.len(),
        }
    }

    /// Write `<stem>.csv` (one point per row) and `<stem>.json` (sidecar).
    pub fn save(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(csv_path)?);
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut out);
        for (_, p) in self.iter_points() {
            wtr.write_record(p.as_slice().iter().map(|c| format_coord(*c)))?;
        }
        wtr.flush()?;
        drop(wtr);
        out.flush()?;
        let json = crate::report::to_sorted_json(&self.sidecar())?;
        std::fs::write(sidecar_path, json + "\n")?;
        Ok(())
    }

    /// Reload a persisted net. Materialized nets are read from the CSV and
    /// re-certified; integer-lattice nets are rebuilt from the sidecar.
    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<NetHandle> {
        let sidecar: NetSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
        let cfg = NetConfig {
            dim: sidecar.dim,
            radius: sidecar.radius,
            seed: sidecar.seed,
            lattice: Some(sidecar.candidate_stream),
            max_candidates: u64::MAX,
        };
        if sidecar.candidate_stream == CandidateLattice::Integer {
            return build_greedy_net(&cfg);
        }
        let h = sidecar.candidate_stream.spacing();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(csv_path)?;
        let mut keys = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != sidecar.dim {
                return Err(Error::invalid(format!(
                    "net row has {} coordinates, expected {}",
                    rec.len(),
                    sidecar.dim
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|e| Error::invalid(format!("bad coordinate `{field}`: {e}")))?;
                let k = v / h;
                if k.fract() != 0.0 {
                    return Err(Error::invalid(format!(
                        "coordinate {v} is off the candidate lattice"
                    )));
                }
                keys.push(k as i32);
            }
        }
        let accepted: HashSet<Vec<i32>> = keys.chunks(sidecar.dim).map(|c| c.to_vec()).collect();
        let separation =
            explicit_separation(&keys, sidecar.dim, sidecar.candidate_stream, &accepted);
        if separation < 1.0 {
            return Err(Error::invalid(format!(
                "persisted net has separation {separation} < 1"
            )));
        }
        let points: Vec<f64> = keys.iter().map(|&k| k as f64 * h).collect();
        let n_points = keys.len() / sidecar.dim;
        let index = (n_points > INDEX_THRESHOLD).then(|| KdTree::new(&points, sidecar.dim));
        Ok(NetHandle {
            dim: sidecar.dim,
            radius: sidecar.radius,
            seed: sidecar.seed,
            lattice: sidecar.candidate_stream,
            separation,
            storage: Storage::Explicit {
                keys,
                points,
                index,
            },
        })
    }
}

fn format_coord(c: f64) -> String {
    // shortest round-trip representation
    let s = format!("{c}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// Uniform sample from the closed ball of radius `radius` in `R^dim`.
pub fn sample_in_ball(rng: &mut Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir = sample_direction(rng, dim);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|c| c * r).collect()
}

/// Uniform unit vector via a normalized Gaussian.
pub fn sample_direction(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Largest nearest-net distance over `num_queries` uniform points of the
/// net's ball.
pub fn verify_net_covering(net: &NetHandle, num_queries: usize, seed: u64) -> f64 {
    let mut rng = seed::stream(seed, "net-covering", &[net.dim as u64]);
    (0..num_queries)
        .map(|_| {
            let q = sample_in_ball(&mut rng, net.dim, net.radius);
            net.nearest_raw(&q).1.sqrt()
        })
        .fold(0.0, f64::max)
}

/// One net point per component of the product.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductNetPoint {
    pub indices: Vec<PointId>,
}

/// The product net `∏_{p = p0..=P} M` of one component net `M`; virtual,
/// points are index tuples.
#[derive(Debug, Clone)]
pub struct ProductNet {
    shape: ProductShape,
    net: Arc<NetHandle>,
}

impl ProductNet {
    pub fn new(net: Arc<NetHandle>, p0: u32, p_max: u32) -> Result<Self> {
        let shape = ProductShape::new(p0, p_max, net.dim())?;
        Ok(ProductNet { shape, net })
    }

    pub fn shape(&self) -> ProductShape {
        self.shape
    }

    pub fn component_net(&self) -> &Arc<NetHandle> {
        &self.net
    }

    fn validate(&self, pt: &ProductNetPoint) -> Result<()> {
        if pt.indices.len() != self.shape.num_components() {
            return Err(Error::invalid(format!(
                "product net point has {} indices, expected {}",
                pt.indices.len(),
                self.shape.num_components()
            )));
        }
        if let Some(bad) = pt.indices.iter().find(|&&i| !self.net.contains_id(i)) {
            return Err(Error::invalid(format!(
                "net index {bad} is not in the component net"
            )));
        }
        Ok(())
    }

    /// The point of `X` selected by `pt`.
    pub fn point(&self, pt: &ProductNetPoint) -> Result<ProductPoint> {
        self.validate(pt)?;
        let comps = pt
            .indices
            .iter()
            .map(|&i| self.net.point(i))
            .collect::<Result<Vec<_>>>()?;
        ProductPoint::new(self.shape, comps)
    }

    /// `f((x_p)_p) = (M_p(x_p))_p`, a point of `Y`.
    pub fn f(&self, pt: &ProductNetPoint) -> Result<ProductPoint> {
        let x = self.point(pt)?;
        let comps = x
            .iter()
            .map(|(p, v)| mazur(v, p))
            .collect::<Result<Vec<_>>>()?;
        ProductPoint::new(self.shape, comps)
    }

    pub fn sample(&self, rng: &mut Rng) -> ProductNetPoint {
        ProductNetPoint {
            indices: (0..self.shape.num_components())
                .map(|_| self.net.sample_id(rng))
                .collect(),
        }
    }

    /// A point sharing all but one component with `base`, the changed
    /// component replaced by the net point nearest to a small random
    /// perturbation. Produces close pairs for Lipschitz sampling.
    pub fn sample_neighbor(
        &self,
        base: &ProductNetPoint,
        rng: &mut Rng,
    ) -> Result<ProductNetPoint> {
        let mut out = base.clone();
        let slot = rng.random_range(0..out.indices.len());
        let centre = self.net.point(out.indices[slot])?;
        let step = 1.0 + rng.random::<f64>();
        let dir = sample_direction(rng, self.net.dim());
        let q: Vec<f64> = centre
            .as_slice()
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + step * d)
            .collect();
        out.indices[slot] = self.net.nearest_raw(&q).0;
        Ok(out)
    }
}
