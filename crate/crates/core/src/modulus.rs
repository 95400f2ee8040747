//! Empirical moduli of continuity, the net sup-distance `gamma` and Hölder
//! constants.
//!
//! Every number produced here is a maximum over finitely many sampled pairs,
//! hence a lower bound on the quantity it estimates. Consumers that place an
//! estimate on the right-hand side of an inequality multiply it by a slack
//! factor.

use std::io::Write;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::maps::{apply_checked, apply_product_checked, ProductMap, VectorMap};
use crate::mazur::mazur_in_place;
use crate::net::{sample_direction, sample_in_ball, NetHandle, ProductNet, ProductNetPoint};
use crate::seed::{self, Rng};
use crate::space::{lq_dist_slice, sup_product_distance, ProductPoint, ProductShape, Side};

/// Default radius of the ball base points are drawn from.
pub const DEFAULT_BASE_RADIUS: f64 = 3.0;

/// Geometric grid of `count` scales from `lo` to `hi` inclusive.
pub fn geometric_scales(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|i| lo * (ratio * i as f64).exp()).collect();
    out[count - 1] = hi;
    out
}

/// The default grid: 24 geometric scales from `1e-3` to `2`.
pub fn default_scales() -> Vec<f64> {
    geometric_scales(1e-3, 2.0, 24)
}

/// Merge extra scales into a grid, keeping it strictly increasing.
pub fn with_scales(mut grid: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    grid.extend_from_slice(extra);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

/// A pair realizing an estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub input_distance: f64,
    pub output_distance: f64,
}

/// Empirical modulus `s -> omega_hat(s)` after the monotone envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTable {
    pub scales: Vec<f64>,
    /// Running maximum of `raw`.
    pub estimates: Vec<f64>,
    /// Per-scale maxima before the envelope.
    pub raw: Vec<f64>,
    /// Witness of `estimates[i]` (possibly from a smaller scale).
    pub witnesses: Vec<Option<Witness>>,
    pub samples_per_scale: usize,
    pub seed: u64,
}

impl ModulusTable {
    /// Build a table from per-scale maxima, applying the envelope.
    pub fn from_raw(
        scales: Vec<f64>,
        raw: Vec<f64>,
        raw_witnesses: Vec<Option<Witness>>,
        samples_per_scale: usize,
        seed: u64,
    ) -> Result<Self> {
        validate_scales(&scales)?;
        if raw.len() != scales.len() || raw_witnesses.len() != scales.len() {
            return Err(Error::invalid("modulus table columns differ in length"));
        }
        let mut estimates = Vec::with_capacity(raw.len());
        let mut witnesses = Vec::with_capacity(raw.len());
        let mut best = 0.0f64;
        let mut best_w: Option<Witness> = None;
        for (v, w) in raw.iter().zip(raw_witnesses) {
            if *v > best || best_w.is_none() && w.is_some() && *v >= best {
                best = *v;
                best_w = w;
            }
            estimates.push(best);
            witnesses.push(best_w.clone());
        }
        Ok(ModulusTable {
            scales,
            estimates,
            raw,
            witnesses,
            samples_per_scale,
            seed,
        })
    }

    /// Tabulate a known modulus function (no sampling).
    pub fn from_fn(scales: Vec<f64>, omega: impl Fn(f64) -> f64) -> Result<Self> {
        let raw: Vec<f64> = scales.iter().map(|&s| omega(s)).collect();
        let n = scales.len();
        Self::from_raw(scales, raw, vec![None; n], 0, 0)
    }

    /// `omega_hat(s)` by right-continuous step interpolation: the envelope
    /// value at the largest grid scale `<= s`.
    pub fn at(&self, s: f64) -> Result<f64> {
        let first = self.scales[0];
        let last = *self.scales.last().unwrap();
        let tol = 1e-12;
        if s.is_nan() || s < first * (1.0 - tol) || s > last * (1.0 + tol) {
            return Err(Error::invalid(format!(
                "scale {s} outside the modulus table range [{first}, {last}]"
            )));
        }
        let i = self
            .scales
            .iter()
            .rposition(|&g| g <= s * (1.0 + tol))
            .unwrap_or(0);
        Ok(self.estimates[i])
    }

    /// CSV with columns `scale, omega_hat, samples, witness` (witness as a
    /// JSON string).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["scale", "omega_hat", "samples", "witness"])?;
        for i in 0..self.scales.len() {
            let witness = match &self.witnesses[i] {
                Some(w) => crate::report::to_sorted_json(w)?,
                None => String::new(),
            };
            wtr.write_record([
                format!("{}", self.scales[i]),
                format!("{}", self.estimates[i]),
                format!("{}", self.samples_per_scale),
                witness,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn validate_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::invalid("empty scale grid"));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("scales must be positive and finite"));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("scales must be strictly increasing"));
    }
    Ok(())
}

/// What to estimate the modulus of.
pub enum ModulusDomain<'a> {
    /// A map `R^n -> R^n`, output measured in `l_q`.
    Vector {
        map: &'a dyn VectorMap,
        dim: usize,
        output_exponent: f64,
    },
    /// A map `X -> Y` between truncated products.
    Product {
        map: &'a dyn ProductMap,
        shape: ProductShape,
    },
}

/// Sampling parameters of [`estimate_modulus`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusConfig {
    pub scales: Vec<f64>,
    pub samples_per_scale: usize,
    pub seed: u64,
    pub base_radius: f64,
}

impl ModulusConfig {
    pub fn new(scales: Vec<f64>, samples_per_scale: usize, seed: u64) -> Self {
        ModulusConfig {
            scales,
            samples_per_scale,
            seed,
            base_radius: DEFAULT_BASE_RADIUS,
        }
    }
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self::new(default_scales(), 2_000, 0)
    }
}

/// Distance between the images of a pair, plus the pair itself.
fn evaluate_pair(domain: &ModulusDomain<'_>, x: &[f64], y: &[f64]) -> Result<f64> {
    match domain {
        ModulusDomain::Vector {
            map,
            output_exponent,
            ..
        } => {
            let fx = apply_checked(*map, x)?;
            let fy = apply_checked(*map, y)?;
            Ok(lq_dist_slice(&fx, &fy, *output_exponent))
        }
        ModulusDomain::Product { map, shape } => {
            let px = ProductPoint::from_flat(*shape, x)?;
            let py = ProductPoint::from_flat(*shape, y)?;
            let fx = apply_product_checked(*map, &px)?;
            let fy = apply_product_checked(*map, &py)?;
            sup_product_distance(&fx, &fy, Side::Y)
        }
    }
}

/// `(dim of one block, number of blocks)`; a vector domain is one block.
fn blocks(domain: &ModulusDomain<'_>) -> (usize, usize) {
    match domain {
        ModulusDomain::Vector { dim, .. } => (*dim, 1),
        ModulusDomain::Product { shape, .. } => (shape.component_dim, shape.num_components()),
    }
}

/// The documented witness pairs at scale `s`: `(0, s e_1)` and
/// `(-s/2 e_1, s/2 e_1)`, placed in every block.
fn witness_pairs(domain: &ModulusDomain<'_>, s: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (dim, count) = blocks(domain);
    if dim == 0 {
        return Vec::new();
    }
    let block = |v: f64| {
        let mut b = vec![0.0; dim];
        b[0] = v;
        b.repeat(count)
    };
    vec![(block(0.0), block(s)), (block(-s / 2.0), block(s / 2.0))]
}

/// Random pair at input distance exactly `s` (every block displaced by `s`).
fn random_pair(
    domain: &ModulusDomain<'_>,
    s: f64,
    radius: f64,
    rng: &mut Rng,
) -> (Vec<f64>, Vec<f64>) {
    let (dim, count) = blocks(domain);
    let mut x = Vec::with_capacity(dim * count);
    let mut y = Vec::with_capacity(dim * count);
    for _ in 0..count {
        let base = sample_in_ball(rng, dim, radius);
        let dir = sample_direction(rng, dim);
        y.extend(base.iter().zip(&dir).map(|(b, d)| b + s * d));
        x.extend(base);
    }
    (x, y)
}

/// Estimate `omega(s) = sup { |F(x) - F(y)| : d(x, y) <= s }` on a grid.
///
/// For each scale the documented witness pairs are evaluated first, then
/// `samples_per_scale` random pairs with base points uniform in the ball of
/// radius `base_radius` and directions uniform on the sphere. Each scale uses
/// its own stream derived from `(seed, scale index)`.
pub fn estimate_modulus(domain: &ModulusDomain<'_>, cfg: &ModulusConfig) -> Result<ModulusTable> {
    validate_scales(&cfg.scales)?;
    let per_scale: Vec<(f64, Option<Witness>)> = cfg
        .scales
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = seed::stream(cfg.seed, "modulus", &[i as u64]);
            let mut best = 0.0f64;
            let mut best_w = None;
            let consider = |x: Vec<f64>,
                            y: Vec<f64>,
                            best: &mut f64,
                            best_w: &mut Option<Witness>|
             -> Result<()> {
                let v = evaluate_pair(domain, &x, &y)?;
                if best_w.is_none() || v > *best {
                    *best = v.max(*best);
                    *best_w = Some(Witness {
                        x,
                        y,
                        input_distance: s,
                        output_distance: v,
                    });
                }
                Ok(())
            };
            for (x, y) in witness_pairs(domain, s) {
                consider(x, y, &mut best, &mut best_w)?;
            }
            for _ in 0..cfg.samples_per_scale {
                let (x, y) = random_pair(domain, s, cfg.base_radius, &mut rng);
                consider(x, y, &mut best, &mut best_w)?;
            }
            Ok((best, best_w))
        })
        .collect::<Result<Vec<_>>>()?;
    let (raw, witnesses): (Vec<f64>, Vec<Option<Witness>>) = per_scale.into_iter().unzip();
    ModulusTable::from_raw(
        cfg.scales.clone(),
        raw,
        witnesses,
        cfg.samples_per_scale,
        cfg.seed,
    )
}

/// Estimate of `gamma = sup over net points x of |F(x) - f(x)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    pub argmax_point: ProductNetPoint,
    pub samples: usize,
    /// Whether every net point was visited (the value is then exact).
    pub exhaustive: bool,
}

impl Serialize for GammaEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            value: f64,
            infinite: bool,
            argmax_point: &'a [u64],
            samples: usize,
            exhaustive: bool,
        }
        Repr {
            value: self.value,
            infinite: self.value.is_infinite(),
            argmax_point: &self.argmax_point.indices,
            samples: self.samples,
            exhaustive: self.exhaustive,
        }
        .serialize(s)
    }
}

/// `max |F(x) - f(x)|_Y` over `samples` random points of the product net.
pub fn estimate_gamma(
    map: &dyn ProductMap,
    net: &ProductNet,
    samples: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    let mut rng = seed::stream(seed, "gamma", &[]);
    let points: Vec<ProductNetPoint> = (0..samples.max(1)).map(|_| net.sample(&mut rng)).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|pt| {
            let x = net.point(pt)?;
            let fx = apply_product_checked(map, &x)?;
            sup_product_distance(&fx, &net.f(pt)?, Side::Y)
        })
        .collect::<Result<Vec<_>>>()?;
    let (i, value) = argmax(&values);
    Ok(GammaEstimate {
        value,
        argmax_point: points[i].clone(),
        samples: points.len(),
        exhaustive: false,
    })
}

/// `gamma_p = max |F_p(y) - M_p(y)|_p` over points `y` of one component net.
/// Visits every point when the net has at most `samples` points.
pub fn estimate_component_gamma(
    map: &dyn VectorMap,
    p: u32,
    net: &NetHandle,
    samples: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    let exhaustive = net.len() <= samples as u64;
    let ids: Vec<u64> = if exhaustive {
        net.iter_points().map(|(id, _)| id).collect()
    } else {
        let mut rng = seed::stream(seed, "component-gamma", &[p as u64]);
        (0..samples.max(1))
            .map(|_| net.sample_id(&mut rng))
            .collect()
    };
    let values: Vec<f64> = ids
        .par_iter()
        .map(|&id| {
            let y = net.point(id)?;
            let fy = apply_checked(map, y.as_slice())?;
            let mut my = y.into_inner();
            mazur_in_place(&mut my, p);
            Ok(lq_dist_slice(&fy, &my, p as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (i, value) = argmax(&values);
    Ok(GammaEstimate {
        value,
        argmax_point: ProductNetPoint {
            indices: vec![ids[i]],
        },
        samples: ids.len(),
        exhaustive,
    })
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
}

/// Result of [`estimate_holder_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub constant: f64,
    pub exponent: f64,
    pub pairs: usize,
    pub skipped: usize,
    /// Input and output distances of the maximizing pair.
    pub argmax_distances: (f64, f64),
}

/// `max d_out / d_in^alpha` over sampled pairs; coincident pairs are skipped.
/// `sample` draws one pair and returns `(d_in, d_out)`.
pub fn estimate_holder_constant<S>(
    alpha: f64,
    pairs: usize,
    seed: u64,
    mut sample: S,
) -> Result<HolderEstimate>
where
    S: FnMut(&mut Rng) -> Result<(f64, f64)>,
{
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )));
    }
    let mut rng = seed::stream(seed, "holder", &[]);
    let mut est = HolderEstimate {
        constant: 0.0,
        exponent: alpha,
        pairs,
        skipped: 0,
        argmax_distances: (0.0, 0.0),
    };
    for _ in 0..pairs {
        let (d_in, d_out) = sample(&mut rng)?;
        if d_in == 0.0 {
            est.skipped += 1;
            continue;
        }
        let ratio = d_out / d_in.powf(alpha);
        if ratio > est.constant {
            est.constant = ratio;
            est.argmax_distances = (d_in, d_out);
        }
    }
    Ok(est)
}

/// Pair sampler for `f` on a product net: half the pairs are independent
/// uniform net points, half differ from a uniform point in one component.
pub fn net_f_pair_sampler(net: &ProductNet) -> impl FnMut(&mut Rng) -> Result<(f64, f64)> + '_ {
    let mut toggle = false;
    move |rng| {
        toggle = !toggle;
        let a = net.sample(rng);
        let b = if toggle {
            net.sample(rng)
        } else {
            net.sample_neighbor(&a, rng)?
        };
        let d_in = sup_product_distance(&net.point(&a)?, &net.point(&b)?, Side::X)?;
        let d_out = sup_product_distance(&net.f(&a)?, &net.f(&b)?, Side::Y)?;
        Ok((d_in, d_out))
    }
}

/// Pair sampler for a map on `R^dim`: base points in the ball of radius
/// `radius`, partners at a log-uniform distance in `[1e-3, radius]`.
pub fn vector_pair_sampler<'a>(
    map: &'a dyn VectorMap,
    dim: usize,
    radius: f64,
    output_exponent: f64,
) -> impl FnMut(&mut Rng) -> Result<(f64, f64)> + 'a {
    use rand::Rng as _;
    move |rng| {
        let x = sample_in_ball(rng, dim, radius);
        let d = 1e-3 * (radius / 1e-3).powf(rng.random::<f64>());
        let dir = sample_direction(rng, dim);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + d * b).collect();
        let fx = apply_checked(map, &x)?;
        let fy = apply_checked(map, &y)?;
        Ok((
            lq_dist_slice(&x, &y, 2.0),
            lq_dist_slice(&fx, &fy, output_exponent),
        ))
    }
}
