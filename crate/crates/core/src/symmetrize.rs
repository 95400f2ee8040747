//! The hyperoctahedral symmetrizer
//!
//! ```text
//! G(x) = 1/(2^n n!) * sum over (eps, pi) of (eps pi)^{-1} Q_n F(J_n(eps pi x))
//! ```
//!
//! averaged either over the whole group of signed permutations (exact mode)
//! or over a seeded sample of it.
//!
//! Exact enumeration order: permutations in lexicographic order, and for each
//! permutation the sign patterns as a binary counter `0..2^n` (bit `i` set
//! means coordinate `i` is negated). Each permutation's `2^n` terms are
//! summed with a compensated accumulator; the per-permutation partial sums
//! are then merged in permutation order, so results are bit-identical for
//! any thread count.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{apply_checked, VectorMap};
use crate::net::sample_in_ball;
use crate::seed::{self, Rng};
use crate::space::{lq_dist_slice, lq_norm_slice, RealVector};
use crate::summation::VectorAccumulator;

/// Default cap on the number of group elements summed in exact mode.
pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;

/// Sampled-mode work is split into chunks of this many group elements.
const SAMPLE_CHUNK: usize = 1 << 14;

/// A signed permutation `eps * pi` acting on `R^n` by
/// `(pi x)_i = x_{pi^{-1}(i)}` followed by coordinatewise signs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPermutation {
    /// `perm[j] = pi(j)`, 0-based.
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let n = perm.len();
        if signs.len() != n {
            return Err(Error::invalid(format!(
                "{} signs for a permutation of {n} elements",
                signs.len()
            )));
        }
        let mut seen = vec![false; n];
        for &j in &perm {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid(format!("{perm:?} is not a permutation")));
            }
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("signs must be +-1, got {signs:?}")));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// The group inverse `(eps pi)^{-1} = pi^{-1} eps`.
    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let mut inv = vec![0; n];
        for (j, &pj) in self.perm.iter().enumerate() {
            inv[pj] = j;
        }
        // x_j = eps_{pi(j)} y_{pi(j)}, so the inverse carries sign eps_{pi(j)} on slot j
        let signs = (0..n).map(|j| self.signs[self.perm[j]]).collect();
        SignedPermutation { perm: inv, signs }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SignedPermutation) -> Self {
        let n = self.dim();
        let perm: Vec<usize> = (0..n).map(|j| self.perm[other.perm[j]]).collect();
        let signs: Vec<i8> = (0..n)
            .map(|i| {
                // slot i of self receives slot perm^{-1}(i) of other's output
                let src = self.perm.iter().position(|&p| p == i).unwrap();
                self.signs[i] * other.signs[src]
            })
            .collect();
        SignedPermutation { perm, signs }
    }

    /// Write `(eps pi) x` into `out`.
    #[inline]
    pub(crate) fn act_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, &pj) in self.perm.iter().enumerate() {
            out[pj] = x[j];
        }
        for (o, &s) in out.iter_mut().zip(&self.signs) {
            if s < 0 {
                *o = -*o;
            }
        }
    }

    /// Write `(eps pi)^{-1} y` into `out`.
    #[inline]
    pub(crate) fn act_inverse_into(&self, y: &[f64], out: &mut [f64]) {
        for (j, &pj) in self.perm.iter().enumerate() {
            let v = y[pj];
            out[j] = if self.signs[pj] < 0 { -v } else { v };
        }
    }

    pub fn apply(&self, v: &RealVector) -> Result<RealVector> {
        if v.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "signed permutation of dimension {} applied to a vector of dimension {}",
                self.dim(),
                v.dim()
            )));
        }
        let mut out = vec![0.0; v.dim()];
        self.act_into(v.as_slice(), &mut out);
        Ok(RealVector::from_finite(out))
    }

    /// A uniformly random group element.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let signs = (0..n)
            .map(|_| if rng.random::<bool>() { -1 } else { 1 })
            .collect();
        SignedPermutation { perm, signs }
    }
}

/// Apply a signed permutation to a vector.
pub fn apply_signed_perm(g: &SignedPermutation, v: &RealVector) -> Result<RealVector> {
    g.apply(v)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations_lex(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        // next permutation (Narayana)
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

fn group_order(n: usize) -> Option<u64> {
    let mut order: u64 = 1u64.checked_shl(n as u32)?;
    for k in 2..=n as u64 {
        order = order.checked_mul(k)?;
    }
    Some(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetrizeMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizeConfig {
    pub mode: SymmetrizeMode,
    pub sample_count: u64,
    pub seed: u64,
    pub n: usize,
    pub p: u32,
    /// Dimension `N >= n` on which `F` acts; `None` means `N = n`.
    pub ambient_dim: Option<usize>,
    pub exact_budget: u64,
}

impl SymmetrizeConfig {
    pub fn exact(n: usize, p: u32) -> Self {
        SymmetrizeConfig {
            mode: SymmetrizeMode::Exact,
            sample_count: 0,
            seed: 0,
            n,
            p,
            ambient_dim: None,
            exact_budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn sampled(n: usize, p: u32, sample_count: u64, seed: u64) -> Self {
        SymmetrizeConfig {
            mode: SymmetrizeMode::Sampled,
            sample_count,
            seed,
            ..Self::exact(n, p)
        }
    }

    fn ambient(&self) -> usize {
        self.ambient_dim.unwrap_or(self.n)
    }

    fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("p must be >= 2, got {}", self.p)));
        }
        if self.ambient() < self.n {
            return Err(Error::invalid(format!(
                "ambient dimension {} is below n = {}",
                self.ambient(),
                self.n
            )));
        }
        match self.mode {
            SymmetrizeMode::Exact => {
                let order = group_order(self.n);
                if order.is_none_or(|o| o > self.exact_budget) {
                    return Err(Error::Resource(format!(
                        "exact symmetrization over 2^{n} * {n}! group elements exceeds the budget of {}",
                        self.exact_budget,
                        n = self.n
                    )));
                }
            }
            SymmetrizeMode::Sampled => {
                if self.sample_count == 0 {
                    return Err(Error::invalid("sampled mode needs sample_count >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Output of [`symmetrize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Symmetrized {
    pub value: RealVector,
    /// Per-coordinate standard errors (sampled mode only).
    pub std_error: Option<Vec<f64>>,
    pub group_elements: u64,
}

/// One term `(eps pi)^{-1} Q_n F(J_n(eps pi x))`.
fn term(
    map: &dyn VectorMap,
    g: &SignedPermutation,
    x: &[f64],
    ambient: usize,
    moved: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    moved.clear();
    moved.resize(ambient, 0.0);
    g.act_into(x, &mut moved[..n]);
    let y = apply_checked(map, moved)?;
    g.act_inverse_into(&y[..n], out);
    Ok(())
}

/// `G_p^n(x)` for the map `F` (acting on `R^N`, conjugated by `J_n`/`Q_n`).
pub fn symmetrize(
    map: &dyn VectorMap,
    x: &RealVector,
    cfg: &SymmetrizeConfig,
) -> Result<Symmetrized> {
    cfg.validate()?;
    if x.dim() != cfg.n {
        return Err(Error::invalid(format!(
            "symmetrizer of dimension {} evaluated at a vector of dimension {}",
            cfg.n,
            x.dim()
        )));
    }
    match cfg.mode {
        SymmetrizeMode::Exact => symmetrize_exact(map, x.as_slice(), cfg),
        SymmetrizeMode::Sampled => symmetrize_sampled(map, x.as_slice(), cfg),
    }
}

fn symmetrize_exact(map: &dyn VectorMap, x: &[f64], cfg: &SymmetrizeConfig) -> Result<Symmetrized> {
    let n = cfg.n;
    let ambient = cfg.ambient();
    let perms = permutations_lex(n);
    let patterns = 1usize << n;
    let partials: Vec<VectorAccumulator> = perms
        .par_iter()
        .map(|perm| {
            let mut acc = VectorAccumulator::new(n);
            let mut g = SignedPermutation {
                perm: perm.clone(),
                signs: vec![1; n],
            };
            let mut moved = Vec::with_capacity(ambient);
            let mut out = vec![0.0; n];
            for bits in 0..patterns {
                for (i, s) in g.signs.iter_mut().enumerate() {
                    *s = if bits >> i & 1 == 1 { -1 } else { 1 };
                }
                term(map, &g, x, ambient, &mut moved, &mut out)?;
                acc.add(&out);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = VectorAccumulator::new(n);
    for part in &partials {
        total.merge(part);
    }
    let order = (perms.len() * patterns) as f64;
    let value = total.values().into_iter().map(|s| s / order).collect();
    Ok(Symmetrized {
        value: RealVector::from_finite(value),
        std_error: None,
        group_elements: order as u64,
    })
}

fn symmetrize_sampled(
    map: &dyn VectorMap,
    x: &[f64],
    cfg: &SymmetrizeConfig,
) -> Result<Symmetrized> {
    let n = cfg.n;
    let ambient = cfg.ambient();
    let mut rng = seed::stream(cfg.seed, "symmetrize-sampled", &[n as u64, cfg.p as u64]);
    let mut sum = VectorAccumulator::new(n);
    let mut sum_sq = VectorAccumulator::new(n);
    let mut remaining = cfg.sample_count as usize;
    while remaining > 0 {
        let chunk = remaining.min(SAMPLE_CHUNK);
        let elements: Vec<SignedPermutation> = (0..chunk)
            .map(|_| SignedPermutation::random(n, &mut rng))
            .collect();
        let terms: Vec<Vec<f64>> = elements
            .par_iter()
            .map_init(
                || Vec::with_capacity(ambient),
                |moved, g| {
                    let mut out = vec![0.0; n];
                    term(map, g, x, ambient, moved, &mut out)?;
                    Ok(out)
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let mut sq = vec![0.0; n];
        for t in &terms {
            sum.add(t);
            for (s, v) in sq.iter_mut().zip(t) {
                *s = v * v;
            }
            sum_sq.add(&sq);
        }
        remaining -= chunk;
    }
    let count = cfg.sample_count as f64;
    let means: Vec<f64> = sum.values().into_iter().map(|s| s / count).collect();
    let std_error = sum_sq
        .values()
        .into_iter()
        .zip(&means)
        .map(|(ss, m)| {
            if cfg.sample_count < 2 {
                return f64::INFINITY;
            }
            let var = ((ss - count * m * m) / (count - 1.0)).max(0.0);
            (var / count).sqrt()
        })
        .collect();
    Ok(Symmetrized {
        value: RealVector::from_finite(means),
        std_error: Some(std_error),
        group_elements: cfg.sample_count,
    })
}

/// Result of [`verify_equivariance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivarianceReport {
    /// `max |G(gx) - g G(x)|_p`.
    pub max_deviation: f64,
    /// `max |G(gx) - g G(x)|_p / (1 + |G(x)|_p)`.
    pub max_relative: f64,
    pub trials: usize,
}

/// Compare `G(gx)` with `g G(x)` for random `x` in the ball of radius 2 and
/// random group elements `g`.
pub fn verify_equivariance(
    map: &dyn VectorMap,
    cfg: &SymmetrizeConfig,
    trials: usize,
    seed: u64,
) -> Result<EquivarianceReport> {
    let mut rng = seed::stream(seed, "equivariance", &[cfg.n as u64, cfg.p as u64]);
    let p = cfg.p as f64;
    let mut report = EquivarianceReport {
        max_deviation: 0.0,
        max_relative: 0.0,
        trials,
    };
    for _ in 0..trials {
        let x = RealVector::from_finite(sample_in_ball(&mut rng, cfg.n, 2.0));
        let g = SignedPermutation::random(cfg.n, &mut rng);
        let gx = symmetrize(map, &g.apply(&x)?, cfg)?.value;
        let base = symmetrize(map, &x, cfg)?.value;
        let g_base = g.apply(&base)?;
        let dev = lq_dist_slice(gx.as_slice(), g_base.as_slice(), p);
        let rel = dev / (1.0 + lq_norm_slice(base.as_slice(), p));
        report.max_deviation = report.max_deviation.max(dev);
        report.max_relative = report.max_relative.max(rel);
    }
    Ok(report)
}

/// Result of [`extract_alpha`]: `G(t 1_A) = alpha 1_A` up to the residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaExtraction {
    /// Mean of `G(t 1_A)` over `A = {1..k}`.
    pub alpha: f64,
    /// `l_p` norm of `G(t 1_A)` off `A`.
    pub off_support_residual: f64,
    /// Largest deviation of a support coordinate from `alpha`.
    pub support_variation: f64,
    /// Same mean for `B = {n-k+1..n}`.
    pub alpha_second: f64,
    /// `|alpha_A - alpha_B|`.
    pub cross_set_gap: f64,
}

impl AlphaExtraction {
    /// Largest of the three collapse residuals relative to `1 + |alpha|`.
    pub fn relative_residual(&self) -> f64 {
        let scale = 1.0 + self.alpha.abs();
        self.off_support_residual
            .max(self.support_variation)
            .max(self.cross_set_gap)
            / scale
    }
}

/// 0-based index sets `{0..k}` and `{n-k..n}`.
pub(crate) fn head_and_tail(n: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    ((0..k).collect(), (n - k..n).collect())
}

fn collapse(g_val: &RealVector, support: &[usize], p: f64) -> (f64, f64, f64) {
    let v = g_val.as_slice();
    let alpha = support.iter().map(|&i| v[i]).sum::<f64>() / support.len() as f64;
    let variation = support
        .iter()
        .map(|&i| (v[i] - alpha).abs())
        .fold(0.0, f64::max);
    let off: Vec<f64> = (0..v.len())
        .filter(|i| !support.contains(i))
        .map(|i| v[i])
        .collect();
    (alpha, lq_norm_slice(&off, p), variation)
}

/// Evaluate `G` at `t 1_A` for `A = {1..k}` and `B = {n-k+1..n}` and read
/// off `alpha_k(t)` with the residuals of the indicator collapse.
pub fn extract_alpha(
    map: &dyn VectorMap,
    k: usize,
    t: f64,
    cfg: &SymmetrizeConfig,
) -> Result<AlphaExtraction> {
    let n = cfg.n;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    let p = cfg.p as f64;
    let (a, b) = head_and_tail(n, k);
    let ga = symmetrize(map, &RealVector::indicator(n, &a, t), cfg)?.value;
    let (alpha, off, var) = collapse(&ga, &a, p);
    let gb = symmetrize(map, &RealVector::indicator(n, &b, t), cfg)?.value;
    let (alpha_b, off_b, var_b) = collapse(&gb, &b, p);
    Ok(AlphaExtraction {
        alpha,
        off_support_residual: off.max(off_b),
        support_variation: var.max(var_b),
        alpha_second: alpha_b,
        cross_set_gap: (alpha - alpha_b).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{Identity, MazurMap};
    use crate::mazur::mazur;
    use crate::space::{lq_norm, NormExponent};
    use proptest::prelude::*;

    fn rv(c: &[f64]) -> RealVector {
        RealVector::new(c.to_vec()).unwrap()
    }

    /// A deliberately non-equivariant nonlinear map.
    fn lopsided(x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter()
            .enumerate()
            .map(|(i, &c)| (c + 0.3 * i as f64).tanh() + 0.1 * (i as f64 + 1.0) * c * c + 0.25)
            .collect())
    }

    #[test]
    fn lex_permutations() {
        assert_eq!(
            permutations_lex(3),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
        assert_eq!(permutations_lex(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations_lex(5).len(), 120);
        assert_eq!(group_order(7), Some(645_120));
    }

    #[test]
    fn action_follows_the_matrix_convention() {
        // (pi x)_i = x_{pi^{-1}(i)}: pi = (0 -> 1, 1 -> 2, 2 -> 0)
        let g = SignedPermutation::new(vec![1, 2, 0], vec![1, -1, 1]).unwrap();
        let y = g.apply(&rv(&[10.0, 20.0, 30.0])).unwrap();
        assert_eq!(y, rv(&[30.0, -10.0, 20.0]));
        assert_eq!(g.inverse().apply(&y).unwrap(), rv(&[10.0, 20.0, 30.0]));
        let mut back = vec![0.0; 3];
        g.act_inverse_into(y.as_slice(), &mut back);
        assert_eq!(back, vec![10.0, 20.0, 30.0]);

        let id = SignedPermutation::identity(3);
        assert_eq!(id.apply(&y).unwrap(), y);
        assert!(g.apply(&rv(&[1.0])).is_err());
        assert!(SignedPermutation::new(vec![0, 0], vec![1, 1]).is_err());
        assert!(SignedPermutation::new(vec![0, 1], vec![1, 0]).is_err());
    }

    proptest! {
        #[test]
        fn group_laws(seed in any::<u64>(), n in 1usize..8, v in prop::collection::vec(-9.0f64..9.0, 8), q in 1.0f64..9.0) {
            let mut rng = seed::stream(seed, "t", &[]);
            let g = SignedPermutation::random(n, &mut rng);
            let h = SignedPermutation::random(n, &mut rng);
            let v = rv(&v[..n]);
            let gv = g.apply(&v).unwrap();
            prop_assert_eq!(g.inverse().apply(&gv).unwrap(), v.clone());
            prop_assert_eq!(g.compose(&h).apply(&v).unwrap(), g.apply(&h.apply(&v).unwrap()).unwrap());
            prop_assert_eq!(g.compose(&g.inverse()), SignedPermutation::identity(n));
            let q = NormExponent::new(q).unwrap();
            let (a, b) = (lq_norm(&gv, q), lq_norm(&v, q));
            prop_assert!((a - b).abs() <= 1e-14 * b);
        }

        #[test]
        fn mazur_commutes_with_signed_permutations(seed in any::<u64>(), v in prop::collection::vec(-9.0f64..9.0, 6), p in 2u32..30) {
            let mut rng = seed::stream(seed, "t", &[]);
            let g = SignedPermutation::random(6, &mut rng);
            let v = rv(&v);
            prop_assert_eq!(mazur(&g.apply(&v).unwrap(), p).unwrap(), g.apply(&mazur(&v, p).unwrap()).unwrap());
        }
    }

    #[test]
    fn identity_and_constant_maps() {
        let x = rv(&[0.3, -1.2, 2.0, 0.0]);
        let cfg = SymmetrizeConfig::exact(4, 3);
        assert_eq!(symmetrize(&Identity, &x, &cfg).unwrap().value, x);
        let constant = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![1.5; x.len()]) };
        assert!(symmetrize(&constant, &x, &cfg).unwrap().value.is_zero());
    }

    #[test]
    fn mazur_is_a_fixed_point() {
        let mut rng = seed::stream(1, "fixed", &[]);
        for n in 1..=5 {
            for p in [2, 3, 7] {
                let cfg = SymmetrizeConfig::exact(n, p);
                let x = RealVector::from_finite(sample_in_ball(&mut rng, n, 3.0));
                let g = symmetrize(&MazurMap(p), &x, &cfg).unwrap().value;
                let m = mazur(&x, p).unwrap();
                for (a, b) in g.as_slice().iter().zip(m.as_slice()) {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                }
            }
        }
    }

    /// Independent oracle for n = 2: the eight signed permutation matrices
    /// written out by hand.
    fn dihedral_oracle(map: &dyn VectorMap, x: [f64; 2]) -> [f64; 2] {
        let mut sum = [0.0; 2];
        for swap in [false, true] {
            for s0 in [1.0, -1.0] {
                for s1 in [1.0, -1.0] {
                    let m: [[f64; 2]; 2] = if swap {
                        [[0.0, s0], [s1, 0.0]]
                    } else {
                        [[s0, 0.0], [0.0, s1]]
                    };
                    let gx = [
                        m[0][0] * x[0] + m[0][1] * x[1],
                        m[1][0] * x[0] + m[1][1] * x[1],
                    ];
                    let y = map.apply(&gx).unwrap();
                    // inverse of an orthogonal matrix is its transpose
                    sum[0] += m[0][0] * y[0] + m[1][0] * y[1];
                    sum[1] += m[0][1] * y[0] + m[1][1] * y[1];
                }
            }
        }
        [sum[0] / 8.0, sum[1] / 8.0]
    }

    #[test]
    fn two_dimensional_sum_matches_oracle() {
        let cfg = SymmetrizeConfig::exact(2, 3);
        for x in [[0.4, -1.1], [1.3, 0.0], [2.0, 2.0]] {
            let got = symmetrize(&lopsided, &rv(&x), &cfg).unwrap().value;
            let want = dihedral_oracle(&lopsided, x);
            for (a, b) in got.as_slice().iter().zip(want) {
                assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
            }
        }
        let eq = verify_equivariance(&lopsided, &cfg, 50, 3).unwrap();
        assert!(eq.max_relative <= 1e-9);
        let alpha = extract_alpha(&lopsided, 1, 1.3, &cfg).unwrap();
        let want = dihedral_oracle(&lopsided, [1.3, 0.0]);
        assert!((alpha.alpha - want[0]).abs() <= 1e-14);
        assert!(want[1].abs() <= 1e-15);
    }

    #[test]
    fn equivariance_and_collapse_for_a_generic_map() {
        for n in 1..=5 {
            let cfg = SymmetrizeConfig::exact(n, 4);
            let eq = verify_equivariance(&lopsided, &cfg, 10, 7).unwrap();
            assert!(eq.max_relative <= 1e-9, "n={n}: {eq:?}");
            for k in 1..=n {
                let a = extract_alpha(&lopsided, k, 0.8, &cfg).unwrap();
                assert!(a.relative_residual() <= 1e-9, "n={n} k={k}: {a:?}");
            }
        }
        let cfg = SymmetrizeConfig::exact(4, 4);
        assert_eq!(
            verify_equivariance(&Identity, &cfg, 5, 1)
                .unwrap()
                .max_deviation,
            0.0
        );
        let constant = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![-2.0; x.len()]) };
        assert_eq!(
            verify_equivariance(&constant, &cfg, 5, 1)
                .unwrap()
                .max_deviation,
            0.0
        );
    }

    #[test]
    fn alpha_of_mazur_and_constants() {
        for n in [3, 5] {
            let cfg = SymmetrizeConfig::exact(n, 4);
            for k in 1..=n {
                let a = extract_alpha(&MazurMap(4), k, 4.0, &cfg).unwrap();
                assert!((a.alpha - 2.0).abs() <= 1e-12);
                assert!(a.relative_residual() <= 1e-12);
            }
            let constant = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![3.0; x.len()]) };
            let a = extract_alpha(&constant, 2, 1.0, &cfg).unwrap();
            assert_eq!(
                (a.alpha, a.off_support_residual, a.support_variation),
                (0.0, 0.0, 0.0)
            );
        }
        let cfg = SymmetrizeConfig::exact(3, 4);
        assert!(extract_alpha(&MazurMap(4), 0, 1.0, &cfg).is_err());
        assert!(extract_alpha(&MazurMap(4), 4, 1.0, &cfg).is_err());
    }

    #[test]
    fn linear_in_the_map() {
        let cfg = SymmetrizeConfig::exact(4, 3);
        let x = rv(&[0.5, -0.25, 1.5, 0.75]);
        let (a, b) = (1.7, -0.6);
        let combo = move |v: &[f64]| -> Result<Vec<f64>> {
            let f1 = lopsided(v)?;
            let f2 = MazurMap(3).apply(v)?;
            Ok(f1.iter().zip(&f2).map(|(u, w)| a * u + b * w).collect())
        };
        let lhs = symmetrize(&combo, &x, &cfg).unwrap().value;
        let g1 = symmetrize(&lopsided, &x, &cfg).unwrap().value;
        let g2 = symmetrize(&MazurMap(3), &x, &cfg).unwrap().value;
        for ((l, u), w) in lhs.as_slice().iter().zip(g1.as_slice()).zip(g2.as_slice()) {
            let r = a * u + b * w;
            assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn ambient_dimension_conjugates_by_embedding() {
        let mut cfg = SymmetrizeConfig::exact(2, 3);
        cfg.ambient_dim = Some(4);
        // F on R^4 that mixes in the padded coordinates
        let f = |v: &[f64]| -> Result<Vec<f64>> {
            assert_eq!(v.len(), 4);
            assert_eq!((v[2], v[3]), (0.0, 0.0));
            Ok(vec![v[0] + 1.0, v[1], 7.0, 7.0])
        };
        let g = symmetrize(&f, &rv(&[0.5, 2.0]), &cfg).unwrap().value;
        assert_eq!(g, rv(&[0.5, 2.0]));
        cfg.ambient_dim = Some(1);
        assert!(symmetrize(&f, &rv(&[0.5, 2.0]), &cfg).is_err());
    }

    #[test]
    fn contract_and_budget_errors() {
        let cfg = SymmetrizeConfig::exact(3, 3);
        let short = |_: &[f64]| -> Result<Vec<f64>> { Ok(vec![0.0]) };
        assert!(matches!(
            symmetrize(&short, &rv(&[1.0, 2.0, 3.0]), &cfg),
            Err(Error::Contract { .. })
        ));
        let nan = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![f64::NAN; x.len()]) };
        assert!(matches!(
            symmetrize(&nan, &rv(&[1.0, 2.0, 3.0]), &cfg),
            Err(Error::Contract { .. })
        ));
        let big = SymmetrizeConfig::exact(9, 3);
        assert!(matches!(
            symmetrize(&Identity, &RealVector::zeros(9), &big),
            Err(Error::Resource(_))
        ));
        assert!(symmetrize(&Identity, &rv(&[1.0]), &cfg).is_err());
        let zero_samples = SymmetrizeConfig::sampled(3, 3, 0, 1);
        assert!(symmetrize(&Identity, &rv(&[1.0, 2.0, 3.0]), &zero_samples).is_err());
    }

    #[test]
    fn sampled_mode_is_reproducible_and_close() {
        let x = rv(&[0.4, -1.0, 0.7, 1.2]);
        let exact = symmetrize(&lopsided, &x, &SymmetrizeConfig::exact(4, 3)).unwrap();
        let cfg = SymmetrizeConfig::sampled(4, 3, 200_000, 17);
        let s1 = symmetrize(&lopsided, &x, &cfg).unwrap();
        let s2 = symmetrize(&lopsided, &x, &cfg).unwrap();
        assert_eq!(s1, s2);
        let se = s1.std_error.as_ref().unwrap();
        for ((a, b), e) in s1
            .value
            .as_slice()
            .iter()
            .zip(exact.value.as_slice())
            .zip(se)
        {
            assert!((a - b).abs() <= 5.0 * e + 1e-12, "{a} vs {b} (se {e})");
        }
    }
}
