//! Numerical instances of the inequality chain behind the impossibility
//! argument, and the end-to-end contradiction pipeline.
//!
//! Every check returns an [`InequalityReport`]. Right-hand sides use
//! `omega_hat * slack` wherever the modulus appears, since `omega_hat`
//! underestimates the true modulus. Sides are then compared with a relative
//! floating-point tolerance of [`COMPARISON_TOLERANCE`].
//!
//! A failing check is a signal about the harness or the estimates, never a
//! statement about the theorem.

use std::collections::BTreeMap;
use std::f64::consts::{E, SQRT_2};
use std::io::Write;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::FromPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extension::{cross_check_claims, describe, ClaimFlag, ExtensionCandidate};
use crate::maps::{apply_checked, VectorMap};
use crate::mazur::mazur_scalar;
use crate::modulus::{
    default_scales, estimate_component_gamma, estimate_gamma, estimate_modulus, with_scales,
    GammaEstimate, ModulusConfig, ModulusDomain, ModulusTable,
};
use crate::net::{sample_in_ball, NetHandle, ProductNet};
use crate::seed;
use crate::space::{lq_dist_slice, RealVector};
use crate::symmetrize::{head_and_tail, symmetrize, SymmetrizeConfig, SymmetrizeMode};

/// Default multiplier on `omega_hat` in right-hand sides.
pub const DEFAULT_SLACK: f64 = 1.1;

/// `holds` is `lhs <= rhs * (1 + COMPARISON_TOLERANCE)`.
pub const COMPARISON_TOLERANCE: f64 = 1e-12;

/// Exclusive upper bound `1/(sqrt(2) e^2)` on `t` in the pipeline.
pub fn contradiction_t_max() -> f64 {
    1.0 / (SQRT_2 * E * E)
}

/// The floor `1/(2e)` the pipeline's choices guarantee.
pub fn floor_constant() -> f64 {
    0.5 / E
}

/// `p = ceil(ln(1/(2t^2)))`. Values within `1e-9` (relative) of an integer
/// round to it, so `2t^2 = e^-5` gives exactly 5.
pub fn choose_p(t: f64) -> Result<u32> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    let x = (1.0 / (2.0 * t * t)).ln();
    let r = x.round();
    let p = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    };
    Ok(p.max(2.0) as u32)
}

/// The implied lower bound `(2t^2)^(1/p) / 2` on `omega(sqrt(2) t)`.
pub fn implied_floor(t: f64, p: u32) -> f64 {
    (2.0 * t * t).powf(1.0 / p as f64) / 2.0
}

/// Outcome of one instantiated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Multiplier applied to `omega_hat` on the right.
    pub slack: f64,
    /// Numbers that entered the check (`n`, `p`, `k`, `t`, `gamma`, ...).
    pub inputs: BTreeMap<String, f64>,
    pub witness: Option<Value>,
    /// `analytic`, `feasible` or `grid`.
    pub mode: String,
    pub note: Option<String>,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, slack: f64, inputs: &[(&str, f64)]) -> Self {
        InequalityReport {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + COMPARISON_TOLERANCE),
            slack,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            witness: None,
            mode: "feasible".into(),
            note: None,
        }
    }

    fn with_witness(mut self, w: Value) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_mode(mut self, mode: &str) -> Self {
        self.mode = mode.into();
        self
    }

    pub fn with_input(mut self, key: &str, v: f64) -> Self {
        self.inputs.insert(key.into(), v);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Measured quantities of one component `F_p` entering right-hand sides.
#[derive(Debug, Clone, Copy)]
pub struct Estimates<'a> {
    pub omega: &'a ModulusTable,
    pub gamma: f64,
    pub slack: f64,
}

impl Estimates<'_> {
    fn transfer_rhs(&self) -> Result<f64> {
        Ok(self.omega.at(1.0)? * self.slack + self.gamma + 2.0)
    }
}

fn check_slack(slack: f64) -> Result<()> {
    if !(slack.is_finite() && slack >= 1.0) {
        return Err(Error::invalid(format!(
            "slack must be a finite number >= 1, got {slack}"
        )));
    }
    Ok(())
}

/// `sup_x |F_p(x) - M_p(x)|_p <= omega(1) + gamma + 2` over `x` sampled in
/// the ball of radius `radius` in `R^dim`.
pub fn check_transfer_bound(
    map: &dyn VectorMap,
    p: u32,
    est: &Estimates<'_>,
    dim: usize,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    check_slack(est.slack)?;
    let rhs = est.transfer_rhs()?;
    let mut rng = seed::stream(seed, "transfer", &[p as u64, dim as u64]);
    let mut best = (0.0f64, vec![0.0; dim]);
    for _ in 0..samples {
        let x = sample_in_ball(&mut rng, dim, radius);
        let fx = apply_checked(map, &x)?;
        let mx: Vec<f64> = x.iter().map(|&c| mazur_scalar(c, p)).collect();
        let d = lq_dist_slice(&fx, &mx, p as f64);
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(InequalityReport::new(
        "transfer_bound",
        best.0,
        rhs,
        est.slack,
        &[
            ("n", dim as f64),
            ("p", p as f64),
            ("gamma", est.gamma),
            ("omega_1", est.omega.at(1.0)?),
            ("samples", samples as f64),
        ],
    )
    .with_witness(json!({ "x": best.1 })))
}

/// `sup_x |G(x) - M_p(x)|_p <= omega(1) + gamma + 2` for the symmetrized
/// component, `x` sampled in the ball of radius `radius` in `R^n`.
pub fn check_symmetrized_transfer(
    map: &dyn VectorMap,
    cfg: &SymmetrizeConfig,
    est: &Estimates<'_>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    check_slack(est.slack)?;
    let rhs = est.transfer_rhs()?;
    let mut rng = seed::stream(seed, "symmetrized-transfer", &[cfg.n as u64, cfg.p as u64]);
    let mut best = (0.0f64, vec![0.0; cfg.n]);
    for _ in 0..samples {
        let x = sample_in_ball(&mut rng, cfg.n, radius);
        let g = symmetrize(map, &RealVector::new(x.clone())?, cfg)?.value;
        let mx: Vec<f64> = x.iter().map(|&c| mazur_scalar(c, cfg.p)).collect();
        let d = lq_dist_slice(g.as_slice(), &mx, cfg.p as f64);
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(InequalityReport::new(
        "symmetrized_transfer",
        best.0,
        rhs,
        est.slack,
        &[
            ("n", cfg.n as f64),
            ("p", cfg.p as f64),
            ("gamma", est.gamma),
            ("omega_1", est.omega.at(1.0)?),
            ("samples", samples as f64),
        ],
    )
    .with_witness(json!({ "x": best.1 })))
}

fn zero_based_to_one(set: &[usize]) -> Vec<usize> {
    set.iter().map(|i| i + 1).collect()
}

/// `t^(2/p) (2k)^(1/p) <= |G(t 1_B) - G(t 1_A)|_p + 2 omega(1) + 2 gamma + 4`
/// with `A = {1..k}`, `B = {n-k+1..n}`; requires `2k <= n+1`.
pub fn check_indicator_chain(
    map: &dyn VectorMap,
    cfg: &SymmetrizeConfig,
    k: usize,
    t: f64,
    est: &Estimates<'_>,
) -> Result<InequalityReport> {
    check_slack(est.slack)?;
    let n = cfg.n;
    if k == 0 || 2 * k > n + 1 {
        return Err(Error::invalid(format!(
            "indicator chain needs 1 <= k and 2k <= n+1 (k = {k}, n = {n})"
        )));
    }
    let p = cfg.p as f64;
    let (a, b) = head_and_tail(n, k);
    let ga = symmetrize(map, &RealVector::indicator(n, &a, t), cfg)?.value;
    let gb = symmetrize(map, &RealVector::indicator(n, &b, t), cfg)?.value;
    let level = t.powf(2.0 / p);
    let dev = |g: &RealVector, set: &[usize]| {
        let ideal = RealVector::indicator(n, set, level);
        lq_dist_slice(g.as_slice(), ideal.as_slice(), p)
    };
    let middle = lq_dist_slice(gb.as_slice(), ga.as_slice(), p);
    let omega1 = est.omega.at(1.0)?;
    let lhs = level * (2.0 * k as f64).powf(1.0 / p);
    let rhs = middle + 2.0 * omega1 * est.slack + 2.0 * est.gamma + 4.0;
    Ok(InequalityReport::new(
        "indicator_chain",
        lhs,
        rhs,
        est.slack,
        &[
            ("n", n as f64),
            ("p", p),
            ("k", k as f64),
            ("t", t),
            ("gamma", est.gamma),
            ("omega_1", omega1),
            ("middle_distance", middle),
            ("deviation_a", dev(&ga, &a)),
            ("deviation_b", dev(&gb, &b)),
        ],
    )
    .with_witness(json!({ "a": zero_based_to_one(&a), "b": zero_based_to_one(&b) })))
}

/// `k^(1/p) |G(t 1_{1..k}) - G(t 1_{2..k+1})|_p <= k^(1/p) omega(sqrt(2) t)`,
/// together with the exponent identity `(2k)^(1/p) |a| = k^(1/p) 2^(1/p) |a|`
/// at the measured `a = alpha_k(t)`. Requires `k + 1 <= n`.
pub fn check_shift_bound(
    map: &dyn VectorMap,
    cfg: &SymmetrizeConfig,
    k: usize,
    t: f64,
    est: &Estimates<'_>,
) -> Result<InequalityReport> {
    check_slack(est.slack)?;
    let n = cfg.n;
    if k == 0 || k + 1 > n {
        return Err(Error::invalid(format!(
            "shift bound needs 1 <= k and k+1 <= n (k = {k}, n = {n})"
        )));
    }
    let p = cfg.p as f64;
    let head: Vec<usize> = (0..k).collect();
    let shifted: Vec<usize> = (1..=k).collect();
    let x = RealVector::indicator(n, &head, t);
    let y = RealVector::indicator(n, &shifted, t);
    let input_distance = lq_dist_slice(x.as_slice(), y.as_slice(), 2.0);
    let gx = symmetrize(map, &x, cfg)?.value;
    let gy = symmetrize(map, &y, cfg)?.value;
    let alpha = head.iter().map(|&i| gx.as_slice()[i]).sum::<f64>() / k as f64;
    let id_lhs = (2.0 * k as f64).powf(1.0 / p) * alpha.abs();
    let id_rhs = (k as f64).powf(1.0 / p) * 2f64.powf(1.0 / p) * alpha.abs();
    let identity_gap = (id_lhs - id_rhs).abs() / id_lhs.abs().max(f64::MIN_POSITIVE);
    let kp = (k as f64).powf(1.0 / p);
    let omega = est.omega.at(SQRT_2 * t)?;
    let lhs = kp * lq_dist_slice(gx.as_slice(), gy.as_slice(), p);
    let rhs = kp * omega * est.slack;
    Ok(InequalityReport::new(
        "shift_bound",
        lhs,
        rhs,
        est.slack,
        &[
            ("n", n as f64),
            ("p", p),
            ("k", k as f64),
            ("t", t),
            ("alpha", alpha),
            ("identity_gap", identity_gap),
            ("input_distance", input_distance),
            ("omega_sqrt2t", omega),
        ],
    )
    .with_witness(json!({ "a": zero_based_to_one(&head), "b": zero_based_to_one(&shifted) })))
}

/// `t^(2/p) (2k)^(1/p) <= k^(1/p) omega(sqrt(2) t) + 2 omega(1) + 2 gamma + 4`.
pub fn check_omega_constraint(
    omega: &ModulusTable,
    gamma: f64,
    p: u32,
    k: u64,
    t: f64,
    slack: f64,
) -> Result<InequalityReport> {
    check_slack(slack)?;
    if p < 2 || k == 0 || t.is_nan() || t <= 0.0 {
        return Err(Error::invalid(format!(
            "need p >= 2, k >= 1 and t > 0 (p = {p}, k = {k}, t = {t})"
        )));
    }
    let pf = p as f64;
    let w_shift = omega.at(SQRT_2 * t)?;
    let w_one = omega.at(1.0)?;
    let kp = (k as f64).powf(1.0 / pf);
    let lhs = t.powf(2.0 / pf) * (2.0 * k as f64).powf(1.0 / pf);
    let rhs = kp * w_shift * slack + 2.0 * w_one * slack + 2.0 * gamma + 4.0;
    Ok(InequalityReport::new(
        "omega_constraint",
        lhs,
        rhs,
        slack,
        &[
            ("p", pf),
            ("k", k as f64),
            ("t", t),
            ("gamma", gamma),
            ("omega_1", w_one),
            ("omega_sqrt2t", w_shift),
        ],
    ))
}

/// Sampling sizes shared by the grid run and the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationConfig {
    pub modulus_samples: usize,
    pub gamma_samples: usize,
    pub slack: f64,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            modulus_samples: 2_000,
            gamma_samples: 20_000,
            slack: DEFAULT_SLACK,
            seed: 0,
        }
    }
}

/// `omega_hat` and `gamma` of the component `F_p` over the component net,
/// with the scales `extra` merged into the default grid.
pub fn component_estimates(
    candidate: &ExtensionCandidate,
    net: &NetHandle,
    p: u32,
    extra: &[f64],
    cfg: &EstimationConfig,
) -> Result<(ModulusTable, GammaEstimate)> {
    let map = candidate.component(p);
    let scales = with_scales(default_scales(), &with_scales(vec![1.0], extra));
    let mcfg = ModulusConfig::new(
        scales,
        cfg.modulus_samples,
        seed::derive_seed(cfg.seed, "component-modulus", &[p as u64]),
    );
    let domain = ModulusDomain::Vector {
        map: &map,
        dim: net.dim(),
        output_exponent: p as f64,
    };
    let table = estimate_modulus(&domain, &mcfg)?;
    let gamma = estimate_component_gamma(&map, p, net, cfg.gamma_samples, cfg.seed)?;
    Ok((table, gamma))
}

/// Instantiate the omega constraint over `ps x ks x ts` with measured
/// component estimates. One report per grid point, in grid order.
pub fn omega_constraint_grid(
    candidate: &ExtensionCandidate,
    net: &NetHandle,
    ps: &[u32],
    ks: &[u64],
    ts: &[f64],
    cfg: &EstimationConfig,
) -> Result<Vec<InequalityReport>> {
    let extra: Vec<f64> = ts.iter().map(|t| SQRT_2 * t).collect();
    let per_p = ps
        .par_iter()
        .map(|&p| component_estimates(candidate, net, p, &extra, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(ps.len() * ks.len() * ts.len());
    for (&p, (table, gamma)) in ps.iter().zip(&per_p) {
        for &k in ks {
            for &t in ts {
                let r = check_omega_constraint(table, gamma.value, p, k, t, cfg.slack)?
                    .with_mode("grid")
                    .with_input("n", net.dim() as f64);
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Configuration of [`contradiction_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Dimension of the symmetrizer in feasible mode.
    pub n: usize,
    pub p0: u32,
    pub p_max: u32,
    pub mode: SymmetrizeMode,
    /// Group samples per evaluation in sampled mode.
    pub sample_count: u64,
    /// Evaluation points of the two transfer checks.
    pub transfer_samples: usize,
    pub symmetrized_transfer_samples: usize,
    pub estimation: EstimationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n: 6,
            p0: 2,
            p_max: 24,
            mode: SymmetrizeMode::Exact,
            sample_count: 100_000,
            transfer_samples: 2_000,
            symmetrized_transfer_samples: 2,
            estimation: EstimationConfig::default(),
        }
    }
}

/// The choices of `p` and `k` with their analytic consequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticChoice {
    pub t: f64,
    /// `ln(1/(2t^2))`.
    pub log_term: f64,
    pub p: u32,
    /// `(2t^2)^(1/p) / 2`.
    pub implied_floor: f64,
    /// `1/(2e)`.
    pub floor_constant: f64,
    pub floor_met: bool,
    /// `(2 omega(1) + 2 gamma + 4) / omega(sqrt(2) t)`; absent when the
    /// denominator vanishes.
    pub k_ratio: Option<f64>,
    /// `2 ln(1/(2t^2))`.
    pub k_exponent: f64,
    pub k_log10: Option<f64>,
    /// Decimal ceiling of `k` when it fits a double (exact below `2^53`).
    pub k_ceiling: Option<String>,
    pub k_overflow: bool,
    /// Does `omega_hat(sqrt(2) t) * slack` reach the implied floor?
    pub omega_meets_floor: bool,
}

/// Compute `p`, the implied floor and the analytic `k` from measured values.
pub fn analytic_choice(
    t: f64,
    omega_sqrt2t: f64,
    omega_one: f64,
    gamma: f64,
    slack: f64,
) -> Result<AnalyticChoice> {
    let t_max = contradiction_t_max();
    if !(t > 0.0 && t < t_max) {
        return Err(Error::invalid(format!("t = {t} outside (0, {t_max})")));
    }
    let log_term = (1.0 / (2.0 * t * t)).ln();
    let p = choose_p(t)?;
    let floor = implied_floor(t, p);
    let k_exponent = 2.0 * log_term;
    let (k_ratio, k_log10) = if omega_sqrt2t > 0.0 {
        let ratio = (2.0 * omega_one + 2.0 * gamma + 4.0) / omega_sqrt2t;
        (Some(ratio), Some(k_exponent * ratio.log10()))
    } else {
        (None, None)
    };
    let (k_ceiling, k_overflow) = match k_log10 {
        Some(l) if l < 300.0 => {
            let k = 10f64.powf(l).ceil().max(1.0);
            (BigUint::from_f64(k).map(|b| b.to_string()), false)
        }
        Some(_) => (None, true),
        None => (None, false),
    };
    Ok(AnalyticChoice {
        t,
        log_term,
        p,
        implied_floor: floor,
        floor_constant: floor_constant(),
        floor_met: floor >= floor_constant() - 1e-12,
        k_ratio,
        k_exponent,
        k_log10,
        k_ceiling,
        k_overflow,
        omega_meets_floor: omega_sqrt2t * slack >= floor,
    })
}

/// `gamma` needed for the omega constraint to hold at `k` when
/// `omega_hat(sqrt(2) t) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRequirement {
    pub k: f64,
    pub gamma_needed: f64,
}

/// Full record of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub candidate: BTreeMap<&'static str, Value>,
    pub t: f64,
    pub p: u32,
    pub component_dim: usize,
    pub net_radius: f64,
    pub omega_sqrt2t: f64,
    pub omega_one: f64,
    pub omega_smallest_scale: f64,
    /// `gamma` of the component `F_p`; this is what enters the checks.
    pub gamma: GammaEstimate,
    /// `gamma` of the whole candidate over the product net `p0..=P`.
    pub gamma_product: GammaEstimate,
    pub analytic: AnalyticChoice,
    /// Filled when `omega_hat(sqrt(2) t) = 0`: the constraint then rests
    /// on `gamma` alone, which must grow without bound in `k`.
    pub gamma_requirements: Vec<GammaRequirement>,
    pub feasible_k: u64,
    pub checks: Vec<InequalityReport>,
    pub claim_flags: Vec<ClaimFlag>,
    pub notes: Vec<String>,
    pub inconsistent_measurement: bool,
    pub consistent: bool,
}

/// Run the choices of `p` and `k` for one `t` against a candidate.
///
/// Analytic mode reports `p`, the implied floor and the (possibly
/// astronomical) `k`. Feasible mode clamps `k` to `(n+1)/2` and runs the
/// indicator chain, the shift bound, the omega constraint and both transfer
/// bounds with real symmetrization of `F_p` in dimension `n`.
pub fn contradiction_pipeline(
    candidate: &ExtensionCandidate,
    net: &Arc<NetHandle>,
    t: f64,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let t_max = contradiction_t_max();
    if !(t > 0.0 && t < t_max) {
        return Err(Error::invalid(format!("t = {t} outside (0, {t_max})")));
    }
    let p = choose_p(t)?;
    if p < cfg.p0 || p > cfg.p_max {
        return Err(Error::invalid(format!(
            "t = {t} requires p = {p}, outside the truncation {}..={}",
            cfg.p0, cfg.p_max
        )));
    }
    let big_n = net.dim();
    if cfg.n < 2 || cfg.n > big_n {
        return Err(Error::invalid(format!(
            "symmetrizer dimension n = {} must lie in 2..={big_n} (the component dimension)",
            cfg.n
        )));
    }
    let est_cfg = EstimationConfig {
        seed: seed::derive_seed(cfg.estimation.seed, "pipeline", &[t.to_bits()]),
        ..cfg.estimation.clone()
    };
    let slack = est_cfg.slack;
    check_slack(slack)?;
    let (table, gamma) = component_estimates(candidate, net, p, &[SQRT_2 * t], &est_cfg)?;
    let omega_sqrt2t = table.at(SQRT_2 * t)?;
    let omega_one = table.at(1.0)?;
    let product_net = ProductNet::new(net.clone(), cfg.p0, cfg.p_max)?;
    let gamma_product =
        estimate_gamma(candidate, &product_net, est_cfg.gamma_samples, est_cfg.seed)?;
    let analytic = analytic_choice(t, omega_sqrt2t, omega_one, gamma.value, slack)?;
    let mut notes = Vec::new();
    let mut checks = Vec::new();

    let mut gamma_requirements = Vec::new();
    if omega_sqrt2t == 0.0 {
        notes.push(
            "omega_hat(sqrt(2) t) = 0: the constraint is carried by gamma alone, which must grow without bound in k"
                .to_string(),
        );
        let pf = p as f64;
        for j in 0..=6 {
            let k = 10f64.powi(j);
            let lhs = t.powf(2.0 / pf) * (2.0 * k).powf(1.0 / pf);
            let need = ((lhs - 2.0 * omega_one * slack - 4.0) / 2.0).max(0.0);
            gamma_requirements.push(GammaRequirement {
                k,
                gamma_needed: need,
            });
        }
    }
    let inconsistent = omega_sqrt2t == 0.0 && gamma.value == 0.0 && candidate.claims().extends_f;
    if inconsistent {
        notes.push(
            "inconsistent measurement: omega_hat(sqrt(2) t) = 0 and gamma = 0 for a candidate claiming to extend f; \
             no such map exists at infinite truncation, so this points at truncation or sampling effects"
                .to_string(),
        );
    }
    if !analytic.omega_meets_floor && omega_sqrt2t > 0.0 {
        notes.push(format!(
            "omega_hat(sqrt(2) t) = {omega_sqrt2t} is below the implied floor {}; at finite truncation the \
             bounded gamma = {} absorbs the difference",
            analytic.implied_floor, gamma.value
        ));
    }

    // Analytic k instantiated in the omega constraint (k^(1/p) from log10 k).
    if let (Some(l), Some(ratio)) = (analytic.k_log10, analytic.k_ratio) {
        let pf = p as f64;
        let kp = 10f64.powf(l.max(0.0) / pf);
        let lhs = t.powf(2.0 / pf) * 2f64.powf(1.0 / pf) * kp;
        let rhs = kp * omega_sqrt2t * slack + 2.0 * omega_one * slack + 2.0 * gamma.value + 4.0;
        if lhs.is_finite() && rhs.is_finite() {
            checks.push(
                InequalityReport::new(
                    "omega_constraint",
                    lhs,
                    rhs,
                    slack,
                    &[
                        ("p", pf),
                        ("k", 10f64.powf(l.max(0.0)).ceil()),
                        ("k_log10", l),
                        ("t", t),
                        ("gamma", gamma.value),
                        ("omega_1", omega_one),
                        ("omega_sqrt2t", omega_sqrt2t),
                        ("k_ratio", ratio),
                    ],
                )
                .with_mode("analytic"),
            );
        } else {
            notes.push("analytic k too large to instantiate in floating point".to_string());
        }
    }

    let n = cfg.n;
    let k_cap = n.div_ceil(2).min(n - 1).max(1) as u64;
    let feasible_k = match &analytic.k_ceiling {
        Some(s) => s
            .parse::<f64>()
            .map(|k| (k as u64).clamp(1, k_cap))
            .unwrap_or(k_cap),
        None => k_cap,
    };
    let mut scfg = match cfg.mode {
        SymmetrizeMode::Exact => SymmetrizeConfig::exact(n, p),
        SymmetrizeMode::Sampled => SymmetrizeConfig::sampled(
            n,
            p,
            cfg.sample_count,
            seed::derive_seed(est_cfg.seed, "pipeline-symmetrize", &[]),
        ),
    };
    scfg.ambient_dim = Some(big_n);
    let map = candidate.component(p);
    let est = Estimates {
        omega: &table,
        gamma: gamma.value,
        slack,
    };
    let k = feasible_k as usize;
    checks.push(check_indicator_chain(&map, &scfg, k, t, &est)?);
    checks.push(check_shift_bound(&map, &scfg, k, t, &est)?);
    checks.push(
        check_omega_constraint(&table, gamma.value, p, feasible_k, t, slack)?
            .with_input("n", n as f64),
    );
    checks.push(check_transfer_bound(
        &map,
        p,
        &est,
        big_n,
        net.radius(),
        cfg.transfer_samples,
        est_cfg.seed,
    )?);
    if cfg.symmetrized_transfer_samples > 0 {
        checks.push(check_symmetrized_transfer(
            &map,
            &scfg,
            &est,
            net.radius().min(2.0),
            cfg.symmetrized_transfer_samples,
            est_cfg.seed,
        )?);
    }
    for c in checks.iter_mut() {
        c.inputs.entry("t".into()).or_insert(t);
        if c.mode == "feasible" {
            c.mode = match cfg.mode {
                SymmetrizeMode::Exact => "feasible-exact".into(),
                SymmetrizeMode::Sampled => "feasible-sampled".into(),
            };
        }
    }
    for c in checks.iter_mut().filter(|c| !c.holds) {
        if candidate.claims().uniformly_continuous {
            c.note = Some("theorem-consistent rejection evidence".into());
        }
    }

    let claim_flags = cross_check_claims(candidate, Some(&table), Some(&gamma));
    let consistent = analytic.floor_met
        && !inconsistent
        && claim_flags.is_empty()
        && checks.iter().all(|c| c.holds);
    Ok(PipelineReport {
        candidate: describe(candidate),
        t,
        p,
        component_dim: big_n,
        net_radius: net.radius(),
        omega_sqrt2t,
        omega_one,
        omega_smallest_scale: table.estimates[0],
        gamma,
        gamma_product,
        analytic,
        gamma_requirements,
        feasible_k,
        checks,
        claim_flags,
        notes,
        inconsistent_measurement: inconsistent,
        consistent,
    })
}

/// Flat CSV summary: `check, n, p, k, t, lhs, rhs, holds, mode`.
pub fn write_reports_csv<W: Write>(reports: &[InequalityReport], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["check", "n", "p", "k", "t", "lhs", "rhs", "holds", "mode"])?;
    let field = |r: &InequalityReport, key: &str| {
        r.inputs
            .get(key)
            .map(|v| format!("{v}"))
            .unwrap_or_default()
    };
    for r in reports {
        wtr.write_record([
            r.name.clone(),
            field(r, "n"),
            field(r, "p"),
            field(r, "k"),
            field(r, "t"),
            format!("{}", r.lhs),
            format!("{}", r.rhs),
            r.holds.to_string(),
            r.mode.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{natural_extension, nearest_point_extension, zero_extension};
    use crate::maps::MazurMap;
    use crate::net::{build_greedy_net, NetConfig};

    fn table(omega: impl Fn(f64) -> f64) -> ModulusTable {
        ModulusTable::from_fn(
            with_scales(default_scales(), &[1.0, SQRT_2, SQRT_2 * 0.05]),
            omega,
        )
        .unwrap()
    }

    #[test]
    fn choice_arithmetic() {
        assert_eq!(choose_p(0.05).unwrap(), 6);
        let t = (0.5 * (-5f64).exp()).sqrt();
        assert_eq!(choose_p(t).unwrap(), 5);
        assert!((implied_floor(t, 5) - floor_constant()).abs() <= 1e-15);
        assert!((floor_constant() - 0.18393972058572117).abs() < 1e-16);
        assert!((contradiction_t_max() - 0.09569649651041093).abs() < 1e-15);
        assert!(choose_p(0.0).is_err());
        assert!(analytic_choice(0.1, 1.0, 1.0, 0.0, 1.1).is_err());
    }

    #[test]
    fn analytic_k() {
        // ratio 8, exponent 2 ln 200
        let a = analytic_choice(0.05, 1.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(a.p, 6);
        assert_eq!(a.k_ratio, Some(8.0));
        let want = 2.0 * 200f64.ln() * 8f64.log10();
        assert!((a.k_log10.unwrap() - want).abs() < 1e-12);
        assert!(!a.k_overflow);
        let k: f64 = a.k_ceiling.as_ref().unwrap().parse().unwrap();
        assert!((k.log10() - want).abs() < 1e-9);

        let tiny = analytic_choice(0.05, 1e-200, 2.0, 0.0, 1.0).unwrap();
        assert!(tiny.k_overflow && tiny.k_ceiling.is_none());
        let zero = analytic_choice(0.05, 0.0, 0.0, 3.0, 1.0).unwrap();
        assert!(zero.k_ratio.is_none() && !zero.k_overflow);
    }

    #[test]
    fn omega_constraint_examples() {
        // omega(s) = 2 s^(2/3): lhs 2, rhs 2 * 8^(1/3) + 8 = 12
        let w = table(|s| 2.0 * s.powf(2.0 / 3.0));
        let r = check_omega_constraint(&w, 0.0, 3, 4, 1.0, 1.0).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-12);
        assert!((r.rhs - 12.0).abs() < 1e-9);
        assert!(r.holds);

        let big = table(|_| 1e6);
        assert!(
            check_omega_constraint(&big, 0.0, 5, 3, 0.5, 1.1)
                .unwrap()
                .holds
        );

        let w = table(|s| s);
        let r = check_omega_constraint(&w, 0.0, 2, 1, 0.05, 1.1).unwrap();
        assert!(r.holds);
        assert!(check_omega_constraint(&w, 0.0, 2, 1, 5.0, 1.1).is_err());
        assert!(check_omega_constraint(&w, 0.0, 2, 1, 0.5, 0.9).is_err());
    }

    #[test]
    fn mazur_component_regression_anchors() {
        let id = table(|s| s);
        let est = Estimates {
            omega: &id,
            gamma: 0.0,
            slack: 1.0,
        };
        // n = 8, k = 4, p = 3, t = 1: lhs = 8^(1/3) = 2 = middle distance
        let cfg = SymmetrizeConfig::exact(8, 3);
        let mut small = cfg;
        small.exact_budget = 20_000_000;
        let r = check_indicator_chain(&MazurMap(3), &small, 4, 1.0, &est).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-12);
        assert!((r.inputs["middle_distance"] - 2.0).abs() < 1e-10);
        assert!(r.inputs["deviation_a"] < 1e-10 && r.inputs["deviation_b"] < 1e-10);
        assert!(r.holds);

        // p = 2, k = 2, t = 1: |e1 - e3| = sqrt(2), equality at slack 1
        let cfg = SymmetrizeConfig::exact(4, 2);
        let r = check_shift_bound(&MazurMap(2), &cfg, 2, 1.0, &est).unwrap();
        assert!((r.inputs["input_distance"] - SQRT_2).abs() < 1e-15);
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!(r.holds);
        assert!(r.inputs["identity_gap"] < 1e-15);

        let r = check_transfer_bound(&MazurMap(4), 4, &est, 3, 2.0, 200, 1).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = check_symmetrized_transfer(
            &MazurMap(4),
            &SymmetrizeConfig::exact(3, 4),
            &est,
            2.0,
            3,
            1,
        )
        .unwrap();
        assert!(r.lhs < 1e-12);

        assert!(
            check_indicator_chain(&MazurMap(3), &SymmetrizeConfig::exact(4, 3), 3, 1.0, &est)
                .is_err()
        );
        assert!(
            check_shift_bound(&MazurMap(3), &SymmetrizeConfig::exact(4, 3), 4, 1.0, &est).is_err()
        );
    }

    #[test]
    fn offsets_cancel_under_symmetrization() {
        let id = table(|s| s);
        let est = Estimates {
            omega: &id,
            gamma: 0.5,
            slack: 1.1,
        };
        let offset = |x: &[f64]| -> Result<Vec<f64>> {
            let mut v: Vec<f64> = x.iter().map(|&c| mazur_scalar(c, 3)).collect();
            v[0] += 0.5;
            Ok(v)
        };
        let r = check_transfer_bound(&offset, 3, &est, 3, 2.0, 50, 0).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-12 && r.holds);
        let r =
            check_symmetrized_transfer(&offset, &SymmetrizeConfig::exact(3, 3), &est, 2.0, 3, 0)
                .unwrap();
        assert!(r.lhs < 1e-12 && r.rhs > 0.0 && r.holds);
    }

    #[test]
    fn zero_map_chain() {
        let zero_w = table(|_| 0.0);
        let est = Estimates {
            omega: &zero_w,
            gamma: 2.0,
            slack: 1.1,
        };
        let zero = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![0.0; x.len()]) };
        let r = check_indicator_chain(&zero, &SymmetrizeConfig::exact(6, 4), 3, 0.5, &est).unwrap();
        assert_eq!(r.inputs["middle_distance"], 0.0);
        assert!((r.lhs - 0.5f64.sqrt() * 6f64.powf(0.25)).abs() < 1e-12);
        assert!((r.rhs - 8.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_on_builtins() {
        let net = Arc::new(build_greedy_net(&NetConfig::new(4, 2.0, 0)).unwrap());
        let cfg = PipelineConfig {
            n: 4,
            transfer_samples: 200,
            estimation: EstimationConfig {
                modulus_samples: 300,
                gamma_samples: 2_000,
                ..Default::default()
            },
            ..Default::default()
        };
        let nat = contradiction_pipeline(&natural_extension(), &net, 0.05, &cfg).unwrap();
        assert_eq!(nat.p, 6);
        assert_eq!(nat.gamma.value, 0.0);
        assert!(nat.analytic.floor_met);
        assert!(nat.consistent, "{:#?}", nat.checks);
        assert_eq!(nat.feasible_k, 2);

        let zero = contradiction_pipeline(&zero_extension(), &net, 0.05, &cfg).unwrap();
        assert_eq!(zero.omega_sqrt2t, 0.0);
        assert_eq!(zero.gamma_requirements.len(), 7);
        assert!(zero.gamma.value > 1.0);
        assert!(zero.gamma_product.value > 1.5 && zero.gamma_product.value <= 2.0);
        assert!(zero.consistent);

        let near = contradiction_pipeline(&nearest_point_extension(net.clone()), &net, 0.05, &cfg)
            .unwrap();
        assert_eq!(near.gamma.value, 0.0);
        assert!(near.consistent, "{:#?}", near.checks);

        assert!(contradiction_pipeline(&zero_extension(), &net, 0.1, &cfg).is_err());
        let shallow = PipelineConfig {
            p_max: 4,
            ..cfg.clone()
        };
        assert!(contradiction_pipeline(&zero_extension(), &net, 0.05, &shallow).is_err());

        let mut buf = Vec::new();
        write_reports_csv(&nat.checks, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("check,n,p,k,t,lhs,rhs,holds,mode\n"));
    }

    #[test]
    fn grid_is_consistent_for_builtins() {
        let net = Arc::new(build_greedy_net(&NetConfig::new(3, 2.0, 0)).unwrap());
        let cfg = EstimationConfig {
            modulus_samples: 300,
            gamma_samples: 5_000,
            ..Default::default()
        };
        for cand in [
            natural_extension(),
            zero_extension(),
            nearest_point_extension(net.clone()),
        ] {
            let reports =
                omega_constraint_grid(&cand, &net, &[2, 3, 4], &[1, 2], &[0.25, 1.0], &cfg)
                    .unwrap();
            assert_eq!(reports.len(), 12);
            assert!(reports.iter().all(|r| r.holds), "{}", cand.name());
        }
    }
}
