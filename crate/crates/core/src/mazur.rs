//! The Mazur map `M_p : l_2 -> l_p`, `x_j -> |x_j|^(2/p) sign(x_j)`, its
//! inverse, and checks of its scalar and vector Hölder bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{lq_norm_slice, RealVector};

/// Multiplicative slack used when comparing two sides of an analytic bound.
pub const BOUND_SLACK: f64 = 1e-12;

/// Magnitudes below this are treated as exact zeros.
const ZERO_CUTOFF: f64 = 1e-300;

/// Both sides of an inequality `lhs <= rhs` and whether it held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub(crate) fn new(lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + BOUND_SLACK),
        }
    }
}

fn check_exponent(p: u32) -> Result<()> {
    if p < 2 {
        return Err(Error::invalid(format!(
            "Mazur exponent p must be >= 2, got {p}"
        )));
    }
    Ok(())
}

#[inline]
fn signed_power(x: f64, exponent: f64) -> f64 {
    let a = x.abs();
    if a < ZERO_CUTOFF {
        return 0.0;
    }
    let m = if exponent == 0.5 {
        a.sqrt()
    } else if exponent == 2.0 {
        a * a
    } else {
        (exponent * a.ln()).exp()
    };
    m.copysign(x)
}

/// Scalar Mazur map with exponent `2/p`; `p = 2` is the identity.
#[inline]
pub fn mazur_scalar(x: f64, p: u32) -> f64 {
    if p == 2 {
        x
    } else {
        signed_power(x, 2.0 / p as f64)
    }
}

/// Apply `M_p` in place to a coordinate slice.
pub(crate) fn mazur_in_place(v: &mut [f64], p: u32) {
    if p == 2 {
        return;
    }
    let e = 2.0 / p as f64;
    for c in v.iter_mut() {
        *c = signed_power(*c, e);
    }
}

pub fn mazur(v: &RealVector, p: u32) -> Result<RealVector> {
    check_exponent(p)?;
    let mut coords = v.as_slice().to_vec();
    mazur_in_place(&mut coords, p);
    Ok(RealVector::from_finite(coords))
}

/// `w_j -> |w_j|^(p/2) sign(w_j)`. Results that overflow are rejected.
pub fn mazur_inverse(w: &RealVector, p: u32) -> Result<RealVector> {
    check_exponent(p)?;
    if p == 2 {
        return Ok(w.clone());
    }
    let e = p as f64 / 2.0;
    RealVector::new(w.as_slice().iter().map(|&c| signed_power(c, e)).collect())
}

/// Checks `| M(u) - M(v) |^p <= 2^(p-2) |u - v|^2` for scalars.
pub fn verify_scalar_bound(u: f64, v: f64, p: u32) -> Result<BoundCheck> {
    check_exponent(p)?;
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite scalar input ({u}, {v})"
        )));
    }
    let lhs = (mazur_scalar(u, p) - mazur_scalar(v, p))
        .abs()
        .powi(p as i32);
    let rhs = 2f64.powi(p as i32 - 2) * (u - v) * (u - v);
    Ok(BoundCheck::new(lhs, rhs))
}

/// Checks `|M_p x - M_p y|_p <= 2^(1-2/p) |x - y|_2^(2/p)`.
///
/// The returned `rhs` is the sharp constant `2^(1-2/p)`; the cruder bound
/// with constant 2 follows since `2^(1-2/p) <= 2`.
pub fn verify_holder_bound(x: &RealVector, y: &RealVector, p: u32) -> Result<BoundCheck> {
    check_exponent(p)?;
    if x.dim() != y.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    let mx = mazur(x, p)?;
    let my = mazur(y, p)?;
    let lhs = crate::space::lq_dist_slice(mx.as_slice(), my.as_slice(), p as f64);
    let dist = crate::space::lq_dist_slice(x.as_slice(), y.as_slice(), 2.0);
    let rhs = holder_constant(p) * dist.powf(2.0 / p as f64);
    Ok(BoundCheck::new(lhs, rhs))
}

/// The sharp Hölder constant `2^(1-2/p)` of `M_p`.
pub fn holder_constant(p: u32) -> f64 {
    2f64.powf(1.0 - 2.0 / p as f64)
}

/// `|v|_2^(2/p)`, the `l_p` norm of `M_p v`.
pub fn mazur_norm(v: &RealVector, p: u32) -> f64 {
    lq_norm_slice(v.as_slice(), 2.0).powf(2.0 / p as f64)
}

/// Violation count of one bound at one exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    /// `scalar` or `holder`.
    pub kind: &'static str,
    pub p: u32,
    pub trials: u64,
    pub violations: u64,
    /// Largest `lhs / rhs` seen (pairs with `rhs = 0` excluded).
    pub max_ratio: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    trials: u64,
    violations: u64,
    max_ratio: f64,
}

impl Tally {
    fn add(&mut self, c: BoundCheck) {
        self.trials += 1;
        self.violations += u64::from(!c.holds);
        if c.rhs > 0.0 {
            self.max_ratio = self.max_ratio.max(c.lhs / c.rhs);
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.trials += o.trials;
        self.violations += o.violations;
        self.max_ratio = self.max_ratio.max(o.max_ratio);
    }
}

const SUITE_CHUNK: u64 = 1 << 15;

/// Random trials of both bounds: scalars uniform in `[-100, 100]`, vectors
/// of dimension uniform in `1..=dim_max` with coordinates uniform in
/// `[-10, 10]`, `p` uniform in `2..=p_max`. Rows are ordered by kind then `p`;
/// exponents that drew no trial are omitted.
pub fn run_bound_suite(
    trials: u64,
    p_max: u32,
    dim_max: usize,
    seed: u64,
) -> Result<Vec<SuiteRow>> {
    use rand::Rng as _;
    use rayon::prelude::*;
    check_exponent(p_max)?;
    if dim_max == 0 {
        return Err(Error::invalid("dim_max must be >= 1"));
    }
    let chunks = trials.div_ceil(SUITE_CHUNK);
    let run = |kind: &'static str| -> Result<Vec<Tally>> {
        let parts = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = crate::seed::stream(seed, kind, &[c]);
                let mut tallies = vec![Tally::default(); p_max as usize + 1];
                let count = SUITE_CHUNK.min(trials - c * SUITE_CHUNK);
                for _ in 0..count {
                    let p = rng.random_range(2..=p_max);
                    let check = if kind == "scalar" {
                        let u = rng.random_range(-100.0..=100.0);
                        let v = rng.random_range(-100.0..=100.0);
                        verify_scalar_bound(u, v, p)?
                    } else {
                        let d = rng.random_range(1..=dim_max);
                        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..=10.0)).collect();
                        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..=10.0)).collect();
                        verify_holder_bound(
                            &RealVector::from_finite(x),
                            &RealVector::from_finite(y),
                            p,
                        )?
                    };
                    tallies[p as usize].add(check);
                }
                Ok(tallies)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![Tally::default(); p_max as usize + 1];
        for part in &parts {
            for (t, o) in total.iter_mut().zip(part) {
                t.merge(o);
            }
        }
        Ok(total)
    };
    let mut rows = Vec::new();
    for kind in ["scalar", "holder"] {
        for (p, t) in run(kind)?.into_iter().enumerate() {
            if t.trials > 0 {
                rows.push(SuiteRow {
                    kind,
                    p: p as u32,
                    trials: t.trials,
                    violations: t.violations,
                    max_ratio: t.max_ratio,
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with columns `kind, p, trials, violations, max_ratio`.
pub fn write_suite_csv<W: std::io::Write>(rows: &[SuiteRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["kind", "p", "trials", "violations", "max_ratio"])?;
    for r in rows {
        wtr.write_record([
            r.kind.to_string(),
            r.p.to_string(),
            r.trials.to_string(),
            r.violations.to_string(),
            format!("{}", r.max_ratio),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{lq_norm, NormExponent};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rv(c: &[f64]) -> RealVector {
        RealVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn mazur_examples() {
        assert_eq!(mazur(&rv(&[4.0, 0.0]), 4).unwrap(), rv(&[2.0, 0.0]));
        let v = rv(&[-3.5, 0.25, 7.0]);
        assert_eq!(mazur(&v, 2).unwrap(), v);
        let m = mazur(&rv(&[-1.0, 1.0 / 16.0]), 8).unwrap();
        assert_relative_eq!(m.as_slice()[0], -1.0);
        assert_relative_eq!(m.as_slice()[1], 0.5, max_relative = 1e-15);
        assert!(matches!(mazur(&v, 1), Err(Error::InvalidInput(_))));
        assert_eq!(mazur(&rv(&[1e-310, -0.0]), 3).unwrap(), rv(&[0.0, 0.0]));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(mazur_inverse(&rv(&[2.0, 0.0]), 4).unwrap(), rv(&[4.0, 0.0]));
        assert_eq!(mazur_inverse(&rv(&[0.0, 0.0]), 7).unwrap(), rv(&[0.0, 0.0]));
        assert!(mazur_inverse(&rv(&[1.0]), 0).is_err());
    }

    #[test]
    fn scalar_bound_examples() {
        let c = verify_scalar_bound(1.0, -1.0, 2).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (4.0, 4.0, true));
        let c = verify_scalar_bound(1.0, -1.0, 4).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (16.0, 16.0, true));
        let c = verify_scalar_bound(3.7, 3.7, 9).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.0, 0.0, true));
        assert!(verify_scalar_bound(f64::NAN, 1.0, 3).is_err());
        assert!(verify_scalar_bound(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn holder_bound_examples() {
        // x = e1, y = e2, p = 4: both sides evaluated by hand
        let c = verify_holder_bound(&rv(&[1.0, 0.0]), &rv(&[0.0, 1.0]), 4).unwrap();
        assert_relative_eq!(c.lhs, 2f64.powf(0.25), max_relative = 1e-15);
        assert_relative_eq!(c.rhs, 2f64.powf(0.75), max_relative = 1e-15);
        assert!(c.holds);
        assert_relative_eq!(c.lhs, 1.189207115002721, max_relative = 1e-12);
        assert_relative_eq!(c.rhs, 1.681792830507429, max_relative = 1e-12);

        let x = rv(&[0.3, -2.0, 5.0]);
        let c = verify_holder_bound(&x, &x, 6).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.holds);

        let y = rv(&[1.0, 1.0, -1.0]);
        let c = verify_holder_bound(&x, &y, 2).unwrap();
        assert_eq!(c.lhs, c.rhs);
        assert_relative_eq!(c.lhs, lq_norm(&x.sub(&y).unwrap(), NormExponent::TWO));

        assert!(verify_holder_bound(&x, &rv(&[1.0]), 3).is_err());
    }

    #[test]
    fn suite_is_clean_and_reproducible() {
        let rows = run_bound_suite(50_000, 8, 16, 3).unwrap();
        assert_eq!(rows.len(), 14);
        assert_eq!(rows.iter().map(|r| r.trials).sum::<u64>(), 100_000);
        assert!(rows
            .iter()
            .all(|r| r.violations == 0 && r.max_ratio <= 1.0 + 1e-12));
        assert_eq!(rows, run_bound_suite(50_000, 8, 16, 3).unwrap());
        assert!(run_bound_suite(0, 8, 16, 3).unwrap().is_empty());
        assert!(run_bound_suite(10, 1, 16, 3).is_err());
        assert!(run_bound_suite(10, 4, 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn norm_identity(v in prop::collection::vec(-100.0f64..100.0, 1..32), p in 2u32..=64) {
            let v = rv(&v);
            let lhs = lq_norm(&mazur(&v, p).unwrap(), NormExponent::index(p));
            let rhs = mazur_norm(&v, p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn round_trip(v in prop::collection::vec(-1e3f64..1e3, 0..16), p in 2u32..=64) {
            let v = rv(&v);
            let back = mazur_inverse(&mazur(&v, p).unwrap(), p).unwrap();
            for (a, b) in back.as_slice().iter().zip(v.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
            }
        }

        #[test]
        fn scalar_bound_holds(u in -100.0f64..100.0, v in -100.0f64..100.0, p in 2u32..=64) {
            prop_assert!(verify_scalar_bound(u, v, p).unwrap().holds);
        }

        #[test]
        fn odd_and_sign_preserving(v in prop::collection::vec(-10.0f64..10.0, 1..10), p in 2u32..=20) {
            let v = rv(&v);
            let m = mazur(&v, p).unwrap();
            let neg = mazur(&v.scale(-1.0), p).unwrap();
            prop_assert_eq!(neg, m.scale(-1.0));
            for (a, b) in m.as_slice().iter().zip(v.as_slice()) {
                prop_assert!(a.signum() == b.signum() || *b == 0.0);
            }
        }
    }
}
