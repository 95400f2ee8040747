//! Finite-dimensional vectors, `l_q` norms and sup-product points.
//!
//! The spaces `X` (sup-sum of copies of `l_2`) and `Y` (sup-sum of `l_p`,
//! `p = p0..=P`) are represented by [`ProductPoint`]s whose components are
//! truncated to a common dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real coordinate vector. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(j) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "coordinate {j} is not finite ({})",
                coords[j]
            )));
        }
        Ok(RealVector(coords))
    }

    /// Wraps coordinates already known to be finite.
    pub(crate) fn from_finite(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        RealVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        RealVector(vec![0.0; dim])
    }

    /// The standard basis vector `e_{index}` scaled by `scale` (0-based index).
    pub fn basis(dim: usize, index: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = scale;
        RealVector(v)
    }

    /// `t * 1_A` for a set of 0-based indices.
    pub fn indicator(dim: usize, support: &[usize], t: f64) -> Self {
        let mut v = vec![0.0; dim];
        for &i in support {
            v[i] = t;
        }
        RealVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn sub(&self, other: &RealVector) -> Result<RealVector> {
        same_dim(self, other)?;
        Ok(RealVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &RealVector) -> Result<RealVector> {
        same_dim(self, other)?;
        Ok(RealVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> RealVector {
        RealVector(self.0.iter().map(|c| c * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        RealVector::new(coords)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

fn same_dim(a: &RealVector, b: &RealVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// A norm exponent `q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NormExponent(f64);

impl NormExponent {
    pub const TWO: NormExponent = NormExponent(2.0);

    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::invalid(format!(
                "norm exponent must be >= 1, got {q}"
            )));
        }
        Ok(NormExponent(q))
    }

    /// The exponent of `l_p` for an integer index `p >= 2`.
    pub fn index(p: u32) -> Self {
        NormExponent(p as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `(sum_j |v_j|^q)^(1/q)`.
pub fn lq_norm(v: &RealVector, q: NormExponent) -> f64 {
    lq_norm_slice(v.as_slice(), q.value())
}

/// Norm of a raw coordinate slice. Coordinates are rescaled by their largest
/// magnitude so high exponents neither overflow nor underflow.
pub(crate) fn lq_norm_slice(v: &[f64], q: f64) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if q == 2.0 {
        let s: f64 = v.iter().map(|c| (c / scale) * (c / scale)).sum();
        return scale * s.sqrt();
    }
    if q == 1.0 {
        return v.iter().map(|c| c.abs()).sum();
    }
    let int_q = q.fract() == 0.0 && q <= 256.0;
    let s: f64 = v
        .iter()
        .map(|c| {
            let r = c.abs() / scale;
            if int_q {
                r.powi(q as i32)
            } else {
                r.powf(q)
            }
        })
        .sum();
    scale * s.powf(1.0 / q)
}

/// `l_q` distance between two equal-length slices.
pub(crate) fn lq_dist_slice(a: &[f64], b: &[f64], q: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    lq_norm_slice(&diff, q)
}

/// Zero-pad `v` to `target_dim` coordinates (the canonical embedding `J_n`).
pub fn canonical_embed(v: &RealVector, target_dim: usize) -> Result<RealVector> {
    if target_dim < v.dim() {
        return Err(Error::invalid(format!(
            "cannot embed dimension {} into {target_dim}",
            v.dim()
        )));
    }
    let mut coords = v.0.clone();
    coords.resize(target_dim, 0.0);
    Ok(RealVector(coords))
}

/// Keep the first `target_dim` coordinates (the canonical projection `Q_n`).
pub fn canonical_project(v: &RealVector, target_dim: usize) -> Result<RealVector> {
    if target_dim > v.dim() {
        return Err(Error::invalid(format!(
            "cannot project dimension {} onto {target_dim}",
            v.dim()
        )));
    }
    Ok(RealVector(v.0[..target_dim].to_vec()))
}

/// Index range and component dimension of a truncated product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductShape {
    pub p0: u32,
    pub p_max: u32,
    pub component_dim: usize,
}

impl ProductShape {
    pub fn new(p0: u32, p_max: u32, component_dim: usize) -> Result<Self> {
        if p0 < 2 {
            return Err(Error::invalid(format!("p0 must be >= 2, got {p0}")));
        }
        if p_max < p0 {
            return Err(Error::invalid(format!("P = {p_max} is below p0 = {p0}")));
        }
        Ok(ProductShape {
            p0,
            p_max,
            component_dim,
        })
    }

    pub fn num_components(&self) -> usize {
        (self.p_max - self.p0 + 1) as usize
    }

    pub fn exponents(&self) -> impl Iterator<Item = u32> {
        self.p0..=self.p_max
    }
}

/// Which side of the construction a product point lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `X`: every component measured in `l_2`.
    X,
    /// `Y`: component `p` measured in `l_p`.
    Y,
}

/// A point of the truncated `X` or `Y`: one vector per `p in p0..=P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    shape: ProductShape,
    components: Vec<RealVector>,
}

impl ProductPoint {
    pub fn new(shape: ProductShape, components: Vec<RealVector>) -> Result<Self> {
        if components.len() != shape.num_components() {
            return Err(Error::invalid(format!(
                "expected {} components, got {}",
                shape.num_components(),
                components.len()
            )));
        }
        if let Some(c) = components.iter().find(|c| c.dim() != shape.component_dim) {
            return Err(Error::invalid(format!(
                "component of dimension {} in a product of dimension {}",
                c.dim(),
                shape.component_dim
            )));
        }
        Ok(ProductPoint { shape, components })
    }

    pub fn zeros(shape: ProductShape) -> Self {
        ProductPoint {
            shape,
            components: vec![RealVector::zeros(shape.component_dim); shape.num_components()],
        }
    }

    pub fn shape(&self) -> ProductShape {
        self.shape
    }

    pub fn components(&self) -> &[RealVector] {
        &self.components
    }

    /// The component with exponent index `p`.
    pub fn component(&self, p: u32) -> Option<&RealVector> {
        if p < self.shape.p0 || p > self.shape.p_max {
            return None;
        }
        self.components.get((p - self.shape.p0) as usize)
    }

    /// Components paired with their exponent index, ascending in `p`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &RealVector)> {
        self.shape.exponents().zip(&self.components)
    }

    /// Flat coordinates: `p` ascending, coordinates in index order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| c.as_slice().iter().copied())
            .collect()
    }

    pub fn from_flat(shape: ProductShape, flat: &[f64]) -> Result<Self> {
        let n = shape.component_dim;
        if flat.len() != n * shape.num_components() {
            return Err(Error::invalid(format!(
                "flat product point has {} values, expected {}",
                flat.len(),
                n * shape.num_components()
            )));
        }
        let components = if n == 0 {
            vec![RealVector::zeros(0); shape.num_components()]
        } else {
            flat.chunks(n)
                .map(|c| RealVector::new(c.to_vec()))
                .collect::<Result<Vec<_>>>()?
        };
        ProductPoint::new(shape, components)
    }
}

impl Serialize for ProductPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_flat().serialize(s)
    }
}

/// The sup-product distance: `max_p |a_p - b_p|` with the `l_2` norm on the
/// `X` side and the `l_p` norm on the `Y` side.
pub fn sup_product_distance(a: &ProductPoint, b: &ProductPoint, side: Side) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::invalid(format!(
            "product shape mismatch: {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    Ok(a.iter()
        .zip(&b.components)
        .map(|((p, x), y)| {
            let q = match side {
                Side::X => 2.0,
                Side::Y => p as f64,
            };
            lq_dist_slice(x.as_slice(), y.as_slice(), q)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rv(c: &[f64]) -> RealVector {
        RealVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_relative_eq!(lq_norm(&rv(&[3.0, 4.0]), NormExponent::TWO), 5.0);
        assert_relative_eq!(
            lq_norm(&rv(&[1.0, -1.0]), NormExponent::new(4.0).unwrap()),
            2f64.powf(0.25),
            max_relative = 1e-15
        );
        for q in [1.0, 2.0, 3.5, 64.0] {
            assert_eq!(
                lq_norm(&rv(&[0.0, 0.0, 0.0]), NormExponent::new(q).unwrap()),
                0.0
            );
        }
        assert_eq!(lq_norm(&RealVector::zeros(0), NormExponent::TWO), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            RealVector::new(vec![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(RealVector::new(vec![f64::INFINITY]).is_err());
        assert!(NormExponent::new(0.5).is_err());
        assert!(NormExponent::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<RealVector>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn large_exponents_do_not_overflow() {
        let v = rv(&[1e200, 1e200]);
        let n = lq_norm(&v, NormExponent::new(64.0).unwrap());
        assert_relative_eq!(n, 1e200 * 2f64.powf(1.0 / 64.0), max_relative = 1e-14);
    }

    #[test]
    fn product_distance_examples() {
        let shape = ProductShape::new(2, 3, 2).unwrap();
        let zero = ProductPoint::zeros(shape);
        assert_eq!(sup_product_distance(&zero, &zero, Side::X).unwrap(), 0.0);

        let e1 = ProductPoint::new(shape, vec![rv(&[1.0, 0.0]), rv(&[1.0, 0.0])]).unwrap();
        assert_eq!(sup_product_distance(&e1, &zero, Side::X).unwrap(), 1.0);

        let a = ProductPoint::new(shape, vec![rv(&[1.0, 0.0]), rv(&[1.0, 1.0])]).unwrap();
        assert_relative_eq!(
            sup_product_distance(&a, &zero, Side::X).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        // Y side measures the p=3 component in l_3
        assert_relative_eq!(
            sup_product_distance(&a, &zero, Side::Y).unwrap(),
            2f64.powf(1.0 / 3.0),
            max_relative = 1e-15
        );

        let other = ProductPoint::zeros(ProductShape::new(2, 4, 2).unwrap());
        assert!(sup_product_distance(&a, &other, Side::X).is_err());
    }

    #[test]
    fn product_shape_validation() {
        assert!(ProductShape::new(1, 3, 2).is_err());
        assert!(ProductShape::new(4, 3, 2).is_err());
        let shape = ProductShape::new(2, 2, 3).unwrap();
        assert!(ProductPoint::new(shape, vec![rv(&[1.0])]).is_err());
        assert!(ProductPoint::new(shape, vec![]).is_err());
    }

    #[test]
    fn embed_and_project() {
        assert_eq!(
            canonical_embed(&rv(&[1.0, 2.0]), 4).unwrap(),
            rv(&[1.0, 2.0, 0.0, 0.0])
        );
        assert_eq!(
            canonical_embed(&rv(&[1.0, 2.0]), 2).unwrap(),
            rv(&[1.0, 2.0])
        );
        assert!(canonical_embed(&rv(&[1.0, 2.0]), 1).is_err());

        assert_eq!(
            canonical_project(&rv(&[1.0, 2.0, 3.0]), 2).unwrap(),
            rv(&[1.0, 2.0])
        );
        let back =
            canonical_embed(&canonical_project(&rv(&[1.0, 2.0, 0.0]), 2).unwrap(), 3).unwrap();
        assert_eq!(back, rv(&[1.0, 2.0, 0.0]));
        let empty = canonical_project(&rv(&[1.0, 2.0]), 0).unwrap();
        assert_eq!(empty.dim(), 0);
        assert_eq!(lq_norm(&empty, NormExponent::TWO), 0.0);
        assert!(canonical_project(&rv(&[1.0]), 2).is_err());
    }

    #[test]
    fn flat_layout_is_p_ascending() {
        let shape = ProductShape::new(3, 4, 2).unwrap();
        let pt = ProductPoint::new(shape, vec![rv(&[1.0, 2.0]), rv(&[3.0, 4.0])]).unwrap();
        assert_eq!(serde_json::to_string(&pt).unwrap(), "[1.0,2.0,3.0,4.0]");
        assert_eq!(ProductPoint::from_flat(shape, &pt.to_flat()).unwrap(), pt);
        assert_eq!(pt.component(4).unwrap(), &rv(&[3.0, 4.0]));
        assert!(pt.component(2).is_none());
        assert!(ProductPoint::from_flat(shape, &[1.0]).is_err());
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, dim)
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (0usize..12).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), vec_strategy(d)))
    }

    proptest! {
        #[test]
        fn norm_axioms((a, b, _c) in pair(), q in 1.0f64..20.0, lambda in -10.0f64..10.0) {
            let q = NormExponent::new(q).unwrap();
            let (a, b) = (rv(&a), rv(&b));
            let na = lq_norm(&a, q);
            let nb = lq_norm(&b, q);
            let nab = lq_norm(&a.add(&b).unwrap(), q);
            prop_assert!(nab <= (na + nb) * (1.0 + 1e-12) + 1e-300);
            let scaled = lq_norm(&a.scale(lambda), q);
            prop_assert!((scaled - lambda.abs() * na).abs() <= 1e-12 * (1.0 + lambda.abs() * na));
            prop_assert_eq!(lq_norm(&a.scale(-1.0), q), na);
        }

        #[test]
        fn norms_decrease_in_exponent(v in vec_strategy(9), q in 1.0f64..30.0, dq in 0.0f64..30.0) {
            let v = rv(&v);
            let small = lq_norm(&v, NormExponent::new(q).unwrap());
            let large = lq_norm(&v, NormExponent::new(q + dq).unwrap());
            prop_assert!(large <= small * (1.0 + 1e-12));
        }

        #[test]
        fn embedding_preserves_norms(v in vec_strategy(6), extra in 0usize..5, q in 1.0f64..10.0) {
            let v = rv(&v);
            let q = NormExponent::new(q).unwrap();
            let e = canonical_embed(&v, v.dim() + extra).unwrap();
            prop_assert_eq!(lq_norm(&e, q), lq_norm(&v, q));
            prop_assert_eq!(canonical_project(&e, v.dim()).unwrap(), v);
        }

        #[test]
        fn product_distance_is_a_metric(flat in prop::collection::vec(-5.0f64..5.0, 18)) {
            let shape = ProductShape::new(2, 4, 2).unwrap();
            let a = ProductPoint::from_flat(shape, &flat[0..6]).unwrap();
            let b = ProductPoint::from_flat(shape, &flat[6..12]).unwrap();
            let c = ProductPoint::from_flat(shape, &flat[12..18]).unwrap();
            for side in [Side::X, Side::Y] {
                let ab = sup_product_distance(&a, &b, side).unwrap();
                let ba = sup_product_distance(&b, &a, side).unwrap();
                let bc = sup_product_distance(&b, &c, side).unwrap();
                let ac = sup_product_distance(&a, &c, side).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!(ac <= (ab + bc) * (1.0 + 1e-12));
            }
        }
    }
}
