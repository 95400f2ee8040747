//! Maps between coordinate spaces, as consumed by the symmetrizer and the
//! modulus estimator.

use crate::error::{Error, Result};
use crate::mazur::mazur_in_place;
use crate::space::ProductPoint;

/// A map `R^N -> R^N` on raw coordinates. Implementations must be safe to
/// call from several threads.
pub trait VectorMap: Send + Sync {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl<F> VectorMap for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

/// The Mazur map `M_p` on any dimension.
#[derive(Debug, Clone, Copy)]
pub struct MazurMap(pub u32);

impl VectorMap for MazurMap {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        mazur_in_place(&mut out, self.0);
        Ok(out)
    }
}

/// The identity map.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl VectorMap for Identity {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

/// Evaluate and check the result has the input's dimension and is finite.
pub(crate) fn apply_checked(map: &dyn VectorMap, x: &[f64]) -> Result<Vec<f64>> {
    let y = map.apply(x)?;
    if y.len() != x.len() {
        return Err(Error::contract(
            format!(
                "map returned dimension {} for an input of dimension {}",
                y.len(),
                x.len()
            ),
            format!("{x:?}"),
        ));
    }
    if y.iter().any(|c| !c.is_finite()) {
        return Err(Error::contract(
            "map returned a non-finite coordinate",
            format!("{x:?}"),
        ));
    }
    Ok(y)
}

/// A map between truncated product spaces `X -> Y`.
pub trait ProductMap: Send + Sync {
    fn apply_product(&self, x: &ProductPoint) -> Result<ProductPoint>;
}

/// Evaluate and check the output has the input's shape.
pub(crate) fn apply_product_checked(
    map: &dyn ProductMap,
    x: &ProductPoint,
) -> Result<ProductPoint> {
    let y = map.apply_product(x)?;
    if y.shape() != x.shape() {
        return Err(Error::contract(
            format!(
                "map returned shape {:?} for input shape {:?}",
                y.shape(),
                x.shape()
            ),
            format!("{:?}", x.to_flat()),
        ));
    }
    Ok(y)
}
