//! A finite-truncation laboratory for Lipschitz maps on 1-nets.
//!
//! The crate builds the sup-sums `X = (⊕ l_2)_∞` and `Y = (⊕ l_p)_∞` at
//! finite truncation, the Mazur maps `M_p`, greedy 1-nets with the map
//! `f = (M_p)_p` on their product, the hyperoctahedral symmetrizer `G_p^n`,
//! empirical moduli of continuity, and a verifier that instantiates every
//! inequality linking them.

pub mod error;
pub mod extension;
pub mod maps;
pub mod mazur;
pub mod modulus;
pub mod net;
pub mod report;
pub mod seed;
pub mod space;
pub mod summation;
pub mod symmetrize;
pub mod verifier;

pub use error::{Error, Result};
pub use space::{NormExponent, ProductPoint, ProductShape, RealVector, Side};
