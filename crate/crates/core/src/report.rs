//! JSON and CSV emission with stable formatting.

use serde::Serialize;

use crate::error::Result;

/// Serialize with object keys sorted (via `serde_json::Value`, whose maps
/// are ordered).
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// Pretty variant of [`to_sorted_json`].
pub fn to_sorted_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)?)
}
