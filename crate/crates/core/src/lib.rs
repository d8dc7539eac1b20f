//! Hasse subgroups of projective matrix groups over prime fields, and
//! dihedral mod-lambda images of weight-2 newforms with quadratic coefficient fields.

pub mod error;
pub mod ffield;
pub mod matgrp;
pub mod hasse;
pub mod dchar;
pub mod nfdata;

pub use error::{Error, Result};
pub mod lmfdb;
pub mod pipeline;
pub mod cli;

/// Compact JSON with object keys sorted.
pub fn to_canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_value(value)?.to_string())
}
