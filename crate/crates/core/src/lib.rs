//! Classification of planar monomials `X^k` over finite fields of odd
//! characteristic.
//!
//! The pipeline narrows `k` over `[2, q-2]` with cheap necessary conditions
//! ([`sieve`]), runs a randomised collision search on `Δ_k(x) = (x+1)^k - x^k`
//! for each survivor and exhaustively verifies any exponent that survives it
//! ([`detect`]). Results are grouped by graph-equivalence class and compared
//! with the known families ([`catalog`]). [`runner`] adds the classification
//! cache, resumable verdict logs and report formatting used by the CLI.

pub mod catalog;
pub mod detect;
pub mod error;
pub mod ff;
pub mod runner;
pub mod sieve;

pub use catalog::{FieldClassification, Method, SearchParams};
pub use detect::{ExponentVerdict, Outcome, Witness};
pub use error::{Error, Result};
pub use ff::{Elem, FieldCtx, PowerMap};
pub use sieve::SubfieldRuleSet;
