//! Energy disaggregation with grouped non-negative dictionaries.
//!
//! The pipeline: ingest per-device current/power recordings into
//! midnight-aligned daily windows ([`dataio`]), stack training days into a
//! grouped dictionary ([`signal`]), then explain each unseen aggregate
//! window as a non-negative mixture of dictionary columns ([`solvers`]).
//! The distinctive solver softly constrains every device's activation sum
//! to one, which resolves the attribution ambiguity created by strongly
//! correlated device profiles. [`metrics`] scores estimates against ground
//! truth and flags devices that were plausibly OFF.
//!
//! Everything funnels into one active-set NNLS kernel ([`nnls`]) operating
//! on normal equations, so the per-window work shares a single Gram matrix.

pub mod dataio;
pub mod error;
pub mod metrics;
pub mod nnls;
pub mod signal;
pub mod solvers;

pub use error::{Error, Result};
