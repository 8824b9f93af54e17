//! Explicit, non-asymptotic distortion guarantees for sparse random sign
//! embeddings (Johnson-Lindenstrauss style), together with the embeddings
//! themselves and the verification machinery for the bounds.
//!
//! The crate is organized around the pipeline
//! `moment_engine -> row_bound -> tail_bounds`: exact rational moments of
//! sums of symmetric trinary variables feed a per-row moment bound, which is
//! aggregated into a whole-error moment bound and finally converted into
//! distortion/confidence statements. The `embedding` module samples and
//! applies the matrices, `oracle` provides exact enumeration and Monte-Carlo
//! ground truth, and `data_io` profiles dispersion and empirical distortion
//! on real datasets.

pub mod data_io;
pub mod embedding;
pub mod error;
pub mod moment_engine;
pub mod oracle;
pub mod rng;
pub mod row_bound;
pub mod tail_bounds;

pub use error::{Error, Result};
pub use moment_engine::Rational;
pub use row_bound::BoundParams;
