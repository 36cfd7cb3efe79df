//! Sparse principal component analysis by generalized power iteration.
//!
//! Sparse PCA is rewritten as the maximization of a convex function over
//! the unit sphere (one component) or the Stiefel manifold (a block of
//! components). A gradient-type scheme climbs that function; the sparsity
//! pattern is read off the final iterate and the active loadings are then
//! filled in.

pub mod data;
pub mod error;
pub mod gradient_scheme;
pub mod harness;
pub mod numerics;
pub mod par;
pub mod pattern;
pub mod postprocess;
pub mod spca_block;
pub mod spca_single;

pub use data::DataMatrix;
pub use error::{Result, SpcaError};
pub use gradient_scheme::{IterateTrace, StopRule, Termination};
pub use par::Parallelism;
pub use pattern::SparsityPattern;
pub use spca_block::{solve_block, BlockConfig, BlockResult};
pub use spca_single::{solve_single, PenaltyConfig, PenaltyKind, SingleResult};
