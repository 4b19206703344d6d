//! Lattice bookkeeping and the sparse linear algebra behind the Carleman
//! operators.
//!
//! Every flat state vector in the crate uses the same layout: the component
//! index varies fastest within a site, and sites are ordered row-major over
//! `(x1, x2)` (see [`Grid::site`]).

mod block;
mod condition;
mod csr;
mod grid;
mod operator;
mod stencil;

pub use block::SparseBlock;
pub use condition::{
    condition_number, condition_number_dense, ConditionEstimate, ConditionMethod, ConditionOptions,
};
pub use csr::CsrMatrix;
pub use grid::{Grid, Offset};
pub use operator::{kron_compress, BlockSparseOperator, OffsetTerm, SiteBlocks};
pub use stencil::{central_difference, Axis, Stencil};
