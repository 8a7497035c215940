//! Matrix building blocks: small dense kernels, orthogonal-group elements,
//! and the block-structured containers the solver operates on.

mod block;
mod group;
mod mat;

pub use block::{BlockMat, Edge, ObservationMatrix};
pub use group::{haar_sample, GroupKind, GroupStack, OrthoBlock, ORTHO_TOL};
pub use mat::{det, qr, svd, sym_eigen, Mat, Svd};
