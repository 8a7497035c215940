//! Orthogonal-group elements: tagged blocks, stacks of them, and Haar
//! sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mat::{det, qr, svd, Mat};
use crate::error::{invalid, Result};

/// Tolerance for the orthonormality residual `||Q^T Q - I||_F` of a block.
pub const ORTHO_TOL: f64 = 1e-10;

/// Which compact group the rotation blocks live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// O(d): orthogonal matrices, determinant either sign.
    Orthogonal(usize),
    /// SO(d): orthogonal matrices with determinant +1.
    SpecialOrthogonal(usize),
}

impl GroupKind {
    pub fn dim(&self) -> usize {
        match *self {
            GroupKind::Orthogonal(d) | GroupKind::SpecialOrthogonal(d) => d,
        }
    }

    pub fn is_special(&self) -> bool {
        matches!(self, GroupKind::SpecialOrthogonal(_))
    }

    /// Same group with the determinant restriction dropped.
    pub fn relaxed(&self) -> GroupKind {
        GroupKind::Orthogonal(self.dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(invalid("block dimension d must be at least 1"));
        }
        Ok(())
    }
}

impl std::fmt::Display for GroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupKind::Orthogonal(d) => write!(f, "O({d})"),
            GroupKind::SpecialOrthogonal(d) => write!(f, "SO({d})"),
        }
    }
}

/// A single d x d group element.
///
/// Construction re-orthonormalizes the input (nearest orthogonal matrix), so a
/// held block always satisfies `||Q^T Q - I||_F <= ORTHO_TOL`. A block tagged
/// `SpecialOrthogonal` additionally has determinant +1 within the same
/// tolerance; inputs violating that are rejected rather than silently flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBlock {
    mat: Mat,
    kind: GroupKind,
}

impl OrthoBlock {
    pub fn new(mat: Mat, kind: GroupKind) -> Result<Self> {
        kind.validate()?;
        if !mat.is_square() || mat.rows() != kind.dim() {
            return Err(invalid(format!(
                "block shape {}x{} does not match {kind}",
                mat.rows(),
                mat.cols()
            )));
        }
        if !mat.is_finite() {
            return Err(invalid("block has non-finite entries"));
        }
        let s = svd(&mat)?;
        let q = s.u.mul_nt(&s.v);
        if kind.is_special() {
            let dq = det(&q)?;
            if (dq - 1.0).abs() > ORTHO_TOL {
                return Err(invalid(format!(
                    "block tagged {kind} has determinant {dq:.3}, expected +1"
                )));
            }
        }
        Ok(OrthoBlock { mat: q, kind })
    }

    /// Wrap a matrix that is orthogonal by construction (QR output, product of
    /// group elements, Procrustes projection) without re-factorizing it.
    pub(crate) fn from_orthogonal_unchecked(mat: Mat, kind: GroupKind) -> Self {
        debug_assert!(mat.mul_nt(&mat).sub(&Mat::identity(mat.rows())).frob_norm() <= ORTHO_TOL);
        OrthoBlock { mat, kind }
    }

    /// Wrap a matrix after checking the group invariants, keeping its entries
    /// bit-for-bit (deserialization needs exact round-trips, so the usual
    /// re-orthonormalization is skipped).
    pub(crate) fn from_validated(mat: Mat, kind: GroupKind) -> Result<Self> {
        kind.validate()?;
        if !mat.is_square() || mat.rows() != kind.dim() || !mat.is_finite() {
            return Err(invalid(format!("invalid {kind} block")));
        }
        let resid = mat.mul_nt(&mat).sub(&Mat::identity(mat.rows())).frob_norm();
        if resid > ORTHO_TOL {
            return Err(invalid(format!("block is not orthogonal (residual {resid:.2e})")));
        }
        if kind.is_special() && (det(&mat)? - 1.0).abs() > ORTHO_TOL {
            return Err(invalid(format!("block tagged {kind} does not have determinant +1")));
        }
        Ok(OrthoBlock { mat, kind })
    }

    pub fn identity(kind: GroupKind) -> Self {
        OrthoBlock { mat: Mat::identity(kind.dim()), kind }
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }
}

/// A length-n stack of group elements with uniform kind and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStack {
    blocks: Vec<OrthoBlock>,
}

impl GroupStack {
    pub fn new(blocks: Vec<OrthoBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("a group stack needs at least one block"));
        }
        let kind = blocks[0].kind();
        if blocks.iter().any(|b| b.kind() != kind) {
            return Err(invalid("group stack blocks must share one group kind"));
        }
        Ok(GroupStack { blocks })
    }

    pub fn identity(n: usize, kind: GroupKind) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a group stack needs at least one block"));
        }
        Ok(GroupStack { blocks: vec![OrthoBlock::identity(kind); n] })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn kind(&self) -> GroupKind {
        self.blocks[0].kind()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn block(&self, i: usize) -> &OrthoBlock {
        &self.blocks[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &OrthoBlock> {
        self.blocks.iter()
    }
}

/// Draw one element of the group under its invariant (Haar) distribution.
///
/// A matrix of i.i.d. standard normals is QR-factorized and the columns of Q
/// are sign-corrected so the R diagonal is nonnegative, which removes the sign
/// ambiguity that would otherwise bias the factorization. For SO(d) a draw
/// with determinant -1 has its last column negated, which maps the reflection
/// coset onto SO(d) measure-preservingly.
pub fn haar_sample(kind: GroupKind, rng: &mut impl Rng) -> Result<OrthoBlock> {
    kind.validate()?;
    let d = kind.dim();
    let g = Mat::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let (mut q, r) = qr(&g)?;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if kind.is_special() && det(&q)? < 0.0 {
        for i in 0..d {
            q[(i, d - 1)] = -q[(i, d - 1)];
        }
    }
    Ok(OrthoBlock::from_orthogonal_unchecked(q, kind))
}
