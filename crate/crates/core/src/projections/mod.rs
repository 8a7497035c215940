//! Projection of an arbitrary block matrix onto the feasible set of joint
//! states: balanced cluster labels plus one orthogonal block per node.
//!
//! The projection maximizes the inner product with the input and factors into
//! three stages. Blockwise nuclear norms score every node/cluster pair, a
//! balanced assignment picks the labels, and a Procrustes step turns each
//! winning block into a group element. Each stage reports when its maximizer
//! was not unique, since downstream equivariance arguments only hold away
//! from those ties.

mod assign;

pub(crate) use assign::solve_balanced_assignment;

use crate::blockmat::{det, svd, BlockMat, GroupKind, GroupStack, Mat, OrthoBlock};
use crate::error::{invalid, Result};
use crate::sgbm::{assemble_state, JointState};

/// Sum of singular values of a square matrix.
pub fn nuclear_norm(x: &Mat) -> Result<f64> {
    Ok(svd(x)?.sigma.iter().sum())
}

/// Nearest group element to a square matrix, with a uniqueness flag.
#[derive(Debug, Clone)]
pub struct OrthoProjection {
    pub block: OrthoBlock,
    /// True when the maximizer is not unique at working precision, e.g. for
    /// rank-deficient input, or for a determinant flip across a tied pair of
    /// trailing singular values.
    pub non_unique: bool,
}

/// Projects `x` onto `kind`, maximizing `<x, r>` over group elements `r`.
///
/// For the full orthogonal group this is the polar factor `u * v^T` of the
/// SVD `x = u * sigma * v^T`. For the special group the last column of `u` is
/// negated first whenever `det(u v^T) < 0`, which sacrifices the smallest
/// singular direction to restore determinant one.
///
/// A zero matrix projects to the identity, flagged as non-unique.
pub fn project_orthogonal(x: &Mat, kind: GroupKind) -> Result<OrthoProjection> {
    kind.validate()?;
    let d = kind.dim();
    if x.rows() != d || x.cols() != d {
        return Err(invalid(format!(
            "projection onto {kind} expects a {d}x{d} matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let dec = svd(x)?;
    let sig = &dec.sigma;
    let tol = 1e-12 * sig[0].max(1.0);

    let (mat, non_unique) = if !kind.is_special() {
        (dec.u.mul_nt(&dec.v), sig[d - 1] <= tol)
    } else if d == 1 {
        // SO(1) is the single element [1]; the projection is always unique.
        (Mat::identity(1), false)
    } else {
        let polar = dec.u.mul_nt(&dec.v);
        let flip = det(&polar)? < 0.0;
        let mat = if flip {
            let mut u = dec.u.clone();
            for i in 0..d {
                u[(i, d - 1)] = -u[(i, d - 1)];
            }
            u.mul_nt(&dec.v)
        } else {
            polar
        };
        // Ambiguous when the two trailing directions are interchangeable: a
        // flip can land on either of a tied pair, and a doubly rank-deficient
        // input leaves a free rotation plane.
        let non_unique = sig[d - 2] <= tol || (flip && sig[d - 2] - sig[d - 1] <= tol);
        (mat, non_unique)
    };
    Ok(OrthoProjection { block: OrthoBlock::from_orthogonal_unchecked(mat, kind), non_unique })
}

/// Best alignment score `max_r <s, r>` over group elements `r`, without
/// materializing the maximizer. Equals the nuclear norm for the full group;
/// the special group pays twice the smallest singular value whenever the
/// polar factor has negative determinant, which can make the result negative.
pub(crate) fn alignment_gain(s: &Mat, kind: GroupKind) -> Result<f64> {
    let dec = svd(s)?;
    let total: f64 = dec.sigma.iter().sum();
    if !kind.is_special() {
        return Ok(total);
    }
    let d = s.rows();
    if det(&dec.u)? * det(&dec.v)? >= 0.0 {
        Ok(total)
    } else {
        Ok(total - 2.0 * dec.sigma[d - 1])
    }
}

/// Node-by-cluster score table driving the label assignment.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    /// Row-major `n x k` table. Scores must be finite and nonnegative.
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(invalid("score matrix needs at least one node and one cluster"));
        }
        if data.len() != n * k {
            return Err(invalid(format!(
                "score matrix for {n} nodes and {k} clusters needs {} entries, got {}",
                n * k,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(invalid("score matrix entries must be finite and nonnegative"));
        }
        Ok(ScoreMatrix { n, k, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, node: usize, cluster: usize) -> f64 {
        assert!(node < self.n && cluster < self.k);
        self.data[node * self.k + cluster]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Blockwise nuclear norms of `x`: entry `(v, c)` scores how well node `v`
/// aligns with cluster `c` under the best possible block choice.
pub fn mu(x: &BlockMat) -> Result<ScoreMatrix> {
    let n = x.brows();
    let k = x.bcols();
    let mut data = Vec::with_capacity(n * k);
    for v in 0..n {
        for c in 0..k {
            data.push(nuclear_norm(&x.block(v, c))?);
        }
    }
    ScoreMatrix::new(n, k, data)
}

/// Balanced labeling maximizing the total score, with an optimality tie flag.
#[derive(Debug, Clone)]
pub struct AssignmentSolution {
    pub labels: Vec<u32>,
    pub objective: f64,
    /// True when a different balanced labeling attains the same objective at
    /// working precision.
    pub tie: bool,
}

/// Maximizes `sum_v scores[v, label(v)]` over labelings with exactly `n / k`
/// nodes per cluster. Requires `k` to divide `n`.
pub fn project_clustering(scores: &ScoreMatrix) -> Result<AssignmentSolution> {
    if scores.n() % scores.k() != 0 {
        return Err(invalid(format!(
            "balanced clustering needs the cluster count {} to divide the node count {}",
            scores.k(),
            scores.n()
        )));
    }
    let a = solve_balanced_assignment(scores.data(), scores.n(), scores.k());
    Ok(AssignmentSolution { labels: a.labels, objective: a.objective, tie: a.tie })
}

/// Result of the full feasibility projection.
#[derive(Debug, Clone)]
pub struct Projected {
    pub state: JointState,
    /// The balanced labeling was not the unique maximizer.
    pub assignment_tie: bool,
    /// Nodes whose block projection was flagged as non-unique.
    pub degenerate_nodes: Vec<u32>,
}

/// Projects a block matrix onto the feasible set, maximizing the inner
/// product over balanced labelings and per-node group blocks.
///
/// Blocks are always projected onto the full orthogonal group, even when
/// `kind` is special: determinant correction is deferred to a final rounding
/// so that intermediate iterates can move through the larger set. The
/// returned state therefore carries relaxed-kind rotations.
pub fn project_feasible(x: &BlockMat, kind: GroupKind) -> Result<Projected> {
    kind.validate()?;
    if x.d() != kind.dim() {
        return Err(invalid(format!(
            "block size {} does not match {kind}",
            x.d()
        )));
    }
    let n = x.brows();
    let k = x.bcols();
    if n == 0 || k == 0 || n % k != 0 {
        return Err(invalid(format!(
            "feasibility projection needs the cluster count {k} to divide the node count {n}"
        )));
    }
    let scores = mu(x)?;
    let sol = solve_balanced_assignment(scores.data(), n, k);
    let relaxed = kind.relaxed();
    let mut blocks = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for v in 0..n {
        let proj = project_orthogonal(&x.block(v, sol.labels[v] as usize), relaxed)?;
        if proj.non_unique {
            degenerate.push(v as u32);
        }
        blocks.push(proj.block);
    }
    let state = assemble_state(sol.labels, GroupStack::new(blocks)?, k)?;
    Ok(Projected { state, assignment_tie: sol.tie, degenerate_nodes: degenerate })
}
