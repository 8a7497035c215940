//! The joint power iteration: multiply the observation into the current
//! state, project back onto the feasible set, repeat until the iterate
//! stops moving, then round into the special group when asked for one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::{det, GroupKind, GroupStack, ObservationMatrix, OrthoBlock};
use crate::error::{invalid, Result};
use crate::metrics::estimation_error;
use crate::projections::project_feasible;
use crate::sgbm::{assemble_state, GroundTruth, JointState};

/// Iteration budget and instrumentation switches for one solve.
#[derive(Debug, Clone)]
pub struct GpmConfig<'a> {
    pub max_iters: usize,
    /// Frobenius change between consecutive iterates below which the run
    /// counts as converged. The default demands a fixed point of the
    /// floating-point map, which the discrete-by-continuous feasible set
    /// reaches in practice.
    pub tol: f64,
    /// When set, the relaxed estimation error of every iterate is recorded.
    pub track_error: Option<&'a GroundTruth>,
    /// Iterate on the observation plus a diagonal shift large enough to make
    /// it positive semidefinite, which guarantees objective ascent. Off by
    /// default: the plain iteration needs no shift to converge.
    pub psd_shift: bool,
}

impl Default for GpmConfig<'_> {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-12, track_error: None, psd_shift: false }
    }
}

/// What one solve did, iteration by iteration. The error and objective
/// sequences cover every iterate from the start state to the final
/// unrounded one; the change, tie, and degeneracy sequences have one entry
/// per executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpmTrace {
    pub iterates_used: usize,
    /// Relaxed estimation error per iterate, present when a ground truth
    /// was supplied for tracking.
    pub per_iter_error: Option<Vec<f64>>,
    pub per_iter_change: Vec<f64>,
    /// The quadratic objective of each iterate, without any diagonal shift.
    pub per_iter_objective: Vec<f64>,
    /// Whether the balanced assignment reported a tie at each step.
    pub assignment_ties: Vec<bool>,
    /// How many block projections were flagged non-unique at each step.
    pub degenerate_counts: Vec<usize>,
    pub converged: bool,
}

impl GpmTrace {
    /// One row per iterate: `iter, frob_change, epsilon_relaxed, objective`.
    /// The change column is empty on the first row and the error column is
    /// empty throughout when error tracking was off.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,frob_change,epsilon_relaxed,objective\n");
        for t in 0..=self.iterates_used {
            let change = if t == 0 {
                String::new()
            } else {
                format!("{}", self.per_iter_change[t - 1])
            };
            let eps = match &self.per_iter_error {
                Some(es) => format!("{}", es[t]),
                None => String::new(),
            };
            out.push_str(&format!("{t},{change},{eps},{}\n", self.per_iter_objective[t]));
        }
        out
    }
}

/// Forces every block into the special group by flipping it with the sign
/// of its own determinant. Labels are untouched. The sign flip lands in the
/// special group only in odd dimension; a reflected block in even dimension
/// has no special rounding and is rejected.
pub fn round_special(state: &JointState) -> Result<JointState> {
    let d = state.d();
    let kind = GroupKind::SpecialOrthogonal(d);
    let mut blocks = Vec::with_capacity(state.n());
    for b in state.rotations().iter() {
        let sign = if det(b.mat())? < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 && d % 2 == 0 {
            return Err(invalid(
                "a reflected block in even dimension cannot be rounded into the special group",
            ));
        }
        let mut m = b.mat().clone();
        if sign < 0.0 {
            m.scale(sign);
        }
        blocks.push(OrthoBlock::from_orthogonal_unchecked(m, kind));
    }
    assemble_state(state.labels().to_vec(), GroupStack::new(blocks)?, state.k())
}

/// Diagonal shift making the observation positive semidefinite: estimates
/// the spectral radius, then the most negative eigenvalue through the
/// shifted matrix, and pads both estimates because power iteration only
/// gives lower bounds.
fn shift_amount(a: &ObservationMatrix) -> f64 {
    let nd = a.n() * a.d();
    let mut rng = ChaCha8Rng::seed_from_u64(0x517c_c1b7_2722_0a95);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    for v in &mut x {
        *v /= nx;
    }

    let mut radius = 0.0f64;
    for _ in 0..200 {
        let y = a.matvec(&x);
        let ny = norm(&y);
        if ny <= 1e-154 {
            break;
        }
        radius = ny;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    let bound = 1.25 * radius + 1.0;

    let mut top = 0.0f64;
    for _ in 0..200 {
        let mut y = a.matvec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = bound * xi - *yi;
        }
        let ny = norm(&y);
        if ny <= 1e-154 {
            break;
        }
        top = ny;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    let lambda_min = bound - top;
    1.25 * (-lambda_min).max(0.0) + 1e-9
}

/// Runs the iteration from a start state until the dense iterate moves by
/// at most `tol` in Frobenius norm or the budget runs out, then rounds the
/// result into the special group when `kind` demands one. Iterates live in
/// the relaxed feasible set throughout; only the returned state is rounded.
pub fn run(
    a: &ObservationMatrix,
    v0: &JointState,
    kind: GroupKind,
    cfg: &GpmConfig,
) -> Result<(JointState, GpmTrace)> {
    kind.validate()?;
    if v0.n() != a.n() || v0.d() != a.d() || kind.dim() != a.d() {
        return Err(invalid(format!(
            "start state (n={}, d={}) does not conform to the observation (n={}, d={}) under {kind}",
            v0.n(),
            v0.d(),
            a.n(),
            a.d()
        )));
    }
    if !v0.is_balanced() {
        return Err(invalid("start state must be balanced"));
    }
    if cfg.max_iters == 0 {
        return Err(invalid("iteration budget must be at least 1"));
    }
    if !cfg.tol.is_finite() || cfg.tol < 0.0 {
        return Err(invalid(format!("tolerance must be finite and nonnegative, got {}", cfg.tol)));
    }

    let lambda = if cfg.psd_shift { shift_amount(a) } else { 0.0 };

    let mut current = v0.clone();
    let mut current_dense = current.dense();
    let mut errors = match cfg.track_error {
        Some(truth) => Some(vec![estimation_error(&current, truth, kind.relaxed())?]),
        None => None,
    };
    let mut objectives = Vec::with_capacity(cfg.max_iters + 1);
    let mut changes = Vec::new();
    let mut ties = Vec::new();
    let mut degenerate = Vec::new();
    let mut converged = false;
    let mut used = 0;

    for _ in 0..cfg.max_iters {
        let mut y = a.block_apply(&current_dense)?;
        objectives.push(current_dense.dot(&y));
        if lambda > 0.0 {
            y.add_scaled(&current_dense, lambda);
        }
        let proj = project_feasible(&y, kind)?;
        let next_dense = proj.state.dense();
        let change = next_dense.frob_dist(&current_dense);
        changes.push(change);
        ties.push(proj.assignment_tie);
        degenerate.push(proj.degenerate_nodes.len());
        if let (Some(truth), Some(es)) = (cfg.track_error, errors.as_mut()) {
            es.push(estimation_error(&proj.state, truth, kind.relaxed())?);
        }
        current = proj.state;
        current_dense = next_dense;
        used += 1;
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let final_apply = a.block_apply(&current_dense)?;
    objectives.push(current_dense.dot(&final_apply));

    let trace = GpmTrace {
        iterates_used: used,
        per_iter_error: errors,
        per_iter_change: changes,
        per_iter_objective: objectives,
        assignment_ties: ties,
        degenerate_counts: degenerate,
        converged,
    };
    let out = if kind.is_special() { round_special(&current)? } else { current };
    Ok((out, trace))
}
