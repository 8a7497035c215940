//! Error metrics on the quotient of the feasible set by cluster relabelings
//! and per-cluster group shifts.
//!
//! Solutions are only identifiable up to that action: permuting cluster
//! identities and multiplying every block of one cluster by a common group
//! element changes nothing observable. Distances here minimize over the
//! whole orbit exactly, with one Procrustes gain per ordered cluster pair
//! and a K x K assignment over the gains.

use crate::blockmat::{GroupKind, Mat};
use crate::error::{invalid, Result};
use crate::projections::{alignment_gain, solve_balanced_assignment};
use crate::sgbm::{GroundTruth, JointState};

fn validate_labels(labels: &[u32], k: usize, side: &str) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(invalid(format!("{side} labeling has label {bad} out of range for K={k}")));
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let n = labels.len();
    if n == 0 || n % k != 0 || counts.iter().any(|&c| c != n / k) {
        return Err(invalid(format!("{side} labeling is not balanced over K={k} clusters")));
    }
    Ok(())
}

/// Misclustering distance between two balanced labelings: the smallest
/// Frobenius distance between their indicator matrices over relabelings of
/// the cluster identities. Each node left unmatched by the best pairing
/// contributes 2 to the square, so the result is `sqrt(2 (n - overlap))`
/// with `overlap` maximized by a K x K assignment over co-occurrence counts.
pub fn clustering_error(labels: &[u32], reference: &[u32], k: usize) -> Result<f64> {
    if labels.len() != reference.len() {
        return Err(invalid(format!(
            "labelings disagree on n: {} vs {}",
            labels.len(),
            reference.len()
        )));
    }
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    validate_labels(labels, k, "first")?;
    validate_labels(reference, k, "second")?;
    let n = labels.len();
    let mut overlap = vec![0.0f64; k * k];
    for v in 0..n {
        overlap[labels[v] as usize * k + reference[v] as usize] += 1.0;
    }
    let best = solve_balanced_assignment(&overlap, k, k).objective;
    Ok((2.0 * (n as f64 - best)).max(0.0).sqrt())
}

/// Exact distance between two feasible states modulo relabeling and
/// per-cluster group shifts.
///
/// Both states have squared norm `n d`, so the distance reduces to
/// `sqrt(2 n d - 2 g)` where `g` is the best total alignment gain: for every
/// ordered cluster pair the nodes placing their blocks in those two columns
/// contribute a cross matrix, the pair's gain is the best group alignment of
/// that matrix, and a K x K assignment picks the cluster pairing.
pub fn quotient_distance(v1: &JointState, v2: &JointState, kind: GroupKind) -> Result<f64> {
    kind.validate()?;
    let d = kind.dim();
    if v1.n() != v2.n() || v1.k() != v2.k() || v1.d() != v2.d() || v1.d() != d {
        return Err(invalid(format!(
            "states of shape (n={}, K={}, d={}) and (n={}, K={}, d={}) do not conform to {kind}",
            v1.n(),
            v1.k(),
            v1.d(),
            v2.n(),
            v2.k(),
            v2.d()
        )));
    }
    if !v1.is_balanced() || !v2.is_balanced() {
        return Err(invalid("quotient distance is defined for balanced states"));
    }
    let n = v1.n();
    let k = v1.k();

    // cross[a * k + b] pairs cluster a of v2 with cluster b of v1.
    let mut cross = vec![Mat::zeros(d, d); k * k];
    for v in 0..n {
        let a = v2.labels()[v] as usize;
        let b = v1.labels()[v] as usize;
        cross[a * k + b].add_mul_tn(v2.rotations().block(v).mat(), v1.rotations().block(v).mat());
    }
    let mut gains = vec![0.0f64; k * k];
    for (slot, s) in cross.iter().enumerate() {
        gains[slot] = alignment_gain(s, kind)?;
    }
    let best = solve_balanced_assignment(&gains, k, k).objective;
    let nd = (n * d) as f64;
    Ok((2.0 * nd - 2.0 * best).max(0.0).sqrt())
}

/// Distance from a candidate state to the planted one, in the quotient
/// metric of `kind`. The relaxed full-orthogonal metric is the natural one
/// for iterates that have not been rounded yet, so the gauge group is an
/// explicit argument rather than taken from the truth parameters.
pub fn estimation_error(state: &JointState, truth: &GroundTruth, kind: GroupKind) -> Result<f64> {
    quotient_distance(state, &truth.state(), kind)
}
