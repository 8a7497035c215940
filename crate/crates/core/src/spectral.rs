//! Spectral start states: cluster on the scalar connectivity graph, balance
//! the result, take the top block eigenspace, and read off per-node
//! rotations relative to one randomly chosen pivot per cluster.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockmat::{sym_eigen, GroupKind, GroupStack, Mat, ObservationMatrix, OrthoBlock};
use crate::error::{invalid, Result};
use crate::projections::{project_clustering, project_orthogonal, ScoreMatrix};
use crate::seeds::stream_seed;
use crate::sgbm::{assemble_state, JointState};

const STREAM_PIVOTS: u64 = 4;
// The eigen iteration starts from a fixed random basis so that equal inputs
// give equal outputs; only pivot choice is caller-seeded.
const EIG_START_SEED: u64 = 0x243f_6a88_85a3_08d3;

/// Knobs for the eigenspace computation and the greedy clustering stage.
#[derive(Debug, Clone)]
pub struct InitConfig {
    pub eig_tol: f64,
    pub eig_max_sweeps: usize,
    pub pivot_seed: u64,
    /// Quantile of the pairwise spectral-row distances used as the greedy
    /// covering radius.
    pub greedy_radius_quantile: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { eig_tol: 1e-8, eig_max_sweeps: 500, pivot_seed: 0, greedy_radius_quantile: 0.2 }
    }
}

impl InitConfig {
    fn validate(&self) -> Result<()> {
        if !self.eig_tol.is_finite() || self.eig_tol <= 0.0 {
            return Err(invalid(format!("eig_tol must be positive, got {}", self.eig_tol)));
        }
        if self.eig_max_sweeps == 0 {
            return Err(invalid("eig_max_sweeps must be at least 1"));
        }
        if !(self.greedy_radius_quantile > 0.0 && self.greedy_radius_quantile < 1.0) {
            return Err(invalid(format!(
                "greedy_radius_quantile must lie strictly between 0 and 1, got {}",
                self.greedy_radius_quantile
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis for an approximate dominant invariant subspace.
#[derive(Debug, Clone)]
pub struct EigBasis {
    /// Orthonormal columns, ordered by Rayleigh quotient descending.
    pub vectors: Mat,
    /// Rayleigh quotients of the columns, descending.
    pub values: Vec<f64>,
    /// `||A U - U (U^T A U)||_F` at termination.
    pub residual: f64,
    /// False when the sweep budget ran out before the residual target.
    pub converged: bool,
    /// Residual after every sweep, for diagnostics.
    pub sweep_residuals: Vec<f64>,
}

impl EigBasis {
    /// Diagnostic export: one `sweep,residual` row per sweep.
    pub fn residual_csv(&self) -> String {
        let mut out = String::from("sweep,residual\n");
        for (s, r) in self.sweep_residuals.iter().enumerate() {
            out.push_str(&format!("{s},{r}\n"));
        }
        out
    }
}

fn apply_columns(a: &ObservationMatrix, x: &Mat) -> Mat {
    let nd = x.rows();
    let r = x.cols();
    let mut out = Mat::zeros(nd, r);
    let mut buf = vec![0.0; nd];
    for c in 0..r {
        for i in 0..nd {
            buf[i] = x[(i, c)];
        }
        let y = a.matvec(&buf);
        for i in 0..nd {
            out[(i, c)] = y[i];
        }
    }
    out
}

/// Modified Gram-Schmidt with a second pass. A column that cancels to zero
/// is replaced by a canonical vector; the shifted iteration matrix is
/// positive definite, so that path is a safety net rather than a hot one.
fn orthonormalize(x: &mut Mat) {
    let n = x.rows();
    let r = x.cols();
    for c in 0..r {
        for _ in 0..2 {
            for p in 0..c {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += x[(i, p)] * x[(i, c)];
                }
                for i in 0..n {
                    let sub = dot * x[(i, p)];
                    x[(i, c)] -= sub;
                }
            }
        }
        let mut nn = 0.0;
        for i in 0..n {
            nn += x[(i, c)] * x[(i, c)];
        }
        let mut nn = nn.sqrt();
        if nn <= 1e-300 {
            for i in 0..n {
                x[(i, c)] = if i == c % n { 1.0 } else { 0.0 };
            }
            for p in 0..c {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += x[(i, p)] * x[(i, c)];
                }
                for i in 0..n {
                    let sub = dot * x[(i, p)];
                    x[(i, c)] -= sub;
                }
            }
            nn = 0.0;
            for i in 0..n {
                nn += x[(i, c)] * x[(i, c)];
            }
            nn = nn.sqrt().max(1e-300);
        }
        for i in 0..n {
            x[(i, c)] /= nn;
        }
    }
}

fn spectral_radius_estimate(a: &ObservationMatrix) -> f64 {
    let nd = a.n() * a.d();
    let mut rng = ChaCha8Rng::seed_from_u64(EIG_START_SEED ^ 1);
    let mut x: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut x {
        *v /= nx;
    }
    let mut est = 0.0;
    for _ in 0..80 {
        let y = a.matvec(&x);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny <= 1e-154 {
            return 0.0;
        }
        est = ny;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    est
}

/// Orthonormal basis approximating the span of the `r` algebraically
/// largest eigenvalues, by orthogonal iteration on the observation plus a
/// diagonal shift that makes the algebraically largest part also the
/// largest in magnitude.
pub fn top_eigs(a: &ObservationMatrix, r: usize, cfg: &InitConfig) -> Result<EigBasis> {
    cfg.validate()?;
    let nd = a.n() * a.d();
    if r == 0 || r > nd {
        return Err(invalid(format!("basis size must lie in 1..={nd}, got {r}")));
    }
    let lambda = 1.0 + 1.1 * spectral_radius_estimate(a);

    let mut rng = ChaCha8Rng::seed_from_u64(EIG_START_SEED);
    let mut x = Mat::from_fn(nd, r, |_, _| rng.gen_range(-1.0..1.0));
    orthonormalize(&mut x);

    let mut sweep_residuals = Vec::new();
    let mut converged = false;
    let mut y = apply_columns(a, &x);
    loop {
        let b = x.transpose().mul(&y);
        let res = y.sub(&x.mul(&b)).frob_norm();
        sweep_residuals.push(res);
        if res <= cfg.eig_tol {
            converged = true;
            break;
        }
        if sweep_residuals.len() >= cfg.eig_max_sweeps {
            break;
        }
        let mut z = y.clone();
        for (zi, xi) in z.data_mut().iter_mut().zip(x.data()) {
            *zi += lambda * xi;
        }
        x = z;
        orthonormalize(&mut x);
        y = apply_columns(a, &x);
    }

    let b = x.transpose().mul(&y);
    let (values, w) = sym_eigen(&b)?;
    let vectors = x.mul(&w);
    let residual = *sweep_residuals.last().expect("at least one sweep ran");
    Ok(EigBasis { vectors, values, residual, converged, sweep_residuals })
}

/// Labels from a greedy covering of the spectral embedding of the scalar
/// connectivity graph: repeatedly grab the densest ball of unassigned
/// nodes, then hand leftovers to the nearest cluster mean. The output can
/// be imbalanced; balancing is the caller's step.
pub fn greedy_cluster(a: &ObservationMatrix, k: usize, cfg: &InitConfig) -> Result<Vec<u32>> {
    cfg.validate()?;
    let n = a.n();
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    if k > n {
        return Err(invalid(format!("cannot form {k} clusters from {n} nodes")));
    }

    let one = Mat::from_fn(1, 1, |_, _| 1.0);
    let scalar_edges: Vec<(u32, u32, Mat)> =
        a.edges().iter().map(|e| (e.i, e.j, one.clone())).collect();
    let w = ObservationMatrix::from_edges(n, 1, scalar_edges)?;
    let basis = top_eigs(&w, k, cfg)?;
    let rows = &basis.vectors;

    let dist = |u: usize, v: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..k {
            let e = rows[(u, c)] - rows[(v, c)];
            s += e * e;
        }
        s.sqrt()
    };

    let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            pairwise.push(dist(u, v));
        }
    }
    pairwise.sort_by(|a, b| a.total_cmp(b));
    let idx = ((pairwise.len() - 1) as f64 * cfg.greedy_radius_quantile).floor() as usize;
    let radius = pairwise[idx];

    let mut labels = vec![u32::MAX; n];
    for c in 0..k as u32 {
        let mut best: Option<(usize, usize)> = None;
        for v in 0..n {
            if labels[v] != u32::MAX {
                continue;
            }
            let count = (0..n)
                .filter(|&u| labels[u] == u32::MAX && dist(v, u) <= radius)
                .count();
            if best.map_or(true, |(bc, _)| count > bc) {
                best = Some((count, v));
            }
        }
        let Some((_, center)) = best else { break };
        for u in 0..n {
            if labels[u] == u32::MAX && dist(center, u) <= radius {
                labels[u] = c;
            }
        }
    }

    let mut means = vec![vec![0.0f64; k]; k];
    let mut counts = vec![0usize; k];
    for v in 0..n {
        if labels[v] != u32::MAX {
            let c = labels[v] as usize;
            counts[c] += 1;
            for j in 0..k {
                means[c][j] += rows[(v, j)];
            }
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..k {
                means[c][j] /= counts[c] as f64;
            }
        }
    }
    for v in 0..n {
        if labels[v] != u32::MAX {
            continue;
        }
        let mut best = (f64::INFINITY, 0u32);
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut s = 0.0;
            for j in 0..k {
                let e = rows[(v, j)] - means[c][j];
                s += e * e;
            }
            if s < best.0 {
                best = (s, c as u32);
            }
        }
        labels[v] = best.1;
    }
    Ok(labels)
}

fn choose_pivots(labels: &[u32], k: usize, pivot_seed: u64) -> Vec<usize> {
    let mut members = vec![Vec::new(); k];
    for (v, &l) in labels.iter().enumerate() {
        members[l as usize].push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(pivot_seed, STREAM_PIVOTS));
    members
        .iter()
        .map(|ms| ms[rng.gen_range(0..ms.len())])
        .collect()
}

/// Full start-state construction: greedy labels, balancing through the
/// clustering projection, top block eigenspace, and per-node rotations
/// `proj(U_v U_pivot^T)` against one random pivot per cluster. The pivot's
/// own block lands at the identity, so each cluster is expressed relative
/// to its pivot.
pub fn initialize(
    a: &ObservationMatrix,
    k: usize,
    d: usize,
    cfg: &InitConfig,
) -> Result<JointState> {
    cfg.validate()?;
    if d != a.d() {
        return Err(invalid(format!(
            "requested block size {d} but the observation carries {}",
            a.d()
        )));
    }
    let n = a.n();
    if k == 0 || n % k != 0 {
        return Err(invalid(format!("cannot balance {n} nodes over {k} clusters")));
    }

    let raw = greedy_cluster(a, k, cfg)?;
    let mut indicator = vec![0.0f64; n * k];
    for (v, &l) in raw.iter().enumerate() {
        indicator[v * k + l as usize] = 1.0;
    }
    let labels = project_clustering(&ScoreMatrix::new(n, k, indicator)?)?.labels;

    let basis = top_eigs(a, k * d, cfg)?;
    let u = &basis.vectors;
    let r = k * d;
    let pivots = choose_pivots(&labels, k, cfg.pivot_seed);

    let kind = GroupKind::Orthogonal(d);
    let mut blocks = Vec::with_capacity(n);
    for v in 0..n {
        let tau = pivots[labels[v] as usize];
        let arg = Mat::from_fn(d, d, |i, j| {
            let mut s = 0.0;
            for c in 0..r {
                s += u[(v * d + i, c)] * u[(tau * d + j, c)];
            }
            s
        });
        blocks.push(project_orthogonal(&arg, kind)?.block);
    }
    assemble_state(labels, GroupStack::new(blocks)?, k)
}

/// Ablation start state: round-robin labels and identity blocks.
pub fn identity_init(n: usize, k: usize, d: usize) -> Result<JointState> {
    if k == 0 || n == 0 || n % k != 0 {
        return Err(invalid(format!("cannot balance {n} nodes over {k} clusters")));
    }
    let kind = GroupKind::Orthogonal(d);
    let labels: Vec<u32> = (0..n).map(|v| (v % k) as u32).collect();
    let blocks: Vec<OrthoBlock> = (0..n)
        .map(|_| OrthoBlock::new(Mat::identity(d), kind))
        .collect::<Result<_>>()?;
    assemble_state(labels, GroupStack::new(blocks)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::estimation_error;
    use crate::sgbm::{generate, is_in_e, GroundTruth, Rates, SgbmParams};

    fn instance(
        n: usize,
        k: usize,
        rates: Rates,
        seed: u64,
    ) -> (GroundTruth, ObservationMatrix) {
        let params = SgbmParams::new(n, k, GroupKind::SpecialOrthogonal(3), rates).unwrap();
        generate(&params, seed).unwrap()
    }

    fn orthonormality_defect(u: &Mat) -> f64 {
        let gram = u.transpose().mul(u);
        gram.sub(&Mat::identity(u.cols())).frob_norm()
    }

    #[test]
    fn eigenbasis_is_orthonormal_ordered_and_converged() {
        let (_, a) = instance(60, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, 5);
        let basis = top_eigs(&a, 9, &InitConfig::default()).unwrap();
        assert!(basis.converged);
        assert!(basis.residual <= 1e-8);
        assert!(orthonormality_defect(&basis.vectors) <= 1e-8);
        for w in basis.values.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "Rayleigh quotients out of order");
        }
        let csv = basis.residual_csv();
        assert!(csv.starts_with("sweep,residual\n"));
        assert_eq!(csv.trim_end().lines().count(), basis.sweep_residuals.len() + 1);
    }

    #[test]
    fn clean_eigenspace_matches_the_planted_span() {
        let (truth, a) = instance(60, 3, Rates::Raw { p: 1.0, q: 0.0 }, 7);
        let basis = top_eigs(&a, 9, &InitConfig::default()).unwrap();
        let m = 20.0;
        for v in &basis.values {
            assert!((v - m).abs() <= 1e-6, "clean eigenvalue {v} should be m");
        }
        // The planted columns scaled to unit length must lie in the span.
        let u = &basis.vectors;
        let dense = truth.state().dense().to_mat();
        let coeffs = u.transpose().mul(&dense);
        let mut projected = Mat::zeros(dense.rows(), dense.cols());
        projected.add_mul(u, &coeffs);
        let defect = projected.sub(&dense).frob_norm() / m.sqrt();
        assert!(defect <= 1e-6, "planted span leaks {defect} outside the basis");
    }

    #[test]
    fn diagonal_only_matrix_converges_in_one_sweep() {
        let a = ObservationMatrix::from_edges(8, 2, Vec::new()).unwrap();
        let basis = top_eigs(&a, 5, &InitConfig::default()).unwrap();
        assert!(basis.converged);
        assert_eq!(basis.sweep_residuals.len(), 1);
        for v in &basis.values {
            assert!((v - 1.0).abs() <= 1e-9);
        }
        assert!(orthonormality_defect(&basis.vectors) <= 1e-8);
    }

    #[test]
    fn ritz_values_match_a_dense_eigensolver() {
        let (_, a) = instance(60, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, 11);
        let basis = top_eigs(&a, 9, &InitConfig::default()).unwrap();
        let (dense_vals, _) = sym_eigen(&a.to_dense()).unwrap();
        for (got, want) in basis.values.iter().zip(&dense_vals) {
            assert!(
                (got - want).abs() <= 1e-6,
                "Ritz value {got} vs dense {want}"
            );
        }
    }

    #[test]
    fn basis_size_is_validated() {
        let (_, a) = instance(12, 3, Rates::Raw { p: 1.0, q: 0.0 }, 3);
        assert!(top_eigs(&a, 0, &InitConfig::default()).is_err());
        assert!(top_eigs(&a, 37, &InitConfig::default()).is_err());
        let bad = InitConfig { eig_tol: 0.0, ..InitConfig::default() };
        assert!(top_eigs(&a, 3, &bad).is_err());
        let bad = InitConfig { greedy_radius_quantile: 1.0, ..InitConfig::default() };
        assert!(top_eigs(&a, 3, &bad).is_err());
    }

    #[test]
    fn greedy_clustering_is_exact_on_disconnected_components() {
        let (truth, a) = instance(60, 3, Rates::Raw { p: 1.0, q: 0.0 }, 13);
        let labels = greedy_cluster(&a, 3, &InitConfig::default()).unwrap();
        let err = crate::metrics::clustering_error(&labels, &truth.labels, 3).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn single_cluster_is_trivial() {
        let (_, a) = instance(8, 2, Rates::Raw { p: 0.5, q: 0.5 }, 17);
        assert_eq!(greedy_cluster(&a, 1, &InitConfig::default()).unwrap(), vec![0; 8]);
    }

    fn misclassified_fraction(labels: &[u32], truth: &[u32], k: usize) -> f64 {
        // Brute-force the label permutation on the confusion counts.
        let n = labels.len();
        let mut confusion = vec![0usize; k * k];
        for v in 0..n {
            confusion[labels[v] as usize * k + truth[v] as usize] += 1;
        }
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0usize;
        loop {
            let hits: usize = (0..k).map(|c| confusion[c * k + perm[c]]).sum();
            best = best.max(hits);
            // next_permutation in lexicographic order
            let Some(i) = (0..k - 1).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
            let j = (i + 1..k).rev().find(|&j| perm[j] > perm[i]).unwrap();
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        1.0 - best as f64 / n as f64
    }

    #[test]
    fn greedy_clustering_mislabels_a_bounded_fraction() {
        let mut good = 0;
        for seed in 0..10 {
            let (truth, a) =
                instance(150, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, seed);
            let labels = greedy_cluster(&a, 3, &InitConfig::default()).unwrap();
            if misclassified_fraction(&labels, &truth.labels, 3) <= 0.15 {
                good += 1;
            }
        }
        assert!(good >= 9, "clustering stayed within 15% on only {good}/10 seeds");
    }

    #[test]
    fn clean_initialization_is_exact_up_to_gauge() {
        let (truth, a) = instance(60, 3, Rates::Raw { p: 1.0, q: 0.0 }, 19);
        let v0 = initialize(&a, 3, 3, &InitConfig::default()).unwrap();
        assert!(is_in_e(&v0, GroupKind::Orthogonal(3)));
        let err = estimation_error(&v0, &truth, GroupKind::Orthogonal(3)).unwrap();
        assert!(err <= 1e-6, "clean start state sits {err} from the truth");
    }

    #[test]
    fn pivot_blocks_sit_at_the_identity() {
        let (_, a) = instance(60, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, 23);
        let cfg = InitConfig::default();
        let v0 = initialize(&a, 3, 3, &cfg).unwrap();
        let pivots = choose_pivots(v0.labels(), 3, cfg.pivot_seed);
        for &tau in &pivots {
            let dev = v0.rotations().block(tau).mat().sub(&Mat::identity(3)).frob_norm();
            assert!(dev <= 1e-8, "pivot block deviates from identity by {dev}");
        }
    }

    #[test]
    fn initialization_is_reproducible_and_pivot_sensitive() {
        let (_, a) = instance(60, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, 29);
        let cfg = InitConfig::default();
        let v1 = initialize(&a, 3, 3, &cfg).unwrap();
        let v2 = initialize(&a, 3, 3, &cfg).unwrap();
        assert_eq!(v1.labels(), v2.labels());
        assert_eq!(v1.dense().frob_dist(&v2.dense()), 0.0);

        let other = InitConfig { pivot_seed: 1, ..InitConfig::default() };
        let v3 = initialize(&a, 3, 3, &other).unwrap();
        assert_eq!(v1.labels(), v3.labels(), "pivot seed must not move labels");
    }

    #[test]
    fn initialization_lands_inside_the_contraction_basin() {
        let mut good = 0;
        for seed in 0..10 {
            let (truth, a) =
                instance(150, 3, Rates::Logarithmic { alpha: 40.0, beta: 4.0 }, 100 + seed);
            let v0 = initialize(&a, 3, 3, &InitConfig::default()).unwrap();
            let err = estimation_error(&v0, &truth, GroupKind::Orthogonal(3)).unwrap();
            if err <= (50.0f64).sqrt() / 8.0 {
                good += 1;
            }
        }
        assert!(good >= 8, "start state reached the basin on only {good}/10 seeds");
    }

    #[test]
    fn identity_init_is_balanced_and_trivial() {
        let v0 = identity_init(12, 3, 2).unwrap();
        assert!(v0.is_balanced());
        assert!(is_in_e(&v0, GroupKind::Orthogonal(2)));
        for b in v0.rotations().iter() {
            assert_eq!(b.mat().sub(&Mat::identity(2)).frob_norm(), 0.0);
        }
        assert!(identity_init(10, 3, 2).is_err());
    }

    #[test]
    fn initialize_validates_shapes() {
        let (_, a) = instance(12, 3, Rates::Raw { p: 1.0, q: 0.0 }, 31);
        assert!(initialize(&a, 3, 2, &InitConfig::default()).is_err());
        assert!(initialize(&a, 5, 3, &InitConfig::default()).is_err());
        assert!(initialize(&a, 0, 3, &InitConfig::default()).is_err());
    }
}
