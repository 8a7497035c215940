//! Per-instance checks of the deterministic conditions under which the
//! iteration provably contracts, the closed-form parameter region where
//! those conditions hold with high probability, and a spectral diagnostic
//! for the noise level of an observation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::ObservationMatrix;
use crate::error::{invalid, Error, Result};
use crate::metrics::estimation_error;
use crate::projections::mu;
use crate::seeds::stream_seed;
use crate::sgbm::{GroundTruth, JointState};

const STREAM_DEVIATION: u64 = 3;

fn truth_scores(a: &ObservationMatrix, truth: &GroundTruth) -> Result<crate::projections::ScoreMatrix> {
    mu(&a.block_apply(&truth.state().dense())?)
}

/// Largest chi such that the observation separates the planted clustering by
/// `chi * m * p`: the worst margin between a node's own-cluster score and its
/// best competitor, normalized by `m * p`. Absent when some node prefers a
/// wrong cluster (margin not positive). A single cluster has no competitors,
/// which leaves the margin unbounded.
pub fn check_separation(a: &ObservationMatrix, truth: &GroundTruth) -> Result<Option<f64>> {
    let (p, _) = truth.params.pq();
    if p == 0.0 {
        return Err(Error::UndefinedScale("separation scale m*p vanishes at p = 0".into()));
    }
    let scores = truth_scores(a, truth)?;
    let m = truth.params.m() as f64;
    let mut chi = f64::INFINITY;
    for v in 0..scores.n() {
        let own = scores.get(v, truth.labels[v] as usize);
        for c in 0..scores.k() {
            if c != truth.labels[v] as usize {
                chi = chi.min((own - scores.get(v, c)) / (m * p));
            }
        }
    }
    Ok(if chi > 0.0 { Some(chi) } else { None })
}

/// Whether every node's own-cluster score clears the magnitude bound
/// `sqrt(2 K beta) / alpha * m * p`.
pub fn check_magnitude(a: &ObservationMatrix, truth: &GroundTruth) -> Result<bool> {
    let (alpha, beta) = truth.params.alpha_beta()?;
    if alpha <= 0.0 {
        return Err(Error::UndefinedScale("magnitude bound needs alpha > 0".into()));
    }
    let (p, _) = truth.params.pq();
    let m = truth.params.m() as f64;
    let k = truth.params.k as f64;
    let bound = (2.0 * k * beta).sqrt() / alpha * m * p;
    let scores = truth_scores(a, truth)?;
    Ok((0..scores.n()).all(|v| scores.get(v, truth.labels[v] as usize) >= bound))
}

/// Contraction threshold on the initial error: the conditions ask for some
/// `rho` above `2 sqrt(2) sqrt(d^2 / chi^2 + alpha^2 / (2 K beta))` with the
/// initial error at most `sqrt(m) / rho`. Infinite when `chi` or `beta`
/// degenerates to zero.
pub fn rho_required(chi: f64, alpha: f64, beta: f64, k: usize, d: usize) -> f64 {
    let sep = if chi > 0.0 { (d as f64 / chi).powi(2) } else { f64::INFINITY };
    let noise = if beta > 0.0 {
        alpha * alpha / (2.0 * k as f64 * beta)
    } else {
        f64::INFINITY
    };
    8.0f64.sqrt() * (sep + noise).sqrt()
}

/// The three contraction conditions evaluated on one instance and one
/// initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Largest separation constant, absent when separation fails.
    pub separation_chi: Option<f64>,
    pub magnitude_ok: bool,
    /// Initial error in the relaxed metric divided by sqrt(m).
    pub init_ratio: f64,
    /// Threshold derived from `separation_chi`; the initial state qualifies
    /// when `init_ratio < 1 / rho_required`.
    pub rho_required: f64,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.separation_chi.is_some()
            && self.magnitude_ok
            && self.init_ratio * self.rho_required < 1.0
    }
}

/// Evaluates all three conditions for an observation, its planted truth, and
/// a candidate initial state.
pub fn check_conditions(
    a: &ObservationMatrix,
    truth: &GroundTruth,
    v0: &JointState,
) -> Result<ConditionReport> {
    let separation_chi = check_separation(a, truth)?;
    let magnitude_ok = check_magnitude(a, truth)?;
    let (alpha, beta) = truth.params.alpha_beta()?;
    let err = estimation_error(v0, truth, truth.params.kind.relaxed())?;
    let init_ratio = err / (truth.params.m() as f64).sqrt();
    let rho = rho_required(
        separation_chi.unwrap_or(0.0),
        alpha,
        beta,
        truth.params.k,
        truth.params.d(),
    );
    Ok(ConditionReport { separation_chi, magnitude_ok, init_ratio, rho_required: rho })
}

/// Verdict on a parameter point: the two closed-form inequalities that make
/// the contraction conditions hold with high probability, the plain
/// block-model recovery threshold for comparison, and the constructive
/// separation constant where available.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub d: usize,
    /// `sqrt(alpha) - sqrt(beta) > sqrt(K)`.
    pub sbm_threshold_ok: bool,
    /// `sqrt(2 K beta) < alpha`.
    pub gpm_cond1_ok: bool,
    /// `alpha - sqrt(2 K beta) log(e alpha / sqrt(2 K beta)) > K`, read in
    /// the limit as `alpha > K` when beta = 0.
    pub gpm_cond2_ok: bool,
    /// Present exactly when both inequalities hold; always positive then.
    pub chi: Option<f64>,
}

/// Root of `alpha - tau log(e alpha / tau) = k` on (0, alpha); the left side
/// decreases in tau there, so bisection is safe. Requires alpha > k.
fn tau_star(alpha: f64, k: f64) -> f64 {
    let f = |tau: f64| alpha - tau * (std::f64::consts::E * alpha / tau).ln() - k;
    let mut lo = 1e-12;
    let mut hi = alpha;
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Evaluates the parameter-region inequalities at one point.
///
/// When both hold, a concrete separation constant is derived: with
/// `tau* ` the boundary root, the largest admissible slack factor is
/// `c_max = tau*^2 / (2 K beta)`; picking the middle values
/// `c = (1 + c_max) / 2` and `tau = (sqrt(2 c K beta) + tau*) / 2` gives
/// `chi = d (tau - sqrt(2 c K beta)) / alpha > 0`. At beta = 0 the inner
/// radius collapses and `tau = tau* / 2`.
pub fn region_verdict(alpha: f64, beta: f64, k: usize, d: usize) -> Result<RegionVerdict> {
    if !alpha.is_finite() || alpha <= 0.0 || !beta.is_finite() || beta < 0.0 {
        return Err(invalid(format!("region point needs alpha > 0 and beta >= 0, got ({alpha}, {beta})")));
    }
    if k == 0 || d == 0 {
        return Err(invalid("region point needs K >= 1 and d >= 1"));
    }
    let kk = k as f64;
    let dd = d as f64;
    let tau_beta = (2.0 * kk * beta).sqrt();
    let gpm_cond1_ok = tau_beta < alpha;
    let gpm_cond2_ok = if beta == 0.0 {
        alpha > kk
    } else {
        alpha - tau_beta * (std::f64::consts::E * alpha / tau_beta).ln() > kk
    };
    let chi = if gpm_cond1_ok && gpm_cond2_ok {
        let ts = tau_star(alpha, kk);
        Some(if beta == 0.0 {
            dd * (ts / 2.0) / alpha
        } else {
            let c_max = ts * ts / (2.0 * kk * beta);
            let c_tilde = 0.5 * (1.0 + c_max);
            let inner = (2.0 * c_tilde * kk * beta).sqrt();
            let tau_tilde = 0.5 * (inner + ts);
            dd * (tau_tilde - inner) / alpha
        })
    } else {
        None
    };
    Ok(RegionVerdict {
        alpha,
        beta,
        k,
        d,
        sbm_threshold_ok: alpha.sqrt() - beta.sqrt() > kk.sqrt(),
        gpm_cond1_ok,
        gpm_cond2_ok,
        chi,
    })
}

/// Largest beta for which the second region inequality holds at this alpha,
/// if any: the boundary root mapped back through `beta = tau*^2 / (2 K)`.
pub fn red_boundary_beta(alpha: f64, k: usize) -> Result<Option<f64>> {
    if !alpha.is_finite() || alpha <= 0.0 || k == 0 {
        return Err(invalid(format!("boundary point needs alpha > 0 and K >= 1, got alpha={alpha}, K={k}")));
    }
    let kk = k as f64;
    if alpha <= kk {
        return Ok(None);
    }
    let ts = tau_star(alpha, kk);
    Ok(Some(ts * ts / (2.0 * kk)))
}

/// Recovery threshold of the plain block model, as an alpha for the given
/// beta: `alpha = (sqrt(beta) + sqrt(K))^2`.
pub fn sbm_threshold_alpha(beta: f64, k: usize) -> Result<f64> {
    if !beta.is_finite() || beta < 0.0 || k == 0 {
        return Err(invalid(format!("threshold point needs beta >= 0 and K >= 1, got beta={beta}, K={k}")));
    }
    Ok((beta.sqrt() + (k as f64).sqrt()).powi(2))
}

/// Operator norm of the centered observation `A - p V* V*^T`, estimated by
/// power iteration on its square so that both spectral ends are covered.
/// Deterministic for a given instance: the start vector is drawn from a
/// stream split off the instance seed. Diagnostic only; the estimate is a
/// lower bound that stops when it stalls at relative tolerance 1e-6.
pub fn spectral_deviation(a: &ObservationMatrix, truth: &GroundTruth) -> Result<f64> {
    let n = a.n();
    let d = a.d();
    if truth.labels.len() != n || truth.params.d() != d {
        return Err(invalid("observation and truth shapes disagree"));
    }
    let (p, _) = truth.params.pq();
    let nd = n * d;
    let dense = truth.state().dense().to_mat();
    let kd = dense.cols();

    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = a.matvec(x);
        let mut w = vec![0.0; kd];
        for i in 0..nd {
            let xi = x[i];
            if xi != 0.0 {
                for j in 0..kd {
                    w[j] += dense[(i, j)] * xi;
                }
            }
        }
        for i in 0..nd {
            let mut acc = 0.0;
            for j in 0..kd {
                acc += dense[(i, j)] * w[j];
            }
            y[i] -= p * acc;
        }
        y
    };

    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(truth.seed, STREAM_DEVIATION));
    let mut x: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    for v in &mut x {
        *v /= nx;
    }

    // Stall is judged over a 10-iteration window: per-step changes shrink
    // well before the iterate settles when the spectral gap is small.
    let mut estimate = 0.0;
    let mut window_prev = f64::NEG_INFINITY;
    for it in 0..10_000 {
        let y = apply(&x);
        let ny = norm(&y);
        if ny <= 1e-154 {
            // The operator annihilates the iterate; treat it as zero.
            return Ok(0.0);
        }
        let z = apply(&y);
        let nz = norm(&z);
        estimate = nz / ny;
        if it % 10 == 9 {
            if (estimate - window_prev).abs() <= 1e-6 * estimate.max(1e-300) {
                break;
            }
            window_prev = estimate;
        }
        if nz <= 1e-154 {
            return Ok(estimate);
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
    }
    Ok(estimate)
}
