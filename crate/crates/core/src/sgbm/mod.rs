//! The planted generative model and the joint cluster/rotation states it is
//! solved over.
//!
//! An instance has n nodes split into K equal clusters of size m = n/K, one
//! hidden rotation per node, and a symmetric block observation matrix: a
//! same-cluster pair {i, j} reveals the clean relative rotation R_i R_j^T
//! with probability p, a cross-cluster pair reveals a uniformly random group
//! element with probability q, and diagonal blocks are identity. Rates may be
//! given directly or on the logarithmic scale p = alpha * ln(n) / n,
//! q = beta * ln(n) / n.

mod io;

pub use io::{read_instance, sidecar_path, write_instance, InstanceMeta};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::{haar_sample, BlockMat, GroupKind, GroupStack, Mat, ObservationMatrix, OrthoBlock, ORTHO_TOL};
use crate::error::{invalid, Error, Result};
use crate::seeds::stream_seed;

/// Edge rates, either raw probabilities or on the logarithmic scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rates {
    Raw { p: f64, q: f64 },
    Logarithmic { alpha: f64, beta: f64 },
}

/// Model parameters. `d` is carried by `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgbmParams {
    pub n: usize,
    pub k: usize,
    pub kind: GroupKind,
    pub rates: Rates,
}

impl SgbmParams {
    pub fn new(n: usize, k: usize, kind: GroupKind, rates: Rates) -> Result<Self> {
        let params = SgbmParams { n, k, kind, rates };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        if self.n == 0 || self.n % self.k != 0 {
            return Err(invalid(format!("n={} must be a positive multiple of K={}", self.n, self.k)));
        }
        match self.rates {
            Rates::Raw { p, q } => {
                if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
                    return Err(invalid(format!("rates p={p}, q={q} must lie in [0, 1]")));
                }
            }
            Rates::Logarithmic { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() || alpha < 0.0 || beta < 0.0 {
                    return Err(invalid(format!(
                        "logarithmic rates alpha={alpha}, beta={beta} must be finite and nonnegative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cluster size m = n / K.
    pub fn m(&self) -> usize {
        self.n / self.k
    }

    pub fn d(&self) -> usize {
        self.kind.dim()
    }

    /// Edge probabilities. Logarithmic rates are clamped into [0, 1]: alpha
    /// up to n / ln(n) maps onto the full probability range, and anything
    /// above saturates at 1.
    pub fn pq(&self) -> (f64, f64) {
        match self.rates {
            Rates::Raw { p, q } => (p, q),
            Rates::Logarithmic { alpha, beta } => {
                let scale = (self.n as f64).ln() / self.n as f64;
                ((alpha * scale).clamp(0.0, 1.0), (beta * scale).clamp(0.0, 1.0))
            }
        }
    }

    /// Rates on the logarithmic scale; raw rates are converted through
    /// alpha = p * n / ln(n), which needs n >= 2.
    pub fn alpha_beta(&self) -> Result<(f64, f64)> {
        match self.rates {
            Rates::Logarithmic { alpha, beta } => Ok((alpha, beta)),
            Rates::Raw { p, q } => {
                if self.n < 2 {
                    return Err(Error::UndefinedScale(
                        "logarithmic rates are undefined for n < 2".into(),
                    ));
                }
                let scale = self.n as f64 / (self.n as f64).ln();
                Ok((p * scale, q * scale))
            }
        }
    }
}

/// A point of the joint search space: one cluster label and one orthogonal
/// block per node. `balanced` records whether every cluster holds exactly
/// n / K nodes.
#[derive(Debug, Clone)]
pub struct JointState {
    labels: Vec<u32>,
    rotations: GroupStack,
    k: usize,
    balanced: bool,
}

/// Bundle labels and rotations into a state, computing the balance flag.
pub fn assemble_state(labels: Vec<u32>, rotations: GroupStack, k: usize) -> Result<JointState> {
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    if labels.len() != rotations.len() {
        return Err(invalid(format!(
            "{} labels but {} rotation blocks",
            labels.len(),
            rotations.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(invalid(format!("label {bad} out of range for K={k}")));
    }
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l as usize] += 1;
    }
    let n = labels.len();
    let balanced = n % k == 0 && counts.iter().all(|&c| c == n / k);
    Ok(JointState { labels, rotations, k, balanced })
}

impl JointState {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.rotations.dim()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn rotations(&self) -> &GroupStack {
        &self.rotations
    }

    pub fn is_balanced(&self) -> bool {
        self.balanced
    }

    /// Materialize the n x K block matrix with block (v, label(v)) = R_v and
    /// zeros elsewhere.
    pub fn dense(&self) -> BlockMat {
        let mut out = BlockMat::zeros(self.n(), self.k, self.d());
        for (v, &l) in self.labels.iter().enumerate() {
            out.set_block(v, l as usize, self.rotations.block(v).mat());
        }
        out
    }
}

/// Membership test for the constraint set the solver rounds into: balanced
/// clusters and every block in the stated group (determinant +1 within
/// tolerance when `kind` is special).
pub fn is_in_e(state: &JointState, kind: GroupKind) -> bool {
    if !state.balanced || state.d() != kind.dim() {
        return false;
    }
    if kind.is_special() {
        for b in state.rotations().iter() {
            match crate::blockmat::det(b.mat()) {
                Ok(d) if (d - 1.0).abs() <= ORTHO_TOL => {}
                _ => return false,
            }
        }
    }
    true
}

/// Planted configuration an instance was generated from.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub params: SgbmParams,
    pub labels: Vec<u32>,
    pub rotations: GroupStack,
    pub seed: u64,
}

impl GroundTruth {
    pub fn state(&self) -> JointState {
        assemble_state(self.labels.clone(), self.rotations.clone(), self.params.k)
            .expect("ground truth is well-formed by construction")
    }
}

const STREAM_COINS: u64 = 1;
const STREAM_HAAR: u64 = 2;

/// Draw one instance of the model.
///
/// Two generators are split from the seed: one for the label shuffle and the
/// per-pair edge coins, one for every Haar draw (hidden rotations, then noise
/// blocks). A coin is consumed for every pair whether or not an edge appears,
/// so the edge set depends only on (n, rates, seed) and not on d, and equal
/// inputs reproduce the instance bit for bit.
pub fn generate(params: &SgbmParams, seed: u64) -> Result<(GroundTruth, ObservationMatrix)> {
    params.validate()?;
    let n = params.n;
    let m = params.m();
    let (p, q) = params.pq();

    let mut coins = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(stream_seed(seed, STREAM_COINS));
    let mut haar = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(stream_seed(seed, STREAM_HAAR));

    // Balanced labels, shuffled by Fisher-Yates.
    let mut labels: Vec<u32> = (0..n).map(|v| (v / m) as u32).collect();
    for i in (1..n).rev() {
        let j = coins.gen_range(0..=i);
        labels.swap(i, j);
    }

    let rotations: Vec<OrthoBlock> =
        (0..n).map(|_| haar_sample(params.kind, &mut haar)).collect::<Result<_>>()?;

    let mut edges: Vec<(u32, u32, Mat)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same = labels[i] == labels[j];
            let rate = if same { p } else { q };
            let coin: f64 = coins.gen();
            if coin >= rate {
                continue;
            }
            let block = if same {
                rotations[i].mat().mul_nt(rotations[j].mat())
            } else {
                haar_sample(params.kind, &mut haar)?.mat().clone()
            };
            edges.push((i as u32, j as u32, block));
        }
    }

    let obs = ObservationMatrix::from_edges(n, params.d(), edges)?;
    let truth = GroundTruth {
        params: *params,
        labels,
        rotations: GroupStack::new(rotations)?,
        seed,
    };
    Ok((truth, obs))
}
