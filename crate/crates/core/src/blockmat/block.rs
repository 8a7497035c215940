//! Block-structured containers: the dense n x K grid of d x d blocks that
//! iterates live in, and the sparse symmetric observation matrix.

use super::group::ORTHO_TOL;
use super::mat::Mat;
use crate::error::{invalid, Result};

/// Dense matrix with an n x K grid of d x d blocks, stored flat row-major per
/// block. This is the shape of solver iterates and of `A * V` products.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMat {
    brows: usize,
    bcols: usize,
    d: usize,
    data: Vec<f64>,
}

impl BlockMat {
    pub fn zeros(brows: usize, bcols: usize, d: usize) -> Self {
        BlockMat { brows, bcols, d, data: vec![0.0; brows * bcols * d * d] }
    }

    pub fn brows(&self) -> usize {
        self.brows
    }

    pub fn bcols(&self) -> usize {
        self.bcols
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    fn offset(&self, i: usize, c: usize) -> usize {
        (i * self.bcols + c) * self.d * self.d
    }

    #[inline]
    pub fn block_slice(&self, i: usize, c: usize) -> &[f64] {
        let o = self.offset(i, c);
        &self.data[o..o + self.d * self.d]
    }

    #[inline]
    pub fn block_slice_mut(&mut self, i: usize, c: usize) -> &mut [f64] {
        let o = self.offset(i, c);
        let dd = self.d * self.d;
        &mut self.data[o..o + dd]
    }

    pub fn block(&self, i: usize, c: usize) -> Mat {
        let s = self.block_slice(i, c);
        Mat::from_fn(self.d, self.d, |r, cc| s[r * self.d + cc])
    }

    pub fn set_block(&mut self, i: usize, c: usize, m: &Mat) {
        assert_eq!((m.rows(), m.cols()), (self.d, self.d));
        self.block_slice_mut(i, c).copy_from_slice(m.data());
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn frob_dist(&self, other: &BlockMat) -> f64 {
        assert_eq!((self.brows, self.bcols, self.d), (other.brows, other.bcols, other.d));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &BlockMat) -> f64 {
        assert_eq!((self.brows, self.bcols, self.d), (other.brows, other.bcols, other.d));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_scaled(&mut self, other: &BlockMat, s: f64) {
        assert_eq!((self.brows, self.bcols, self.d), (other.brows, other.bcols, other.d));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Flatten to an ordinary (brows*d) x (bcols*d) matrix.
    pub fn to_mat(&self) -> Mat {
        let d = self.d;
        Mat::from_fn(self.brows * d, self.bcols * d, |r, c| {
            self.block_slice(r / d, c / d)[(r % d) * d + c % d]
        })
    }
}

/// `out += a * b` (or `a^T * b`) on flat d x d blocks.
#[inline]
fn acc_block_mul(out: &mut [f64], a: &[f64], b: &[f64], d: usize, transpose_a: bool) {
    for r in 0..d {
        for k in 0..d {
            let ark = if transpose_a { a[k * d + r] } else { a[r * d + k] };
            if ark == 0.0 {
                continue;
            }
            let brow = &b[k * d..(k + 1) * d];
            let orow = &mut out[r * d..(r + 1) * d];
            for c in 0..d {
                orow[c] += ark * brow[c];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub block: Mat,
}

/// Symmetric sparse matrix of orthogonal d x d blocks.
///
/// Off-diagonal blocks are stored once per unordered pair {i, j} under i < j;
/// the (j, i) block is the transpose, produced on access. Diagonal blocks are
/// implicitly I_d and never stored. Edge and adjacency lists are kept sorted
/// so products sum in a fixed order and repeated runs are bit-identical.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    n: usize,
    d: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(u32, u32)>>,
}

impl ObservationMatrix {
    pub fn from_edges(n: usize, d: usize, raw: Vec<(u32, u32, Mat)>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(invalid("observation matrix needs n >= 1 and d >= 1"));
        }
        let mut edges = Vec::with_capacity(raw.len());
        for (i, j, block) in raw {
            if i == j {
                return Err(invalid(format!("self-pair ({i},{i}) is implicit and may not be stored")));
            }
            if (i as usize) >= n || (j as usize) >= n {
                return Err(invalid(format!("pair ({i},{j}) out of range for n={n}")));
            }
            if (block.rows(), block.cols()) != (d, d) {
                return Err(invalid(format!(
                    "block for ({i},{j}) has shape {}x{}, expected {d}x{d}",
                    block.rows(),
                    block.cols()
                )));
            }
            if !block.is_finite() {
                return Err(invalid(format!("block for ({i},{j}) has non-finite entries")));
            }
            let resid = block.mul_nt(&block).sub(&Mat::identity(d)).frob_norm();
            if resid > ORTHO_TOL {
                return Err(invalid(format!(
                    "block for ({i},{j}) is not orthogonal (residual {resid:.2e})"
                )));
            }
            let (i, j, block) = if i < j { (i, j, block) } else { (j, i, block.transpose()) };
            edges.push(Edge { i, j, block });
        }
        edges.sort_by_key(|e| (e.i, e.j));
        for w in edges.windows(2) {
            if w[0].i == w[1].i && w[0].j == w[1].j {
                return Err(invalid(format!("duplicate pair ({}, {})", w[0].i, w[0].j)));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            adj[e.i as usize].push((e.j, idx as u32));
            adj[e.j as usize].push((e.i, idx as u32));
        }
        for list in &mut adj {
            list.sort_by_key(|&(nbr, _)| nbr);
        }
        Ok(ObservationMatrix { n, d, edges, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, i: u32, j: u32) -> bool {
        if i == j {
            return true;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search_by_key(&(a, b), |e| (e.i, e.j)).is_ok()
    }

    /// The (i, j) block: I_d on the diagonal, the stored block (transposed for
    /// i > j) on observed pairs, `None` on unobserved pairs.
    pub fn block(&self, i: u32, j: u32) -> Option<Mat> {
        if i == j {
            return Some(Mat::identity(self.d));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let idx = self.edges.binary_search_by_key(&(a, b), |e| (e.i, e.j)).ok()?;
        let block = &self.edges[idx].block;
        Some(if i < j { block.clone() } else { block.transpose() })
    }

    /// Neighbors of node `i` with edge indices, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> &[(u32, u32)] {
        &self.adj[i]
    }

    /// `A * v` over the block structure. The implicit diagonal contributes
    /// `v` itself; each observed pair contributes in both orientations. Cost
    /// is proportional to edge_count * K * d^3.
    pub fn block_apply(&self, v: &BlockMat) -> Result<BlockMat> {
        if v.brows() != self.n || v.d() != self.d {
            return Err(invalid(format!(
                "operand has {} block rows of d={}, matrix wants {} of d={}",
                v.brows(),
                v.d(),
                self.n,
                self.d
            )));
        }
        let d = self.d;
        let k = v.bcols();
        let mut out = v.clone();
        for i in 0..self.n {
            for &(j, eidx) in &self.adj[i] {
                let e = &self.edges[eidx as usize];
                let transpose = e.i != i as u32;
                for c in 0..k {
                    let src = v.block_slice(j as usize, c);
                    acc_block_mul(out.block_slice_mut(i, c), e.block.data(), src, d, transpose);
                }
            }
        }
        Ok(out)
    }

    /// `A * x` for a flat vector of length n*d, same diagonal convention.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n * self.d);
        let d = self.d;
        let mut y = x.to_vec();
        for i in 0..self.n {
            for &(j, eidx) in &self.adj[i] {
                let e = &self.edges[eidx as usize];
                let transpose = e.i != i as u32;
                let b = e.block.data();
                for r in 0..d {
                    let mut s = 0.0;
                    for c in 0..d {
                        let brc = if transpose { b[c * d + r] } else { b[r * d + c] };
                        s += brc * x[j as usize * d + c];
                    }
                    y[i * d + r] += s;
                }
            }
        }
        y
    }

    /// Fully materialized (n*d) x (n*d) symmetric matrix; test and diagnostic
    /// use only.
    pub fn to_dense(&self) -> Mat {
        let d = self.d;
        let mut m = Mat::identity(self.n * d);
        for e in &self.edges {
            for r in 0..d {
                for c in 0..d {
                    let v = e.block[(r, c)];
                    m[(e.i as usize * d + r, e.j as usize * d + c)] = v;
                    m[(e.j as usize * d + c, e.i as usize * d + r)] = v;
                }
            }
        }
        m
    }
}
