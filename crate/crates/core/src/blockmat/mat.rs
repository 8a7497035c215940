//! Dense row-major matrices and the small decompositions used throughout.
//!
//! Blocks in this crate are tiny (d rarely exceeds 5), so the factorizations
//! are written directly for that regime: one-sided Jacobi for singular values,
//! Householder reflections for QR, partial-pivoting LU for determinants, and
//! cyclic Jacobi for symmetric eigenproblems. All of them are plain O(n^3)
//! kernels with no blocking or workspace reuse.

use std::ops::{Index, IndexMut};

use crate::error::{invalid, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `self * other`.
    pub fn mul(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, other.cols);
        out.add_mul(self, other);
        out
    }

    /// `self * other^T`.
    pub fn mul_nt(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut s = 0.0;
                for k in 0..self.cols {
                    s += self[(i, k)] * other[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// `self += a * b`.
    pub fn add_mul(&mut self, a: &Mat, b: &Mat) {
        assert_eq!(a.cols, b.rows);
        assert_eq!((self.rows, self.cols), (a.rows, b.cols));
        for i in 0..a.rows {
            for k in 0..a.cols {
                let aik = a[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    self[(i, j)] += aik * b[(k, j)];
                }
            }
        }
    }

    /// `self += a^T * b`.
    pub fn add_mul_tn(&mut self, a: &Mat, b: &Mat) {
        assert_eq!(a.rows, b.rows);
        assert_eq!((self.rows, self.cols), (a.cols, b.cols));
        for k in 0..a.rows {
            for i in 0..a.cols {
                let aki = a[(k, i)];
                if aki == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    self[(i, j)] += aki * b[(k, j)];
                }
            }
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular value decomposition `x = u * diag(sigma) * v^T` of a square
/// matrix, with `sigma` sorted descending and `u`, `v` orthogonal.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

/// One-sided Jacobi SVD for small square matrices.
///
/// Columns of a working copy are rotated pairwise until mutually orthogonal;
/// their norms are the singular values. Rank-deficient inputs get their
/// missing left singular vectors from a Gram-Schmidt completion, so `u` is
/// orthogonal even when `x` is singular.
pub fn svd(x: &Mat) -> Result<Svd> {
    if !x.is_square() {
        return Err(invalid(format!("svd expects a square matrix, got {}x{}", x.rows(), x.cols())));
    }
    if !x.is_finite() {
        return Err(invalid("svd input has non-finite entries"));
    }
    let d = x.rows();
    let mut b = x.clone();
    let mut v = Mat::identity(d);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..d {
                    let xp = b[(i, p)];
                    let xq = b[(i, q)];
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() || apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotated = true;
                for i in 0..d {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        sweeps += 1;
        if !rotated || sweeps >= 60 {
            break;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let norms: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &c| norms[c].partial_cmp(&norms[a]).unwrap().then(a.cmp(&c)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = Mat::zeros(d, d);
    let mut vs = Mat::zeros(d, d);
    for (out_j, &j) in order.iter().enumerate() {
        for i in 0..d {
            vs[(i, out_j)] = v[(i, j)];
        }
        if norms[j] > 0.0 {
            for i in 0..d {
                u[(i, out_j)] = b[(i, j)] / norms[j];
            }
        }
    }

    // Replace vanishing (or numerically collapsed) columns of u with an
    // orthonormal completion so u is always a full basis.
    let mut next_canonical = 0usize;
    for j in 0..d {
        let mut col: Vec<f64> = (0..d).map(|i| u[(i, j)]).collect();
        if sigma[j] == 0.0 {
            col = vec![0.0; d];
        }
        loop {
            for prev in 0..j {
                let mut proj = 0.0;
                for i in 0..d {
                    proj += u[(i, prev)] * col[i];
                }
                for i in 0..d {
                    col[i] -= proj * u[(i, prev)];
                }
            }
            let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-6 {
                for i in 0..d {
                    u[(i, j)] = col[i] / nrm;
                }
                break;
            }
            // Degenerate direction: seed from the next canonical vector.
            col = vec![0.0; d];
            col[next_canonical] = 1.0;
            next_canonical += 1;
        }
    }

    Ok(Svd { u, sigma, v: vs })
}

/// Householder QR of a square matrix: `x = q * r` with `q` orthogonal and `r`
/// upper triangular. No sign normalization is applied here; callers that need
/// a canonical form (such as the Haar sampler) fix signs themselves.
pub fn qr(x: &Mat) -> Result<(Mat, Mat)> {
    if !x.is_square() {
        return Err(invalid(format!("qr expects a square matrix, got {}x{}", x.rows(), x.cols())));
    }
    if !x.is_finite() {
        return Err(invalid("qr input has non-finite entries"));
    }
    let n = x.rows();
    let mut r = x.clone();
    let mut q = Mat::identity(n);

    for k in 0..n {
        let mut norm = 0.0;
        for i in k..n {
            norm += r[(i, k)] * r[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n];
        v[k] = r[(k, k)] - alpha;
        for i in (k + 1)..n {
            v[i] = r[(i, k)];
        }
        let vtv: f64 = v[k..].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        // r <- (I - 2 v v^T / v^T v) r, and accumulate q on the right.
        for j in 0..n {
            let mut dotp = 0.0;
            for i in k..n {
                dotp += v[i] * r[(i, j)];
            }
            let f = 2.0 * dotp / vtv;
            for i in k..n {
                r[(i, j)] -= f * v[i];
            }
        }
        for j in 0..n {
            let mut dotp = 0.0;
            for i in k..n {
                dotp += q[(j, i)] * v[i];
            }
            let f = 2.0 * dotp / vtv;
            for i in k..n {
                q[(j, i)] -= f * v[i];
            }
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            r[(i, j)] = 0.0;
        }
    }
    Ok((q, r))
}

/// Determinant via LU with partial pivoting.
pub fn det(x: &Mat) -> Result<f64> {
    if !x.is_square() {
        return Err(invalid(format!("det expects a square matrix, got {}x{}", x.rows(), x.cols())));
    }
    if !x.is_finite() {
        return Err(invalid("det input has non-finite entries"));
    }
    let n = x.rows();
    let mut a = x.clone();
    let mut sign = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[(i, k)].abs() > a[(piv, k)].abs() {
                piv = i;
            }
        }
        if a[(piv, k)] == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            sign = -sign;
        }
        for i in (k + 1)..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    let mut d = sign;
    for k in 0..n {
        d *= a[(k, k)];
    }
    Ok(d)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted descending and the matching orthonormal
/// eigenvector columns. The input is symmetrized first, so mild asymmetry
/// from accumulated rounding is tolerated.
pub fn sym_eigen(x: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !x.is_square() {
        return Err(invalid(format!(
            "sym_eigen expects a square matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if !x.is_finite() {
        return Err(invalid("sym_eigen input has non-finite entries"));
    }
    let n = x.rows();
    let mut a = Mat::from_fn(n, n, |i, j| 0.5 * (x[(i, j)] + x[(j, i)]));
    let mut v = Mat::identity(n);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let threshold = 1e-14 * (a[(p, p)].abs() * a[(q, q)].abs()).sqrt();
                if apq.abs() <= threshold || apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotated = true;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
        sweeps += 1;
        if !rotated || sweeps >= 100 {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (out_j, &j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, out_j)] = v[(i, j)];
        }
    }
    Ok((values, vectors))
}
