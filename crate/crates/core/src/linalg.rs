//! Small dense and symmetric banded linear algebra.
//!
//! The problem sizes here are tiny (a few dozen unknowns), so everything is
//! written out directly: banded Cholesky for the finite-element solves, dense
//! Cholesky for the weighting matrices and a cyclic Jacobi eigensolver for the
//! symmetric eigenproblems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entry of `|A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Adds `scale · x yᵀ`.
    pub fn add_outer(&mut self, scale: f64, x: &[f64], y: &[f64]) {
        for (i, xi) in x.iter().enumerate() {
            let s = scale * xi;
            for (o, yj) in self.row_mut(i).iter_mut().zip(y) {
                *o += s * yj;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Symmetric matrix with `bandwidth` nonzero sub-diagonals, lower band stored
/// row by row: entry `(i, j)` with `0 <= i - j <= bandwidth` lives at
/// `i * (bandwidth + 1) + (bandwidth - (i - j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, band: vec![0.0; n * (bandwidth + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let off = hi - lo;
        (off <= self.bandwidth).then(|| hi * (self.bandwidth + 1) + (self.bandwidth - off))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.band[s])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly to `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.band[s] += v;
    }

    pub fn scaled_sum(&self, a: f64, other: &SymBandMatrix, b: f64) -> SymBandMatrix {
        assert_eq!(self.n, other.n);
        let bw = self.bandwidth.max(other.bandwidth);
        let mut out = SymBandMatrix::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                out.add(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let bw = self.bandwidth;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(self.n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bandwidth;
        let mut l = SymBandMatrix::zeros(n, bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.get(i, j);
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Factorization { row: i, value: sum });
                    }
                    l.add(i, i, libm::sqrt(sum));
                } else {
                    let d = l.get(j, j);
                    l.add(i, j, sum / d);
                }
            }
        }
        Ok(BandCholesky { factor: l })
    }
}

/// Lower-triangular banded Cholesky factor `A = L Lᵀ`. The factor reuses the
/// symmetric band layout but only its lower half is meaningful.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: SymBandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.factor;
        let n = l.n;
        let bw = l.bandwidth;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..=(i + bw).min(n - 1) {
                s -= l.get(k, i) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        y
    }
}

/// Solves `A x = b` for a symmetric positive definite banded `A`.
pub fn solve_banded(a: &SymBandMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.size() {
        return Err(Error::invalid("right-hand side length does not match matrix size"));
    }
    Ok(a.cholesky()?.solve(b))
}

/// Dense Cholesky factor `A = L Lᵀ` (lower triangle stored, upper zero).
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::Factorization { row: i, value: sum });
                }
                l[(i, i)] = libm::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` with lower-triangular `L`.
pub fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` with lower-triangular `L`.
pub fn backward_substitute_transposed(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves a general square system by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::invalid("solve_dense needs a square matrix and matching right-hand side"));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    for col in 0..n {
        let (piv, big) =
            (col..n).map(|i| (i, m[(i, col)].abs())).fold((col, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if !(big > f64::EPSILON * scale * n as f64) {
            return Err(Error::Factorization { row: col, value: big });
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for i in (col + 1)..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    let ata = a.transpose().matmul(a);
    Ok(libm::sqrt(sym_eigen(&ata)?.values.first().copied().unwrap_or(0.0).max(0.0)))
}

/// Spectral radius by repeated squaring, `ρ(A) = lim ‖A^(2^j)‖^(1/2^j)`.
pub fn spectral_radius(a: &DenseMatrix) -> f64 {
    let mut m = a.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..40 {
        let nrm = libm::sqrt(m.as_slice().iter().map(|v| v * v).sum::<f64>());
        if nrm == 0.0 {
            return 0.0;
        }
        m.data.iter_mut().for_each(|v| *v /= nrm);
        log_scale += libm::log(nrm) / power;
        m = m.matmul(&m);
        power *= 2.0;
    }
    let nrm = libm::sqrt(m.as_slice().iter().map(|v| v * v).sum::<f64>());
    if nrm == 0.0 {
        return 0.0;
    }
    libm::exp(log_scale + libm::log(nrm) / power)
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in descending order.
/// `vectors` holds the eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid("eigensolver needs a square matrix"));
    }
    let mut m = a.clone();
    // symmetrize against round-off in the inputs
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let scale = m.max_abs();
    let tiny = scale * 1e-300;
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                if apq.abs() <= tiny || apq.abs() <= f64::EPSILON * libm::sqrt((app * aqq).abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Decomposition { sweeps });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// Thin SVD `Z = U Σ Vᵀ` by one-sided (Hestenes) Jacobi rotations of the
/// columns of `Z`. Singular values come out in descending order with `u`
/// holding `Z V` column-normalized; columns with zero singular value are left
/// as zero vectors. Relative accuracy of small singular values is what makes
/// this preferable to forming `ZᵀZ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub singular_values: Vec<f64>,
    /// `rows × k`, orthonormal columns (zero for null singular values).
    pub u: DenseMatrix,
    /// `k × k`, orthogonal, columns are right singular vectors.
    pub v: DenseMatrix,
}

pub fn jacobi_svd(z: &DenseMatrix) -> Result<ThinSvd> {
    let rows = z.rows();
    let k = z.cols();
    // work column-major: columns are contiguous
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| z.column(j)).collect();
    let mut v = DenseMatrix::identity(k);
    // columns this small relative to ‖Z‖_F are numerically zero
    let fro2: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = f64::EPSILON * f64::EPSILON * fro2;
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let xp = *x;
                    let xq = *y;
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                for i in 0..k {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Decomposition { sweeps });
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = DenseMatrix::zeros(rows, k);
    for (jj, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 0.0 {
            for i in 0..rows {
                u[(i, jj)] = cols[j][i] / s;
            }
        }
    }
    let v = DenseMatrix::from_fn(k, k, |i, jj| v[(i, order[jj])]);
    Ok(ThinSvd { singular_values, u, v })
}

/// Flips `v` so that its largest-magnitude entry is positive (first one wins
/// ties). Returns whether it flipped.
pub fn canonicalize_sign(v: &mut [f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SymBandMatrix {
        let mut a = SymBandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64 * 0.1);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = SymBandMatrix::identity(5);
        let b = [1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(solve_banded(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn tridiagonal_round_trip() {
        let a = tridiag(41);
        let x_star: Vec<f64> = (0..41).map(|i| libm::sin(i as f64) + 2.0).collect();
        let b = a.matvec(&x_star);
        let x = solve_banded(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) / norm2(&b) <= 1e-10);
        for (xi, si) in x.iter().zip(&x_star) {
            assert!((xi - si).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_fails_to_factor() {
        let mut a = SymBandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(solve_banded(&a, &[1.0, 1.0, 1.0]), Err(Error::Factorization { .. })));
    }

    #[test]
    fn banded_and_dense_cholesky_agree() {
        let a = tridiag(7);
        let dense = cholesky(&a.to_dense()).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let x1 = a.cholesky().unwrap().solve(&b);
        let x2 = backward_substitute_transposed(&dense, &forward_substitute(&dense, &b));
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = DenseMatrix::from_row_major(3, 3, vec![2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let e = sym_eigen(&a).unwrap();
        let s2 = libm::sqrt(2.0);
        let expect = [2.0 + s2, 2.0, 2.0 - s2];
        for (v, x) in e.values.iter().zip(expect) {
            assert!((v - x).abs() < 1e-13);
        }
        for j in 0..3 {
            let col = e.vectors.column(j);
            let av = a.matvec(&col);
            for i in 0..3 {
                assert!((av[i] - e.values[j] * col[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_svd_reconstructs_and_orthogonalizes() {
        let z = DenseMatrix::from_fn(6, 3, |i, j| libm::cos((i * 3 + j) as f64) + if i == j { 2.0 } else { 0.0 });
        let svd = jacobi_svd(&z).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += svd.u[(i, k)] * svd.singular_values[k] * svd.v[(j, k)];
                }
                assert!((acc - z[(i, j)]).abs() < 1e-13);
            }
        }
        let utu = svd.u.transpose().matmul(&svd.u);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((utu[(i, j)] - e).abs() < 1e-14);
            }
        }
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn dense_solve_and_spectral_quantities() {
        let a = DenseMatrix::from_row_major(3, 3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = solve_dense(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-13);
        }
        assert!(solve_dense(&DenseMatrix::zeros(2, 2), &[1.0, 1.0]).is_err());
        // upper triangular with known eigenvalues 0.5 and -0.25 but a large off-diagonal
        let t = DenseMatrix::from_row_major(2, 2, vec![0.5, 10.0, 0.0, -0.25]);
        assert!((spectral_radius(&t) - 0.5).abs() < 1e-8);
        let d = DenseMatrix::from_row_major(2, 2, vec![3.0, 0.0, 0.0, -4.0]);
        assert!((spectral_norm(&d).unwrap() - 4.0).abs() < 1e-12);
        assert!((spectral_radius(&d) - 4.0).abs() < 1e-8);
    }

    #[test]
    fn sign_canonicalization() {
        let mut v = [0.1, -0.9, 0.3];
        canonicalize_sign(&mut v);
        assert_eq!(v, [-0.1, 0.9, -0.3]);
    }
}
