//! Weighted Karhunen-Loeve decomposition of PC-represented random vectors.
//!
//! For a random vector `q = Σ_α q_α ψ_α` and an SPD weighting matrix `W`,
//! the modes solve `Wᵀ C W φ = λ W φ` with `C = Σ_{|α|≥1} q_α q_αᵀ`. They are
//! W-orthonormal, and the reduced variables `η_j = (1/√λ_j) (q − q̄)ᵀ W φ^j`
//! are zero-mean and uncorrelated with unit variance.
//!
//! Two routes are provided. [`weighted_kl`] reduces the covariance with a
//! Cholesky factor `W = L Lᵀ` to `Lᵀ C L ψ = λ ψ`. [`decompose`] skips the
//! covariance and takes a one-sided Jacobi SVD of `Z = [Lᵀ q_α]`, which gives
//! the same eigenpairs (`λ = σ²`) plus the η coordinates as left singular
//! vectors, accurate even for small `λ_j`. The solvers use the second.

use alloc::string::String;
use alloc::vec::Vec;

use crate::basis::PcVector;
use crate::error::{Error, Result};
use crate::linalg::{
    backward_substitute_transposed, canonicalize_sign, cholesky, dot, jacobi_svd, sym_eigen, DenseMatrix,
};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_FLOOR: f64 = 1e-12;

/// Which inner product a decomposition was computed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Weighting {
    Identity,
    GramH1,
    BlockDiagonal(Vec<Weighting>),
    Custom(String),
}

impl Weighting {
    pub fn label(&self) -> String {
        match self {
            Weighting::Identity => "identity".into(),
            Weighting::GramH1 => "h1-gram".into(),
            Weighting::BlockDiagonal(parts) => {
                let mut s = String::from("block(");
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    s.push_str(&p.label());
                }
                s.push(')');
                s
            }
            Weighting::Custom(name) => name.clone(),
        }
    }
}

/// Mean `q_0` and covariance `Σ_{|α|≥1} q_α q_αᵀ`.
pub fn pc_second_order(q: &PcVector) -> (Vec<f64>, DenseMatrix) {
    let w = q.width();
    let mut c = DenseMatrix::zeros(w, w);
    for qa in q.coeffs().skip(1) {
        c.add_outer(1.0, qa, qa);
    }
    (q.mean().to_vec(), c)
}

/// Eigenvalues (descending) and W-orthonormal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct KlEigen {
    pub values: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
}

/// Solves `W C W φ = λ W φ` through `W = L Lᵀ` and `Lᵀ C L ψ = λ ψ`, `φ = L⁻ᵀ ψ`.
pub fn weighted_kl(covariance: &DenseMatrix, w: &DenseMatrix) -> Result<KlEigen> {
    let n = w.rows();
    if covariance.rows() != n || covariance.cols() != n || w.cols() != n {
        return Err(Error::invalid("covariance and weighting matrix sizes differ"));
    }
    let l = cholesky(w)?;
    let b = l.transpose().matmul(covariance).matmul(&l);
    let eig = sym_eigen(&b)?;
    let mut modes = Vec::with_capacity(n);
    for j in 0..n {
        let mut phi = backward_substitute_transposed(&l, &eig.vectors.column(j));
        canonicalize_sign(&mut phi);
        modes.push(phi);
    }
    Ok(KlEigen { values: eig.values, modes })
}

/// Full decomposition from the SVD route.
#[derive(Debug, Clone, PartialEq)]
pub struct KlDecomposition {
    pub mean: Vec<f64>,
    /// `λ_j = σ_j²`, descending; length `min(w, terms − 1)`.
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// `η_{j,α}` for `|α| ≥ 1` (index `α − 1`), one row per mode.
    pub coords: Vec<Vec<f64>>,
    /// `Σ_{|α|≥1} q_αᵀ W q_α`, computed directly.
    pub energy: f64,
    pub weighting: Weighting,
    terms: usize,
}

/// Weighted KL of a PC vector by a Jacobi SVD of `[Lᵀ q_α]_{|α|≥1}`.
pub fn decompose(q: &PcVector, w: &DenseMatrix, weighting: Weighting) -> Result<KlDecomposition> {
    let n = q.width();
    if w.rows() != n || w.cols() != n {
        return Err(Error::invalid("weighting matrix does not match the PC vector width"));
    }
    let l = cholesky(w)?;
    let fluct = q.terms().saturating_sub(1);
    // Zᵀ: one row per α, z_α = Lᵀ q_α; columns of Zᵀ are what the SVD rotates
    let mut zt = DenseMatrix::zeros(fluct, n);
    let mut energy = 0.0;
    for (a, qa) in q.coeffs().skip(1).enumerate() {
        let row = zt.row_mut(a);
        for (i, r) in row.iter_mut().enumerate() {
            // (Lᵀ q)_i = Σ_{k ≥ i} L_{ki} q_k
            let mut s = 0.0;
            for (k, qk) in qa.iter().enumerate().skip(i) {
                s += l[(k, i)] * qk;
            }
            *r = s;
        }
        energy += w.bilinear(qa, qa);
    }
    let rank_max = n.min(fluct);
    if fluct == 0 {
        return Ok(KlDecomposition {
            mean: q.mean().to_vec(),
            eigenvalues: Vec::new(),
            modes: Vec::new(),
            coords: Vec::new(),
            energy,
            weighting,
            terms: q.terms(),
        });
    }
    let svd = jacobi_svd(&zt)?;
    let mut eigenvalues = Vec::with_capacity(rank_max);
    let mut modes = Vec::with_capacity(rank_max);
    let mut coords = Vec::with_capacity(rank_max);
    for j in 0..rank_max {
        let s = svd.singular_values[j];
        let mut phi = backward_substitute_transposed(&l, &svd.v.column(j));
        let mut eta = svd.u.column(j);
        if canonicalize_sign(&mut phi) {
            eta.iter_mut().for_each(|e| *e = -*e);
        }
        eigenvalues.push(s * s);
        modes.push(phi);
        coords.push(eta);
    }
    Ok(KlDecomposition { mean: q.mean().to_vec(), eigenvalues, modes, coords, energy, weighting, terms: q.terms() })
}

impl KlDecomposition {
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Number of eigenvalues above the rank floor.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.eigenvalues)
    }

    /// Keeps the leading `d` modes.
    pub fn truncate(&self, d: usize) -> Result<KlRecord> {
        check_floor(&self.eigenvalues, d)?;
        Ok(KlRecord {
            mean: self.mean.clone(),
            eigenvalues: self.eigenvalues.clone(),
            modes: self.modes[..d].to_vec(),
            coords: self.coords[..d].to_vec(),
            dimension: d,
            energy: self.energy,
            weighting: self.weighting.clone(),
            terms: self.terms,
        })
    }

    /// Selects `d` by the residual-energy criterion and truncates.
    pub fn reduce(&self, tol: f64) -> Result<KlRecord> {
        let d = select_dimension(&self.eigenvalues, self.energy, tol)?;
        self.truncate(d)
    }
}

fn numerical_rank(values: &[f64]) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    values.iter().take_while(|&&l| l > RANK_FLOOR * top).count()
}

fn check_floor(values: &[f64], d: usize) -> Result<()> {
    if d == 0 {
        return Ok(());
    }
    let top = values.first().copied().unwrap_or(0.0);
    let floor = RANK_FLOOR * top;
    for (j, &l) in values.iter().enumerate().take(d) {
        if !(l > floor) {
            return Err(Error::DegenerateMode { index: j, value: l, floor });
        }
    }
    if d > values.len() {
        return Err(Error::invalid("requested more modes than the decomposition holds"));
    }
    Ok(())
}

/// Smallest `d` with `energy − Σ_{j≤d} λ_j ≤ tol`, never past the rank floor.
pub fn select_dimension(eigenvalues: &[f64], energy: f64, tol: f64) -> Result<usize> {
    if !(tol >= 0.0) {
        return Err(Error::invalid("KL tolerance must be non-negative"));
    }
    let cap = numerical_rank(eigenvalues);
    let mut kept = 0.0;
    for d in 0..cap {
        if energy - kept <= tol {
            return Ok(d);
        }
        kept += eigenvalues[d];
    }
    Ok(cap)
}

/// A truncated decomposition: everything needed to rebuild `q^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KlRecord {
    pub mean: Vec<f64>,
    /// Full spectrum, not just the retained part.
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// `η_{j,α}` for `j < d`, `|α| ≥ 1`.
    pub coords: Vec<Vec<f64>>,
    pub dimension: usize,
    pub energy: f64,
    pub weighting: Weighting,
    terms: usize,
}

impl KlRecord {
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `Σ_{j>d} λ_j`.
    pub fn discarded_energy(&self) -> f64 {
        self.eigenvalues.iter().skip(self.dimension).sum()
    }
}

/// `η_{j,α} = (1/√λ_j) q_αᵀ W φ^j` for `j < d`, from given eigenpairs.
pub fn reduced_coords(
    q: &PcVector,
    eig: &KlEigen,
    w: &DenseMatrix,
    d: usize,
    weighting: Weighting,
) -> Result<KlRecord> {
    check_floor(&eig.values, d)?;
    let wphi: Vec<Vec<f64>> = eig.modes[..d].iter().map(|phi| w.matvec(phi)).collect();
    let coords = wphi
        .iter()
        .zip(&eig.values)
        .map(|(wp, &l)| {
            let s = 1.0 / libm::sqrt(l);
            q.coeffs().skip(1).map(|qa| s * dot(qa, wp)).collect()
        })
        .collect();
    let energy = q.coeffs().skip(1).map(|qa| w.bilinear(qa, qa)).sum();
    Ok(KlRecord {
        mean: q.mean().to_vec(),
        eigenvalues: eig.values.clone(),
        modes: eig.modes[..d].to_vec(),
        coords,
        dimension: d,
        energy,
        weighting,
        terms: q.terms(),
    })
}

/// `q^d_0 = q̄`, `q^d_α = Σ_{j<d} √λ_j η_{j,α} φ^j`.
pub fn reconstruct(record: &KlRecord) -> PcVector {
    let w = record.mean.len();
    let mut out = PcVector::constant(record.terms, &record.mean);
    for j in 0..record.dimension {
        let s = libm::sqrt(record.eigenvalues[j]);
        let phi = &record.modes[j];
        for (a, &eta) in record.coords[j].iter().enumerate() {
            let c = out.coeff_mut(a + 1);
            let f = s * eta;
            for i in 0..w {
                c[i] += f * phi[i];
            }
        }
    }
    out
}

/// `Σ_α q_αᵀ W q_α` over all coefficients, `|α| ≥ 1` excluded when `fluctuation_only`.
pub fn weighted_energy(q: &PcVector, w: &DenseMatrix, fluctuation_only: bool) -> f64 {
    let skip = usize::from(fluctuation_only);
    q.coeffs().skip(skip).map(|c| w.bilinear(c, c)).sum()
}

/// Dense block-diagonal matrix from square blocks.
pub fn block_diagonal(blocks: &[&DenseMatrix]) -> DenseMatrix {
    let n: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut out = DenseMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out[(off + i, off + j)] = b[(i, j)];
            }
        }
        off += b.rows();
    }
    out
}
