//! Total-degree Legendre polynomial chaos: multi-indices, basis evaluation,
//! PC vectors and nonintrusive projection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::SymBandMatrix;
use crate::quadrature::QuadratureRule;

/// Multi-indices `α ∈ N^m` with `|α| ≤ p`, in graded lexicographic order:
/// by total degree, then by descending first component, then second, …
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    degree: usize,
    indices: Vec<u32>,
}

impl MultiIndexSet {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("multi-index dimension must be >= 1"));
        }
        let mut indices = Vec::new();
        let mut cur = vec![0u32; dim];
        for total in 0..=degree {
            push_degree(&mut indices, &mut cur, 0, total as u32);
        }
        Ok(Self { dim, degree, indices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.indices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.chunks_exact(self.dim)
    }

    /// Position of `alpha` in the ordering.
    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.iter().position(|a| a == alpha)
    }

    /// Evaluates every basis polynomial at `xi` into `out`.
    pub fn eval_all_into(&self, xi: &[f64], out: &mut [f64]) {
        assert_eq!(xi.len(), self.dim);
        assert_eq!(out.len(), self.len());
        let p = self.degree;
        let mut table = vec![0.0; self.dim * (p + 1)];
        for (d, &x) in xi.iter().enumerate() {
            legendre_orthonormal_into(x, &mut table[d * (p + 1)..(d + 1) * (p + 1)]);
        }
        for (o, alpha) in out.iter_mut().zip(self.iter()) {
            let mut v = 1.0;
            for (d, &a) in alpha.iter().enumerate() {
                if a != 0 {
                    v *= table[d * (p + 1) + a as usize];
                }
            }
            *o = v;
        }
    }

    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_all_into(xi, &mut out);
        out
    }
}

fn push_degree(out: &mut Vec<u32>, cur: &mut [u32], d: usize, remaining: u32) {
    if d + 1 == cur.len() {
        cur[d] = remaining;
        out.extend_from_slice(cur);
        cur[d] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        cur[d] = a;
        push_degree(out, cur, d + 1, remaining - a);
    }
    cur[d] = 0;
}

/// `ψ_0(x), …, ψ_p(x)` with `ψ_n = √(2n+1) P_n`, orthonormal for the
/// density 1/2 on `[-1, 1]`.
pub fn legendre_orthonormal_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut p0 = 1.0;
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let mut p1 = x;
    out[1] = libm::sqrt(3.0) * x;
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
        out[n + 1] = libm::sqrt(2.0 * nf + 3.0) * p2;
    }
}

/// `ψ_α(ξ) = Π_i ψ_{α_i}(ξ_i)`.
pub fn eval_pc(alpha: &[u32], xi: &[f64]) -> f64 {
    assert_eq!(alpha.len(), xi.len());
    let mut v = 1.0;
    for (&a, &x) in alpha.iter().zip(xi) {
        if a == 0 {
            continue;
        }
        let mut buf = vec![0.0; a as usize + 1];
        legendre_orthonormal_into(x, &mut buf);
        v *= buf[a as usize];
    }
    v
}

/// Coefficients `q_α ∈ R^w` of a PC expansion, one row per multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct PcVector {
    width: usize,
    terms: usize,
    data: Vec<f64>,
}

impl PcVector {
    pub fn zeros(terms: usize, width: usize) -> Self {
        Self { width, terms, data: vec![0.0; terms * width] }
    }

    /// Deterministic vector: `q_0 = mean`, every other coefficient zero.
    pub fn constant(terms: usize, mean: &[f64]) -> Self {
        let mut v = Self::zeros(terms, mean.len());
        v.coeff_mut(0).copy_from_slice(mean);
        v
    }

    pub fn from_rows(terms: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != terms * width {
            return Err(Error::invalid("PC coefficient data length mismatch"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PC coefficients must be finite"));
        }
        Ok(Self { width, terms, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn coeff(&self, alpha: usize) -> &[f64] {
        &self.data[alpha * self.width..(alpha + 1) * self.width]
    }

    pub fn coeff_mut(&mut self, alpha: usize) -> &mut [f64] {
        &mut self.data[alpha * self.width..(alpha + 1) * self.width]
    }

    pub fn coeffs(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }

    pub fn mean(&self) -> &[f64] {
        self.coeff(0)
    }

    /// `Σ_α q_α ψ_α` for precomputed basis values `psi`.
    pub fn evaluate_with(&self, psi: &[f64]) -> Vec<f64> {
        assert_eq!(psi.len(), self.terms);
        let mut out = vec![0.0; self.width];
        for (c, &p) in self.coeffs().zip(psi) {
            if p == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(c) {
                *o += p * v;
            }
        }
        out
    }

    pub fn evaluate(&self, basis: &MultiIndexSet, xi: &[f64]) -> Vec<f64> {
        self.evaluate_with(&basis.eval_all(xi))
    }

    /// `Σ_{|α|≥1} q_αᵀ W q_α`, the W-weighted fluctuation energy.
    pub fn fluctuation_energy(&self, w: &SymBandMatrix) -> f64 {
        self.coeffs().skip(1).map(|c| w.quadratic(c)).sum()
    }

    /// `Σ_α q_αᵀ W q_α`.
    pub fn energy(&self, w: &SymBandMatrix) -> f64 {
        self.coeffs().map(|c| w.quadratic(c)).sum()
    }

    /// Coefficientwise difference.
    pub fn sub(&self, other: &PcVector) -> Result<PcVector> {
        if self.width != other.width || self.terms != other.terms {
            return Err(Error::Incompatible("PC vectors have different shapes".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(PcVector { width: self.width, terms: self.terms, data })
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// Stacks the components of several PC vectors sharing a basis.
    pub fn concat(parts: &[&PcVector]) -> Result<PcVector> {
        let terms = parts.first().map_or(0, |p| p.terms);
        if parts.iter().any(|p| p.terms != terms) {
            return Err(Error::Incompatible("cannot stack PC vectors with different bases".into()));
        }
        let width: usize = parts.iter().map(|p| p.width).sum();
        let mut data = Vec::with_capacity(terms * width);
        for a in 0..terms {
            for p in parts {
                data.extend_from_slice(p.coeff(a));
            }
        }
        Ok(PcVector { width, terms, data })
    }

    /// Components `[start, start + width)` of every coefficient.
    pub fn slice_components(&self, start: usize, width: usize) -> PcVector {
        assert!(start + width <= self.width);
        let mut data = Vec::with_capacity(self.terms * width);
        for c in self.coeffs() {
            data.extend_from_slice(&c[start..start + width]);
        }
        PcVector { width, terms: self.terms, data }
    }
}

/// Basis values at every node of a quadrature rule, `psi[k][α]`.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    terms: usize,
    weights: Vec<f64>,
    psi: Vec<f64>,
}

impl NodalBasis {
    pub fn new(basis: &MultiIndexSet, rule: &QuadratureRule) -> Result<Self> {
        if basis.dim() != rule.dim() {
            return Err(Error::Incompatible("basis and quadrature dimensions differ".into()));
        }
        let terms = basis.len();
        let mut psi = vec![0.0; rule.len() * terms];
        for (k, xi) in rule.nodes().enumerate() {
            basis.eval_all_into(xi, &mut psi[k * terms..(k + 1) * terms]);
        }
        Ok(Self { terms, weights: rule.weights().to_vec(), psi })
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn psi(&self, k: usize) -> &[f64] {
        &self.psi[k * self.terms..(k + 1) * self.terms]
    }

    pub fn evaluate(&self, q: &PcVector, k: usize) -> Vec<f64> {
        q.evaluate_with(self.psi(k))
    }

    /// `q(ξ_k)` at every node.
    pub fn evaluate_all<E: Executor>(&self, exec: &E, q: &PcVector) -> Vec<Vec<f64>> {
        exec.map(self.n_nodes(), |k| self.evaluate(q, k))
    }
}

const PROJECTION_CHUNK: usize = 16;

/// `q_α = Σ_k q(ξ_k) ψ_α(ξ_k) w_k`, summed in ascending node order for each
/// `α` (so results do not depend on how `exec` schedules the chunks).
pub fn project_nonintrusive<E: Executor>(exec: &E, values: &[Vec<f64>], nodal: &NodalBasis) -> Result<PcVector> {
    let n = nodal.n_nodes();
    if values.len() != n {
        return Err(Error::IncompleteEvaluation { expected: n, got: values.len() });
    }
    let width = values.first().map_or(0, |v| v.len());
    if values.iter().any(|v| v.len() != width) {
        return Err(Error::invalid("node values have inconsistent widths"));
    }
    let terms = nodal.terms;
    let chunks = terms.div_ceil(PROJECTION_CHUNK);
    let parts = exec.map(chunks, |c| {
        let lo = c * PROJECTION_CHUNK;
        let hi = (lo + PROJECTION_CHUNK).min(terms);
        let mut acc = vec![0.0; (hi - lo) * width];
        for (k, v) in values.iter().enumerate() {
            let wk = nodal.weights[k];
            let psi = &nodal.psi(k)[lo..hi];
            for (a, &p) in psi.iter().enumerate() {
                let s = p * wk;
                let row = &mut acc[a * width..(a + 1) * width];
                for (o, x) in row.iter_mut().zip(v) {
                    *o += x * s;
                }
            }
        }
        acc
    });
    let mut data = Vec::with_capacity(terms * width);
    for p in parts {
        data.extend(p);
    }
    PcVector::from_rows(terms, width, data)
}
