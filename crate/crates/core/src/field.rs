//! Random thermal-transmittivity field `h(x, ξ) = h̄ (1 + δ Σ √λ_j √3 ξ_j φ^j(x))`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, Mesh};
use crate::linalg::{
    backward_substitute_transposed, canonicalize_sign, cholesky, forward_substitute, sym_eigen, DenseMatrix,
};

/// `C(x, y) = 4a² / (π² (x−y)²) · sin²(π (x−y) / (2a))`, with `C(x, x) = 1`.
pub fn covariance_kernel(x: f64, y: f64, a: f64) -> f64 {
    let u = PI * (x - y) / (2.0 * a);
    if u.abs() < 1e-4 {
        // sinc² series, accurate to machine precision here
        let u2 = u * u;
        return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 45.0;
    }
    let s = libm::sin(u) / u;
    s * s
}

/// Discrete spectrum of the covariance operator on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpectrum {
    /// All `r` Galerkin eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Nodal values of the leading `m` modes, L²-orthonormal.
    pub modes: Vec<Vec<f64>>,
}

/// Galerkin discretization of `∫ C(x, y) φ(y) dy = λ φ(x)` on the hat-function
/// basis, solved as `(∫∫ N_i C N_j) c = λ (∫ N_i N_j) c`.
pub fn field_eigendecomposition(mesh: &Mesh, a: f64, m: usize) -> Result<FieldSpectrum> {
    if !(a > 0.0) {
        return Err(Error::invalid("correlation length must be positive"));
    }
    let r = mesh.n_nodes();
    if m > r {
        return Err(Error::invalid("more field modes requested than mesh nodes"));
    }
    let kernel = kernel_matrix(mesh, a);
    let mass = assemble_mass(mesh, |_| 1.0).to_dense();
    let l = cholesky(&mass)?;

    // B = L⁻¹ C L⁻ᵀ
    let mut x = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let col = forward_substitute(&l, &kernel.column(j));
        for i in 0..r {
            x[(j, i)] = col[i];
        }
    }
    let mut b = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let col = forward_substitute(&l, &x.column(j));
        for i in 0..r {
            b[(i, j)] = col[i];
        }
    }
    for i in 0..r {
        for j in 0..i {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let eig = sym_eigen(&b)?;
    let modes = (0..m)
        .map(|j| {
            let mut c = backward_substitute_transposed(&l, &eig.vectors.column(j));
            canonicalize_sign(&mut c);
            c
        })
        .collect();
    Ok(FieldSpectrum { eigenvalues: eig.values, modes })
}

fn kernel_matrix(mesh: &Mesh, a: f64) -> DenseMatrix {
    let r = mesh.n_nodes();
    let pts: Vec<_> = mesh.quad_points().collect();
    let mut c = DenseMatrix::zeros(r, r);
    for p in &pts {
        for q in &pts {
            let k = covariance_kernel(p.x, q.x, a) * p.weight * q.weight;
            for (li, &si) in p.shape.iter().enumerate() {
                for (lj, &sj) in q.shape.iter().enumerate() {
                    c[(p.element + li, q.element + lj)] += k * si * sj;
                }
            }
        }
    }
    c
}

/// Truncated KL model of the transmittivity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub mean: f64,
    pub variation: f64,
    pub correlation_length: f64,
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// `δ √(3 λ_j) φ^j`, cached for evaluation.
    scaled: Vec<Vec<f64>>,
}

impl FieldModel {
    pub fn new(mesh: &Mesh, mean: f64, variation: f64, correlation_length: f64, m: usize) -> Result<Self> {
        if !(mean > 0.0) || !(variation >= 0.0) {
            return Err(Error::invalid("field mean must be positive and variation non-negative"));
        }
        let spectrum = field_eigendecomposition(mesh, correlation_length, m)?;
        Ok(Self::from_spectrum(spectrum, mean, variation, correlation_length, m))
    }

    pub fn from_spectrum(
        spectrum: FieldSpectrum,
        mean: f64,
        variation: f64,
        correlation_length: f64,
        m: usize,
    ) -> Self {
        let eigenvalues: Vec<f64> = spectrum.eigenvalues[..m].to_vec();
        let modes = spectrum.modes;
        let scaled = eigenvalues
            .iter()
            .zip(&modes)
            .map(|(&l, phi)| {
                let c = variation * libm::sqrt(3.0 * l.max(0.0));
                phi.iter().map(|v| c * v).collect()
            })
            .collect();
        Self { mean, variation, correlation_length, eigenvalues, modes, scaled }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.modes.first().map_or(0, |m| m.len())
    }

    /// Nodal `h` values for the sample `xi`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::invalid("sample dimension does not match the field"));
        }
        let r = self.n_nodes();
        let mut fluct = vec![0.0; r];
        for (g, &x) in self.scaled.iter().zip(xi) {
            for (f, v) in fluct.iter_mut().zip(g) {
                *f += v * x;
            }
        }
        let mut h = Vec::with_capacity(r);
        for (node, f) in fluct.into_iter().enumerate() {
            let v = self.mean * (1.0 + f);
            if !(v > 0.0) {
                return Err(Error::RealizationInvalid { node, value: v });
            }
            h.push(v);
        }
        Ok(h)
    }

    /// `Var[h(x_i)] / h̄² = δ² Σ_j λ_j φ^j(x_i)²`.
    pub fn relative_variance(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        for g in &self.scaled {
            for (o, x) in v.iter_mut().zip(g) {
                // ξ_j uniform on [-1, 1] has variance 1/3
                *o += x * x / 3.0;
            }
        }
        v
    }
}
