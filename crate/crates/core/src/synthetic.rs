//! Linear two-subproblem coupled system with its own noise sources.
//!
//! ```text
//! u = A_uu u + A_ux x + a₀(ξ)     y = H u + h₀(ξ)
//! v = B_y  y + B_vv v + b₀(ζ)     x = K v + k₀(ζ)
//! ```
//!
//! Affine maps act exactly on PC coefficients over the joint germ `(ξ, ζ)`,
//! so a degree-1 basis is already exact. The random constructor scales every
//! block so that the row sums of spectral norms equal `ρ`; in the block-max
//! mean-square norm each of `a`, `b`, `h`, `k` is then `ρ`-Lipschitz.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::{MultiIndexSet, PcVector};
use crate::error::{Error, Result};
use crate::kl::{block_diagonal, decompose, reconstruct, Weighting};
use crate::linalg::{solve_dense, spectral_norm, spectral_radius, DenseMatrix};
use crate::mc::symmetric_uniform;

/// `c + G g` with `g` uniform on `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineInput {
    pub offset: Vec<f64>,
    /// `len × m`
    pub loading: DenseMatrix,
}

impl AffineInput {
    fn len(&self) -> usize {
        self.offset.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoupledSystem {
    pub a_uu: DenseMatrix,
    pub a_ux: DenseMatrix,
    pub h: DenseMatrix,
    pub b_y: DenseMatrix,
    pub b_vv: DenseMatrix,
    pub k: DenseMatrix,
    /// Driven by ξ.
    pub a0: AffineInput,
    pub h0: AffineInput,
    /// Driven by ζ.
    pub b0: AffineInput,
    pub k0: AffineInput,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| symmetric_uniform(rng))
}

fn with_norm(rng: &mut ChaCha8Rng, rows: usize, cols: usize, target: f64) -> Result<DenseMatrix> {
    let m = random_matrix(rng, rows, cols);
    let n = spectral_norm(&m)?;
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| m[(i, j)] * target / n))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Result<DenseMatrix> {
    let m = random_matrix(rng, n, n);
    let sym = DenseMatrix::from_fn(n, n, |i, j| m[(i, j)] + m[(j, i)]);
    Ok(crate::linalg::sym_eigen(&sym)?.vectors)
}

fn random_input(rng: &mut ChaCha8Rng, len: usize, column_scales: &[f64]) -> AffineInput {
    let offset = (0..len).map(|_| symmetric_uniform(rng)).collect();
    let loading = DenseMatrix::from_fn(len, column_scales.len(), |_, j| column_scales[j] * symmetric_uniform(rng));
    AffineInput { offset, loading }
}

impl LinearCoupledSystem {
    /// Random system with block-max Lipschitz constant exactly `rho`.
    ///
    /// `u, v ∈ R³`, `y, x ∈ R²`, two germs per side. The second germ of each
    /// side has loading `weak`, which places part of the spectrum of the
    /// exchanged data near a chosen truncation level.
    pub fn random(seed: u64, rho: f64, weak: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("contraction ratio must lie in (0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nu, ny, nv, nx) = (3, 2, 3, 2);
        let split_a = 0.2 + 0.6 * 0.5 * (symmetric_uniform(&mut rng) + 1.0);
        let split_b = 0.2 + 0.6 * 0.5 * (symmetric_uniform(&mut rng) + 1.0);
        let scales = [1.0, weak];
        Ok(Self {
            a_uu: with_norm(&mut rng, nu, nu, rho * split_a)?,
            a_ux: with_norm(&mut rng, nu, nx, rho * (1.0 - split_a))?,
            h: with_norm(&mut rng, ny, nu, rho)?,
            b_y: with_norm(&mut rng, nv, ny, rho * split_b)?,
            b_vv: with_norm(&mut rng, nv, nv, rho * (1.0 - split_b))?,
            k: with_norm(&mut rng, nx, nv, rho)?,
            a0: random_input(&mut rng, nu, &scales),
            h0: random_input(&mut rng, ny, &scales),
            b0: random_input(&mut rng, nv, &scales),
            k0: random_input(&mut rng, nx, &scales),
        })
    }

    /// Every coupling quantity driven by `ξ₁` alone.
    pub fn rank_one(seed: u64, rho: f64) -> Result<Self> {
        let mut s = Self::random(seed, rho, 0.0)?;
        for input in [&mut s.a0, &mut s.h0] {
            for i in 0..input.len() {
                input.loading[(i, 1)] = 0.0;
            }
        }
        for input in [&mut s.b0, &mut s.k0] {
            for i in 0..input.len() {
                input.loading[(i, 0)] = 0.0;
                input.loading[(i, 1)] = 0.0;
            }
        }
        Ok(s)
    }

    /// One-way coupled system (`A_ux = 0`) whose Gauss-Seidel map has the
    /// simple real dominant eigenvalue `rho`, carried by symmetric `A_uu`.
    pub fn with_known_radius(seed: u64, rho: f64) -> Result<Self> {
        let mut s = Self::random(seed, rho, 0.3)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = random_orthogonal(&mut rng, 3)?;
        let spectrum = [rho, -0.6 * rho, 0.3 * rho];
        s.a_uu = DenseMatrix::from_fn(3, 3, |i, j| (0..3).map(|k| q[(i, k)] * spectrum[k] * q[(j, k)]).sum());
        s.a_ux = DenseMatrix::zeros(3, 2);
        s.b_y = with_norm(&mut rng, 3, 2, 0.5 * rho)?;
        s.b_vv = with_norm(&mut rng, 3, 3, 0.4 * rho)?;
        Ok(s)
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.a_uu.rows(), self.h.rows(), self.b_vv.rows(), self.k.rows())
    }

    pub fn germ_dims(&self) -> (usize, usize) {
        (self.a0.loading.cols(), self.b0.loading.cols())
    }

    fn check_shapes(&self) -> Result<()> {
        let (nu, ny, nv, nx) = self.dims();
        let (ma, mb) = self.germ_dims();
        let ok = self.a_uu.cols() == nu
            && (self.a_ux.rows(), self.a_ux.cols()) == (nu, nx)
            && self.h.cols() == nu
            && (self.b_y.rows(), self.b_y.cols()) == (nv, ny)
            && self.b_vv.cols() == nv
            && self.k.cols() == nv
            && self.a0.len() == nu
            && self.h0.len() == ny
            && self.b0.len() == nv
            && self.k0.len() == nx
            && self.h0.loading.cols() == ma
            && self.k0.loading.cols() == mb;
        if !ok {
            return Err(Error::invalid("inconsistent block shapes in the coupled system"));
        }
        Ok(())
    }

    /// Block-max Lipschitz bound `max(‖A_uu‖+‖A_ux‖, ‖H‖, ‖B_y‖+‖B_vv‖, ‖K‖)`.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        let a = spectral_norm(&self.a_uu)? + spectral_norm(&self.a_ux)?;
        let b = spectral_norm(&self.b_y)? + spectral_norm(&self.b_vv)?;
        Ok(a.max(b).max(spectral_norm(&self.h)?).max(spectral_norm(&self.k)?))
    }

    /// Linear part of one Gauss-Seidel sweep on `(u, v)`.
    pub fn iteration_matrix(&self) -> DenseMatrix {
        let (nu, _, nv, _) = self.dims();
        let axk = self.a_ux.matmul(&self.k);
        let byh = self.b_y.matmul(&self.h);
        let lower_left = byh.matmul(&self.a_uu);
        let lower_right = byh.matmul(&axk);
        DenseMatrix::from_fn(nu + nv, nu + nv, |i, j| match (i < nu, j < nu) {
            (true, true) => self.a_uu[(i, j)],
            (true, false) => axk[(i, j - nu)],
            (false, true) => lower_left[(i - nu, j)],
            (false, false) => lower_right[(i - nu, j - nu)] + self.b_vv[(i - nu, j - nu)],
        })
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.iteration_matrix())
    }

    /// Rejects a system whose Gauss-Seidel map does not contract.
    pub fn check_contractive(&self) -> Result<f64> {
        self.check_shapes()?;
        let r = self.spectral_radius();
        if !(r < 1.0) {
            return Err(Error::NonContractive { radius: r });
        }
        Ok(r)
    }

    /// PC basis over `(ξ, ζ)`.
    pub fn basis(&self, degree: usize) -> Result<MultiIndexSet> {
        let (ma, mb) = self.germ_dims();
        MultiIndexSet::new(ma + mb, degree)
    }

    /// PC coefficients of an affine input; `germ_offset` locates its germ block.
    fn input_pc(&self, basis: &MultiIndexSet, input: &AffineInput, germ_offset: usize) -> PcVector {
        let mut out = PcVector::constant(basis.len(), &input.offset);
        let mut alpha = vec![0u32; basis.dim()];
        for j in 0..input.loading.cols() {
            alpha[germ_offset + j] = 1;
            if let Some(pos) = basis.position(&alpha) {
                // g = ψ₁(g)/√3
                let c = out.coeff_mut(pos);
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci = input.loading[(i, j)] / libm::sqrt(3.0);
                }
            }
            alpha[germ_offset + j] = 0;
        }
        out
    }

    /// Direct solve of the coupled fixed point, coefficient by coefficient.
    pub fn fixed_point(&self, degree: usize) -> Result<(PcVector, PcVector)> {
        self.check_shapes()?;
        let basis = self.basis(degree)?;
        let inputs = self.inputs(&basis);
        let (nu, _, nv, _) = self.dims();
        let axk = self.a_ux.matmul(&self.k);
        let byh = self.b_y.matmul(&self.h);
        let n = nu + nv;
        let lhs = DenseMatrix::from_fn(n, n, |i, j| {
            let e = if i == j { 1.0 } else { 0.0 };
            match (i < nu, j < nu) {
                (true, true) => e - self.a_uu[(i, j)],
                (true, false) => -axk[(i, j - nu)],
                (false, true) => -byh[(i - nu, j)],
                (false, false) => e - self.b_vv[(i - nu, j - nu)],
            }
        });
        let mut u = PcVector::zeros(basis.len(), nu);
        let mut v = PcVector::zeros(basis.len(), nv);
        for a in 0..basis.len() {
            let rhs_u = add(inputs.a0.coeff(a), &self.a_ux.matvec(inputs.k0.coeff(a)));
            let rhs_v = add(inputs.b0.coeff(a), &self.b_y.matvec(inputs.h0.coeff(a)));
            let mut rhs = rhs_u;
            rhs.extend_from_slice(&rhs_v);
            let sol = solve_dense(&lhs, &rhs)?;
            u.coeff_mut(a).copy_from_slice(&sol[..nu]);
            v.coeff_mut(a).copy_from_slice(&sol[nu..]);
        }
        Ok((u, v))
    }

    /// Largest coefficient residual of the four defining equations at `(u, v)`.
    pub fn residual(&self, degree: usize, u: &PcVector, v: &PcVector) -> Result<f64> {
        let basis = self.basis(degree)?;
        let inputs = self.inputs(&basis);
        let y = self.apply(&basis, &self.h, u, None, None, &inputs.h0);
        let x = self.apply(&basis, &self.k, v, None, None, &inputs.k0);
        let u2 = self.apply(&basis, &self.a_uu, u, Some(&self.a_ux), Some(&x), &inputs.a0);
        let v2 = self.apply(&basis, &self.b_y, &y, Some(&self.b_vv), Some(v), &inputs.b0);
        let du = u2.sub(u)?;
        let dv = v2.sub(v)?;
        Ok(du.as_slice().iter().chain(dv.as_slice()).fold(0.0f64, |m, e| m.max(e.abs())))
    }

    fn inputs(&self, basis: &MultiIndexSet) -> Inputs {
        let ma = self.germ_dims().0;
        Inputs {
            a0: self.input_pc(basis, &self.a0, 0),
            h0: self.input_pc(basis, &self.h0, 0),
            b0: self.input_pc(basis, &self.b0, ma),
            k0: self.input_pc(basis, &self.k0, ma),
        }
    }

    /// `M₁ p + M₂ q + c`, coefficientwise.
    fn apply(
        &self,
        basis: &MultiIndexSet,
        m1: &DenseMatrix,
        p: &PcVector,
        m2: Option<&DenseMatrix>,
        q: Option<&PcVector>,
        c: &PcVector,
    ) -> PcVector {
        let mut out = c.clone();
        for a in 0..basis.len() {
            let mut r = m1.matvec(p.coeff(a));
            if let (Some(m2), Some(q)) = (m2, q) {
                r = add(&r, &m2.matvec(q.coeff(a)));
            }
            for (o, ri) in out.coeff_mut(a).iter_mut().zip(r) {
                *o += ri;
            }
        }
        out
    }
}

struct Inputs {
    a0: PcVector,
    h0: PcVector,
    b0: PcVector,
    k0: PcVector,
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// One Gauss-Seidel sweep of the synthetic system.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticIterate {
    pub u: PcVector,
    pub v: PcVector,
    /// Retained dimension of `q = [ŷ; v̂_prev]`, reduced runs only.
    pub d: Option<usize>,
    /// Retained dimension of `r = [û_prev; x̂_prev]`, reduced runs only.
    pub e: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTraces {
    pub full: Vec<SyntheticIterate>,
    pub reduced: Vec<SyntheticIterate>,
    pub spectral_radius: f64,
}

impl SyntheticTraces {
    /// `max(‖u^ℓ − û^ℓ‖, ‖v^ℓ − v̂^ℓ‖)` in the mean-square norm, per iteration.
    pub fn distances(&self) -> Vec<f64> {
        self.full.iter().zip(&self.reduced).map(|(f, r)| ms_distance(&f.u, &r.u).max(ms_distance(&f.v, &r.v))).collect()
    }

    /// `max(‖u^ℓ − u^{ℓ−1}‖, ‖v^ℓ − v^{ℓ−1}‖)` of the unreduced run.
    pub fn full_updates(&self) -> Vec<f64> {
        self.full.windows(2).map(|w| ms_distance(&w[1].u, &w[0].u).max(ms_distance(&w[1].v, &w[0].v))).collect()
    }
}

/// `√(Σ_α ‖a_α − b_α‖²)`, the mean-square norm of the difference.
pub fn ms_distance(a: &PcVector, b: &PcVector) -> f64 {
    libm::sqrt(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Runs the unreduced and reduced iterations from `u⁰ = 0`, `v⁰ = 0`.
///
/// The reduced run truncates combined KL decompositions of
/// `q = [ŷ^ℓ; v̂^{ℓ−1}]` and `r = [û^{ℓ−1}; x̂^{ℓ−1}]` with identity weights, at
/// the energy tolerance `tol` (so each component error is at most `√tol`).
pub fn synthetic_general_coupled(
    system: &LinearCoupledSystem,
    degree: usize,
    iterations: usize,
    tol: f64,
) -> Result<SyntheticTraces> {
    let spectral_radius = system.check_contractive()?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("KL tolerance must be non-negative"));
    }
    let basis = system.basis(degree)?;
    let inputs = system.inputs(&basis);
    let (nu, ny, nv, nx) = system.dims();
    let terms = basis.len();
    let w_q = block_diagonal(&[&DenseMatrix::identity(ny), &DenseMatrix::identity(nv)]);
    let w_r = block_diagonal(&[&DenseMatrix::identity(nu), &DenseMatrix::identity(nx)]);
    let weighting = || Weighting::BlockDiagonal(vec![Weighting::Identity, Weighting::Identity]);

    let u0 = PcVector::zeros(terms, nu);
    let v0 = PcVector::zeros(terms, nv);
    let x0 = system.apply(&basis, &system.k, &v0, None, None, &inputs.k0);

    let mut full = Vec::with_capacity(iterations);
    let (mut u, mut v, mut x) = (u0.clone(), v0.clone(), x0.clone());
    for _ in 0..iterations {
        u = system.apply(&basis, &system.a_uu, &u, Some(&system.a_ux), Some(&x), &inputs.a0);
        let y = system.apply(&basis, &system.h, &u, None, None, &inputs.h0);
        v = system.apply(&basis, &system.b_y, &y, Some(&system.b_vv), Some(&v), &inputs.b0);
        x = system.apply(&basis, &system.k, &v, None, None, &inputs.k0);
        full.push(SyntheticIterate { u: u.clone(), v: v.clone(), d: None, e: None });
    }

    let mut reduced = Vec::with_capacity(iterations);
    let (mut u, mut v, mut x) = (u0, v0, x0);
    for _ in 0..iterations {
        let r = PcVector::concat(&[&u, &x])?;
        let rec_r = decompose(&r, &w_r, weighting())?.reduce(tol)?;
        let r_e = reconstruct(&rec_r);
        let (u_e, x_e) = (r_e.slice_components(0, nu), r_e.slice_components(nu, nx));
        u = system.apply(&basis, &system.a_uu, &u_e, Some(&system.a_ux), Some(&x_e), &inputs.a0);
        let y = system.apply(&basis, &system.h, &u, None, None, &inputs.h0);

        let q = PcVector::concat(&[&y, &v])?;
        let rec_q = decompose(&q, &w_q, weighting())?.reduce(tol)?;
        let q_d = reconstruct(&rec_q);
        let (y_d, v_d) = (q_d.slice_components(0, ny), q_d.slice_components(ny, nv));
        v = system.apply(&basis, &system.b_y, &y_d, Some(&system.b_vv), Some(&v_d), &inputs.b0);
        x = system.apply(&basis, &system.k, &v, None, None, &inputs.k0);
        reduced.push(SyntheticIterate {
            u: u.clone(),
            v: v.clone(),
            d: Some(rec_q.dimension),
            e: Some(rec_r.dimension),
        });
    }
    Ok(SyntheticTraces { full, reduced, spectral_radius })
}
