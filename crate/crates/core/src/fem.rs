//! Linear finite elements on a 1D mesh.
//!
//! All coefficient-dependent element integrals use two-point Gauss quadrature,
//! and nonlinear coefficients are applied to the temperature interpolated at
//! each quadrature point.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::SymBandMatrix;

pub use crate::linalg::solve_banded;

/// Nodes of a 1D mesh on `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    length: f64,
    nodes: Vec<f64>,
}

impl Mesh {
    /// Uniform mesh with `n_elements` equal elements.
    pub fn uniform(length: f64, n_elements: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid("mesh length must be positive and finite"));
        }
        if n_elements == 0 {
            return Err(Error::invalid("mesh needs at least one element"));
        }
        let dx = length / n_elements as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| i as f64 * dx).collect();
        nodes[n_elements] = length;
        Ok(Self { length, nodes })
    }

    /// Mesh from explicit, strictly increasing coordinates starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("mesh needs at least two nodes"));
        }
        if nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("mesh nodes must start at 0 and increase strictly"));
        }
        let length = *nodes.last().unwrap();
        Ok(Self { length, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_length(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Two-point Gauss points of every element, element by element.
    pub fn quad_points(&self) -> impl Iterator<Item = QuadPoint> + '_ {
        (0..self.n_elements()).flat_map(move |e| {
            let x0 = self.nodes[e];
            let le = self.element_length(e);
            GAUSS2.iter().map(move |&t| {
                let n0 = 1.0 - t;
                let n1 = t;
                QuadPoint {
                    element: e,
                    x: x0 + t * le,
                    weight: 0.5 * le,
                    shape: [n0, n1],
                    dshape: [-1.0 / le, 1.0 / le],
                }
            })
        })
    }
}

// Gauss-Legendre abscissae mapped to [0, 1]; both weights are 1/2.
const GAUSS2: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9, // 1/(2√3)
    0.5 + 0.288_675_134_594_812_9,
];

/// A quadrature point inside one element, with the values and derivatives of
/// the element's two shape functions.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub element: usize,
    pub x: f64,
    /// Quadrature weight including the element Jacobian.
    pub weight: f64,
    pub shape: [f64; 2],
    pub dshape: [f64; 2],
}

impl QuadPoint {
    /// Value at this point of the piecewise-linear interpolant of `nodal`.
    pub fn interpolate(&self, nodal: &[f64]) -> f64 {
        self.shape[0] * nodal[self.element] + self.shape[1] * nodal[self.element + 1]
    }
}

/// `A_ij = ∫ c(x) N_i' N_j' dx`.
pub fn assemble_stiffness(mesh: &Mesh, mut coeff: impl FnMut(&QuadPoint) -> f64) -> SymBandMatrix {
    let mut a = SymBandMatrix::zeros(mesh.n_nodes(), 1);
    for qp in mesh.quad_points() {
        let c = coeff(&qp) * qp.weight;
        let e = qp.element;
        for i in 0..2 {
            for j in 0..=i {
                a.add(e + i, e + j, c * qp.dshape[i] * qp.dshape[j]);
            }
        }
    }
    a
}

/// `A_ij = ∫ c(x) N_i N_j dx`.
pub fn assemble_mass(mesh: &Mesh, mut coeff: impl FnMut(&QuadPoint) -> f64) -> SymBandMatrix {
    let mut a = SymBandMatrix::zeros(mesh.n_nodes(), 1);
    for qp in mesh.quad_points() {
        let c = coeff(&qp) * qp.weight;
        let e = qp.element;
        for i in 0..2 {
            for j in 0..=i {
                a.add(e + i, e + j, c * qp.shape[i] * qp.shape[j]);
            }
        }
    }
    a
}

/// `b_i = ∫ f(x) N_i dx`.
pub fn assemble_load(mesh: &Mesh, mut f: impl FnMut(&QuadPoint) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_nodes()];
    for qp in mesh.quad_points() {
        let v = f(&qp) * qp.weight;
        b[qp.element] += v * qp.shape[0];
        b[qp.element + 1] += v * qp.shape[1];
    }
    b
}

/// Gram matrix of the hat functions in the H¹ inner product
/// `⟨u, v⟩ = ∫ u v + ∫ u' v'`.
pub fn gram_matrix_h1(mesh: &Mesh) -> SymBandMatrix {
    let mass = assemble_mass(mesh, |_| 1.0);
    let stiff = assemble_stiffness(mesh, |_| 1.0);
    mass.scaled_sum(1.0, &stiff, 1.0)
}

/// Physical constants of the heat / neutron-diffusion pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    /// Heat conductivity `k`.
    pub conductivity: f64,
    pub diffusion_ref: f64,
    pub absorption_ref: f64,
    pub fission_ref: f64,
    /// Neutrons released per fission `ν`.
    pub nu: f64,
    /// Distributed neutron source `s`.
    pub source: f64,
    pub ambient_temperature: f64,
    /// Energy per fission `E_f`.
    pub fission_energy: f64,
    pub reference_temperature: f64,
    /// Temperatures are clamped into this range before the square-root laws
    /// are applied. `None` disables clamping.
    pub clamp: Option<(f64, f64)>,
}

impl Physics {
    /// Clamped temperature actually fed to the coefficient laws, plus whether
    /// clamping was needed.
    pub fn effective_temperature(&self, t: f64) -> (f64, bool) {
        match self.clamp {
            Some((lo, _)) if t < lo => (lo, true),
            Some((_, hi)) if t > hi => (hi, true),
            _ => (t, false),
        }
    }

    pub fn diffusion(&self, t: f64) -> f64 {
        self.diffusion_ref * libm::sqrt(t / self.reference_temperature)
    }

    pub fn absorption(&self, t: f64) -> f64 {
        self.absorption_ref * libm::sqrt(self.reference_temperature / t)
    }

    pub fn fission(&self, t: f64) -> f64 {
        self.fission_ref * libm::sqrt(self.reference_temperature / t)
    }
}

/// Assembled operators of the discretized coupled problem. The temperature
/// dependent parts are present only when a temperature was supplied; the
/// heat load additionally needs a flux.
#[derive(Debug, Clone)]
pub struct FEOperators {
    /// Heat conduction `K`.
    pub conduction: SymBandMatrix,
    /// Heat transmission `H(ξ)`.
    pub transmission: SymBandMatrix,
    /// Neutron diffusion `D(T)`.
    pub diffusion: Option<SymBandMatrix>,
    /// Net absorption `M(T)`.
    pub reaction: Option<SymBandMatrix>,
    /// Heat load `q(T, Φ)`.
    pub heat_load: Option<Vec<f64>>,
    /// Neutron source `s`.
    pub neutron_source: Vec<f64>,
    /// H¹ Gram matrix `W`.
    pub gram: SymBandMatrix,
    /// Number of quadrature points where the temperature had to be clamped.
    pub clamped_points: usize,
}

/// Quadrature-point temperatures after clamping, with a count of clamped points.
fn temperatures_at_points(mesh: &Mesh, physics: &Physics, t: &[f64]) -> Result<(Vec<f64>, usize)> {
    let mut clamped = 0;
    let mut out = Vec::with_capacity(2 * mesh.n_elements());
    for qp in mesh.quad_points() {
        let (te, was) = physics.effective_temperature(qp.interpolate(t));
        clamped += was as usize;
        if !(te > 0.0) || !te.is_finite() {
            return Err(Error::DegenerateCoefficient { x: qp.x, value: te });
        }
        out.push(te);
    }
    Ok((out, clamped))
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("{name} has {} entries, expected {n}", v.len())))
    }
}

/// Heat matrix `K + H(ξ)` for a nodal transmittivity `h`.
pub fn heat_matrix(mesh: &Mesh, physics: &Physics, h: &[f64]) -> SymBandMatrix {
    let k = physics.conductivity;
    let mut a = assemble_stiffness(mesh, |_| k);
    for qp in mesh.quad_points() {
        let c = qp.interpolate(h) * qp.weight;
        let e = qp.element;
        for i in 0..2 {
            for j in 0..=i {
                a.add(e + i, e + j, c * qp.shape[i] * qp.shape[j]);
            }
        }
    }
    a
}

/// Heat load `q_i = ∫ E_f Σ_f(T) Φ N_i + ∫ h T_∞ N_i`; a missing flux means `Φ = 0`.
pub fn heat_load(
    mesh: &Mesh,
    physics: &Physics,
    h: &[f64],
    t: &[f64],
    phi: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let t_inf = physics.ambient_temperature;
    match phi {
        None => Ok((assemble_load(mesh, |qp| qp.interpolate(h) * t_inf), 0)),
        Some(phi) => {
            let (tq, clamped) = temperatures_at_points(mesh, physics, t)?;
            let mut idx = 0;
            let load = assemble_load(mesh, |qp| {
                let fission = physics.fission_energy * physics.fission(tq[idx]) * qp.interpolate(phi);
                idx += 1;
                fission + qp.interpolate(h) * t_inf
            });
            Ok((load, clamped))
        }
    }
}

/// Neutronics matrix `D(T) + M(T)`.
pub fn neutronics_matrix(mesh: &Mesh, physics: &Physics, t: &[f64]) -> Result<(SymBandMatrix, usize)> {
    let (tq, clamped) = temperatures_at_points(mesh, physics, t)?;
    let mut a = SymBandMatrix::zeros(mesh.n_nodes(), 1);
    for (qp, &te) in mesh.quad_points().zip(&tq) {
        let d = physics.diffusion(te) * qp.weight;
        let r = (physics.absorption(te) - physics.nu * physics.fission(te)) * qp.weight;
        let e = qp.element;
        for i in 0..2 {
            for j in 0..=i {
                a.add(e + i, e + j, d * qp.dshape[i] * qp.dshape[j] + r * qp.shape[i] * qp.shape[j]);
            }
        }
    }
    Ok((a, clamped))
}

pub fn neutron_source(mesh: &Mesh, physics: &Physics) -> Vec<f64> {
    let s = physics.source;
    assemble_load(mesh, |_| s)
}

/// Assembles every operator of the coupled problem for a given transmittivity
/// realization `h` (nodal), and optionally a temperature and flux iterate.
pub fn assemble_operators(
    mesh: &Mesh,
    physics: &Physics,
    h: &[f64],
    temperature: Option<&[f64]>,
    flux: Option<&[f64]>,
) -> Result<FEOperators> {
    let n = mesh.n_nodes();
    check_len("transmittivity", h, n)?;
    let k = physics.conductivity;
    let conduction = assemble_stiffness(mesh, |_| k);
    let transmission = assemble_mass(mesh, |qp| qp.interpolate(h));
    let mut clamped_points = 0;
    let mut diffusion = None;
    let mut reaction = None;
    let mut heat = None;
    if let Some(t) = temperature {
        check_len("temperature", t, n)?;
        let (tq, c) = temperatures_at_points(mesh, physics, t)?;
        clamped_points += c;
        let mut idx = 0;
        diffusion = Some(assemble_stiffness(mesh, |_| {
            idx += 1;
            physics.diffusion(tq[idx - 1])
        }));
        idx = 0;
        reaction = Some(assemble_mass(mesh, |_| {
            idx += 1;
            let te = tq[idx - 1];
            physics.absorption(te) - physics.nu * physics.fission(te)
        }));
        if let Some(phi) = flux {
            check_len("flux", phi, n)?;
            let (q, _) = heat_load(mesh, physics, h, t, Some(phi))?;
            heat = Some(q);
        }
    }
    Ok(FEOperators {
        conduction,
        transmission,
        diffusion,
        reaction,
        heat_load: heat,
        neutron_source: neutron_source(mesh, physics),
        gram: gram_matrix_h1(mesh),
        clamped_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn physics() -> Physics {
        Physics {
            conductivity: 100.0,
            diffusion_ref: 2.2,
            absorption_ref: 0.0195,
            fission_ref: 0.0075,
            nu: 2.2,
            source: 5.0e11,
            ambient_temperature: 390.0,
            fission_energy: 3.0e-11,
            reference_temperature: 390.0,
            clamp: Some((390.0, 1000.0)),
        }
    }

    #[test]
    fn mesh_construction() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        assert_eq!(m.n_nodes(), 41);
        assert!((m.element_length(7) - 2.5).abs() < 1e-12);
        assert_eq!(Mesh::uniform(1.0, 1).unwrap().nodes(), &[0.0, 1.0]);
        assert_eq!(Mesh::uniform(100.0, 2).unwrap().nodes(), &[0.0, 50.0, 100.0]);
        let spacing = m.nodes().windows(2).map(|w| w[1] - w[0]);
        for s in spacing {
            assert!((s - 2.5).abs() <= 1e-12 * 100.0);
        }
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(Mesh::uniform(0.0, 4).is_err());
        assert!(Mesh::uniform(-1.0, 4).is_err());
        assert!(Mesh::uniform(1.0, 0).is_err());
        assert!(Mesh::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn constant_stiffness_matches_hand_assembly() {
        // two elements of length dx: (k/dx) [[1,-1,0],[-1,2,-1],[0,-1,1]]
        let dx = 0.7;
        let k = 3.0;
        let m = Mesh::uniform(2.0 * dx, 2).unwrap();
        let a = assemble_stiffness(&m, |_| k).to_dense();
        let expect = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - k / dx * expect[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        let a = assemble_stiffness(&m, |qp| 1.0 + libm::sin(qp.x));
        let r = a.matvec(&vec![1.0; 41]);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn mass_partition_of_unity() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        let h = 0.17;
        let a = assemble_mass(&m, |_| h);
        let ones = vec![1.0; 41];
        let rows = a.matvec(&ones);
        let hat_integrals = assemble_load(&m, |_| 1.0);
        for (r, n) in rows.iter().zip(&hat_integrals) {
            assert!((r - h * n).abs() < 1e-13);
        }
        assert!((a.quadratic(&ones) - h * 100.0).abs() < 1e-11);
    }

    #[test]
    fn single_element_gram_is_closed_form() {
        let m = Mesh::uniform(1.0, 1).unwrap();
        let w = gram_matrix_h1(&m).to_dense();
        let expect =
            DenseMatrix::from_row_major(2, 2, vec![1.0 / 3.0 + 1.0, 1.0 / 6.0 - 1.0, 1.0 / 6.0 - 1.0, 1.0 / 3.0 + 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((w[(i, j)] - expect[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_of_constant_is_length() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        let w = gram_matrix_h1(&m);
        assert!((w.quadratic(&vec![1.0; 41]) - 100.0).abs() < 1e-10);
    }

    #[test]
    fn patch_test_linear_temperature() {
        // K·T for linear T equals the boundary flux vector: interior rows vanish
        let m = Mesh::uniform(100.0, 40).unwrap();
        let k = 2.5;
        let a = assemble_stiffness(&m, |_| k);
        let (c0, c1) = (3.0, 0.25);
        let t: Vec<f64> = m.nodes().iter().map(|x| c0 + c1 * x).collect();
        let r = a.matvec(&t);
        for v in &r[1..40] {
            assert!(v.abs() < 1e-12);
        }
        assert!((r[0] + k * c1).abs() < 1e-12);
        assert!((r[40] - k * c1).abs() < 1e-12);
    }

    #[test]
    fn constant_temperature_fixed_point_without_fission() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        let mut ph = physics();
        ph.fission_energy = 0.0;
        let h: Vec<f64> = m.nodes().iter().map(|x| 0.17 * (1.0 + 0.05 * libm::cos(x / 7.0))).collect();
        let a = heat_matrix(&m, &ph, &h);
        let phi = vec![1.0e14; 41];
        let t_prev = vec![600.0; 41];
        let (q, _) = heat_load(&m, &ph, &h, &t_prev, Some(&phi)).unwrap();
        let t = solve_banded(&a, &q).unwrap();
        for v in t {
            assert!((v - 390.0).abs() < 1e-9);
        }
    }

    #[test]
    fn operators_are_symmetric_and_consistent() {
        let m = Mesh::uniform(100.0, 40).unwrap();
        let ph = physics();
        let h: Vec<f64> = m.nodes().iter().map(|x| 0.17 + 0.01 * libm::sin(x / 9.0)).collect();
        let t: Vec<f64> = m.nodes().iter().map(|x| 500.0 + x).collect();
        let phi = vec![1.0e14; 41];
        let ops = assemble_operators(&m, &ph, &h, Some(&t), Some(&phi)).unwrap();
        let heat = heat_matrix(&m, &ph, &h);
        let sum = ops.conduction.scaled_sum(1.0, &ops.transmission, 1.0);
        assert_eq!(heat.to_dense().as_slice().len(), sum.to_dense().as_slice().len());
        for i in 0..41 {
            for j in 0..41 {
                assert!((heat.get(i, j) - sum.get(i, j)).abs() < 1e-12 * heat.get(i, i).abs());
            }
        }
        let (nm, _) = neutronics_matrix(&m, &ph, &t).unwrap();
        let dm = ops.diffusion.as_ref().unwrap().scaled_sum(1.0, ops.reaction.as_ref().unwrap(), 1.0);
        for i in 0..41 {
            assert!((nm.get(i, i) - dm.get(i, i)).abs() < 1e-13 * nm.get(i, i).abs());
        }
        assert!(nm.cholesky().is_ok());
        for mat in [&ops.conduction, &ops.transmission, &ops.gram] {
            let d = mat.to_dense();
            assert!(d.asymmetry() <= 1e-14 * d.max_abs());
        }
        assert_eq!(ops.clamped_points, 0);
    }

    #[test]
    fn clamping_is_counted_and_disabling_it_exposes_bad_temperatures() {
        let m = Mesh::uniform(10.0, 4).unwrap();
        let mut ph = physics();
        let t = vec![-500.0, 400.0, 400.0, 400.0, 400.0];
        let (_, clamped) = neutronics_matrix(&m, &ph, &t).unwrap();
        assert!(clamped >= 1);
        ph.clamp = None;
        assert!(matches!(neutronics_matrix(&m, &ph, &t), Err(Error::DegenerateCoefficient { .. })));
    }

    #[test]
    fn smooth_coefficient_assembly_converges_quadratically() {
        // energy ∫ c (u')² with c = 1 + x², u = sin x on [0, 2], exact by hand
        let exact = {
            // ∫0^2 (1+x²) cos²x dx, evaluated with a dense composite Simpson oracle
            let n = 20000;
            let hstep = 2.0 / n as f64;
            let f = |x: f64| (1.0 + x * x) * libm::cos(x) * libm::cos(x);
            let mut s = f(0.0) + f(2.0);
            for i in 1..n {
                let x = i as f64 * hstep;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * hstep / 3.0
        };
        let mut errs = Vec::new();
        for ne in [10usize, 20, 40] {
            let m = Mesh::uniform(2.0, ne).unwrap();
            let a = assemble_stiffness(&m, |qp| 1.0 + qp.x * qp.x);
            let u: Vec<f64> = m.nodes().iter().map(|x| libm::sin(*x)).collect();
            errs.push((a.quadratic(&u) - exact).abs());
        }
        let rate1 = errs[0] / errs[1];
        let rate2 = errs[1] / errs[2];
        assert!(rate1 > 3.5 && rate2 > 3.5, "rates {rate1} {rate2}");
    }
}
