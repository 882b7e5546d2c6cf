//! Partitioned Gauss-Seidel iterations for the heat / neutron-diffusion pair:
//! a per-sample deterministic solver and the PC iterations with and without
//! KL reduction of the exchanged temperature.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::basis::{project_nonintrusive, MultiIndexSet, NodalBasis, PcVector};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fem::{heat_load, heat_matrix, neutron_source, neutronics_matrix, solve_banded, Mesh, Physics};
use crate::field::FieldModel;
use crate::kl::{decompose, KlRecord, Weighting};
use crate::linalg::{DenseMatrix, SymBandMatrix};
use crate::quadrature::{sparse_grid, QuadratureRule};

/// KL truncation tolerance, either an energy or a fraction of `σ_T²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlTolerance {
    Absolute(f64),
    Fraction(f64),
}

/// Every parameter of the reactor problem. Defaults are the reference problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub length: f64,
    pub n_elements: usize,
    pub conductivity: f64,
    pub diffusion_ref: f64,
    pub absorption_ref: f64,
    pub fission_ref: f64,
    pub nu: f64,
    pub source: f64,
    pub ambient_temperature: f64,
    pub fission_energy: f64,
    pub reference_temperature: f64,
    pub min_temperature: f64,
    pub max_temperature: f64,
    pub h_mean: f64,
    pub h_variation: f64,
    pub correlation_length: f64,
    pub field_terms: usize,
    pub pc_degree: usize,
    pub quadrature_level: usize,
    pub max_iters: usize,
    pub update_tolerance: f64,
    pub kl_tolerance: KlTolerance,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            length: 100.0,
            n_elements: 40,
            conductivity: 100.0,
            diffusion_ref: 2.2,
            absorption_ref: 0.0195,
            fission_ref: 0.0075,
            nu: 2.2,
            source: 5.0e11,
            ambient_temperature: 390.0,
            fission_energy: 3.0e-11,
            reference_temperature: 390.0,
            min_temperature: 390.0,
            max_temperature: 1000.0,
            h_mean: 0.17,
            h_variation: 0.10,
            correlation_length: 15.0,
            field_terms: 10,
            pc_degree: 4,
            quadrature_level: 5,
            max_iters: 20,
            update_tolerance: 1e-10,
            kl_tolerance: KlTolerance::Fraction(0.90),
        }
    }
}

impl ProblemConfig {
    /// Sets the PC degree and the matching quadrature level `p + 1`.
    pub fn with_degree(mut self, p: usize) -> Self {
        self.pc_degree = p;
        self.quadrature_level = p + 1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("conductivity", self.conductivity),
            ("diffusion_ref", self.diffusion_ref),
            ("absorption_ref", self.absorption_ref),
            ("fission_ref", self.fission_ref),
            ("nu", self.nu),
            ("source", self.source),
            ("ambient_temperature", self.ambient_temperature),
            ("reference_temperature", self.reference_temperature),
            ("min_temperature", self.min_temperature),
            ("h_mean", self.h_mean),
            ("correlation_length", self.correlation_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("fission_energy", self.fission_energy),
            ("h_variation", self.h_variation),
            ("update_tolerance", self.update_tolerance),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.max_temperature > self.min_temperature) {
            return Err(Error::invalid("max_temperature must exceed min_temperature"));
        }
        if !(self.absorption_ref > self.nu * self.fission_ref) {
            return Err(Error::invalid("configuration is not subcritical: need absorption_ref > nu * fission_ref"));
        }
        if self.n_elements == 0 {
            return Err(Error::invalid("n_elements must be at least 1"));
        }
        if self.field_terms == 0 || self.field_terms > self.n_elements + 1 {
            return Err(Error::invalid("field_terms must be between 1 and the number of mesh nodes"));
        }
        if self.quadrature_level == 0 {
            return Err(Error::invalid("quadrature_level must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        match self.kl_tolerance {
            KlTolerance::Absolute(t) | KlTolerance::Fraction(t) if !(t >= 0.0) || !t.is_finite() => {
                Err(Error::invalid("KL tolerance must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn physics(&self) -> Physics {
        Physics {
            conductivity: self.conductivity,
            diffusion_ref: self.diffusion_ref,
            absorption_ref: self.absorption_ref,
            fission_ref: self.fission_ref,
            nu: self.nu,
            source: self.source,
            ambient_temperature: self.ambient_temperature,
            fission_energy: self.fission_energy,
            reference_temperature: self.reference_temperature,
            clamp: Some((self.min_temperature, self.max_temperature)),
        }
    }

    /// `key=value` lines in sorted key order, floats in shortest round-trip form.
    pub fn canonical_string(&self) -> String {
        let (tol_kind, tol) = match self.kl_tolerance {
            KlTolerance::Absolute(t) => ("absolute", t),
            KlTolerance::Fraction(t) => ("fraction", t),
        };
        let mut entries: Vec<(&str, String)> = vec![
            ("absorption_ref", format!("{:?}", self.absorption_ref)),
            ("ambient_temperature", format!("{:?}", self.ambient_temperature)),
            ("conductivity", format!("{:?}", self.conductivity)),
            ("correlation_length", format!("{:?}", self.correlation_length)),
            ("diffusion_ref", format!("{:?}", self.diffusion_ref)),
            ("field_terms", format!("{}", self.field_terms)),
            ("fission_energy", format!("{:?}", self.fission_energy)),
            ("fission_ref", format!("{:?}", self.fission_ref)),
            ("h_mean", format!("{:?}", self.h_mean)),
            ("h_variation", format!("{:?}", self.h_variation)),
            ("kl_tolerance", format!("{:?}", tol)),
            ("kl_tolerance_kind", String::from(tol_kind)),
            ("length", format!("{:?}", self.length)),
            ("max_iters", format!("{}", self.max_iters)),
            ("max_temperature", format!("{:?}", self.max_temperature)),
            ("min_temperature", format!("{:?}", self.min_temperature)),
            ("n_elements", format!("{}", self.n_elements)),
            ("nu", format!("{:?}", self.nu)),
            ("pc_degree", format!("{}", self.pc_degree)),
            ("quadrature_level", format!("{}", self.quadrature_level)),
            ("reference_temperature", format!("{:?}", self.reference_temperature)),
            ("source", format!("{:?}", self.source)),
            ("update_tolerance", format!("{:?}", self.update_tolerance)),
        ];
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut s = String::new();
        for (k, v) in entries {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Hex SHA-256 of [`canonical_string`](Self::canonical_string).
    pub fn hash(&self) -> String {
        hex_digest(self.canonical_string().as_bytes())
    }

    /// Hash of the parameters that determine the physical map `ξ ↦ (T, Φ)`,
    /// ignoring PC resolution, iteration controls and the KL tolerance.
    pub fn model_hash(&self) -> String {
        let mut c = self.clone();
        c.pc_degree = 0;
        c.quadrature_level = 1;
        c.kl_tolerance = KlTolerance::Absolute(0.0);
        c.max_iters = 1;
        c.update_tolerance = 0.0;
        c.hash()
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in d.iter() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Everything derived from a configuration that does not change between
/// samples or iterations.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub mesh: Mesh,
    pub physics: Physics,
    pub field: FieldModel,
    pub gram: SymBandMatrix,
    pub gram_dense: DenseMatrix,
    pub neutron_source: Vec<f64>,
}

impl Problem {
    pub fn new(config: ProblemConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Mesh::uniform(config.length, config.n_elements)?;
        let physics = config.physics();
        let field =
            FieldModel::new(&mesh, config.h_mean, config.h_variation, config.correlation_length, config.field_terms)?;
        let gram = crate::fem::gram_matrix_h1(&mesh);
        let gram_dense = gram.to_dense();
        let neutron_source = neutron_source(&mesh, &physics);
        Ok(Self { config, mesh, physics, field, gram, gram_dense, neutron_source })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn stochastic_dim(&self) -> usize {
        self.field.dim()
    }

    /// `[K + H(ξ)] T = q(T_prev, Φ_prev)`; returns `T` and the clamped-point count.
    pub fn heat_solve(&self, h: &[f64], t_prev: &[f64], phi_prev: &[f64]) -> Result<(Vec<f64>, usize)> {
        let a = heat_matrix(&self.mesh, &self.physics, h);
        let (q, clamped) = heat_load(&self.mesh, &self.physics, h, t_prev, Some(phi_prev))?;
        Ok((solve_banded(&a, &q)?, clamped))
    }

    /// `[D(T) + M(T)] Φ = s`.
    pub fn neutronics_solve(&self, t: &[f64]) -> Result<(Vec<f64>, usize)> {
        let (a, clamped) = neutronics_matrix(&self.mesh, &self.physics, t)?;
        Ok((solve_banded(&a, &self.neutron_source)?, clamped))
    }

    /// Initial iterate `T⁰ = T_∞ 1`, `Φ⁰ = 0`.
    pub fn initial_state(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.n_nodes();
        (vec![self.config.ambient_temperature; r], vec![0.0; r])
    }

    /// `‖x‖_W`.
    pub fn w_norm(&self, x: &[f64]) -> f64 {
        libm::sqrt(self.gram.quadratic(x).max(0.0))
    }
}

fn relative_change(w: &SymBandMatrix, new: &[f64], old: &[f64]) -> f64 {
    let d: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
    let num = libm::sqrt(w.quadratic(&d).max(0.0));
    let den = libm::sqrt(w.quadratic(new).max(0.0));
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Updates below this are round-off; growth among them is not divergence.
const DIVERGENCE_FLOOR: f64 = 1e-12;

/// Result of the per-sample Gauss-Seidel iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicSolution {
    pub temperature: Vec<f64>,
    pub flux: Vec<f64>,
    pub iterations: usize,
    /// Relative W-norm update per iteration, the larger of T and Φ.
    pub updates: Vec<f64>,
    /// Relative residuals of the heat and neutronics equations at the end.
    pub heat_residual: f64,
    pub neutronics_residual: f64,
    pub clamped_points: usize,
}

/// Per-sample fixed-point iteration alternating the heat and neutronics solves.
pub fn gauss_seidel_deterministic(
    problem: &Problem,
    xi: &[f64],
    init: Option<(&[f64], &[f64])>,
) -> Result<DeterministicSolution> {
    let h = problem.field.evaluate(xi)?;
    let (mut t, mut phi) = match init {
        Some((t0, p0)) => (t0.to_vec(), p0.to_vec()),
        None => problem.initial_state(),
    };
    let cfg = &problem.config;
    let mut updates = Vec::new();
    let mut clamped = 0;
    let mut growth = 0;
    for it in 1..=cfg.max_iters {
        let (t_new, c1) = problem.heat_solve(&h, &t, &phi)?;
        let (phi_new, c2) = problem.neutronics_solve(&t_new)?;
        clamped += c1 + c2;
        let u = relative_change(&problem.gram, &t_new, &t).max(relative_change(&problem.gram, &phi_new, &phi));
        if !u.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        if let Some(&prev) = updates.last() {
            if u > prev && u > DIVERGENCE_FLOOR {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::Divergence { iteration: it });
                }
            } else {
                growth = 0;
            }
        }
        updates.push(u);
        t = t_new;
        phi = phi_new;
        if u < cfg.update_tolerance {
            break;
        }
    }
    let (heat_residual, neutronics_residual) = residuals(problem, &h, &t, &phi)?;
    Ok(DeterministicSolution {
        temperature: t,
        flux: phi,
        iterations: updates.len(),
        updates,
        heat_residual,
        neutronics_residual,
        clamped_points: clamped,
    })
}

/// Relative residuals of both discrete equations at `(T, Φ)`.
pub fn residuals(problem: &Problem, h: &[f64], t: &[f64], phi: &[f64]) -> Result<(f64, f64)> {
    let a = heat_matrix(&problem.mesh, &problem.physics, h);
    let (q, _) = heat_load(&problem.mesh, &problem.physics, h, t, Some(phi))?;
    let heat = rel_residual(&a, t, &q);
    let (b, _) = neutronics_matrix(&problem.mesh, &problem.physics, t)?;
    let neut = rel_residual(&b, phi, &problem.neutron_source);
    Ok((heat, neut))
}

fn rel_residual(a: &SymBandMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    libm::sqrt(num / den.max(f64::MIN_POSITIVE))
}

/// PC basis, quadrature rule and the basis tabulated at the nodes.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: MultiIndexSet,
    pub rule: QuadratureRule,
    pub nodal: NodalBasis,
}

impl Discretization {
    pub fn new(problem: &Problem) -> Result<Self> {
        let m = problem.stochastic_dim();
        let basis = MultiIndexSet::new(m, problem.config.pc_degree)?;
        let rule = sparse_grid(m, problem.config.quadrature_level)?;
        let nodal = NodalBasis::new(&basis, &rule)?;
        Ok(Self { basis, rule, nodal })
    }
}

/// One PC iteration: node solves and projections.
#[derive(Debug, Clone)]
pub struct PcStep {
    pub node_temperature: Vec<Vec<f64>>,
    pub temperature: PcVector,
    /// Present when the exchanged temperature was reduced.
    pub kl: Option<KlRecord>,
    pub coupling_temperature: PcVector,
    pub node_flux: Vec<Vec<f64>>,
    pub flux: PcVector,
    pub clamped_points: usize,
}

/// Heat solve at quadrature node `k` from the previous surrogates.
pub fn heat_node(
    problem: &Problem,
    disc: &Discretization,
    k: usize,
    t_prev: &PcVector,
    phi_prev: &PcVector,
) -> Result<(Vec<f64>, usize)> {
    let xi = disc.rule.node(k);
    let h = problem.field.evaluate(xi)?;
    let t = disc.nodal.evaluate(t_prev, k);
    let phi = disc.nodal.evaluate(phi_prev, k);
    problem.heat_solve(&h, &t, &phi)
}

/// Neutronics solve at quadrature node `k` for the exchanged temperature.
pub fn neutronics_node(
    problem: &Problem,
    disc: &Discretization,
    k: usize,
    t_coupling: &PcVector,
) -> Result<(Vec<f64>, usize)> {
    let t = disc.nodal.evaluate(t_coupling, k);
    problem.neutronics_solve(&t)
}

fn collect_nodes(results: Vec<Result<(Vec<f64>, usize)>>) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut values = Vec::with_capacity(results.len());
    let mut clamped = 0;
    for (node, r) in results.into_iter().enumerate() {
        match r {
            Ok((v, c)) => {
                values.push(v);
                clamped += c;
            }
            Err(e) => return Err(Error::NodeFailure { node, source: alloc::boxed::Box::new(e) }),
        }
    }
    Ok((values, clamped))
}

/// How the temperature handed to the neutronics is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exchange {
    Full,
    /// KL truncation with this absolute energy tolerance.
    Reduced(f64),
}

/// Heat at every node, projection, optional reduction, neutronics at every
/// node, projection.
pub fn pc_step<E: Executor>(
    exec: &E,
    problem: &Problem,
    disc: &Discretization,
    t_prev: &PcVector,
    phi_prev: &PcVector,
    exchange: Exchange,
) -> Result<PcStep> {
    let n = disc.rule.len();
    let (node_temperature, c1) = collect_nodes(exec.map(n, |k| heat_node(problem, disc, k, t_prev, phi_prev)))?;
    let temperature = project_nonintrusive(exec, &node_temperature, &disc.nodal)?;
    let (kl, coupling_temperature) = match exchange {
        Exchange::Full => (None, temperature.clone()),
        Exchange::Reduced(tol) => {
            let dec = decompose(&temperature, &problem.gram_dense, Weighting::GramH1)?;
            let rec = dec.reduce(tol)?;
            let t = crate::kl::reconstruct(&rec);
            (Some(rec), t)
        }
    };
    let (node_flux, c2) = collect_nodes(exec.map(n, |k| neutronics_node(problem, disc, k, &coupling_temperature)))?;
    let flux = project_nonintrusive(exec, &node_flux, &disc.nodal)?;
    Ok(PcStep { node_temperature, temperature, kl, coupling_temperature, node_flux, flux, clamped_points: c1 + c2 })
}

/// Where the absolute KL tolerance came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceSource {
    Absolute,
    /// `σ_T²` of a completed full-PC run.
    FullRun,
    /// Fluctuation energy of the first iterate whose temperature is random.
    FirstIterate,
}

/// One recorded PC iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub temperature: PcVector,
    pub flux: PcVector,
    /// The reconstruction passed to the neutronics (reduced runs only).
    pub coupling_temperature: Option<PcVector>,
    pub kl: Option<KlRecord>,
    /// `√Σ_α‖T_α^ℓ − T_α^{ℓ−1}‖²_W / √Σ_α‖T_α^ℓ‖²_W`, and likewise for Φ.
    pub update_temperature: f64,
    pub update_flux: f64,
    pub clamped_points: usize,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub config_hash: String,
    pub reduced: bool,
    /// Absolute tolerance and its origin, for reduced runs.
    pub tolerance: Option<(f64, ToleranceSource)>,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Reduced dimension per iteration (reduced runs only).
    pub fn dimensions(&self) -> Vec<usize> {
        self.records.iter().filter_map(|r| r.kl.as_ref().map(|k| k.dimension)).collect()
    }
}

fn pc_energy(w: &SymBandMatrix, q: &PcVector) -> f64 {
    q.energy(w)
}

fn pc_relative_update(w: &SymBandMatrix, new: &PcVector, old: &PcVector) -> Result<f64> {
    let d = new.sub(old)?;
    let num = libm::sqrt(pc_energy(w, &d).max(0.0));
    let den = libm::sqrt(pc_energy(w, new).max(0.0));
    Ok(if den > 0.0 { num / den } else { num })
}

/// `σ_T² = Σ_{|α|≥1} ‖T_α‖²_W` of the last iterate.
pub fn sigma_t_squared(problem: &Problem, trace: &IterationTrace) -> Option<f64> {
    trace.last().map(|r| r.temperature.fluctuation_energy(&problem.gram))
}

/// Relative fluctuation energy below which an iterate is deterministic.
const RANDOMNESS_FLOOR: f64 = 1e-20;

fn run<E: Executor>(
    exec: &E,
    problem: &Problem,
    disc: &Discretization,
    mut tolerance: Option<(f64, ToleranceSource)>,
    pending_fraction: Option<f64>,
) -> Result<IterationTrace> {
    let cfg = &problem.config;
    let terms = disc.basis.len();
    let (t0, p0) = problem.initial_state();
    let mut t_prev = PcVector::constant(terms, &t0);
    let mut phi_prev = PcVector::constant(terms, &p0);
    let reduced = tolerance.is_some() || pending_fraction.is_some();
    let mut records = Vec::with_capacity(cfg.max_iters);
    for it in 1..=cfg.max_iters {
        let start = exec.now();
        let exchange =
            if !reduced { Exchange::Full } else { Exchange::Reduced(tolerance.map_or(f64::INFINITY, |t| t.0)) };
        let mut step = pc_step(exec, problem, disc, &t_prev, &phi_prev, exchange)?;
        if tolerance.is_none() {
            if let Some(frac) = pending_fraction {
                let e = step.temperature.fluctuation_energy(&problem.gram);
                let total = step.temperature.energy(&problem.gram);
                // round-off fluctuations of a deterministic iterate do not count
                if e > RANDOMNESS_FLOOR * total {
                    let tol = frac * e;
                    tolerance = Some((tol, ToleranceSource::FirstIterate));
                    step = pc_step(exec, problem, disc, &t_prev, &phi_prev, Exchange::Reduced(tol))?;
                }
            }
        }
        let update_temperature = pc_relative_update(&problem.gram, &step.temperature, &t_prev)?;
        let update_flux = pc_relative_update(&problem.gram, &step.flux, &phi_prev)?;
        let seconds = match (start, exec.now()) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
        let done = update_temperature.max(update_flux) < cfg.update_tolerance;
        records.push(IterationRecord {
            iteration: it,
            temperature: step.temperature.clone(),
            flux: step.flux.clone(),
            coupling_temperature: if reduced { Some(step.coupling_temperature) } else { None },
            kl: step.kl,
            update_temperature,
            update_flux,
            clamped_points: step.clamped_points,
            seconds,
        });
        t_prev = step.temperature;
        phi_prev = step.flux;
        if done {
            break;
        }
    }
    Ok(IterationTrace { config_hash: cfg.hash(), reduced, tolerance, records })
}

/// PC iteration without reduction.
pub fn pc_iterate_full<E: Executor>(exec: &E, problem: &Problem) -> Result<IterationTrace> {
    let disc = Discretization::new(problem)?;
    run(exec, problem, &disc, None, None)
}

/// PC iteration with per-iteration KL reduction of the exchanged temperature.
///
/// A fractional tolerance is resolved against `sigma_t_squared` when given
/// (the `σ_T²` of a completed full run); otherwise against the fluctuation
/// energy of the first iterate whose temperature is random. Until then the
/// iterate is deterministic and its reduction is exact at `d = 0`.
pub fn pc_iterate_reduced<E: Executor>(
    exec: &E,
    problem: &Problem,
    sigma_t_squared: Option<f64>,
) -> Result<IterationTrace> {
    let disc = Discretization::new(problem)?;
    match (problem.config.kl_tolerance, sigma_t_squared) {
        (KlTolerance::Absolute(t), _) => run(exec, problem, &disc, Some((t, ToleranceSource::Absolute)), None),
        (KlTolerance::Fraction(f), Some(s2)) => {
            run(exec, problem, &disc, Some((f * s2, ToleranceSource::FullRun)), None)
        }
        (KlTolerance::Fraction(f), None) => run(exec, problem, &disc, None, Some(f)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;

    fn small() -> ProblemConfig {
        ProblemConfig { field_terms: 2, n_elements: 10, ..ProblemConfig::default() }.with_degree(2)
    }

    #[test]
    fn defaults_validate_and_hash_is_stable() {
        let c = ProblemConfig::default();
        c.validate().unwrap();
        assert_eq!(c.hash(), ProblemConfig::default().hash());
        assert_ne!(c.hash(), ProblemConfig { conductivity: 1.0, ..c.clone() }.hash());
        assert_eq!(c.model_hash(), c.clone().with_degree(2).model_hash());
        let bad = ProblemConfig { fission_ref: 0.01, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn no_fission_energy_keeps_ambient_temperature() {
        let cfg = ProblemConfig { fission_energy: 0.0, ..small() };
        let p = Problem::new(cfg).unwrap();
        let s = gauss_seidel_deterministic(&p, &[0.3, -0.7], None).unwrap();
        assert!(s.temperature.iter().all(|&t| (t - 390.0).abs() < 1e-9));
        let (phi, _) = p.neutronics_solve(&vec![390.0; p.n_nodes()]).unwrap();
        for (a, b) in s.flux.iter().zip(&phi) {
            assert!((a - b).abs() <= 1e-10 * b.abs());
        }
    }

    #[test]
    fn deterministic_solver_converges_with_small_residuals() {
        let p = Problem::new(small()).unwrap();
        let s = gauss_seidel_deterministic(&p, &[0.5, 0.5], None).unwrap();
        assert!(s.iterations < p.config.max_iters, "{:?}", s.updates);
        assert!(s.heat_residual < 1e-8 && s.neutronics_residual < 1e-8);
        let (t0, p0) = (vec![800.0; p.n_nodes()], vec![1e13; p.n_nodes()]);
        let other = gauss_seidel_deterministic(&p, &[0.5, 0.5], Some((&t0, &p0))).unwrap();
        for (a, b) in s.temperature.iter().zip(&other.temperature) {
            assert!((a - b).abs() <= 1e-7 * a.abs());
        }
    }

    #[test]
    fn deterministic_field_ignores_the_sample() {
        let p = Problem::new(ProblemConfig { h_variation: 0.0, ..small() }).unwrap();
        let a = gauss_seidel_deterministic(&p, &[0.9, -0.1], None).unwrap();
        let b = gauss_seidel_deterministic(&p, &[-0.4, 0.2], None).unwrap();
        assert_eq!(a.temperature, b.temperature);
        assert_eq!(a.flux, b.flux);
    }

    #[test]
    fn first_iteration_is_ambient() {
        let p = Problem::new(small()).unwrap();
        let trace = pc_iterate_full(&Serial, &p).unwrap();
        let t1 = &trace.records[0].temperature;
        for (i, &v) in t1.mean().iter().enumerate() {
            assert!((v - 390.0).abs() < 1e-9, "node {i}");
        }
        assert!(t1.fluctuation_energy(&p.gram) < 1e-18);
    }

    #[test]
    fn full_pc_with_deterministic_field_matches_deterministic_solver() {
        let cfg = ProblemConfig { h_variation: 0.0, update_tolerance: 0.0, ..small() };
        let p = Problem::new(cfg).unwrap();
        let trace = pc_iterate_full(&Serial, &p).unwrap();
        let last = trace.last().unwrap();
        let det = gauss_seidel_deterministic(&p, &[0.0, 0.0], None).unwrap();
        for a in 1..last.temperature.terms() {
            assert!(last.temperature.coeff(a).iter().all(|v| v.abs() < 1e-10 * 1e3));
        }
        for (x, y) in last.temperature.mean().iter().zip(&det.temperature) {
            assert!((x - y).abs() < 1e-9 * y);
        }
        for (x, y) in last.flux.mean().iter().zip(&det.flux) {
            assert!((x - y).abs() < 1e-9 * y);
        }
    }

    #[test]
    fn neutronics_sees_the_current_temperature() {
        let p = Problem::new(small()).unwrap();
        let disc = Discretization::new(&p).unwrap();
        let trace = pc_iterate_full(&Serial, &p).unwrap();
        let l = 3;
        let cur = &trace.records[l];
        let prev = &trace.records[l - 1];
        let n = disc.rule.len();
        let now: Vec<Vec<f64>> = (0..n).map(|k| neutronics_node(&p, &disc, k, &cur.temperature).unwrap().0).collect();
        let stale: Vec<Vec<f64>> =
            (0..n).map(|k| neutronics_node(&p, &disc, k, &prev.temperature).unwrap().0).collect();
        assert_eq!(project_nonintrusive(&Serial, &now, &disc.nodal).unwrap(), cur.flux);
        assert_ne!(project_nonintrusive(&Serial, &stale, &disc.nodal).unwrap(), cur.flux);
    }

    #[test]
    fn node_solves_are_pure() {
        let p = Problem::new(small()).unwrap();
        let disc = Discretization::new(&p).unwrap();
        let trace = pc_iterate_full(&Serial, &p).unwrap();
        let prev = &trace.records[1];
        let step = pc_step(&Serial, &p, &disc, &prev.temperature, &prev.flux, Exchange::Full).unwrap();
        assert_eq!(step.temperature, trace.records[2].temperature);
        for k in [0, disc.rule.len() / 2, disc.rule.len() - 1] {
            let (t, _) = heat_node(&p, &disc, k, &prev.temperature, &prev.flux).unwrap();
            assert_eq!(t, step.node_temperature[k]);
            let (phi, _) = neutronics_node(&p, &disc, k, &step.temperature).unwrap();
            assert_eq!(phi, step.node_flux[k]);
        }
    }

    #[test]
    fn zero_tolerance_reduction_reproduces_full_run() {
        let cfg = ProblemConfig { kl_tolerance: KlTolerance::Absolute(0.0), ..small() };
        let p = Problem::new(cfg).unwrap();
        let full = pc_iterate_full(&Serial, &p).unwrap();
        let red = pc_iterate_reduced(&Serial, &p, None).unwrap();
        for (a, b) in full.records.iter().zip(&red.records) {
            let scale = a.temperature.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.temperature.as_slice().iter().zip(b.temperature.as_slice()) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn fractional_tolerance_falls_back_to_first_random_iterate() {
        let p = Problem::new(small()).unwrap();
        let red = pc_iterate_reduced(&Serial, &p, None).unwrap();
        let (tol, src) = red.tolerance.unwrap();
        assert_eq!(src, ToleranceSource::FirstIterate);
        let e2 = red.records[1].temperature.fluctuation_energy(&p.gram);
        assert!((tol - 0.9 * e2).abs() <= 1e-15 * e2);
        assert_eq!(red.records[0].kl.as_ref().unwrap().dimension, 0);
    }
}
