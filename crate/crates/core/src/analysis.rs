//! Post-processing of iteration traces: convergence, trajectory distances,
//! an empirical contraction modulus, and the a priori bound on the distance
//! between the full and the reduced iteration.
//!
//! The bound takes a *norm* tolerance while the KL selection works with an
//! *energy*; [`check_error_bound`] therefore uses `√tol_energy`.

use alloc::format;
use alloc::vec::Vec;

use crate::basis::PcVector;
use crate::error::{Error, Result};
use crate::linalg::SymBandMatrix;
use crate::solver::IterationTrace;

/// Absolute slack on every bound comparison.
pub const BOUND_SLACK: f64 = 1e-9;

/// Ratio of consecutive updates above which the solver floor is assumed.
const FLOOR_RATIO: f64 = 0.9;

/// Updates this far below the largest one are round-off, whatever their ratio.
const NOISE_FLOOR: f64 = 1e-13;

fn w_norm(w: &SymBandMatrix, q: &PcVector) -> f64 {
    libm::sqrt(q.energy(w).max(0.0))
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Per-iteration W-distances between two trajectories, relative and absolute.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceDistance {
    pub temperature: Vec<f64>,
    pub flux: Vec<f64>,
    pub temperature_abs: Vec<f64>,
    pub flux_abs: Vec<f64>,
}

impl TraceDistance {
    /// `max(‖T − T̂‖_W, ‖Φ − Φ̂‖_W)` per iteration.
    pub fn block_max_abs(&self) -> Vec<f64> {
        self.temperature_abs.iter().zip(&self.flux_abs).map(|(a, b)| a.max(*b)).collect()
    }
}

fn check_shape(a: &PcVector, b: &PcVector, w: &SymBandMatrix) -> Result<()> {
    if a.terms() != b.terms() || a.width() != b.width() || a.width() != w.size() {
        return Err(Error::Incompatible(format!(
            "PC shapes differ: {}x{} vs {}x{} (mesh {})",
            a.terms(),
            a.width(),
            b.terms(),
            b.width(),
            w.size()
        )));
    }
    Ok(())
}

/// `√Σ_α‖T_α^ℓ − T̂_α^ℓ‖²_W / √Σ_α‖T_α^ℓ‖²_W` and the Φ analogue, over common iterations.
pub fn iteration_distance(w: &SymBandMatrix, full: &IterationTrace, reduced: &IterationTrace) -> Result<TraceDistance> {
    let mut out = TraceDistance::default();
    for (f, r) in full.records.iter().zip(&reduced.records) {
        check_shape(&f.temperature, &r.temperature, w)?;
        check_shape(&f.flux, &r.flux, w)?;
        let dt = w_norm(w, &f.temperature.sub(&r.temperature)?);
        let df = w_norm(w, &f.flux.sub(&r.flux)?);
        out.temperature.push(relative(dt, w_norm(w, &f.temperature)));
        out.flux.push(relative(df, w_norm(w, &f.flux)));
        out.temperature_abs.push(dt);
        out.flux_abs.push(df);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionEstimate {
    pub alpha: f64,
    /// Update indices `[start, end)` (0-based) forming the linear regime.
    pub window: (usize, usize),
}

/// `α̂ = max n_{ℓ+1}/n_ℓ` over the linear regime of an update-norm sequence.
///
/// The first update depends on the arbitrary initial guess and is skipped.
/// The regime ends at the solver floor, the first update that is not at least
/// 10% below its predecessor, or the first at round-off level.
pub fn estimate_contraction_from(updates: &[f64]) -> Result<ContractionEstimate> {
    let start = 1;
    let mut end = start;
    let noise = NOISE_FLOOR * updates.iter().copied().fold(0.0, f64::max);
    while end < updates.len() {
        let ok = updates[end] > noise && (end == start || updates[end] < FLOOR_RATIO * updates[end - 1]);
        if !ok {
            break;
        }
        end += 1;
    }
    if end < start + 3 {
        return Err(Error::InsufficientData(format!(
            "{} iterations in the linear regime, need 3",
            end.saturating_sub(start)
        )));
    }
    let alpha = (start..end - 1).map(|i| updates[i + 1] / updates[i]).fold(0.0, f64::max);
    Ok(ContractionEstimate { alpha, window: (start, end) })
}

/// Block-max update per iteration, `max(ΔT, ΔΦ)`.
pub fn block_updates(trace: &IterationTrace) -> Vec<f64> {
    trace.records.iter().map(|r| r.update_temperature.max(r.update_flux)).collect()
}

pub fn estimate_contraction(trace: &IterationTrace) -> Result<ContractionEstimate> {
    estimate_contraction_from(&block_updates(trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub alpha: f64,
    /// `√tol_energy`.
    pub tol: f64,
    /// False when `α ≥ 1`; the remaining fields are then empty or NaN.
    pub applicable: bool,
    /// `2α/(1−α)·tol`.
    pub bound: f64,
    /// `Σ_{k≤ℓ} 2α^{ℓ−k+1}·tol`.
    pub partial_sums: Vec<f64>,
    pub within_bound: Vec<bool>,
    pub within_partial: Vec<bool>,
}

impl BoundCheck {
    pub fn satisfied(&self) -> bool {
        self.applicable && self.within_bound.iter().chain(&self.within_partial).all(|&b| b)
    }
}

/// Checks distances against the limit bound and the per-iteration partial sums.
pub fn check_error_bound(alpha: f64, tol_energy: f64, distances: &[f64]) -> BoundCheck {
    let tol = libm::sqrt(tol_energy.max(0.0));
    if !(0.0..1.0).contains(&alpha) {
        return BoundCheck {
            alpha,
            tol,
            applicable: false,
            bound: f64::NAN,
            partial_sums: Vec::new(),
            within_bound: Vec::new(),
            within_partial: Vec::new(),
        };
    }
    let bound = 2.0 * alpha / (1.0 - alpha) * tol;
    let mut partial_sums = Vec::with_capacity(distances.len());
    let mut s = 0.0;
    for _ in distances {
        // S_ℓ = α (S_{ℓ−1} + 2 tol)
        s = alpha * (s + 2.0 * tol);
        partial_sums.push(s);
    }
    let within_bound = distances.iter().map(|&d| d <= bound + BOUND_SLACK).collect();
    let within_partial = distances.iter().zip(&partial_sums).map(|(&d, &p)| d <= p + BOUND_SLACK).collect();
    BoundCheck { alpha, tol, applicable: true, bound, partial_sums, within_bound, within_partial }
}

/// Relative updates `√Σ_α‖X^ℓ − X^{ℓ−1}‖²_W / √Σ_α‖X^final‖²_W`, for `ℓ ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMetrics {
    pub temperature: Vec<f64>,
    pub flux: Vec<f64>,
}

pub fn convergence_metrics(w: &SymBandMatrix, trace: &IterationTrace) -> Result<ConvergenceMetrics> {
    if trace.len() < 2 {
        return Err(Error::InsufficientData("convergence metrics need two iterations".into()));
    }
    let last = trace.last().expect("non-empty");
    let nt = w_norm(w, &last.temperature);
    let nf = w_norm(w, &last.flux);
    let mut out = ConvergenceMetrics { temperature: Vec::new(), flux: Vec::new() };
    for pair in trace.records.windows(2) {
        check_shape(&pair[1].temperature, &pair[0].temperature, w)?;
        out.temperature.push(relative(w_norm(w, &pair[1].temperature.sub(&pair[0].temperature)?), nt));
        out.flux.push(relative(w_norm(w, &pair[1].flux.sub(&pair[0].flux)?), nf));
    }
    Ok(out)
}

/// Everything `compare` reports about a full and a reduced trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub full_updates: Vec<(f64, f64)>,
    pub reduced_updates: Vec<(f64, f64)>,
    pub distance: TraceDistance,
    pub dimensions: Vec<usize>,
    pub contraction: Option<ContractionEstimate>,
    /// Bound check on the absolute block-max distances, when a tolerance is known.
    pub bound: Option<BoundCheck>,
}

pub fn diagnostics(w: &SymBandMatrix, full: &IterationTrace, reduced: &IterationTrace) -> Result<DiagnosticsReport> {
    let distance = iteration_distance(w, full, reduced)?;
    let contraction = estimate_contraction(full).ok();
    let bound = match (contraction, reduced.tolerance) {
        (Some(c), Some((tol, _))) => Some(check_error_bound(c.alpha, tol, &distance.block_max_abs())),
        _ => None,
    };
    let updates = |t: &IterationTrace| t.records.iter().map(|r| (r.update_temperature, r.update_flux)).collect();
    Ok(DiagnosticsReport {
        full_updates: updates(full),
        reduced_updates: updates(reduced),
        distance,
        dimensions: reduced.dimensions(),
        contraction,
        bound,
    })
}
