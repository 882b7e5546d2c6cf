//! Monte Carlo reference: per-sample deterministic solves and statistics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{MultiIndexSet, PcVector};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::solver::{gauss_seidel_deterministic, Problem};

/// Default number of samples whose full fields are kept.
pub const DEFAULT_STORE_CAP: usize = 10_000;

const CHUNK: usize = 256;

/// Uniform on `[-1, 1)` from the top 53 bits of one draw.
pub fn symmetric_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// The `index`-th germ sample for `seed`, independent of evaluation order.
pub fn sample_point(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim).map(|_| symmetric_uniform(&mut rng)).collect()
}

/// Welford accumulator over vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub count: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(width: usize) -> Self {
        Self { count: 0, mean: vec![0.0; width], m2: vec![0.0; width] }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    pub temperature: Vec<f64>,
    pub flux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
    pub model_hash: String,
    /// Every germ draw, in sample order.
    pub xi: Vec<Vec<f64>>,
    /// Fields of the first `store_cap` samples; `None` for failures.
    pub samples: Vec<Option<McSample>>,
    pub temperature: RunningStats,
    pub flux: RunningStats,
    /// Indices of samples whose solve failed.
    pub failures: Vec<usize>,
}

impl McResult {
    pub fn stored(&self) -> usize {
        self.samples.len()
    }
}

/// Solves `n` independent samples; fails only if more than 1% of them fail.
pub fn run_monte_carlo<E: Executor>(
    exec: &E,
    problem: &Problem,
    n: usize,
    seed: u64,
    store_cap: usize,
) -> Result<McResult> {
    if n == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    let m = problem.stochastic_dim();
    let r = problem.n_nodes();
    let mut out = McResult {
        n,
        seed,
        config_hash: problem.config.hash(),
        model_hash: problem.config.model_hash(),
        xi: Vec::with_capacity(n),
        samples: Vec::with_capacity(n.min(store_cap)),
        temperature: RunningStats::new(r),
        flux: RunningStats::new(r),
        failures: Vec::new(),
    };
    let mut start = 0;
    while start < n {
        let len = CHUNK.min(n - start);
        let chunk = exec.map(len, |i| {
            let xi = sample_point(seed, (start + i) as u64, m);
            let sol = gauss_seidel_deterministic(problem, &xi, None)
                .map(|s| McSample { temperature: s.temperature, flux: s.flux });
            (xi, sol)
        });
        // merged serially in sample order, whatever the executor did
        for (i, (xi, sol)) in chunk.into_iter().enumerate() {
            let k = start + i;
            let sample = sol.ok();
            match &sample {
                Some(s) => {
                    out.temperature.push(&s.temperature);
                    out.flux.push(&s.flux);
                }
                None => out.failures.push(k),
            }
            if k < store_cap {
                out.samples.push(sample);
            }
            out.xi.push(xi);
        }
        start += len;
    }
    if out.failures.len() * 100 > n {
        return Err(Error::TooManyFailures { failed: out.failures.len(), total: n });
    }
    Ok(out)
}

/// Root-mean W-norm discrepancy of a surrogate against stored MC samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateError {
    pub temperature: f64,
    pub flux: f64,
    /// Delta-method standard errors of the two ratios.
    pub temperature_std_error: f64,
    pub flux_std_error: f64,
    pub samples: usize,
}

fn ratio_with_error(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let a = num.iter().sum::<f64>() / n;
    let b = den.iter().sum::<f64>() / n;
    let e = libm::sqrt(a / b);
    if !(e > 0.0) || num.len() < 2 {
        return (e, 0.0);
    }
    // linearization of √(ā/b̄) around the sample means
    let g: Vec<f64> = num.iter().zip(den).map(|(&ak, &bk)| ak / (2.0 * e * b) - e * bk / (2.0 * b)).collect();
    let gm = g.iter().sum::<f64>() / n;
    let var = g.iter().map(|x| (x - gm) * (x - gm)).sum::<f64>() / (n - 1.0);
    (e, libm::sqrt(var / n))
}

/// `√[(1/N)Σ‖T(ξ_k) − T^p(ξ_k)‖²_W] / √[(1/N)Σ‖T(ξ_k)‖²_W]` and the Φ analogue,
/// over the stored, successful samples.
pub fn surrogate_error_vs_mc(
    problem: &Problem,
    basis: &MultiIndexSet,
    temperature: &PcVector,
    flux: &PcVector,
    mc: &McResult,
) -> Result<SurrogateError> {
    if problem.config.model_hash() != mc.model_hash {
        return Err(Error::Incompatible("surrogate and Monte Carlo run come from different models".into()));
    }
    if basis.dim() != problem.stochastic_dim() || temperature.terms() != basis.len() || flux.terms() != basis.len() {
        return Err(Error::Incompatible("surrogate does not match the stochastic basis".into()));
    }
    let mut nt = Vec::new();
    let mut dt = Vec::new();
    let mut nf = Vec::new();
    let mut df = Vec::new();
    for (xi, s) in mc.xi.iter().zip(&mc.samples) {
        let Some(s) = s else { continue };
        let psi = basis.eval_all(xi);
        let tp = temperature.evaluate_with(&psi);
        let fp = flux.evaluate_with(&psi);
        let et: Vec<f64> = s.temperature.iter().zip(&tp).map(|(a, b)| a - b).collect();
        let ef: Vec<f64> = s.flux.iter().zip(&fp).map(|(a, b)| a - b).collect();
        nt.push(problem.gram.quadratic(&et));
        dt.push(problem.gram.quadratic(&s.temperature));
        nf.push(problem.gram.quadratic(&ef));
        df.push(problem.gram.quadratic(&s.flux));
    }
    if nt.is_empty() {
        return Err(Error::InsufficientData("no stored Monte Carlo samples".into()));
    }
    let (t, ts) = ratio_with_error(&nt, &dt);
    let (f, fs) = ratio_with_error(&nf, &df);
    Ok(SurrogateError { temperature: t, flux: f, temperature_std_error: ts, flux_std_error: fs, samples: nt.len() })
}
