//! Experiment orchestration behind the CLI subcommands.
//!
//! Every command writes into `<out>/<command>/` and finishes with a
//! `manifest.json` listing and hashing the files it produced. `compare` reads
//! the `pc` and `pc-kl` directories of the same `<out>`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use pckl_core::analysis::{
    convergence_metrics, diagnostics, estimate_contraction, iteration_distance, DiagnosticsReport,
};
use pckl_core::exec::Executor;
use pckl_core::field::field_eigendecomposition;
use pckl_core::mc::run_monte_carlo;
use pckl_core::solver::{
    pc_iterate_full, pc_iterate_reduced, sigma_t_squared, Discretization, IterationTrace, KlTolerance, Problem,
    ProblemConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::exec::Rayon;
use crate::io::{cells, f17, read_json, read_trace, write_json, write_pc_csv, write_trace, Csv, TraceMeta};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mc,
    Pc,
    PcKl,
    Compare,
    Study,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mc => "mc",
            Command::Pc => "pc",
            Command::PcKl => "pc-kl",
            Command::Compare => "compare",
            Command::Study => "study",
        }
    }
}

/// Command-line overrides of configuration keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    /// Sets the PC degree and the quadrature level `p + 1`.
    pub p: Option<usize>,
    pub tol: Option<f64>,
    pub tol_fraction: Option<f64>,
    /// Thermal conductivity.
    pub k: Option<f64>,
    /// Worker threads, 0 for all cores.
    pub threads: Option<usize>,
    pub max_iters: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, rc: &mut RunConfig) -> Result<()> {
        if self.tol.is_some() && self.tol_fraction.is_some() {
            bail!("--tol and --tol-fraction are mutually exclusive");
        }
        if let Some(s) = self.seed {
            rc.mc.seed = s;
        }
        if let Some(n) = self.n {
            rc.mc.samples = n;
        }
        if let Some(p) = self.p {
            rc.pc.degree = p;
            rc.pc.quadrature_level = p + 1;
        }
        if let Some(t) = self.tol {
            rc.kl.tol = Some(t);
            rc.kl.tol_fraction = None;
        }
        if let Some(f) = self.tol_fraction {
            rc.kl.tol_fraction = Some(f);
            rc.kl.tol = None;
        }
        if let Some(k) = self.k {
            rc.heat.conductivity = k;
        }
        if let Some(m) = self.max_iters {
            rc.iteration.max_iters = m;
        }
        Ok(())
    }
}

/// Hash of everything that determines the unreduced PC trajectory.
fn pc_hash(cfg: &ProblemConfig) -> String {
    ProblemConfig { kl_tolerance: KlTolerance::Absolute(0.0), ..cfg.clone() }.hash()
}

struct Ctx {
    rc: RunConfig,
    cfg: ProblemConfig,
    exec: Rayon,
    dir: PathBuf,
    out: PathBuf,
    files: Vec<String>,
    k_override: Option<f64>,
}

impl Ctx {
    fn add(&mut self, f: impl Into<String>) {
        self.files.push(f.into());
    }

    fn csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        csv.write(&self.dir.join(name))?;
        self.add(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        write_json(&self.dir.join(name), v)?;
        self.add(name);
        Ok(())
    }
}

pub fn run_command(command: Command, config: Option<&Path>, out: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let started = Instant::now();
    let mut rc = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut rc)?;
    let cfg = rc.problem()?;
    let exec = Rayon::new(overrides.threads.unwrap_or(0))?;
    let dir = out.join(command.name());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    info!("{} -> {} ({} threads, config {})", command.name(), dir.display(), exec.threads(), &cfg.hash()[..12]);
    let mut ctx = Ctx { rc, cfg, exec, dir, out: out.to_path_buf(), files: Vec::new(), k_override: overrides.k };
    fs::write(ctx.dir.join("config.conf"), ctx.rc.to_text())?;
    ctx.add("config.conf");
    match command {
        Command::Mc => mc(&mut ctx)?,
        Command::Pc => pc(&mut ctx)?,
        Command::PcKl => pc_kl(&mut ctx)?,
        Command::Compare => compare(&mut ctx)?,
        Command::Study => study(&mut ctx)?,
    }
    let threads = ctx.exec.threads();
    RunManifest::finish(command.name(), &ctx.cfg.hash(), &ctx.dir, &ctx.files, threads, started.elapsed().as_secs_f64())
}

fn mc(ctx: &mut Ctx) -> Result<()> {
    let problem = Problem::new(ctx.cfg.clone())?;
    let (n, seed) = (ctx.rc.mc.samples, ctx.rc.mc.seed);
    let res = run_monte_carlo(&ctx.exec, &problem, n, seed, ctx.rc.mc.store_cap)?;
    info!("mc: {n} samples, {} failures", res.failures.len());
    let x = problem.mesh.nodes().to_vec();
    let (vt, vf) = (res.temperature.variance(), res.flux.variance());
    ctx.json(
        "mc_summary.json",
        &json!({
            "n": n,
            "seed": seed,
            "config_hash": res.config_hash,
            "model_hash": res.model_hash,
            "failures": res.failures,
            "stored_samples": res.stored(),
            "x": x,
            "mean_temperature": res.temperature.mean,
            "variance_temperature": vt,
            "mean_flux": res.flux.mean,
            "variance_flux": vf,
        }),
    )?;
    let mut stats = Csv::new(["x", "mean_temperature", "variance_temperature", "mean_flux", "variance_flux"]);
    for i in 0..x.len() {
        stats.row(&cells(&[x[i], res.temperature.mean[i], vt[i], res.flux.mean[i], vf[i]]));
    }
    ctx.csv("mc_statistics.csv", &stats)?;

    let m = problem.stochastic_dim();
    let header = |lead: &str| {
        std::iter::once("sample".to_string())
            .chain((1..=m).map(|j| format!("xi_{j}")))
            .chain((0..x.len()).map(move |i| format!("{lead}_{i}")))
            .collect::<Vec<_>>()
    };
    let mut pt = Csv::new(header("T"));
    let mut pf = Csv::new(header("Phi"));
    for (k, s) in res.samples.iter().enumerate().take(ctx.rc.mc.paths) {
        let Some(s) = s else { continue };
        let mut row = vec![k.to_string()];
        row.extend(cells(&res.xi[k]));
        let mut rt = row.clone();
        rt.extend(cells(&s.temperature));
        row.extend(cells(&s.flux));
        pt.row(&rt);
        pf.row(&row);
    }
    ctx.csv("mc_paths_temperature.csv", &pt)?;
    ctx.csv("mc_paths_flux.csv", &pf)?;
    Ok(())
}

fn write_field(ctx: &mut Ctx, problem: &Problem) -> Result<()> {
    let spec = field_eigendecomposition(&problem.mesh, ctx.cfg.correlation_length, ctx.cfg.field_terms)?;
    let mut ev = Csv::new(["index", "eigenvalue"]);
    for (j, l) in spec.eigenvalues.iter().enumerate() {
        ev.row(&[(j + 1).to_string(), f17(*l)]);
    }
    ctx.csv("field_eigenvalues.csv", &ev)?;
    let x = problem.mesh.nodes();
    let mut modes =
        Csv::new(std::iter::once("x".to_string()).chain((1..=spec.modes.len()).map(|j| format!("mode_{j}"))));
    for i in 0..x.len() {
        let mut row = vec![f17(x[i])];
        row.extend(spec.modes.iter().map(|m| f17(m[i])));
        modes.row(&row);
    }
    ctx.csv("field_modes.csv", &modes)
}

fn write_run(ctx: &mut Ctx, problem: &Problem, disc: &Discretization, trace: &IterationTrace) -> Result<f64> {
    let s2 = sigma_t_squared(problem, trace).context("empty trace")?;
    for f in write_trace(&ctx.dir, &disc.basis, trace, s2)? {
        ctx.add(f);
    }
    let last = trace.last().context("empty trace")?;
    write_pc_csv(&ctx.dir.join("temperature_pc.csv"), &disc.basis, &last.temperature)?;
    write_pc_csv(&ctx.dir.join("flux_pc.csv"), &disc.basis, &last.flux)?;
    ctx.add("temperature_pc.csv");
    ctx.add("flux_pc.csv");
    if trace.len() >= 2 {
        let m = convergence_metrics(&problem.gram, trace)?;
        let mut c = Csv::new(["iteration", "temperature", "flux"]);
        for (i, (t, f)) in m.temperature.iter().zip(&m.flux).enumerate() {
            c.row(&[(i + 2).to_string(), f17(*t), f17(*f)]);
        }
        ctx.csv("convergence.csv", &c)?;
    }
    Ok(s2)
}

fn pc(ctx: &mut Ctx) -> Result<()> {
    let problem = Problem::new(ctx.cfg.clone())?;
    let disc = Discretization::new(&problem)?;
    info!("pc: {} terms, {} quadrature nodes", disc.basis.len(), disc.rule.len());
    let trace = pc_iterate_full(&ctx.exec, &problem)?;
    let s2 = write_run(ctx, &problem, &disc, &trace)?;
    write_field(ctx, &problem)?;
    let alpha = estimate_contraction(&trace).ok();
    info!("pc: sigma_T = {:.6}", s2.sqrt());
    ctx.json(
        "summary.json",
        &json!({
            "config_hash": trace.config_hash,
            "pc_hash": pc_hash(&ctx.cfg),
            "iterations": trace.len(),
            "sigma_t": s2.sqrt(),
            "sigma_t_squared": s2,
            "alpha_hat": alpha.map(|a| a.alpha),
            "linear_regime": alpha.map(|a| [a.window.0 + 1, a.window.1]),
        }),
    )
}

/// `σ_T²` of a completed `pc` run in the same output directory, if it matches.
fn full_run_sigma(ctx: &Ctx) -> Option<f64> {
    let summary: serde_json::Value = read_json(&ctx.out.join("pc").join("summary.json")).ok()?;
    if summary.get("pc_hash")?.as_str()? != pc_hash(&ctx.cfg) {
        return None;
    }
    summary.get("sigma_t_squared")?.as_f64()
}

fn pc_kl(ctx: &mut Ctx) -> Result<()> {
    let problem = Problem::new(ctx.cfg.clone())?;
    let disc = Discretization::new(&problem)?;
    let s2 = match ctx.cfg.kl_tolerance {
        KlTolerance::Fraction(_) => full_run_sigma(ctx),
        KlTolerance::Absolute(_) => None,
    };
    match (ctx.cfg.kl_tolerance, s2) {
        (KlTolerance::Fraction(f), Some(s)) => info!("pc-kl: tol = {f} * sigma_T^2 from the pc run ({s:.6e})"),
        (KlTolerance::Fraction(f), None) => info!("pc-kl: tol = {f} * energy of the first random iterate"),
        (KlTolerance::Absolute(t), _) => info!("pc-kl: absolute tol {t:e}"),
    }
    let trace = pc_iterate_reduced(&ctx.exec, &problem, s2)?;
    let final_s2 = write_run(ctx, &problem, &disc, &trace)?;
    let (tol, source) = trace.tolerance.map_or((None, None), |(t, s)| (Some(t), Some(format!("{s:?}"))));
    ctx.json(
        "summary.json",
        &json!({
            "config_hash": trace.config_hash,
            "iterations": trace.len(),
            "tolerance": tol,
            "tolerance_source": source,
            "dimensions": trace.dimensions(),
            "sigma_t_squared": final_s2,
        }),
    )
}

fn load_pair(out: &Path) -> Result<(crate::io::LoadedTrace, crate::io::LoadedTrace)> {
    let need = |name: &str| -> Result<crate::io::LoadedTrace> {
        let d = out.join(name);
        if !d.join("trace.json").exists() {
            bail!("missing prerequisite artifacts: {} (run `{name}` first)", d.display());
        }
        read_trace(&d)
    };
    Ok((need("pc")?, need("pc-kl")?))
}

fn compatible(a: &TraceMeta, b: &TraceMeta) -> Result<()> {
    if (a.stochastic_dim, a.pc_degree, a.nodes) != (b.stochastic_dim, b.pc_degree, b.nodes) {
        bail!("pc and pc-kl traces use different bases or meshes");
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportJson<'a> {
    full_hash: &'a str,
    reduced_hash: &'a str,
    full_updates: &'a [(f64, f64)],
    reduced_updates: &'a [(f64, f64)],
    distance_temperature: &'a [f64],
    distance_flux: &'a [f64],
    distance_temperature_abs: &'a [f64],
    distance_flux_abs: &'a [f64],
    dimensions: &'a [usize],
    alpha_hat: Option<f64>,
    linear_regime: Option<[usize; 2]>,
    tol_norm: Option<f64>,
    bound: Option<f64>,
    bound_applicable: Option<bool>,
    partial_sums: Option<&'a [f64]>,
    within_bound: Option<&'a [bool]>,
    within_partial: Option<&'a [bool]>,
    max_distance: f64,
}

fn compare(ctx: &mut Ctx) -> Result<()> {
    let (full, reduced) = load_pair(&ctx.out)?;
    compatible(&full.meta, &reduced.meta)?;
    let mesh = pckl_core::fem::Mesh::uniform(ctx.cfg.length, ctx.cfg.n_elements)?;
    let w = pckl_core::fem::gram_matrix_h1(&mesh);
    let mut report: DiagnosticsReport = diagnostics(&w, &full.trace, &reduced.trace)?;
    report.dimensions = reduced.meta.iterations.iter().filter_map(|m| m.dimension).collect();
    let max_distance = report.distance.temperature.iter().chain(&report.distance.flux).copied().fold(0.0, f64::max);
    info!("compare: max relative distance {max_distance:.3e}");
    let b = report.bound.as_ref();
    ctx.json(
        "diagnostics.json",
        &ReportJson {
            full_hash: &full.meta.config_hash,
            reduced_hash: &reduced.meta.config_hash,
            full_updates: &report.full_updates,
            reduced_updates: &report.reduced_updates,
            distance_temperature: &report.distance.temperature,
            distance_flux: &report.distance.flux,
            distance_temperature_abs: &report.distance.temperature_abs,
            distance_flux_abs: &report.distance.flux_abs,
            dimensions: &report.dimensions,
            alpha_hat: report.contraction.map(|c| c.alpha),
            linear_regime: report.contraction.map(|c| [c.window.0 + 1, c.window.1]),
            tol_norm: b.map(|b| b.tol),
            bound: b.map(|b| b.bound),
            bound_applicable: b.map(|b| b.applicable),
            partial_sums: b.map(|b| b.partial_sums.as_slice()),
            within_bound: b.map(|b| b.within_bound.as_slice()),
            within_partial: b.map(|b| b.within_partial.as_slice()),
            max_distance,
        },
    )?;
    let mut d = Csv::new(["iteration", "temperature", "flux", "temperature_abs", "flux_abs", "dimension"]);
    for i in 0..report.distance.temperature.len() {
        d.row(&[
            (i + 1).to_string(),
            f17(report.distance.temperature[i]),
            f17(report.distance.flux[i]),
            f17(report.distance.temperature_abs[i]),
            f17(report.distance.flux_abs[i]),
            report.dimensions.get(i).map_or_else(String::new, |d| d.to_string()),
        ]);
    }
    ctx.csv("distances.csv", &d)
}

/// Tolerance fractions of `σ_T²` swept by `study`.
pub const STUDY_FRACTIONS: [f64; 3] = [0.90, 0.95, 0.99];
/// Conductivities swept by `study` unless `--k` is given.
pub const STUDY_CONDUCTIVITIES: [f64; 2] = [100.0, 1.0];

/// Full and reduced runs at one conductivity.
pub struct StudyCase {
    pub conductivity: f64,
    pub full: IterationTrace,
    pub sigma_t_squared: f64,
    /// `(fraction, trace)` per tolerance.
    pub reduced: Vec<(f64, IterationTrace)>,
}

/// The tolerance sweep, with fractions resolved against the full run's `σ_T²`.
pub fn study_case<E: Executor>(exec: &E, cfg: &ProblemConfig, k: f64, fractions: &[f64]) -> Result<StudyCase> {
    let base = ProblemConfig { conductivity: k, ..cfg.clone() };
    let problem = Problem::new(base.clone())?;
    let full = pc_iterate_full(exec, &problem)?;
    let s2 = sigma_t_squared(&problem, &full).context("empty trace")?;
    info!("study: k = {k}, sigma_T = {:.6}", s2.sqrt());
    let mut reduced = Vec::new();
    for &f in fractions {
        let p = Problem::new(ProblemConfig { kl_tolerance: KlTolerance::Fraction(f), ..base.clone() })?;
        reduced.push((f, pc_iterate_reduced(exec, &p, Some(s2))?));
    }
    Ok(StudyCase { conductivity: k, full, sigma_t_squared: s2, reduced })
}

fn study(ctx: &mut Ctx) -> Result<()> {
    let ks: Vec<f64> = ctx.k_override.map_or_else(|| STUDY_CONDUCTIVITIES.to_vec(), |k| vec![k]);
    let mut dims = Csv::new(["k", "fraction", "iteration", "dimension"]);
    let mut dist = Csv::new(["k", "fraction", "iteration", "temperature", "flux"]);
    let mut upd = Csv::new(["k", "run", "iteration", "update_temperature", "update_flux"]);
    let mut summary = Vec::new();
    for k in ks {
        let case = study_case(&ctx.exec, &ctx.cfg, k, &STUDY_FRACTIONS)?;
        let w = Problem::new(ProblemConfig { conductivity: k, ..ctx.cfg.clone() })?.gram;
        for r in &case.full.records {
            upd.row(&[f17(k), "full".into(), r.iteration.to_string(), f17(r.update_temperature), f17(r.update_flux)]);
        }
        let mut per_fraction = Vec::new();
        for (f, tr) in &case.reduced {
            let d = iteration_distance(&w, &case.full, tr)?;
            for (i, r) in tr.records.iter().enumerate() {
                let dim = r.kl.as_ref().map_or(0, |k| k.dimension);
                dims.row(&[f17(k), f17(*f), r.iteration.to_string(), dim.to_string()]);
                if let (Some(dt), Some(df)) = (d.temperature.get(i), d.flux.get(i)) {
                    dist.row(&[f17(k), f17(*f), r.iteration.to_string(), f17(*dt), f17(*df)]);
                }
                upd.row(&[
                    f17(k),
                    format!("{f}"),
                    r.iteration.to_string(),
                    f17(r.update_temperature),
                    f17(r.update_flux),
                ]);
            }
            per_fraction.push(json!({
                "fraction": f,
                "tolerance": tr.tolerance.map(|t| t.0),
                "dimensions": tr.dimensions(),
                "max_distance_temperature": d.temperature.iter().copied().fold(0.0, f64::max),
                "max_distance_flux": d.flux.iter().copied().fold(0.0, f64::max),
            }));
        }
        summary.push(json!({
            "k": k,
            "sigma_t": case.sigma_t_squared.sqrt(),
            "alpha_hat": estimate_contraction(&case.full).ok().map(|a| a.alpha),
            "runs": per_fraction,
        }));
    }
    ctx.csv("dimensions.csv", &dims)?;
    ctx.csv("distances.csv", &dist)?;
    ctx.csv("updates.csv", &upd)?;
    ctx.json("summary.json", &summary)
}
