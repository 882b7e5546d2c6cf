//! Artifact formats: CSV with header rows and floats at 17 significant digits,
//! JSON for summaries.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pckl_core::basis::{MultiIndexSet, PcVector};
use pckl_core::solver::{IterationRecord, IterationTrace, ToleranceSource};
use serde::{Deserialize, Serialize};

/// `x` with 17 significant digits, which round-trips every `f64`.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Accumulates a CSV document.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: impl IntoIterator<Item = S>) -> Self {
        let cols: Vec<String> = header.into_iter().map(|s| s.as_ref().to_string()).collect();
        let mut text = cols.join(",");
        text.push('\n');
        Self { text, width: cols.len() }
    }

    /// Appends a row of preformatted cells.
    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.width, "CSV row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

fn pc_header(basis: &MultiIndexSet, width: usize, lead: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend((1..=basis.dim()).map(|i| format!("alpha_{i}")));
    h.extend((1..=width).map(|i| format!("comp_{i}")));
    h
}

fn pc_rows(csv: &mut Csv, basis: &MultiIndexSet, q: &PcVector, lead: &[String]) {
    for (alpha, c) in basis.iter().zip(q.coeffs()) {
        let mut cells = lead.to_vec();
        cells.extend(alpha.iter().map(|a| a.to_string()));
        cells.extend(c.iter().map(|&v| f17(v)));
        csv.row(&cells);
    }
}

/// One row per multi-index: the index entries, then the coefficient vector.
pub fn write_pc_csv(path: &Path, basis: &MultiIndexSet, q: &PcVector) -> Result<()> {
    let mut csv = Csv::new(pc_header(basis, q.width(), &[]));
    pc_rows(&mut csv, basis, q, &[]);
    csv.write(path)
}

/// All iterates of one field, prefixed by the iteration number.
pub fn write_pc_history(path: &Path, basis: &MultiIndexSet, iterates: &[(usize, &PcVector)]) -> Result<()> {
    let width = iterates.first().map_or(0, |(_, q)| q.width());
    let mut csv = Csv::new(pc_header(basis, width, &["iteration"]));
    for (it, q) in iterates {
        pc_rows(&mut csv, basis, q, &[it.to_string()]);
    }
    csv.write(path)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    if rows.iter().any(|r| r.len() != header.len()) {
        bail!("{}: ragged CSV", path.display());
    }
    Ok((header, rows))
}

/// Reads a history written by [`write_pc_history`]; iterates in file order.
pub fn read_pc_history(path: &Path, basis: &MultiIndexSet) -> Result<Vec<(usize, PcVector)>> {
    let (header, rows) = read_table(path)?;
    let m = basis.dim();
    let width = header.len().checked_sub(1 + m).context("PC history header too short")?;
    let terms = basis.len();
    if rows.len() % terms != 0 {
        bail!("{}: {} rows is not a multiple of {terms} PC terms", path.display(), rows.len());
    }
    let mut out = Vec::new();
    for block in rows.chunks(terms) {
        let it: usize = block[0][0].parse()?;
        let mut data = Vec::with_capacity(terms * width);
        for (row, alpha) in block.iter().zip(basis.iter()) {
            let got: Vec<u32> = row[1..=m].iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            if got != alpha || row[0] != block[0][0] {
                bail!("{}: multi-index order does not match the basis", path.display());
            }
            for cell in &row[1 + m..] {
                data.push(cell.parse::<f64>()?);
            }
        }
        out.push((it, PcVector::from_rows(terms, width, data)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMeta {
    pub iteration: usize,
    pub update_temperature: f64,
    pub update_flux: f64,
    pub clamped_points: usize,
    pub dimension: Option<usize>,
    pub kl_energy: Option<f64>,
    pub kl_discarded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config_hash: String,
    pub reduced: bool,
    pub tolerance: Option<f64>,
    pub tolerance_source: Option<String>,
    pub stochastic_dim: usize,
    pub pc_degree: usize,
    pub nodes: usize,
    /// `Σ_{|α|≥1}‖T_α‖²_W` of the last iterate.
    pub sigma_t_squared: f64,
    pub iterations: Vec<IterationMeta>,
}

fn source_label(s: ToleranceSource) -> &'static str {
    match s {
        ToleranceSource::Absolute => "absolute",
        ToleranceSource::FullRun => "full_run",
        ToleranceSource::FirstIterate => "first_iterate",
    }
}

fn source_from(label: &str) -> Result<ToleranceSource> {
    Ok(match label {
        "absolute" => ToleranceSource::Absolute,
        "full_run" => ToleranceSource::FullRun,
        "first_iterate" => ToleranceSource::FirstIterate,
        other => bail!("unknown tolerance source `{other}`"),
    })
}

/// Writes `trace.json`, the T and Φ histories, per-iteration KL data and
/// `timing.csv`. Returns the files written, relative to `dir`.
pub fn write_trace(
    dir: &Path,
    basis: &MultiIndexSet,
    trace: &IterationTrace,
    sigma_t_squared: f64,
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let nodes = trace.last().map_or(0, |r| r.temperature.width());
    let meta = TraceMeta {
        config_hash: trace.config_hash.clone(),
        reduced: trace.reduced,
        tolerance: trace.tolerance.map(|t| t.0),
        tolerance_source: trace.tolerance.map(|t| source_label(t.1).to_string()),
        stochastic_dim: basis.dim(),
        pc_degree: basis.degree(),
        nodes,
        sigma_t_squared,
        iterations: trace
            .records
            .iter()
            .map(|r| IterationMeta {
                iteration: r.iteration,
                update_temperature: r.update_temperature,
                update_flux: r.update_flux,
                clamped_points: r.clamped_points,
                dimension: r.kl.as_ref().map(|k| k.dimension),
                kl_energy: r.kl.as_ref().map(|k| k.energy),
                kl_discarded: r.kl.as_ref().map(|k| k.discarded_energy()),
            })
            .collect(),
    };
    write_json(&dir.join("trace.json"), &meta)?;
    files.push("trace.json".to_string());

    let temps: Vec<(usize, &PcVector)> = trace.records.iter().map(|r| (r.iteration, &r.temperature)).collect();
    let fluxes: Vec<(usize, &PcVector)> = trace.records.iter().map(|r| (r.iteration, &r.flux)).collect();
    write_pc_history(&dir.join("trace_temperature.csv"), basis, &temps)?;
    write_pc_history(&dir.join("trace_flux.csv"), basis, &fluxes)?;
    files.push("trace_temperature.csv".to_string());
    files.push("trace_flux.csv".to_string());

    let mut upd = Csv::new(["iteration", "update_temperature", "update_flux", "clamped_points"]);
    for r in &trace.records {
        upd.row(&[
            r.iteration.to_string(),
            f17(r.update_temperature),
            f17(r.update_flux),
            r.clamped_points.to_string(),
        ]);
    }
    upd.write(&dir.join("updates.csv"))?;
    files.push("updates.csv".to_string());

    if trace.reduced {
        files.extend(write_kl_records(dir, &trace.records)?);
    }

    let mut timing = Csv::new(["iteration", "seconds"]);
    for r in &trace.records {
        timing.row(&[r.iteration.to_string(), r.seconds.map_or_else(String::new, f17)]);
    }
    timing.write(&dir.join("timing.csv"))?;
    files.push("timing.csv".to_string());
    Ok(files)
}

fn write_kl_records(dir: &Path, records: &[IterationRecord]) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut dims = Csv::new(["iteration", "dimension", "energy", "discarded_energy", "weighting"]);
    let width = records.iter().filter_map(|r| r.kl.as_ref()).map(|k| k.eigenvalues.len()).max().unwrap_or(0);
    let mut eig = Csv::new(std::iter::once("iteration".to_string()).chain((1..=width).map(|j| format!("lambda_{j}"))));
    let kl_dir = dir.join("kl");
    fs::create_dir_all(&kl_dir)?;
    for r in records {
        let Some(k) = &r.kl else { continue };
        dims.row(&[
            r.iteration.to_string(),
            k.dimension.to_string(),
            f17(k.energy),
            f17(k.discarded_energy()),
            k.weighting.label(),
        ]);
        let mut cells = vec![r.iteration.to_string()];
        cells.extend((0..width).map(|j| k.eigenvalues.get(j).map_or_else(String::new, |&l| f17(l))));
        eig.row(&cells);

        // modes as columns over the mesh nodes, coordinates as columns over |α| ≥ 1
        let nodes = k.mean.len();
        let mut modes =
            Csv::new(std::iter::once("node".to_string()).chain((1..=k.dimension).map(|j| format!("mode_{j}"))));
        for i in 0..nodes {
            let mut row = vec![i.to_string()];
            row.extend(k.modes.iter().map(|phi| f17(phi[i])));
            modes.row(&row);
        }
        let name = format!("kl/iter_{:02}_modes.csv", r.iteration);
        modes.write(&dir.join(&name))?;
        files.push(name);
        let terms = k.terms();
        let mut coords =
            Csv::new(std::iter::once("term".to_string()).chain((1..=k.dimension).map(|j| format!("eta_{j}"))));
        for a in 1..terms {
            let mut row = vec![a.to_string()];
            row.extend(k.coords.iter().map(|eta| f17(eta[a - 1])));
            coords.row(&row);
        }
        let name = format!("kl/iter_{:02}_coords.csv", r.iteration);
        coords.write(&dir.join(&name))?;
        files.push(name);
    }
    dims.write(&dir.join("kl_dimensions.csv"))?;
    eig.write(&dir.join("kl_eigenvalues.csv"))?;
    files.push("kl_dimensions.csv".to_string());
    files.push("kl_eigenvalues.csv".to_string());
    Ok(files)
}

/// A trace read back from disk. KL records are summarized by `meta`.
pub struct LoadedTrace {
    pub meta: TraceMeta,
    pub trace: IterationTrace,
}

pub fn read_trace(dir: &Path) -> Result<LoadedTrace> {
    let meta: TraceMeta = read_json(&dir.join("trace.json"))?;
    let basis = MultiIndexSet::new(meta.stochastic_dim, meta.pc_degree)?;
    let temps = read_pc_history(&dir.join("trace_temperature.csv"), &basis)?;
    let fluxes = read_pc_history(&dir.join("trace_flux.csv"), &basis)?;
    if temps.len() != meta.iterations.len() || fluxes.len() != meta.iterations.len() {
        bail!("{}: history length does not match trace.json", dir.display());
    }
    let records = meta
        .iterations
        .iter()
        .zip(temps.into_iter().zip(fluxes))
        .map(|(m, ((_, t), (_, f)))| IterationRecord {
            iteration: m.iteration,
            temperature: t,
            flux: f,
            coupling_temperature: None,
            kl: None,
            update_temperature: m.update_temperature,
            update_flux: m.update_flux,
            clamped_points: m.clamped_points,
            seconds: None,
        })
        .collect();
    let tolerance = match (meta.tolerance, meta.tolerance_source.as_deref()) {
        (Some(t), Some(s)) => Some((t, source_from(s)?)),
        _ => None,
    };
    let trace = IterationTrace { config_hash: meta.config_hash.clone(), reduced: meta.reduced, tolerance, records };
    Ok(LoadedTrace { meta, trace })
}

/// Joins a numeric row for ad-hoc CSV output.
pub fn cells(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| f17(v)).collect()
}
