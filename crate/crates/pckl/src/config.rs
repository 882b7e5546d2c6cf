//! Sectioned `key = value` run configuration.
//!
//! The syntax is TOML restricted to one level of sections. Unknown sections or
//! keys are schema errors, and every missing key falls back to the reference
//! value in [`ProblemConfig::default`].

use std::path::Path;

use pckl_core::solver::{KlTolerance, ProblemConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub length: f64,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSection {
    pub conductivity: f64,
    pub ambient_temperature: f64,
    pub fission_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeutronicsSection {
    pub diffusion_ref: f64,
    pub absorption_ref: f64,
    pub fission_ref: f64,
    pub nu: f64,
    pub source: f64,
    pub reference_temperature: f64,
    pub min_temperature: f64,
    pub max_temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub mean: f64,
    pub variation: f64,
    pub correlation_length: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcSection {
    pub degree: usize,
    pub quadrature_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterationSection {
    pub max_iters: usize,
    pub update_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KlSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub samples: usize,
    pub seed: u64,
    pub store_cap: usize,
    /// Sample paths written to CSV.
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub heat: HeatSection,
    pub neutronics: NeutronicsSection,
    pub field: FieldSection,
    pub pc: PcSection,
    pub iteration: IterationSection,
    pub kl: KlSection,
    pub mc: McSection,
}

impl Default for MeshSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self { length: d.length, elements: d.n_elements }
    }
}

impl Default for HeatSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self {
            conductivity: d.conductivity,
            ambient_temperature: d.ambient_temperature,
            fission_energy: d.fission_energy,
        }
    }
}

impl Default for NeutronicsSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self {
            diffusion_ref: d.diffusion_ref,
            absorption_ref: d.absorption_ref,
            fission_ref: d.fission_ref,
            nu: d.nu,
            source: d.source,
            reference_temperature: d.reference_temperature,
            min_temperature: d.min_temperature,
            max_temperature: d.max_temperature,
        }
    }
}

impl Default for FieldSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self {
            mean: d.h_mean,
            variation: d.h_variation,
            correlation_length: d.correlation_length,
            terms: d.field_terms,
        }
    }
}

impl Default for PcSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self { degree: d.pc_degree, quadrature_level: d.quadrature_level }
    }
}

impl Default for IterationSection {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self { max_iters: d.max_iters, update_tolerance: d.update_tolerance }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self { samples: 100_000, seed: 1, store_cap: pckl_core::mc::DEFAULT_STORE_CAP, paths: 100 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Schema(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn kl_tolerance(&self) -> Result<KlTolerance, ConfigError> {
        match (self.kl.tol, self.kl.tol_fraction) {
            (Some(_), Some(_)) => Err(ConfigError::Value {
                key: "kl.tol".into(),
                reason: "set either tol or tol_fraction, not both".into(),
            }),
            (Some(t), None) => Ok(KlTolerance::Absolute(t)),
            (None, Some(f)) => Ok(KlTolerance::Fraction(f)),
            (None, None) => Ok(ProblemConfig::default().kl_tolerance),
        }
    }

    /// The validated problem; value errors name the offending key.
    pub fn problem(&self) -> Result<ProblemConfig, ConfigError> {
        let cfg = ProblemConfig {
            length: self.mesh.length,
            n_elements: self.mesh.elements,
            conductivity: self.heat.conductivity,
            ambient_temperature: self.heat.ambient_temperature,
            fission_energy: self.heat.fission_energy,
            diffusion_ref: self.neutronics.diffusion_ref,
            absorption_ref: self.neutronics.absorption_ref,
            fission_ref: self.neutronics.fission_ref,
            nu: self.neutronics.nu,
            source: self.neutronics.source,
            reference_temperature: self.neutronics.reference_temperature,
            min_temperature: self.neutronics.min_temperature,
            max_temperature: self.neutronics.max_temperature,
            h_mean: self.field.mean,
            h_variation: self.field.variation,
            correlation_length: self.field.correlation_length,
            field_terms: self.field.terms,
            pc_degree: self.pc.degree,
            quadrature_level: self.pc.quadrature_level,
            max_iters: self.iteration.max_iters,
            update_tolerance: self.iteration.update_tolerance,
            kl_tolerance: self.kl_tolerance()?,
        };
        cfg.validate().map_err(|e| ConfigError::Value { key: key_of(&e.to_string()), reason: e.to_string() })?;
        Ok(cfg)
    }
}

/// Maps a core field name in a validation message to its config key.
fn key_of(message: &str) -> String {
    const KEYS: [(&str, &str); 21] = [
        ("n_elements", "mesh.elements"),
        ("length", "mesh.length"),
        ("conductivity", "heat.conductivity"),
        ("ambient_temperature", "heat.ambient_temperature"),
        ("fission_energy", "heat.fission_energy"),
        ("diffusion_ref", "neutronics.diffusion_ref"),
        ("absorption_ref", "neutronics.absorption_ref"),
        ("fission_ref", "neutronics.fission_ref"),
        ("nu ", "neutronics.nu"),
        ("source", "neutronics.source"),
        ("reference_temperature", "neutronics.reference_temperature"),
        ("min_temperature", "neutronics.min_temperature"),
        ("max_temperature", "neutronics.max_temperature"),
        ("h_mean", "field.mean"),
        ("h_variation", "field.variation"),
        ("correlation_length", "field.correlation_length"),
        ("field_terms", "field.terms"),
        ("quadrature_level", "pc.quadrature_level"),
        ("max_iters", "iteration.max_iters"),
        ("update_tolerance", "iteration.update_tolerance"),
        ("KL tolerance", "kl.tol"),
    ];
    let body = message.strip_prefix("invalid argument: ").unwrap_or(message);
    KEYS.iter()
        .filter_map(|(name, key)| body.find(name).map(|pos| (pos, *key)))
        .min_by_key(|(pos, _)| *pos)
        .map_or_else(|| "config".to_string(), |(_, key)| key.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = include_str!("../../../configs/default.conf");

    #[test]
    fn golden_file_is_the_reference_problem() {
        let rc = RunConfig::parse(GOLDEN).unwrap();
        assert_eq!(rc.problem().unwrap(), ProblemConfig::default());
        assert_eq!(rc, RunConfig { kl: KlSection { tol: None, tol_fraction: Some(0.90) }, ..RunConfig::default() });
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap().problem().unwrap(), ProblemConfig::default());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = RunConfig::parse("[heat]\nconductivity = 1.0\nambient_temperature = 390.0\n[mesh]\nelements = 20\n")
            .unwrap();
        let b =
            RunConfig::parse("[mesh]\nelements = 20\n[heat]\nambient_temperature = 390.0\nconductivity = 1\n").unwrap();
        assert_eq!(a.problem().unwrap().hash(), b.problem().unwrap().hash());
    }

    #[test]
    fn schema_errors_name_the_key() {
        let e = RunConfig::parse("[mesh]\nelemnts = 3\n").unwrap_err().to_string();
        assert!(e.contains("elemnts"), "{e}");
        let e = RunConfig::parse("[reactor]\nx = 1\n").unwrap_err().to_string();
        assert!(e.contains("reactor"), "{e}");
        let e = RunConfig::parse("[mesh]\nelements = \"forty\"\n").unwrap_err().to_string();
        assert!(e.contains("invalid type"), "{e}");
    }

    #[test]
    fn value_errors_name_the_key() {
        let e = RunConfig::parse("[field]\ncorrelation_length = -1\n").unwrap().problem().unwrap_err();
        assert!(matches!(&e, ConfigError::Value { key, .. } if key == "field.correlation_length"), "{e}");
        let e = RunConfig::parse("[neutronics]\nfission_ref = 0.01\n").unwrap().problem().unwrap_err();
        assert!(matches!(&e, ConfigError::Value { key, .. } if key == "neutronics.absorption_ref"), "{e}");
        let e = RunConfig::parse("[kl]\ntol = 1.0\ntol_fraction = 0.9\n").unwrap().problem().unwrap_err();
        assert!(matches!(&e, ConfigError::Value { key, .. } if key == "kl.tol"), "{e}");
    }

    #[test]
    fn text_round_trip() {
        let rc = RunConfig::parse(GOLDEN).unwrap();
        assert_eq!(RunConfig::parse(&rc.to_text()).unwrap(), rc);
    }
}
