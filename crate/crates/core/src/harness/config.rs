//! Pipeline configuration: JSON-loadable with strict unknown-key rejection.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::DegradeSpec;
use crate::enhance::EnhancerSpec;
use crate::error::{Error, Result};
use crate::projector::FbpFilter;

/// Cohort source: synthetic phantoms or a directory of CTK volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfig {
    Phantom(PhantomSource),
    Dir(DirSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    Lung,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSource {
    pub kind: PhantomKind,
    pub n: usize,
    pub cases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vessels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub airway_depth: Option<usize>,
}

/// Volumes are `*.ctk` files (sorted by name); a sidecar
/// `<stem>.labels.ctk` supplies ground-truth labels when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirSource {
    pub path: PathBuf,
}

/// A named degradation column of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDegradation {
    pub name: String,
    pub spec: DegradeSpec,
}

/// Parameter grid searched by `ablate` for enhancers with tunables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningGrid {
    /// Candidate NLM filtering strengths.
    pub h: Vec<f64>,
    /// Candidate TV regularization weights.
    pub lambda: Vec<f64>,
}

/// A named enhancer row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEnhancer {
    pub name: String,
    pub spec: EnhancerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningGrid>,
}

/// Acquisition overrides applied to every case.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryOverrides {
    pub n_angles: Option<usize>,
    pub mu_water: Option<f64>,
    pub filter: Option<FbpFilter>,
}

/// Full pipeline description; the row x column structure of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    pub degradations: Vec<NamedDegradation>,
    pub enhancers: Vec<NamedEnhancer>,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometryOverrides,
    /// Write degraded/enhanced volumes next to the report.
    #[serde(default)]
    pub save_volumes: bool,
    /// Worker threads for the cohort loop; None uses the default pool.
    /// Results are byte-identical for any value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degradations.is_empty() {
            return Err(Error::Config("at least one degradation required".into()));
        }
        if self.enhancers.is_empty() {
            return Err(Error::Config("at least one enhancer required".into()));
        }
        let mut names: Vec<&str> = self.degradations.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("degradation names must be unique".into()));
        }
        let mut names: Vec<&str> = self.enhancers.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("enhancer names must be unique".into()));
        }
        for d in &self.degradations {
            d.spec.validate().map_err(|e| {
                Error::Config(format!("degradation \"{}\": {e}", d.name))
            })?;
        }
        for e in &self.enhancers {
            e.spec
                .validate()
                .map_err(|err| Error::Config(format!("enhancer \"{}\": {err}", e.name)))?;
        }
        if let SourceConfig::Phantom(p) = &self.source {
            if p.n < 16 {
                return Err(Error::Config(format!("phantom side {} < 16", p.n)));
            }
            if p.cases == 0 {
                return Err(Error::Config("phantom cohort needs >= 1 case".into()));
            }
            if let Some(d) = p.airway_depth {
                if d > 6 {
                    return Err(Error::Config(format!("airway_depth {d} > 6")));
                }
            }
        }
        if let Some(a) = self.geometry.n_angles {
            if a < 2 {
                return Err(Error::Config("n_angles must be >= 2".into()));
            }
        }
        if let Some(f) = &self.geometry.filter {
            f.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization; recorded in reports so
    /// results are traceable to their exact configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    pub fn n_angles(&self) -> usize {
        self.geometry
            .n_angles
            .unwrap_or(crate::geometry::DEFAULT_N_ANGLES)
    }

    pub fn filter(&self) -> FbpFilter {
        self.geometry.filter.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json(extra_top_level: &str) -> String {
        format!(
            r#"{{
  "source": {{"phantom": {{"kind": "lung", "n": 32, "cases": 2}}}},
  "degradations": [{{"name": "sv", "spec": {{"sparse_view": {{"k": 4}}}}}}],
  "enhancers": [{{"name": "id", "spec": "identity"}}],
  "seed": 7,
  "out_dir": "/tmp/out"{extra_top_level}
}}"#
        )
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = PipelineConfig::from_json(&minimal_json("")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.degradations.len(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json(&minimal_json(r#", "bogus": 1"#)).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let json = r#"{
  "source": {"phantom": {"kind": "lung", "n": 32, "cases": 1}},
  "degradations": [
    {"name": "a", "spec": {"sparse_view": {"k": 4}}},
    {"name": "a", "spec": {"sparse_view": {"k": 8}}}
  ],
  "enhancers": [{"name": "id", "spec": "identity"}],
  "seed": 1,
  "out_dir": "/tmp/out"
}"#;
        assert!(matches!(
            PipelineConfig::from_json(json),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = PipelineConfig::from_json(&minimal_json("")).unwrap();
        let b = PipelineConfig::from_json(&minimal_json("")).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.seed = 8;
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn invalid_nested_spec_is_config_error() {
        let json = r#"{
  "source": {"phantom": {"kind": "lung", "n": 32, "cases": 1}},
  "degradations": [{"name": "ld", "spec": {"low_dose": {"alpha": -2.0}}}],
  "enhancers": [{"name": "id", "spec": "identity"}],
  "seed": 1,
  "out_dir": "/tmp/out"
}"#;
        assert!(matches!(
            PipelineConfig::from_json(json),
            Err(Error::Config(_))
        ));
    }
}
