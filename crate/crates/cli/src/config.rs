//! Pipeline configuration: every tunable of every stage in one JSON file.

use std::path::Path;

use roadtwin_core::mesh::MeshFormat;
use roadtwin_core::{ClusterConfig, ClusterParams, ExtractConfig, PreprocessParams, Semantic};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub format: MeshFormat,
    /// Extrude plane-like faces downwards by this many metres.
    pub thickness: Option<f64>,
}

/// Which points the distance evaluation measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    /// The instance points left after preprocessing and clustering.
    #[default]
    Preprocessed,
    /// Every point of the input cloud, each measured against the nearest
    /// instance of its class.
    Raw,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub ground_truth: GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Segment name written into every record and file name.
    pub segment: String,
    /// Worker threads; `None` uses one per core.
    pub threads: Option<usize>,
    pub preprocess: PreprocessParams,
    pub cluster: ClusterConfig,
    pub extract: ExtractConfig,
    pub mesh: MeshConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segment: "segment".into(),
            threads: None,
            preprocess: PreprocessParams::default(),
            cluster: ClusterConfig::default(),
            extract: ExtractConfig::default(),
            mesh: MeshConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses JSON; unknown keys and bad values name their path, e.g.
    /// `extract.alpha_fine`.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            // Keys of the per-class table are enum values, which the path
            // tracker cannot name.
            if path.starts_with("cluster.semantic.?") {
                if let Some(k) = failing_semantic_key(text) {
                    path = path.replacen('?', &k, 1);
                }
            }
            CliError::Config(format!("config key `{path}`: {}", e.into_inner()))
        })?;
        // A partial cluster table keeps the defaults for unlisted classes.
        for s in Semantic::ALL {
            cfg.cluster.semantic.entry(s).or_insert_with(|| ClusterParams::default_for(s));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str, e: &dyn std::fmt::Display| CliError::Config(format!("{what}: {e}"));
        if self.segment.is_empty() || self.segment.contains(['/', '\\']) {
            return Err(CliError::Config(format!(
                "segment: `{}` must be a non-empty name without path separators",
                self.segment
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads: must be >= 1".into()));
        }
        self.preprocess.validate().map_err(|e| bad("preprocess", &e))?;
        self.cluster.validate().map_err(|e| bad("cluster", &e))?;
        self.extract.validate().map_err(|e| bad("extract", &e))?;
        if let Some(t) = self.mesh.thickness {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("mesh.thickness: must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// First entry of `cluster.semantic` that does not parse on its own.
fn failing_semantic_key(text: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let table = v.get("cluster")?.get("semantic")?.as_object()?;
    table
        .iter()
        .find(|(k, child)| {
            k.parse::<Semantic>().is_err() || ClusterParams::deserialize((*child).clone()).is_err()
        })
        .map(|(k, _)| k.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = PipelineConfig::from_json(r#"{"extract": {"alpha_fine": 5, "alpha_fien": 1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("extract") && msg.contains("alpha_fien"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        let err = PipelineConfig::from_json(r#"{"extract": {"dh": "tall"}}"#).unwrap_err();
        assert!(err.to_string().contains("extract.dh"), "{err}");
    }

    #[test]
    fn partial_cluster_table_keeps_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"cluster": {"semantic": {"RoadLane": {"eps": 0.2, "min_pts": 4}}}}"#).unwrap();
        assert_eq!(cfg.cluster.semantic[&Semantic::RoadLane], ClusterParams::new(0.2, 4));
        assert_eq!(cfg.cluster.semantic[&Semantic::Guardrail], ClusterParams::default_for(Semantic::Guardrail));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = PipelineConfig::default();
        cfg.extract.dh = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("dh"));
        let mut cfg = PipelineConfig::default();
        cfg.threads = Some(0);
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = PipelineConfig::from_json(r#"{"mesh": {"format": "ply", "thickness": -1}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
