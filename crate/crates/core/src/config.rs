//! Run configuration: a flat TOML file whose keys carry their units.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifacts::sha256_hex;
use crate::community::{CpmConfig, MajorityBasis};
use crate::evolution::GedParams;
use crate::experiments::{ExperimentConfig, Method};
use crate::features::FeatureConfig;
use crate::models::TrainConfig;
use crate::pipeline::AnalysisConfig;
use crate::{Error, Result};

fn default_output_dir() -> PathBuf {
    PathBuf::from("commevolve-out")
}

macro_rules! defaults {
    ($($name:ident: $ty:ty = $value:expr;)*) => {
        $(fn $name() -> $ty { $value })*
    };
}

defaults! {
    d_min_pair: u32 = 1;
    d_k_min: usize = 3;
    d_basis: MajorityBasis = MajorityBasis::Smaller;
    d_max_cliques: usize = 1_000_000;
    d_alpha: f64 = 0.5;
    d_beta: f64 = 0.5;
    d_floor: f64 = 0.1;
    d_history: usize = 2;
    d_false: bool = false;
    d_lr: f64 = 0.001;
    d_wd: f64 = 0.01;
    d_max_epochs: usize = 200;
    d_patience: usize = 5;
    d_batch: usize = 32;
    d_hidden: usize = 16;
    d_heads: usize = 4;
    d_splits: usize = 30;
    d_instances: usize = 5;
    d_stride: usize = 5;
    d_methods: Vec<Method> = vec![Method::Gnan, Method::Mlp3, Method::Logreg];
    d_seed: u64 = 0;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Interaction log; relative paths resolve against the config file.
    pub dataset_path: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub window_length_seconds: i64,
    #[serde(default = "d_min_pair")]
    pub min_pair_interactions: u32,
    #[serde(default = "d_k_min")]
    pub k_min: usize,
    #[serde(default = "d_basis")]
    pub majority_basis: MajorityBasis,
    #[serde(default = "d_max_cliques")]
    pub max_cliques_per_snapshot: usize,
    #[serde(default = "d_alpha")]
    pub ged_alpha: f64,
    #[serde(default = "d_beta")]
    pub ged_beta: f64,
    #[serde(default = "d_floor")]
    pub ged_dissolve_floor: f64,
    #[serde(default = "d_history")]
    pub history_snapshots: usize,
    #[serde(default = "d_false")]
    pub standardize_features: bool,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "d_heads")]
    pub attention_heads: usize,
    #[serde(default = "d_splits")]
    pub n_splits: usize,
    #[serde(default = "d_instances")]
    pub instances_per_split: usize,
    #[serde(default = "d_stride")]
    pub temporal_stride: usize,
    #[serde(default = "d_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for everything but the dataset and window length.
    pub fn new(dataset_path: impl Into<PathBuf>, window_length_seconds: i64) -> Self {
        Self {
            dataset_path: dataset_path.into(),
            output_dir: default_output_dir(),
            window_length_seconds,
            min_pair_interactions: d_min_pair(),
            k_min: d_k_min(),
            majority_basis: d_basis(),
            max_cliques_per_snapshot: d_max_cliques(),
            ged_alpha: d_alpha(),
            ged_beta: d_beta(),
            ged_dissolve_floor: d_floor(),
            history_snapshots: d_history(),
            standardize_features: false,
            learning_rate: d_lr(),
            weight_decay: d_wd(),
            max_epochs: d_max_epochs(),
            patience: d_patience(),
            batch_size: d_batch(),
            hidden_dim: d_hidden(),
            attention_heads: d_heads(),
            n_splits: d_splits(),
            instances_per_split: d_instances(),
            temporal_stride: d_stride(),
            methods: d_methods(),
            seed: d_seed(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset_path.is_relative() {
            cfg.dataset_path = base.join(&cfg.dataset_path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dataset_path.is_file() {
            return Err(Error::Config(format!(
                "dataset_path {} does not exist",
                self.dataset_path.display()
            )));
        }
        self.validate_values()
    }

    /// Checks everything except file existence.
    pub fn validate_values(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.window_length_seconds <= 0 {
            return fail(format!(
                "window_length_seconds must be positive, got {}",
                self.window_length_seconds
            ));
        }
        if self.min_pair_interactions == 0 {
            return fail("min_pair_interactions must be at least 1".into());
        }
        if self.k_min < 3 {
            return fail(format!("k_min must be at least 3, got {}", self.k_min));
        }
        self.ged().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.experiment().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cpm(&self) -> CpmConfig {
        CpmConfig {
            k_min: self.k_min,
            basis: self.majority_basis,
            max_cliques: self.max_cliques_per_snapshot,
        }
    }

    pub fn ged(&self) -> GedParams {
        GedParams {
            alpha: self.ged_alpha,
            beta: self.ged_beta,
            dissolve_floor: self.ged_dissolve_floor,
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            history: self.history_snapshots,
            standardize: self.standardize_features,
        }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            window_length: self.window_length_seconds,
            min_pair_interactions: self.min_pair_interactions,
            cpm: self.cpm(),
            ged: self.ged(),
            features: self.features(),
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            batch_size: self.batch_size,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            features: self.features(),
            train: self.train(),
            hidden_dim: self.hidden_dim,
            heads: self.attention_heads,
            n_splits: self.n_splits,
            instances_per_split: self.instances_per_split,
            temporal_stride: self.temporal_stride,
            methods: self.methods.clone(),
            seed: self.seed,
        }
    }

    /// Hash of every setting except the paths.
    pub fn settings_hash(&self) -> String {
        let mut copy = self.clone();
        copy.dataset_path = PathBuf::new();
        copy.output_dir = PathBuf::new();
        sha256_hex(serde_json::to_string(&copy).expect("config serialises").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_toml("dataset_path = \"d.csv\"\nwindow_length_seconds = 60\n").unwrap();
        assert_eq!(cfg, RunConfig::new("d.csv", 60));
        assert_eq!(cfg.train(), TrainConfig::default());
        assert_eq!(cfg.ged(), GedParams::default());
        assert_eq!(cfg.experiment(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("dataset_path = \"d\"\nwindow_length_seconds = 1\nwindow = 3\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig::new("d.csv", 3600);
        cfg.methods = vec![Method::Gnan, Method::Dummy];
        cfg.majority_basis = MajorityBasis::Union;
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::new("d.csv", 3600);
        cfg.k_min = 2;
        assert!(cfg.validate_values().is_err());
        let mut cfg = RunConfig::new("d.csv", 3600);
        cfg.attention_heads = 3;
        assert!(cfg.validate_values().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.csv"), "a,b,1\n").unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dataset_path = \"d.csv\"\nwindow_length_seconds = 10\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset_path, dir.path().join("d.csv"));
        assert_eq!(cfg.output_dir, dir.path().join("commevolve-out"));
    }
}
