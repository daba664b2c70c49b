//! Run configuration file.
//!
//! A single TOML document describes everything needed to reproduce a run:
//!
//! ```toml
//! master_seed = 0
//! seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//!
//! [circuit]            # empty: built-in reuploading circuit
//! # path = "circuit.toml"
//!
//! [dataset]
//! n = 300
//! test_n = 1000
//! rule = { kind = "circle", center = [0.0, 0.0], radius = 0.7 }
//!
//! [train]
//! rounds = 10
//! n_all = ["exact", 200, 50, 10, 5, 2, 1]
//! scale_interval = [-6.283185307179586, 6.283185307179586]
//! grid_points = 2048
//! tol = 1e-10
//!
//! [classify]
//! threshold = 0.4
//! calibrate = false
//!
//! [output]
//! dir = "out"
//! plots = true
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::circuit::{default_reuploading_spec, Circuit, CircuitSpec};
use crate::classifier::{LabelRule, SweepConfig};
use crate::shots::OracleKind;
use crate::smo::TrainingConfig;
use crate::trigfit::MinimizeOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

/// Either a path to a circuit file, an inline spec, or neither (built-in
/// reuploading circuit).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CircuitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default = "default_train_n")]
    pub n: usize,
    #[serde(default = "default_test_n")]
    pub test_n: usize,
    #[serde(default)]
    pub rule: LabelRule,
}

fn default_train_n() -> usize {
    300
}

fn default_test_n() -> usize {
    1000
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n: default_train_n(),
            test_n: default_test_n(),
            rule: LabelRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_n_all")]
    pub n_all: Vec<OracleKind>,
    #[serde(default = "default_scale_interval")]
    pub scale_interval: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_cutoff: Option<f64>,
}

fn default_rounds() -> usize {
    10
}

fn default_n_all() -> Vec<OracleKind> {
    let mut v = vec![OracleKind::Exact];
    v.extend([200, 50, 10, 5, 2, 1].map(|shots| OracleKind::Binomial { shots }));
    v
}

fn default_scale_interval() -> [f64; 2] {
    [-2.0 * PI, 2.0 * PI]
}

fn default_grid_points() -> usize {
    MinimizeOptions::default().grid_points
}

fn default_tol() -> f64 {
    MinimizeOptions::default().tol
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            rounds: default_rounds(),
            n_all: default_n_all(),
            scale_interval: default_scale_interval(),
            grid_points: default_grid_points(),
            tol: default_tol(),
            order: None,
            improvement_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub calibrate: bool,
}

/// Selected by training-set calibration on held-out seeds; squared-loss fits
/// of this circuit keep `p` well below 1 inside the class-1 region.
fn default_threshold() -> f64 {
    0.4
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            threshold: default_threshold(),
            calibrate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            plots: true,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            seeds: default_seeds(),
            circuit: CircuitConfig::default(),
            dataset: DatasetConfig::default(),
            train: TrainSection::default(),
            classify: ClassifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Reads a config file. A relative circuit path is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(p) = &config.circuit.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                config.circuit.path = Some(base.join(p));
            }
        }
        Ok(config)
    }
}

/// A checked configuration with its circuit built.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: RunConfig,
    pub circuit: Circuit,
    /// SHA-256 over the config and the resolved circuit, hex encoded.
    pub hash: String,
}

impl ResolvedConfig {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let spec = match (&config.circuit.path, &config.circuit.spec) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "circuit: give either `path` or `spec`, not both".into(),
                ))
            }
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read circuit {}: {e}", path.display()))
                })?;
                CircuitSpec::from_toml_str(&text).map_err(|e| CliError::Config(e.to_string()))?
            }
            (None, Some(spec)) => spec.clone(),
            (None, None) => default_reuploading_spec(),
        };
        let circuit = Circuit::new(spec).map_err(|e| CliError::Config(format!("circuit: {e}")))?;

        let train = &config.train;
        let bad = |msg: String| Err(CliError::Config(msg));
        if config.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if train.n_all.is_empty() {
            return bad("train.n_all must not be empty".into());
        }
        let [lo, hi] = train.scale_interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return bad(format!("train.scale_interval [{lo}, {hi}] is empty"));
        }
        if train.grid_points < 2 {
            return bad("train.grid_points must be at least 2".into());
        }
        if !(train.tol > 0.0) {
            return bad("train.tol must be positive".into());
        }
        if let Some(order) = &train.order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..circuit.param_count()).collect::<Vec<_>>() {
                return bad(format!(
                    "train.order must be a permutation of 0..{}",
                    circuit.param_count()
                ));
            }
        }
        let t = config.classify.threshold;
        if !(t > 0.0 && t < 1.0) {
            return bad(format!("classify.threshold {t} must lie in (0, 1)"));
        }
        if let LabelRule::Circle { radius, .. } = config.dataset.rule {
            if !(radius > 0.0) {
                return bad("dataset.rule.radius must be positive".into());
            }
        }

        // Output location and plot toggles do not affect results.
        let mut hashed = config.clone();
        hashed.output = OutputConfig::default();
        let mut h = Sha256::new();
        h.update(hashed.to_toml_string().as_bytes());
        h.update(circuit.spec().to_toml_string().as_bytes());
        let hash = h
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Ok(ResolvedConfig {
            config,
            circuit,
            hash,
        })
    }

    pub fn training_config(&self, oracle: OracleKind, seed: u64) -> TrainingConfig {
        let t = &self.config.train;
        TrainingConfig {
            rounds: t.rounds,
            oracle,
            order: t.order.clone(),
            scale_interval: (t.scale_interval[0], t.scale_interval[1]),
            minimize: MinimizeOptions {
                grid_points: t.grid_points,
                tol: t.tol,
            },
            seed,
            improvement_cutoff: t.improvement_cutoff,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let c = &self.config;
        SweepConfig {
            circuit: self.circuit.clone(),
            rule: c.dataset.rule.clone(),
            train_size: c.dataset.n,
            test_size: c.dataset.test_n,
            seeds: c.seeds.clone(),
            n_all: c.train.n_all.clone(),
            training: self.training_config(OracleKind::Exact, 0),
            threshold: c.classify.threshold,
            calibrate_threshold: c.classify.calibrate,
            master_seed: c.master_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn custom_round_trip() {
        let text = r#"
master_seed = 17
seeds = [3, 4]

[circuit]
path = "somewhere/circuit.toml"

[dataset]
n = 40
rule = { kind = "half_plane", normal = [1.0, -0.5], offset = 0.1 }

[train]
rounds = 2
n_all = ["exact", 3]
order = [5, 4, 3, 2, 1, 0]
improvement_cutoff = 1e-6

[classify]
threshold = 0.4
calibrate = true

[output]
dir = "elsewhere"
plots = false
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.train.n_all, vec![OracleKind::Exact, OracleKind::Binomial { shots: 3 }]);
        assert_eq!(c.dataset.test_n, 1000);
        let again = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[train]\nn_all = [0]").is_err());
        let mut c = RunConfig::default();
        c.train.n_all.clear();
        assert!(matches!(ResolvedConfig::new(c), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.classify.threshold = 1.0;
        assert!(matches!(ResolvedConfig::new(c), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.circuit.path = Some(PathBuf::from("/definitely/not/here.toml"));
        assert!(matches!(ResolvedConfig::new(c), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ResolvedConfig::new(RunConfig::default()).unwrap();
        let b = ResolvedConfig::new(RunConfig::default()).unwrap();
        assert_eq!(a.hash, b.hash);
        let mut c = RunConfig::default();
        c.master_seed = 1;
        assert_ne!(ResolvedConfig::new(c).unwrap().hash, a.hash);
        let mut c = RunConfig::default();
        c.output.dir = PathBuf::from("elsewhere");
        c.output.plots = false;
        assert_eq!(ResolvedConfig::new(c).unwrap().hash, a.hash);
    }
}
