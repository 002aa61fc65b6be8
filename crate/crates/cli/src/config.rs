//! Experiment configuration: TOML sections with flat keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use chanpred::channel::DopplerSpec;
use chanpred::grid::QMode;

pub const PREDICT_METHODS: &[&str] = &[
    "lmmse_perfect",
    "lmmse_sp",
    "lmmse_jakes",
    "gridded",
    "structured_circ",
    "structured_toep",
    "nn_circ",
    "nn_toep",
];

pub const ESTIMATE_METHODS: &[&str] = &["identity", "nolearn", "cnn", "genie_omp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Predict,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Circulant,
    Toeplitz,
}

impl Mode {
    pub fn qmode(self) -> QMode {
        match self {
            Mode::Circulant => QMode::Circulant,
            Mode::Toeplitz => QMode::Toeplitz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Observation length for prediction.
    #[serde(default = "d_m")]
    pub m: usize,
    /// Prediction step.
    #[serde(default = "d_l")]
    pub l: usize,
    /// Transform family for structured/NN predictors and the CNN estimator.
    #[serde(default = "d_mode")]
    pub mode: Mode,
    /// Prior grid size; 0 means "use K of the selected mode".
    #[serde(default)]
    pub n_grid: usize,
    /// Plane-wave paths per synthetic realization.
    #[serde(default = "d_paths")]
    pub paths: usize,
}

fn d_m() -> usize {
    4
}
fn d_l() -> usize {
    1
}
fn d_mode() -> Mode {
    Mode::Toeplitz
}
fn d_paths() -> usize {
    3
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            m: d_m(),
            l: d_l(),
            mode: d_mode(),
            n_grid: 0,
            paths: d_paths(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSection {
    #[serde(default = "d_velocity")]
    pub velocity_kmh: f64,
    #[serde(default = "d_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "d_symbol")]
    pub symbol_duration_s: f64,
}

fn d_velocity() -> f64 {
    4.0
}
fn d_carrier() -> f64 {
    2.4e9
}
fn d_symbol() -> f64 {
    // 1 cm grid spacing traversed at 4 km/h.
    0.009
}

impl Default for DopplerSection {
    fn default() -> Self {
        Self {
            velocity_kmh: d_velocity(),
            carrier_hz: d_carrier(),
            symbol_duration_s: d_symbol(),
        }
    }
}

impl DopplerSection {
    pub fn spec(&self) -> Result<DopplerSpec> {
        DopplerSpec::from_kmh(self.velocity_kmh, self.carrier_hz, self.symbol_duration_s)
            .map_err(|e| anyhow::anyhow!("doppler section: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSection {
    pub start_db: f64,
    pub stop_db: f64,
    #[serde(default = "d_step")]
    pub step_db: f64,
}

fn d_step() -> f64 {
    2.5
}

impl SnrSection {
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.step_db <= 0.0 {
            return out;
        }
        let mut i = 0u32;
        loop {
            let v = self.start_db + self.step_db * i as f64;
            if v > self.stop_db + 1e-9 {
                break;
            }
            out.push(v);
            i += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "d_train_batches")]
    pub train_batches: usize,
    #[serde(default = "d_batch50")]
    pub train_batch_size: usize,
    #[serde(default = "d_test_batches")]
    pub test_batches: usize,
    #[serde(default = "d_batch50")]
    pub test_batch_size: usize,
}

fn d_train_batches() -> usize {
    500
}
fn d_test_batches() -> usize {
    103
}
fn d_batch50() -> usize {
    50
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_batches: d_train_batches(),
            train_batch_size: d_batch50(),
            test_batches: d_test_batches(),
            test_batch_size: d_batch50(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// SGD mini-batch size; 0 means "use the split's train batch size".
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_eps")]
    pub epsilon: f64,
    /// Optional plateau stop: relative epoch-loss change below this over
    /// `plateau_window` epochs ends training early. 0 disables.
    #[serde(default)]
    pub plateau_tol: f64,
    #[serde(default = "d_plateau_window")]
    pub plateau_window: usize,
}

fn d_epochs() -> usize {
    20
}
fn d_lr() -> f64 {
    1e-3
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_eps() -> f64 {
    1e-8
}
fn d_plateau_window() -> usize {
    3
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: d_epochs(),
            batch_size: 0,
            learning_rate: d_lr(),
            beta1: d_beta1(),
            beta2: d_beta2(),
            epsilon: d_eps(),
            plateau_tol: 0.0,
            plateau_window: d_plateau_window(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// ULA antenna count (the estimation-task M).
    #[serde(default = "d_antennas")]
    pub antennas: usize,
    /// OMP dictionary oversampling factor.
    #[serde(default = "d_oversample")]
    pub oversample: usize,
    /// Genie OMP sparsity sweep limit; 0 means antennas / 2.
    #[serde(default)]
    pub s_max: usize,
}

fn d_antennas() -> usize {
    16
}
fn d_oversample() -> usize {
    4
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            antennas: d_antennas(),
            oversample: d_oversample(),
            s_max: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// "synthetic" or a path to a channel file.
    #[serde(default = "d_source")]
    pub source: String,
    #[serde(default = "d_out")]
    pub out: PathBuf,
    /// Trained-model cache directory; empty disables caching.
    #[serde(default = "d_cache")]
    pub cache_dir: String,
}

fn d_source() -> String {
    "synthetic".into()
}
fn d_out() -> PathBuf {
    "results.csv".into()
}
fn d_cache() -> String {
    ".chanpred-cache".into()
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            source: d_source(),
            out: d_out(),
            cache_dir: d_cache(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub doppler: DopplerSection,
    pub snr: SnrSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub io: IoSection,
}

fn d_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn default_for(task: Task) -> Self {
        let (snr, methods) = match task {
            Task::Predict => (
                SnrSection {
                    start_db: -15.0,
                    stop_db: 15.0,
                    step_db: d_step(),
                },
                PREDICT_METHODS.iter().map(|s| s.to_string()).collect(),
            ),
            Task::Estimate => (
                SnrSection {
                    start_db: -10.0,
                    stop_db: 10.0,
                    step_db: d_step(),
                },
                ESTIMATE_METHODS.iter().map(|s| s.to_string()).collect(),
            ),
        };
        let mut cfg = Self {
            task,
            seed: d_seed(),
            methods,
            model: ModelSection::default(),
            doppler: DopplerSection::default(),
            snr,
            split: SplitSection::default(),
            train: TrainSection::default(),
            estimate: EstimateSection::default(),
            io: IoSection::default(),
        };
        if task == Task::Estimate {
            cfg.model.mode = Mode::Circulant;
            cfg.split = SplitSection {
                train_batches: 6000,
                train_batch_size: 20,
                test_batches: 100,
                test_batch_size: 100,
            };
        }
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).context("invalid config")?;
        if cfg.methods.is_empty() {
            cfg.methods = match cfg.task {
                Task::Predict => PREDICT_METHODS.iter().map(|s| s.to_string()).collect(),
                Task::Estimate => ESTIMATE_METHODS.iter().map(|s| s.to_string()).collect(),
            };
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The estimation-task observation dimension.
    pub fn est_m(&self) -> usize {
        self.estimate.antennas
    }

    pub fn n_grid_for(&self, mode: Mode) -> usize {
        if self.model.n_grid > 0 {
            self.model.n_grid
        } else {
            mode.qmode().k_for(self.model.m)
        }
    }

    pub fn s_max(&self) -> usize {
        if self.estimate.s_max > 0 {
            self.estimate.s_max
        } else {
            (self.estimate.antennas / 2).max(1)
        }
    }

    pub fn sgd_batch_size(&self) -> usize {
        if self.train.batch_size > 0 {
            self.train.batch_size
        } else {
            self.split.train_batch_size
        }
    }

    pub fn source_path(&self) -> Option<&Path> {
        if self.io.source == "synthetic" {
            None
        } else {
            Some(Path::new(&self.io.source))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr.points().is_empty() {
            bail!("SNR sweep is empty (start {} stop {} step {})",
                self.snr.start_db, self.snr.stop_db, self.snr.step_db);
        }
        if self.methods.is_empty() {
            bail!("method list is empty");
        }
        let known: &[&str] = match self.task {
            Task::Predict => PREDICT_METHODS,
            Task::Estimate => ESTIMATE_METHODS,
        };
        for m in &self.methods {
            if !known.contains(&m.as_str()) {
                bail!("unknown method '{m}' for task; known: {}", known.join(", "));
            }
        }
        match self.task {
            Task::Predict => {
                if self.model.m == 0 {
                    bail!("model.m must be >= 1");
                }
                if self.model.l == 0 {
                    bail!("model.l must be >= 1");
                }
                if self.model.l > self.model.m {
                    bail!("model.l must not exceed model.m");
                }
                if self.model.paths == 0 && self.source_path().is_none() {
                    bail!("model.paths must be >= 1 for synthetic data");
                }
            }
            Task::Estimate => {
                if self.estimate.antennas == 0 {
                    bail!("estimate.antennas must be >= 1");
                }
                if self.s_max() > self.estimate.antennas {
                    bail!("estimate.s_max must not exceed the antenna count");
                }
            }
        }
        if self.split.train_batches * self.split.train_batch_size == 0 {
            bail!("split train sizes must be nonzero");
        }
        if self.split.test_batches * self.split.test_batch_size == 0 {
            bail!("split test sizes must be nonzero");
        }
        self.doppler.spec()?;
        if let Some(path) = self.source_path() {
            if !path.exists() {
                bail!("input file does not exist: {}", path.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default_for(Task::Predict).validate().unwrap();
        ExperimentConfig::default_for(Task::Estimate).validate().unwrap();
    }

    #[test]
    fn default_toml_roundtrip() {
        for task in [Task::Predict, Task::Estimate] {
            let cfg = ExperimentConfig::default_for(task);
            let text = cfg.to_toml();
            let back: ExperimentConfig = toml::from_str(&text).unwrap();
            assert_eq!(back.seed, cfg.seed);
            assert_eq!(back.methods, cfg.methods);
            assert_eq!(back.snr.points(), cfg.snr.points());
        }
    }

    #[test]
    fn snr_points_inclusive() {
        let snr = SnrSection {
            start_db: -10.0,
            stop_db: 10.0,
            step_db: 2.5,
        };
        let pts = snr.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], -10.0);
        assert_eq!(*pts.last().unwrap(), 10.0);
    }

    #[test]
    fn rejects_unknown_method() {
        let mut cfg = ExperimentConfig::default_for(Task::Predict);
        cfg.methods = vec!["wizardry".into()];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_empty_methods() {
        let mut cfg = ExperimentConfig::default_for(Task::Predict);
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_missing_file() {
        let mut cfg = ExperimentConfig::default_for(Task::Predict);
        cfg.io.source = "/nonexistent/file.chn".into();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/file.chn"));
    }

    #[test]
    fn grid_size_defaults_to_k() {
        let cfg = ExperimentConfig::default_for(Task::Predict);
        assert_eq!(cfg.n_grid_for(Mode::Circulant), 4);
        assert_eq!(cfg.n_grid_for(Mode::Toeplitz), 8);
    }
}
