//! TOML run configuration. Every section is optional and every key has a
//! default; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectral_opt_core::nn::{
    geometric_scales, BlobSpec, Experiment, LrSchedule, PreLayerNorm, TrainConfig,
};
use spectral_opt_core::optim::OptimizerKind;
use spectral_opt_core::theory::VerifyConfig;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Global seed: verification seed, data seed and quadratic instance seed.
    pub seed: Option<u64>,
    /// Output directory.
    pub out: Option<PathBuf>,
    pub verify: VerifySection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub converge: ConvergeSection,
    pub spectrum: SpectrumSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub sizes: Vec<[usize; 2]>,
    pub instances: usize,
    pub points: usize,
    pub steps: usize,
    pub probes: usize,
    pub max_condition: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyConfig::default();
        Self {
            sizes: d.sizes.iter().map(|&(a, b)| [a, b]).collect(),
            instances: d.instances,
            points: d.points,
            steps: d.steps,
            probes: d.probes,
            max_condition: d.max_condition,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub classes: usize,
    pub features: usize,
    pub samples_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    /// Feature scales run geometrically from `feature_scale_min` to
    /// `feature_scale_max` unless `feature_scales` lists them explicitly.
    pub feature_scale_min: f64,
    pub feature_scale_max: f64,
    pub feature_scales: Option<Vec<f64>>,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = BlobSpec::default();
        Self {
            classes: d.classes,
            features: d.features,
            samples_per_class: d.samples_per_class,
            separation: d.separation,
            spread: d.spread,
            feature_scale_min: d.feature_scales[0],
            feature_scale_max: d.feature_scales[d.features - 1],
            feature_scales: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub pre_layer_norm: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            pre_layer_norm: "none".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub eta_reference: f64,
    pub mu: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub schedule: String,
    pub milestones: Vec<f64>,
    pub ns_iterations: usize,
    pub exact_polar: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            eta_reference: d.eta_reference,
            mu: d.mu,
            epochs: d.epochs,
            batch_size: d.batch_size,
            seeds: d.seeds,
            schedule: d.schedule.as_str().into(),
            milestones: d.milestones,
            ns_iterations: d.ns_iterations,
            exact_polar: d.exact_polar,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub etas: Vec<f64>,
    pub optimizers: Vec<String>,
    pub epochs: usize,
    /// Momentum during the sweep; the one-step bounds are stated for μ = 0.
    pub mu: f64,
    pub schedule: String,
    /// Step at which the early loss and norm growth are compared.
    pub probe_step: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            etas: vec![
                0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0,
            ],
            optimizers: vec!["sgd".into(), "muon".into()],
            epochs: 4,
            mu: 0.0,
            schedule: "constant".into(),
            probe_step: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    /// `equal`, `best` or `quadratic`.
    pub mode: String,
    /// Shared step size in `equal` mode.
    pub eta: f64,
    /// Per-optimizer step sizes in `best` mode.
    pub eta_muon: f64,
    pub eta_sgd: f64,
    /// Quadratic mode: instance shape, factor conditioning and run length.
    pub m: usize,
    pub n: usize,
    pub cond_a: f64,
    pub cond_b: f64,
    pub steps: usize,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self {
            mode: "equal".into(),
            eta: 0.05,
            eta_muon: 0.1,
            eta_sgd: 0.01,
            m: 4,
            n: 6,
            cond_a: 10.0,
            cond_b: 100.0,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Gradient matrix file.
    pub matrix: Option<PathBuf>,
    /// Optional layer-input matrix file (`batch x n`).
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeMode {
    Equal,
    Best,
    Quadratic,
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| LabError::config(format!("{key}: unsupported value `{value}`")))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| LabError::config(format!("{}: {}", path.display(), e.message())))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn verify_config(&self) -> Result<VerifyConfig> {
        let v = &self.verify;
        let cfg = VerifyConfig {
            seed: self.seed(),
            sizes: v.sizes.iter().map(|&[a, b]| (a, b)).collect(),
            instances: v.instances,
            points: v.points,
            steps: v.steps,
            probes: v.probes,
            max_condition: v.max_condition,
        };
        cfg.validate()
            .map_err(|e| LabError::config(format!("verify: {e}")))?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let d = &self.data;
        let feature_scales = match &d.feature_scales {
            Some(s) => s.clone(),
            None => {
                if !(d.feature_scale_min > 0.0 && d.feature_scale_max > 0.0) {
                    return Err(LabError::config("data: feature scales must be positive"));
                }
                geometric_scales(d.features.max(1), d.feature_scale_min, d.feature_scale_max)
            }
        };
        let data = BlobSpec {
            classes: d.classes,
            features: d.features,
            samples_per_class: d.samples_per_class,
            separation: d.separation,
            spread: d.spread,
            feature_scales,
            seed: self.seed(),
        };
        let mut dims = vec![d.features];
        dims.extend(&self.model.hidden);
        dims.push(d.classes);
        let exp = Experiment {
            data,
            dims,
            pre_layer_norm: parse_field::<PreLayerNorm>(
                "model.pre_layer_norm",
                &self.model.pre_layer_norm,
            )?,
        };
        exp.validate()
            .map_err(|e| LabError::config(format!("data/model: {e}")))?;
        Ok(exp)
    }

    /// Training configuration for `kind` at step size `eta`.
    pub fn train_config(&self, kind: OptimizerKind, eta: f64) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            eta_target: eta,
            eta_reference: t.eta_reference,
            target_kind: kind,
            mu: t.mu,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seeds: t.seeds.clone(),
            schedule: parse_field("train.schedule", &t.schedule)?,
            milestones: t.milestones.clone(),
            ns_iterations: t.ns_iterations,
            exact_polar: t.exact_polar,
        };
        cfg.validate()
            .map_err(|e| LabError::config(format!("train: {e}")))?;
        Ok(cfg)
    }

    /// Training configuration for one sweep cell: the `train` section with
    /// the sweep's epochs, momentum and schedule.
    pub fn sweep_config(&self, kind: OptimizerKind, eta: f64) -> Result<TrainConfig> {
        let s = &self.sweep;
        let mut cfg = self.train_config(kind, eta)?;
        cfg.epochs = s.epochs;
        cfg.mu = s.mu;
        cfg.schedule = parse_field::<LrSchedule>("sweep.schedule", &s.schedule)?;
        cfg.validate()
            .map_err(|e| LabError::config(format!("sweep: {e}")))?;
        Ok(cfg)
    }

    pub fn sweep_optimizers(&self) -> Result<Vec<OptimizerKind>> {
        let s = &self.sweep;
        if s.etas.is_empty() {
            return Err(LabError::config("sweep.etas must not be empty"));
        }
        if s.etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(LabError::config("sweep.etas must be positive"));
        }
        if s.optimizers.is_empty() {
            return Err(LabError::config("sweep.optimizers must not be empty"));
        }
        s.optimizers
            .iter()
            .map(|o| parse_field("sweep.optimizers", o))
            .collect()
    }

    pub fn converge_mode(&self) -> Result<ConvergeMode> {
        match self.converge.mode.as_str() {
            "equal" => Ok(ConvergeMode::Equal),
            "best" => Ok(ConvergeMode::Best),
            "quadratic" => Ok(ConvergeMode::Quadratic),
            other => Err(LabError::config(format!(
                "converge.mode: unsupported value `{other}` (expected equal, best or quadratic)"
            ))),
        }
    }
}
