//! Mini-batch training under the dual-optimizer policy, with the traces
//! needed for stability sweeps and convergence comparisons.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use super::data::BlobSpec;
use super::data::{shuffle, Split};
use super::model::{sq, MlpModel};
use super::norm::PreLayerNorm;
use crate::error::{Error, Result};
use crate::linalg::{lambda_max_power, sym_eig, Matrix};
use crate::optim::{route, DualOptimizerPolicy, OptimizerConfig, OptimizerKind, ParamGroup};
use crate::random::seeded;
use crate::theory::{rt_series, RunTrace, Termination, TraceRecord};

/// A run is flagged diverged once a loss exceeds this or stops being finite.
pub const DIVERGENCE_LOSS: f64 = 1e6;
/// Steps for which parameter and gradient norms are traced.
pub const NORM_TRACE_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    Constant,
    /// `η_t = η·(1 − t/T)` over the `T` steps of the run.
    #[default]
    LinearDecay,
}

impl LrSchedule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::LinearDecay => "linear-decay",
        }
    }

    fn factor(self, step: usize, total: usize) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::LinearDecay => 1.0 - step as f64 / total as f64,
        }
    }
}

impl core::str::FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear-decay" | "linear_decay" => Ok(Self::LinearDecay),
            _ => Err(Error::InvalidArgument(
                "schedule must be constant or linear-decay",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Step size of the optimizer under study (matrix parameters).
    pub eta_target: f64,
    /// Step size of the SGD reference optimizer (biases).
    pub eta_reference: f64,
    pub target_kind: OptimizerKind,
    /// Momentum shared by both optimizers.
    pub mu: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub schedule: LrSchedule,
    /// Validation-accuracy thresholds, ascending in `(0, 1)`.
    pub milestones: Vec<f64>,
    pub ns_iterations: usize,
    pub exact_polar: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta_target: 0.05,
            eta_reference: 0.01,
            target_kind: OptimizerKind::Muon,
            mu: 0.9,
            epochs: 20,
            batch_size: 64,
            seeds: alloc::vec![0, 1, 2, 3, 4],
            schedule: LrSchedule::LinearDecay,
            milestones: alloc::vec![0.65, 0.75, 0.8],
            ns_iterations: 5,
            exact_polar: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let step_ok = |eta: f64| eta >= 0.0 && eta.is_finite();
        if !step_ok(self.eta_target) || !step_ok(self.eta_reference) {
            return Err(Error::InvalidArgument(
                "learning rates must be finite and non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.ns_iterations == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and ns_iterations must be positive",
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required"));
        }
        if self.milestones.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || self.milestones.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "milestones must be strictly ascending in (0, 1)",
            ));
        }
        Ok(())
    }

    fn policy(&self) -> DualOptimizerPolicy {
        let target = OptimizerConfig {
            kind: self.target_kind,
            eta: self.eta_target,
            mu: self.mu,
            ns_iterations: self.ns_iterations,
            exact_polar: self.exact_polar,
        };
        let mut policy = DualOptimizerPolicy::new(target, self.eta_reference);
        policy.reference.mu = self.mu;
        policy
    }
}

/// What an observer sees before each optimizer step.
#[derive(Debug)]
pub struct StepView<'a> {
    pub step: usize,
    /// 1-indexed epoch the step belongs to.
    pub epoch: usize,
    pub batch_loss: f64,
    /// Normalized inputs of every layer for this batch.
    pub layer_inputs: &'a [Matrix],
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub seed: u64,
    pub trace: RunTrace,
    pub model: MlpModel,
    /// Polar factors computed for weight matrices.
    pub target_polar_calls: u64,
    /// Polar factors computed for non-matrix parameters; always zero under
    /// the dual-optimizer policy.
    pub reference_polar_calls: u64,
}

impl TrainResult {
    pub fn diverged(&self) -> Option<usize> {
        match self.trace.termination {
            Termination::Diverged { step } => Some(step),
            _ => None,
        }
    }
}

/// Trains `model` on `data.train`, shuffling with `seed`.
pub fn train(model: MlpModel, data: &Split, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
    train_observed(model, data, cfg, seed, &mut |_| {})
}

fn is_divergent(loss: f64) -> bool {
    !(loss <= DIVERGENCE_LOSS)
}

/// Loss evaluation where overflow counts as divergence rather than an error.
fn guarded<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonFiniteForward { .. } | Error::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn train_observed(
    mut model: MlpModel,
    data: &Split,
    cfg: &TrainConfig,
    seed: u64,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<TrainResult> {
    cfg.validate()?;
    let train = &data.train;
    if train.features() != model.input_dim() || train.classes != model.output_dim() {
        return Err(Error::InvalidArgument("model and data dimensions disagree"));
    }
    let shapes = model.parameter_shapes();
    let labels: Vec<(&str, (usize, usize))> =
        shapes.iter().map(|(l, s)| (l.as_str(), *s)).collect();
    let mut groups: Vec<ParamGroup> = route(&labels, &cfg.policy())?;
    let base_eta: Vec<f64> = groups.iter().map(|g| g.state.eta).collect();

    let mut rng = seeded(seed ^ 0x005e_ed0f_5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let per_epoch = train.len().div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;

    let mut records = Vec::new();
    let mut termination = Termination::Completed;
    let mut step = 0usize;
    'epochs: for epoch in 1..=cfg.epochs {
        shuffle(&mut rng, &mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train.select(chunk)?;
            let Some(fb) = guarded(model.forward_backward(&x, &y))? else {
                termination = Termination::Diverged { step };
                break 'epochs;
            };
            let grad_fro = libm::sqrt(fb.grads.iter().map(|g| sq(&g.weight)).sum());
            if step <= NORM_TRACE_STEPS {
                let full =
                    guarded(model.loss(&train.inputs, &train.labels))?.unwrap_or(f64::INFINITY);
                records.push(TraceRecord {
                    step,
                    loss: full,
                    eta: Some(groups[0].state.eta),
                    grad_fro: Some(grad_fro),
                    param_fro: Some(model.weight_norm()),
                    ..TraceRecord::default()
                });
                if is_divergent(full) {
                    termination = Termination::Diverged { step };
                    break 'epochs;
                }
            }
            if is_divergent(fb.loss) {
                termination = Termination::Diverged { step };
                break 'epochs;
            }
            observer(&StepView {
                step,
                epoch,
                batch_loss: fb.loss,
                layer_inputs: &fb.layer_inputs,
            });

            let factor = cfg.schedule.factor(step, total);
            for (k, group) in groups.iter_mut().enumerate() {
                group.state.eta = base_eta[k] * factor;
                let layer = &mut model.layers[k / 2];
                let (param, grad) = if k % 2 == 0 {
                    (&mut layer.weight, &fb.grads[k / 2].weight)
                } else {
                    (&mut layer.bias, &fb.grads[k / 2].bias)
                };
                match group.state.step(param, grad) {
                    Ok(next) => *param = next,
                    // A dead layer has no direction to orthogonalize.
                    Err(Error::ZeroMatrix { .. }) => {}
                    Err(Error::NonFinite { .. }) => {
                        termination = Termination::Diverged { step };
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
            step += 1;
        }
        let full = guarded(model.loss(&train.inputs, &train.labels))?.unwrap_or(f64::INFINITY);
        if is_divergent(full) {
            termination = Termination::Diverged { step };
            break;
        }
        let val_acc = model.accuracy(&data.validation.inputs, &data.validation.labels)?;
        records.push(TraceRecord {
            step,
            epoch: Some(epoch),
            loss: full,
            eta: Some(groups[0].state.eta),
            param_fro: Some(model.weight_norm()),
            val_acc: Some(val_acc),
            ..TraceRecord::default()
        });
    }

    let (target_polar_calls, reference_polar_calls) = groups.iter().fold((0, 0), |(t, r), g| {
        if g.is_matrix_param {
            (t + g.state.polar_calls, r)
        } else {
            (t, r + g.state.polar_calls)
        }
    });
    Ok(TrainResult {
        seed,
        trace: RunTrace {
            records,
            termination,
        },
        model,
        target_polar_calls,
        reference_polar_calls,
    })
}

/// Records at epoch boundaries.
pub fn epoch_records(trace: &RunTrace) -> impl Iterator<Item = &TraceRecord> {
    trace.records.iter().filter(|r| r.epoch.is_some())
}

/// Records of the first [`NORM_TRACE_STEPS`] steps.
pub fn step_records(trace: &RunTrace) -> impl Iterator<Item = &TraceRecord> {
    trace.records.iter().filter(|r| r.epoch.is_none())
}

/// Full training loss recorded at `step`, if traced.
pub fn loss_at_step(trace: &RunTrace, step: usize) -> Option<f64> {
    step_records(trace).find(|r| r.step == step).map(|r| r.loss)
}

/// Weight-norm growth `‖W_t‖ − ‖W_0‖` over the traced steps up to `step`.
pub fn norm_growth(trace: &RunTrace, step: usize) -> Option<f64> {
    let mut it = step_records(trace).filter(|r| r.step <= step);
    let first = it.next()?.param_fro?;
    let last = it.last()?.param_fro?;
    Some(last - first)
}

/// The minimum epoch-end loss across non-diverged runs.
pub fn estimate_l_star(traces: &[&RunTrace]) -> Option<f64> {
    traces
        .iter()
        .filter(|t| !matches!(t.termination, Termination::Diverged { .. }))
        .flat_map(|t| epoch_records(t).map(|r| r.loss))
        .fold(None, |acc: Option<f64>, l| {
            Some(acc.map_or(l, |a| a.min(l)))
        })
}

/// Fills `gap` and `r_t` on the epoch records against `l_star`. The ratio
/// for epoch 1 is taken against the initial loss.
pub fn fill_gaps(trace: &mut RunTrace, l_star: f64) -> Result<()> {
    let initial = step_records(trace).next().map(|r| r.loss);
    let mut losses: Vec<f64> = initial.into_iter().collect();
    losses.extend(epoch_records(trace).map(|r| r.loss));
    let ratios = rt_series(&losses, l_star)?;
    let offset = usize::from(initial.is_some());
    let epochs = trace.records.iter_mut().filter(|r| r.epoch.is_some());
    for (k, rec) in epochs.enumerate() {
        rec.gap = Some(rec.loss - l_star);
        rec.r_t = if k + offset >= 1 {
            ratios[k + offset - 1]
        } else {
            None
        };
    }
    Ok(())
}

/// Mean of the defined `r_t` over the given (1-indexed) epochs.
pub fn mean_rt(trace: &RunTrace, epochs: RangeInclusive<usize>) -> Option<f64> {
    let v: Vec<f64> = epoch_records(trace)
        .filter(|r| r.epoch.is_some_and(|e| epochs.contains(&e)))
        .filter_map(|r| r.r_t)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// First 1-indexed position at which `accuracies` reaches each threshold.
pub fn first_epochs(accuracies: &[f64], thresholds: &[f64]) -> Vec<Option<usize>> {
    thresholds
        .iter()
        .map(|&t| accuracies.iter().position(|&a| a >= t).map(|i| i + 1))
        .collect()
}

/// First epoch whose validation accuracy reaches each threshold.
pub fn milestone_epochs(trace: &RunTrace, thresholds: &[f64]) -> Vec<Option<usize>> {
    let mut accs = Vec::new();
    for r in epoch_records(trace) {
        let e = r.epoch.unwrap_or(0);
        // Epochs are contiguous from 1; a gap would shift positions.
        if e != accs.len() + 1 {
            break;
        }
        accs.push(r.val_acc.unwrap_or(0.0));
    }
    first_epochs(&accs, thresholds)
}

/// Batch-averaged `λ_max(XᵀX)` per layer. `batches[k][l]` is the input of
/// layer `l` in probe batch `k`.
pub fn lambda_max_probe(batches: &[Vec<Matrix>]) -> Result<Vec<f64>> {
    let Some(first) = batches.first() else {
        return Ok(Vec::new());
    };
    let mut sums = alloc::vec![0.0; first.len()];
    for batch in batches {
        if batch.len() != sums.len() {
            return Err(Error::InvalidArgument(
                "every probe batch needs the same layer count",
            ));
        }
        for (s, x) in sums.iter_mut().zip(batch) {
            *s += gram_lambda_max(x)?;
        }
    }
    Ok(sums.into_iter().map(|s| s / batches.len() as f64).collect())
}

fn gram_lambda_max(x: &Matrix) -> Result<f64> {
    let gram = x.t_matmul(x)?;
    match lambda_max_power(&gram, 1e-10, 10_000) {
        Ok(v) => Ok(v),
        Err(Error::NoConvergence { .. } | Error::InvalidArgument(_)) => Ok(sym_eig(&gram)?.max()),
        Err(e) => Err(e),
    }
}

/// Data, architecture and normalization of a toy experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub data: BlobSpec,
    pub dims: Vec<usize>,
    pub pre_layer_norm: PreLayerNorm,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            data: BlobSpec::default(),
            dims: alloc::vec![16, 32, 32, 3],
            pre_layer_norm: PreLayerNorm::None,
        }
    }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.dims.first() != Some(&self.data.features)
            || self.dims.last() != Some(&self.data.classes)
        {
            return Err(Error::InvalidArgument(
                "dims must start at the feature count and end at the class count",
            ));
        }
        Ok(())
    }

    /// Model initialization for `seed`; the same seed always gives the same
    /// weights.
    pub fn model(&self, seed: u64) -> Result<MlpModel> {
        MlpModel::new(&mut seeded(seed), &self.dims, self.pre_layer_norm)
    }

    pub fn run(&self, data: &Split, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
        self.validate()?;
        train(self.model(seed)?, data, cfg, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_split() -> Split {
        BlobSpec {
            samples_per_class: 20,
            ..BlobSpec::default()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn milestone_examples() {
        assert_eq!(first_epochs(&[0.5, 0.72, 0.8], &[0.7]), [Some(2)]);
        assert_eq!(first_epochs(&[0.5, 0.72, 0.8], &[0.95]), [None]);
        assert_eq!(first_epochs(&[0.6, 0.85], &[0.5, 0.8]), [Some(1), Some(2)]);
    }

    #[test]
    fn identity_inputs_probe_to_one() {
        let probe = lambda_max_probe(&[alloc::vec![Matrix::identity(4)]]).unwrap();
        assert!((probe[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_target_rate_freezes_weights() {
        let split = small_split();
        let exp = Experiment::default();
        for kind in [OptimizerKind::Sgd, OptimizerKind::Muon] {
            let cfg = TrainConfig {
                eta_target: 0.0,
                target_kind: kind,
                epochs: 2,
                ..TrainConfig::default()
            };
            let init = exp.model(3).unwrap();
            let out = exp.run(&split, &cfg, 3).unwrap();
            for (a, b) in init.layers.iter().zip(&out.model.layers) {
                assert_eq!(a.weight, b.weight);
            }
            assert_ne!(init.layers[0].bias, out.model.layers[0].bias);
        }
    }

    #[test]
    fn single_sgd_step_matches_hand_update() {
        let split = small_split();
        let exp = Experiment::default();
        let cfg = TrainConfig {
            eta_target: 0.1,
            eta_reference: 0.02,
            target_kind: OptimizerKind::Sgd,
            mu: 0.0,
            epochs: 1,
            batch_size: split.train.len(),
            schedule: LrSchedule::Constant,
            ..TrainConfig::default()
        };
        let init = exp.model(4).unwrap();
        let fb = init
            .forward_backward(&split.train.inputs, &split.train.labels)
            .unwrap();
        let out = exp.run(&split, &cfg, 4).unwrap();
        for (l, layer) in out.model.layers.iter().enumerate() {
            let w = init.layers[l]
                .weight
                .sub_scaled(&fb.grads[l].weight, 0.1)
                .unwrap();
            let b = init.layers[l]
                .bias
                .sub_scaled(&fb.grads[l].bias, 0.02)
                .unwrap();
            // Full-batch gradients are order independent up to summation order.
            for (u, v) in layer.weight.as_slice().iter().zip(w.as_slice()) {
                assert!((u - v).abs() < 1e-12);
            }
            for (u, v) in layer.bias.as_slice().iter().zip(b.as_slice()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic_and_biases_skip_muon() {
        let split = small_split();
        let exp = Experiment::default();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = exp.run(&split, &cfg, 7).unwrap();
        let b = exp.run(&split, &cfg, 7).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.reference_polar_calls, 0);
        assert!(a.target_polar_calls > 0);
    }

    #[test]
    fn huge_sgd_rate_is_flagged_diverged() {
        let split = small_split();
        let cfg = TrainConfig {
            eta_target: 1e3,
            target_kind: OptimizerKind::Sgd,
            epochs: 5,
            ..TrainConfig::default()
        };
        let out = Experiment::default().run(&split, &cfg, 0).unwrap();
        assert!(out.diverged().is_some());
    }

    #[test]
    fn gaps_and_ratios_against_min_loss() {
        let split = small_split();
        let cfg = TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        };
        let mut out = Experiment::default().run(&split, &cfg, 1).unwrap();
        let l_star = estimate_l_star(&[&out.trace]).unwrap();
        fill_gaps(&mut out.trace, l_star).unwrap();
        let epochs: Vec<_> = epoch_records(&out.trace).collect();
        assert_eq!(epochs.len(), 4);
        assert!(epochs.iter().all(|r| r.gap.unwrap() >= 0.0));
        assert!(epochs[0].r_t.is_some());
        assert!(mean_rt(&out.trace, 2..=3).is_some());
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                mu: 1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                milestones: alloc::vec![0.8, 0.7],
                ..TrainConfig::default()
            },
            TrainConfig {
                eta_target: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                seeds: alloc::vec![],
                ..TrainConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
