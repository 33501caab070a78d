//! Desk-scale network testbed: a manually differentiated MLP on synthetic
//! blobs, trained with weights and biases routed to different optimizers.

mod data;
mod model;
mod norm;
mod train;

pub use data::{geometric_scales, shuffle, BlobSpec, Dataset, Split, VALIDATION_FRACTION};
pub use model::{Activation, ForwardBackward, Layer, LayerGrads, MlpModel};
pub use norm::{frobnorm, standardize, FrobNormed, PreLayerNorm, Standardized, VARIANCE_FLOOR};
pub use train::{
    epoch_records, estimate_l_star, fill_gaps, first_epochs, lambda_max_probe, loss_at_step,
    mean_rt, milestone_epochs, norm_growth, step_records, train, train_observed, Experiment,
    LrSchedule, StepView, TrainConfig, TrainResult, DIVERGENCE_LOSS, NORM_TRACE_STEPS,
};
