use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Gaps at or below this are treated as converged; no ratio is reported
/// against them.
pub const GAP_FLOOR: f64 = 1e-14;
/// Losses may undershoot the reference optimum by this much.
pub const LOSS_SLACK: f64 = 1e-12;

/// One row of a run trace. Optional fields are absent where they do not
/// apply (no ratio at step 0, no preconditioner for GD, no validation
/// accuracy between epochs).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub epoch: Option<usize>,
    pub loss: f64,
    pub gap: Option<f64>,
    pub r_t: Option<f64>,
    pub eta: Option<f64>,
    pub alpha_tilde: Option<f64>,
    pub beta_tilde: Option<f64>,
    pub grad_fro: Option<f64>,
    pub param_fro: Option<f64>,
    pub val_acc: Option<f64>,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// All requested steps were taken.
    Completed,
    /// The gradient vanished at `step`.
    Converged { step: usize },
    /// `G·Gᵀ` became singular at `step`, so the Muon preconditioner is
    /// undefined.
    SingularPreconditioner { step: usize },
    /// Loss exceeded the divergence threshold or became non-finite.
    Diverged { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

impl RunTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    /// `Π_t (1 − α̃_t/β̃_t)` over steps that recorded both extremes.
    pub fn contraction_product(&self) -> f64 {
        self.records
            .iter()
            .filter_map(|r| Some(1.0 - r.alpha_tilde? / r.beta_tilde?))
            .product()
    }
}

/// Convergence ratios `r_t = (L_t − L*)/(L_{t−1} − L*)` for `t ≥ 1`.
///
/// Entries whose denominator is at or below [`GAP_FLOOR`] are `None`.
pub fn rt_series(losses: &[f64], l_star: f64) -> Result<Vec<Option<f64>>> {
    if losses.iter().any(|&l| l < l_star - LOSS_SLACK) {
        return Err(Error::InvalidArgument(
            "reference optimum exceeds a recorded loss",
        ));
    }
    Ok(losses
        .windows(2)
        .map(|w| {
            let prev = w[0] - l_star;
            (prev > GAP_FLOOR).then(|| (w[1] - l_star).max(0.0) / prev)
        })
        .collect())
}
