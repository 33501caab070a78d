//! Executable checks of the step-size and convergence theory on Kronecker
//! quadratics: one-step descent thresholds, convergence runs and a named
//! pass/fail report.

mod run;
mod threshold;
mod trace;
pub mod verify;

pub use run::{run, EtaPolicy};
pub use threshold::{
    one_step_threshold, step_direction, theory_bound, ThresholdResult, BISECTION_TOL,
};
pub use trace::{rt_series, RunTrace, Termination, TraceRecord, GAP_FLOOR, LOSS_SLACK};
pub use verify::{verify_all, Check, CheckSpec, VerificationReport, VerifyConfig, CHECKS};
