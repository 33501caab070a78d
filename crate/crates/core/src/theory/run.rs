use alloc::vec::Vec;

use super::trace::{RunTrace, Termination, TraceRecord, GAP_FLOOR};
use crate::curvature::KroneckerQuadratic;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{OptimizerConfig, OptimizerKind, OptimizerState};

/// Step-size rule for a quadratic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    Constant(f64),
    /// `η = 1/β` with `β = λ_max(H)`.
    GdTheory,
    /// `η_t = 1/β̃_t`, with `β̃_t` recomputed from the current gradient.
    MuonTheory,
}

/// Runs `steps` deterministic full-gradient steps (μ = 0, exact polar for
/// Muon) on a Kronecker quadratic, recording the optimality gap, `r_t` and
/// for Muon the preconditioned extremes `α̃_t, β̃_t` at every step.
///
/// Record `t` describes `W_t`; its `eta`, `alpha_tilde` and `beta_tilde`
/// belong to the step that produced it.
pub fn run(
    q: &KroneckerQuadratic,
    w0: &Matrix,
    kind: OptimizerKind,
    policy: EtaPolicy,
    steps: usize,
) -> Result<RunTrace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("a run needs at least one step"));
    }
    if policy == EtaPolicy::MuonTheory && kind != OptimizerKind::Muon {
        return Err(Error::InvalidArgument(
            "the muon_theory step size only applies to Muon",
        ));
    }
    let initial_eta = match policy {
        EtaPolicy::Constant(eta) => eta,
        _ => 0.0,
    };
    let cfg = OptimizerConfig {
        kind,
        ..OptimizerConfig::sgd(initial_eta)
    }
    .with_exact_polar(true);
    let mut state = OptimizerState::new(&cfg)?;

    let mut w = w0.clone();
    let mut loss = q.loss(&w)?;
    let mut grad = q.gradient(&w)?;
    let mut records = Vec::with_capacity(steps + 1);
    records.push(TraceRecord {
        step: 0,
        loss,
        gap: Some(loss),
        grad_fro: Some(grad.frobenius_norm()),
        param_fro: Some(w.frobenius_norm()),
        ..TraceRecord::default()
    });

    let mut termination = Termination::Completed;
    for t in 1..=steps {
        if grad.max_abs() == 0.0 {
            termination = Termination::Converged { step: t - 1 };
            break;
        }
        let extremes = match kind {
            OptimizerKind::Muon => match q.muon_extremes(&grad) {
                Ok(e) => Some(e),
                Err(Error::NotPositiveDefinite { .. }) if policy == EtaPolicy::MuonTheory => {
                    termination = Termination::SingularPreconditioner { step: t - 1 };
                    break;
                }
                Err(Error::NotPositiveDefinite { .. }) => None,
                Err(e) => return Err(e),
            },
            OptimizerKind::Sgd => None,
        };
        state.eta = match policy {
            EtaPolicy::Constant(eta) => eta,
            EtaPolicy::GdTheory => 1.0 / q.lambda_max(),
            EtaPolicy::MuonTheory => 1.0 / extremes.expect("checked above").1,
        };
        w = state.step(&w, &grad)?;
        let prev = loss;
        loss = q.loss(&w)?;
        grad = q.gradient(&w)?;
        records.push(TraceRecord {
            step: t,
            loss,
            gap: Some(loss),
            r_t: (prev > GAP_FLOOR).then(|| loss / prev),
            eta: Some(state.eta),
            alpha_tilde: extremes.map(|e| e.0),
            beta_tilde: extremes.map(|e| e.1),
            grad_fro: Some(grad.frobenius_norm()),
            param_fro: Some(w.frobenius_norm()),
            ..TraceRecord::default()
        });
    }
    Ok(RunTrace {
        records,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, seeded};

    #[test]
    fn diagonal_gd_matches_closed_form_iteration() {
        // A = I, B = diag(4, 1): modes along rows decay by (1 − λ/β) per step.
        let q = KroneckerQuadratic::new(
            Matrix::identity(2),
            Matrix::diag(&[4.0, 1.0]).unwrap(),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let w0 = Matrix::from_rows(&[[0.5, -1.0], [2.0, 1.5]]).unwrap();
        let trace = run(&q, &w0, OptimizerKind::Sgd, EtaPolicy::GdTheory, 30).unwrap();
        // The λ = 4 row is zeroed by the first step; the λ = 1 row contracts
        // by 3/4 in amplitude, so the gap ratio is (3/4)² from then on.
        let alpha_over_beta = 0.25;
        for rec in &trace.records[1..] {
            let r = rec.r_t.unwrap();
            assert!(r <= 1.0 - alpha_over_beta + 1e-12);
        }
        for rec in &trace.records[2..] {
            assert!((rec.r_t.unwrap() - 0.5625).abs() < 1e-12);
        }
        // Oracle for step 1: the λ=1 row scaled by 3/4, the λ=4 row zeroed.
        let row = [2.0 * 0.75, 1.5 * 0.75];
        let expected = 0.5 * (row[0] * row[0] + row[1] * row[1]);
        assert!((trace.records[1].loss - expected).abs() < 1e-14);
    }

    #[test]
    fn start_at_optimum_stops_immediately() {
        let mut rng = seeded(1);
        let q = KroneckerQuadratic::random(&mut rng, 2, 3, 4.0, 4.0).unwrap();
        for kind in [OptimizerKind::Sgd, OptimizerKind::Muon] {
            let trace = run(&q, q.w_star(), kind, EtaPolicy::Constant(0.1), 10).unwrap();
            assert_eq!(trace.records.len(), 1);
            assert_eq!(trace.records[0].gap, Some(0.0));
            assert_eq!(trace.termination, Termination::Converged { step: 0 });
        }
    }

    #[test]
    fn muon_theory_run_decreases_gap_every_step() {
        let mut rng = seeded(17);
        let q = KroneckerQuadratic::random(&mut rng, 3, 5, 10.0, 30.0).unwrap();
        let w0 = gaussian_matrix(&mut rng, 3, 5);
        let trace = run(&q, &w0, OptimizerKind::Muon, EtaPolicy::MuonTheory, 60).unwrap();
        for pair in trace.records.windows(2) {
            if pair[0].loss > GAP_FLOOR {
                assert!(pair[1].loss < pair[0].loss);
            }
        }
        for rec in &trace.records[1..] {
            let (a, b) = (rec.alpha_tilde.unwrap(), rec.beta_tilde.unwrap());
            if let Some(r) = rec.r_t {
                assert!(r <= 1.0 - a / b + 1e-9);
            }
            assert!((rec.eta.unwrap() - 1.0 / b).abs() < 1e-15);
        }
        assert!(trace.contraction_product() < 1.0);
    }

    #[test]
    fn invalid_policies() {
        let mut rng = seeded(2);
        let q = KroneckerQuadratic::random(&mut rng, 2, 2, 2.0, 2.0).unwrap();
        let w = Matrix::zeros(2, 2);
        assert!(run(&q, &w, OptimizerKind::Sgd, EtaPolicy::MuonTheory, 3).is_err());
        assert!(run(&q, &w, OptimizerKind::Sgd, EtaPolicy::GdTheory, 0).is_err());
    }
}
