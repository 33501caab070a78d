use crate::curvature::{eta_max_gd, eta_max_muon, KroneckerQuadratic};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::OptimizerKind;
use crate::polar::{exact_polar, spectral_flatness};

/// Relative bracket width at which bisection stops.
pub const BISECTION_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 200;

/// Measured one-step descent threshold next to the sufficient bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    /// Largest `η` with `L(W − η·D) < L(W)`, located by bisection.
    pub eta_star_empirical: f64,
    /// `2/λ_max(H)` for GD, `(2/λ_max(H))·(Σσ/m)` for Muon.
    pub eta_bound_theory: f64,
    pub kind: OptimizerKind,
    pub dims: (usize, usize),
}

/// Update direction of a μ = 0 step: `G` for GD, the exact polar factor for
/// Muon.
pub fn step_direction(kind: OptimizerKind, g: &Matrix) -> Result<Matrix> {
    match kind {
        OptimizerKind::Sgd => Ok(g.clone()),
        OptimizerKind::Muon => exact_polar(g),
    }
}

/// Sufficient step-size bound at `w` for the given optimizer.
pub fn theory_bound(q: &KroneckerQuadratic, g: &Matrix, kind: OptimizerKind) -> Result<f64> {
    match kind {
        OptimizerKind::Sgd => eta_max_gd(q.lambda_max()),
        OptimizerKind::Muon => {
            let flat = spectral_flatness(g)?;
            eta_max_muon(q.lambda_max(), &flat.sigma, flat.sigma.len())
        }
    }
}

/// Locates the largest learning rate for which one step from `w` strictly
/// lowers the loss.
///
/// The bracket starts at the theory bound and doubles until a step no
/// longer descends, then bisects to relative width [`BISECTION_TOL`].
pub fn one_step_threshold(
    q: &KroneckerQuadratic,
    w: &Matrix,
    kind: OptimizerKind,
) -> Result<ThresholdResult> {
    let g = q.gradient(w)?;
    if g.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix {
            op: "one_step_threshold",
        });
    }
    let dir = step_direction(kind, &g)?;
    let base = q.loss(w)?;
    let descends = |eta: f64| -> Result<bool> { Ok(q.loss(&w.sub_scaled(&dir, eta)?)? < base) };

    let bound = theory_bound(q, &g, kind)?;
    let mut lo = 0.0;
    let mut hi = bound;
    let mut doublings = 0;
    while descends(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings == MAX_DOUBLINGS {
            return Err(Error::NoConvergence {
                op: "one_step_threshold bracket",
                iterations: MAX_DOUBLINGS,
            });
        }
    }
    while hi - lo > BISECTION_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if descends(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        eta_star_empirical: 0.5 * (lo + hi),
        eta_bound_theory: bound,
        kind,
        dims: q.dims(),
    })
}
