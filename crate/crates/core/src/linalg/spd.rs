use super::{sym_eig, EigResult, Matrix};
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a matrix is not treated as SPD.
pub const EIG_FLOOR: f64 = 1e-12;

fn spd_eig(s: &Matrix, op: &'static str) -> Result<EigResult> {
    let e = sym_eig(s)?;
    let floor = EIG_FLOOR * e.max();
    if e.max() <= 0.0 || e.min() < floor {
        return Err(Error::NotPositiveDefinite {
            op,
            lambda_min: e.min(),
            floor,
        });
    }
    Ok(e)
}

/// `S^{1/2}` for SPD `S` (every eigenvalue at least `1e-12·λ_max`).
pub fn sqrt_spd(s: &Matrix) -> Result<Matrix> {
    spd_eig(s, "sqrt_spd")?.reconstruct_with(libm::sqrt)
}

/// `S^{-1/2}` for SPD `S` (every eigenvalue at least `1e-12·λ_max`).
pub fn sqrt_inv_spd(s: &Matrix) -> Result<Matrix> {
    spd_eig(s, "sqrt_inv_spd")?.reconstruct_with(|l| 1.0 / libm::sqrt(l))
}

/// `S^p` for SPD `S` and any real exponent `p`.
pub fn spd_power(s: &Matrix, exponent: f64) -> Result<Matrix> {
    spd_eig(s, "spd_power")?.reconstruct_with(|l| libm::pow(l, exponent))
}

/// `S^{-1}` for SPD `S`, through the same eigen-decomposition.
pub fn inv_spd(s: &Matrix) -> Result<Matrix> {
    spd_eig(s, "inv_spd")?.reconstruct_with(|l| 1.0 / l)
}
