//! Dense double-precision linear algebra: products, Kronecker structure,
//! Jacobi eigen/singular value solvers and SPD matrix functions.

mod eig;
mod matrix;
mod power;
mod spd;
mod svd;

pub use eig::{sym_eig, sym_eig_with, EigResult, MAX_SWEEPS};
pub use matrix::{Matrix, KRON_CAP};
pub use power::lambda_max_power;
pub use spd::{inv_spd, spd_power, sqrt_inv_spd, sqrt_spd, EIG_FLOOR};
pub use svd::{svd, svd_with, SvdResult};
