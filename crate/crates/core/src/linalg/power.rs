use alloc::vec;

use super::matrix::dot;
use super::Matrix;
use crate::error::{Error, Result};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Starts from the normalized all-ones vector and stops when the eigen
/// residual `‖Sx − λx‖` falls to `tol·λ`.
pub fn lambda_max_power(s: &Matrix, tol: f64, max_iters: usize) -> Result<f64> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            op: "lambda_max_power",
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    let mut x = vec![1.0 / libm::sqrt(n as f64); n];
    let mut y = vec![0.0; n];
    for _ in 0..max_iters {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(s.row(i), &x);
        }
        let lambda = dot(&x, &y);
        let residual: f64 = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b) * (a - lambda * b))
            .sum();
        if libm::sqrt(residual) <= tol * lambda.abs() {
            return Ok(lambda);
        }
        let norm = libm::sqrt(dot(&y, &y));
        if norm == 0.0 {
            // x lies in the null space; for PSD input that makes λ_max = 0
            // only if S itself is zero.
            if s.max_abs() == 0.0 {
                return Ok(0.0);
            }
            return Err(Error::InvalidArgument(
                "power iteration start vector is in the null space",
            ));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(Error::NoConvergence {
        op: "lambda_max_power",
        iterations: max_iters,
    })
}
