use alloc::vec;
use alloc::vec::Vec;

use super::matrix::dot;
use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SVD_SWEEPS: usize = 100;
/// Rows are treated as orthogonal once `|⟨y_i, y_j⟩| ≤ ORTHO_TOL·‖y_i‖·‖y_j‖`.
const ORTHO_TOL: f64 = 1e-15;

/// Thin SVD `G = U·diag(sigma)·Vᵀ` of an `m x n` matrix with `m ≤ n`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m x m`, orthonormal columns.
    pub u: Matrix,
    /// Descending, non-negative.
    pub sigma: Vec<f64>,
    /// `n x m`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Result<Matrix> {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u.get(i, j) * self.sigma[j]
        })?;
        us.matmul_t(&self.v)
    }

    /// Number of singular values above `rel_tol·σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.sigma[0];
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rows of `G` are rotated pairwise until mutually orthogonal; the row norms
/// are the singular values and the accumulated rotations form `U`.
pub fn svd(g: &Matrix) -> Result<SvdResult> {
    svd_with(g, MAX_SVD_SWEEPS)
}

pub fn svd_with(g: &Matrix, max_sweeps: usize) -> Result<SvdResult> {
    let (m, n) = g.shape();
    if m > n {
        return Err(Error::InvalidArgument(
            "svd expects rows <= cols; transpose the input",
        ));
    }
    let mut y = g.clone();
    let mut u = Matrix::identity(m);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                rotated |= orthogonalize_pair(&mut y, &mut u, i, j);
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                op: "svd",
                iterations: max_sweeps,
            });
        }
    }

    let norms: Vec<f64> = (0..m)
        .map(|i| libm::sqrt(dot(y.row(i), y.row(i))))
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let u_sorted = Matrix::from_fn(m, m, |r, k| u.get(r, order[k]))?;

    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut missing = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if norms[i] > 0.0 {
            v_cols.push(y.row(i).iter().map(|x| x / norms[i]).collect());
        } else {
            v_cols.push(vec![0.0; n]);
            missing.push(k);
        }
    }
    for k in missing {
        v_cols[k] = complete_basis(&v_cols, k, n);
    }
    let v = Matrix::from_fn(n, m, |r, k| v_cols[k][r])?;
    Ok(SvdResult {
        u: u_sorted,
        sigma,
        v,
    })
}

fn orthogonalize_pair(y: &mut Matrix, u: &mut Matrix, i: usize, j: usize) -> bool {
    let alpha = dot(y.row(i), y.row(i));
    let beta = dot(y.row(j), y.row(j));
    let gamma = dot(y.row(i), y.row(j));
    if gamma == 0.0 || gamma.abs() <= ORTHO_TOL * libm::sqrt(alpha) * libm::sqrt(beta) {
        return false;
    }
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = if zeta.is_finite() {
        let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
        sign / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
    } else {
        1.0 / (2.0 * zeta)
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    let s = c * t;

    let n = y.cols();
    for k in 0..n {
        let a = y.get(i, k);
        let b = y.get(j, k);
        y.set(i, k, c * a - s * b);
        y.set(j, k, s * a + c * b);
    }
    let m = u.rows();
    for k in 0..m {
        let a = u.get(k, i);
        let b = u.get(k, j);
        u.set(k, i, c * a - s * b);
        u.set(k, j, s * a + c * b);
    }
    true
}

/// A unit vector orthogonal to every filled column, for directions with
/// zero singular value.
fn complete_basis(cols: &[Vec<f64>], skip: usize, n: usize) -> Vec<f64> {
    let filled = |k: usize| k != skip && cols[k].iter().any(|&x| x != 0.0);
    for e in 0..n {
        let mut cand = vec![0.0; n];
        cand[e] = 1.0;
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for k in (0..cols.len()).filter(|&k| filled(k)) {
                let proj = dot(&cand, &cols[k]);
                for (c, v) in cand.iter_mut().zip(&cols[k]) {
                    *c -= proj * v;
                }
            }
        }
        let norm = libm::sqrt(dot(&cand, &cand));
        if norm > 0.5 {
            return cand.into_iter().map(|x| x / norm).collect();
        }
    }
    unreachable!("fewer than n filled columns always leave a free direction")
}
