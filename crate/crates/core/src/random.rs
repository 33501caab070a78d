//! Seeded generators for the synthetic matrices used by instances, tests
//! and verification runs.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{sym_eig, Matrix};

pub type Rng = rand_chacha::ChaCha8Rng;

/// Diagonal regularization (per dimension) added to `RᵀR`.
pub const SPD_REGULARIZATION: f64 = 1e-6;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    lo + (hi - lo) * rng.random::<f64>()
}

/// # Panics
/// If either dimension is zero.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::from_raw(rows, cols, data)
}

/// `n x k` matrix with orthonormal columns (`k ≤ n`), from modified
/// Gram-Schmidt on Gaussian columns.
pub fn orthonormal_columns(rng: &mut Rng, n: usize, k: usize) -> Matrix {
    assert!(k <= n, "need k <= n");
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut c: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= proj * qi;
                }
            }
        }
        let norm = libm::sqrt(c.iter().map(|x| x * x).sum());
        if norm > 1e-8 {
            cols.push(c.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_raw(n, k, (0..n * k).map(|idx| cols[idx % k][idx / k]).collect())
}

pub fn random_orthogonal(rng: &mut Rng, n: usize) -> Matrix {
    orthonormal_columns(rng, n, n)
}

/// `RᵀR + n·1e-6·I` with `R` standard normal.
pub fn random_spd(rng: &mut Rng, n: usize) -> Matrix {
    let r = gaussian_matrix(rng, n, n);
    let gram = r.t_matmul(&r).expect("square product");
    gram.shift_diagonal(n as f64 * SPD_REGULARIZATION)
        .expect("finite")
        .symmetrize()
        .expect("square")
}

/// SPD matrix with eigenvalues spanning exactly `[1, condition]`.
///
/// Draws `RᵀR + n·1e-6·I`, then rescales its spectrum by a power map that
/// preserves ordering and pins the extremes to `1` and `condition`.
pub fn spd_with_condition(rng: &mut Rng, n: usize, condition: f64) -> Matrix {
    assert!(condition >= 1.0, "condition number must be >= 1");
    let base = random_spd(rng, n);
    let e = sym_eig(&base).expect("symmetric input");
    let (lo, hi) = (e.min(), e.max());
    let spread = libm::log(hi / lo);
    let exponent = if spread > 0.0 {
        libm::log(condition) / spread
    } else {
        0.0
    };
    e.reconstruct_with(|l| libm::pow(l / lo, exponent))
        .expect("finite spectrum")
}

/// `U·diag(sigma)·Vᵀ` with Haar-like random `U` (m x m) and `V` (n x m),
/// `m = sigma.len() ≤ n`.
pub fn with_singular_values(rng: &mut Rng, sigma: &[f64], n: usize) -> Matrix {
    let m = sigma.len();
    let u = random_orthogonal(rng, m);
    let v = orthonormal_columns(rng, n, m);
    let us = Matrix::from_fn(m, m, |i, j| u.get(i, j) * sigma[j]).expect("finite");
    us.matmul_t(&v).expect("conformable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = gaussian_matrix(&mut seeded(9), 3, 4);
        let b = gaussian_matrix(&mut seeded(9), 3, 4);
        assert_eq!(a, b);
        assert_ne!(a, gaussian_matrix(&mut seeded(10), 3, 4));
    }

    #[test]
    fn orthonormal_columns_are_orthonormal() {
        let q = orthonormal_columns(&mut seeded(1), 7, 4);
        let qtq = q.t_matmul(&q).unwrap();
        let err = qtq.sub(&Matrix::identity(4)).unwrap().max_abs();
        assert!(err < 1e-13);
    }

    #[test]
    fn condition_number_is_pinned() {
        let s = spd_with_condition(&mut seeded(2), 6, 100.0);
        let e = sym_eig(&s).unwrap();
        assert!((e.min() - 1.0).abs() < 1e-10);
        assert!((e.max() - 100.0).abs() < 1e-8);
    }
}
