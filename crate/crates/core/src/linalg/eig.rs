use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};

/// Default sweep budget for the cyclic Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;
/// Termination threshold: off-diagonal Frobenius mass relative to `‖S‖_F`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Inputs may deviate from symmetry by this much (relative to `‖S‖_F`).
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` pairs with `values[i]`.
    pub vectors: Matrix,
}

impl EigResult {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> f64) -> Result<Matrix> {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v.get(i, k) * mapped[k] * v.get(j, k)).sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        Matrix::checked(n, n, out.into_vec(), "reconstruct")
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a.get(i, j) * a.get(i, j);
            }
        }
    }
    libm::sqrt(sum)
}

/// Symmetric eigen-decomposition by the cyclic Jacobi rotation method.
///
/// The input is symmetrized as `(S + Sᵀ)/2` after checking that it is
/// symmetric to within `1e-9·‖S‖_F`. Iteration stops once the off-diagonal
/// Frobenius mass drops to `1e-12·‖S‖_F`.
pub fn sym_eig(s: &Matrix) -> Result<EigResult> {
    sym_eig_with(s, MAX_SWEEPS)
}

pub fn sym_eig_with(s: &Matrix, max_sweeps: usize) -> Result<EigResult> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            op: "sym_eig",
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let norm = s.frobenius_norm();
    let asymmetry = s.asymmetry();
    if asymmetry > SYMMETRY_TOL * norm {
        return Err(Error::NotSymmetric {
            op: "sym_eig",
            asymmetry,
        });
    }
    let n = s.rows();
    let mut a = s.symmetrize()?;
    let mut v = Matrix::identity(n);
    let target = OFF_DIAGONAL_TOL * norm;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                op: "sym_eig",
                iterations: max_sweeps,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v.get(i, order[k]))?;
    Ok(EigResult { values, vectors })
}

/// Annihilates `a[p][q]` with a Jacobi rotation and accumulates it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
    } else {
        // |theta| overflowed: the rotation angle is ~1/(2·theta).
        1.0 / (2.0 * theta)
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;
    let n = a.rows();

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a.set(k, p, new_kp);
        a.set(p, k, new_kp);
        a.set(k, q, new_kq);
        a.set(q, k, new_kq);
    }
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::{assert_close, random_spd};
    use crate::random::seeded;

    #[test]
    fn diagonal_input() {
        let e = sym_eig(&Matrix::diag(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(e.values, [1.0, 2.0, 3.0]);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((e.vectors.get(i, j).abs() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        // λ² − 4λ + 3 = 0
        let (tr, det) = (4.0_f64, 3.0_f64);
        let disc = libm::sqrt(tr * tr - 4.0 * det);
        let expected = [(tr - disc) / 2.0, (tr + disc) / 2.0];
        let e = sym_eig(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        assert!((e.values[0] - expected[0]).abs() < 1e-14);
        assert!((e.values[1] - expected[1]).abs() < 1e-14);
    }

    #[test]
    fn random_spd_reconstructs() {
        let mut rng = seeded(11);
        for _ in 0..10 {
            let s = random_spd(&mut rng, 8);
            let e = sym_eig(&s).unwrap();
            let norm = s.frobenius_norm();
            assert_close(&e.reconstruct_with(|l| l).unwrap(), &s, 1e-10 * norm);
            let vtv = e.vectors.t_matmul(&e.vectors).unwrap();
            assert_close(&vtv, &Matrix::identity(8), 1e-10);
            for (i, &lam) in e.values.iter().enumerate() {
                let v = Matrix::column(&e.vectors.col(i)).unwrap();
                let sv = s.matmul(&v).unwrap();
                assert_close(&sv, &v.scale(lam).unwrap(), 1e-10 * norm);
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn spectral_shift() {
        let mut rng = seeded(3);
        let s = random_spd(&mut rng, 6);
        let base = sym_eig(&s).unwrap();
        let shifted = sym_eig(&s.shift_diagonal(2.5).unwrap()).unwrap();
        for (a, b) in base.values.iter().zip(&shifted.values) {
            assert!((b - a - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            sym_eig(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let asym = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&asym), Err(Error::NotSymmetric { .. })));
        let hard = Matrix::from_rows(&[[1.0, 1.0, 0.5], [1.0, 2.0, 0.3], [0.5, 0.3, 3.0]]).unwrap();
        assert!(matches!(
            sym_eig_with(&hard, 0),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let e = sym_eig(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, [0.0, 0.0, 0.0]);
    }
}
