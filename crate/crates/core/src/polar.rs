//! Orthogonal polar factor of a gradient matrix.
//!
//! For `G = U·Σ·Vᵀ` the polar factor is `U·Vᵀ = (G·Gᵀ)^{-1/2}·G`: the nearest
//! (partial) isometry to `G`, with every singular value replaced by one and
//! the singular directions kept. [`exact_polar`] computes it from an SVD;
//! [`newton_schulz`] approximates it with an odd matrix polynomial iteration.
//!
//! Inputs with more rows than columns are transposed, processed and
//! transposed back, so the working shape always has `m ≤ n`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};

/// Singular directions with `σ ≤ RANK_TOL·σ_max` are treated as null.
pub const RANK_TOL: f64 = 1e-10;

/// Classical quintic Newton–Schulz map `(15s − 10s³ + 3s⁵)/8`, third-order
/// convergent to 1 on `(0, 1]`.
pub const QUINTIC: (f64, f64, f64) = (15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0);
/// Classical cubic map `(3s − s³)/2`.
pub const CUBIC: (f64, f64, f64) = (1.5, -0.5, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSchulzConfig {
    pub iterations: usize,
    /// `(a, b, c)` in `X ← a·X + b·(X·Xᵀ)·X + c·(X·Xᵀ)²·X`.
    pub coefficients: (f64, f64, f64),
    /// Added to `‖G‖_F` before the initial division.
    pub prescale_epsilon: f64,
}

impl Default for NewtonSchulzConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            coefficients: QUINTIC,
            prescale_epsilon: 1e-7,
        }
    }
}

impl NewtonSchulzConfig {
    pub fn with_iterations(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }

    pub fn cubic(iterations: usize) -> Self {
        Self {
            iterations,
            coefficients: CUBIC,
            ..Self::default()
        }
    }

    /// Rejects configurations whose scalar map does not fix `s = 1`.
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "newton-schulz needs at least one iteration",
            ));
        }
        let (a, b, c) = self.coefficients;
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidArgument(
                "newton-schulz coefficients must be finite",
            ));
        }
        if (self.scalar_map(1.0) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(
                "newton-schulz polynomial must satisfy p(1) = 1",
            ));
        }
        if !(self.prescale_epsilon >= 0.0 && self.prescale_epsilon.is_finite()) {
            return Err(Error::InvalidArgument(
                "prescale epsilon must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// The scalar polynomial `p(s) = a·s + b·s³ + c·s⁵` applied to each
    /// singular value per iteration.
    pub fn scalar_map(&self, s: f64) -> f64 {
        let (a, b, c) = self.coefficients;
        let s2 = s * s;
        s * (a + s2 * (b + c * s2))
    }
}

/// Newton–Schulz output with its measured distance from an isometry.
#[derive(Debug, Clone)]
pub struct NewtonSchulz {
    pub matrix: Matrix,
    /// `max |σ_i − 1|` over the input's non-null singular directions.
    pub delta: f64,
}

fn ensure_nonzero(g: &Matrix, op: &'static str) -> Result<()> {
    if g.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix { op });
    }
    Ok(())
}

/// Runs `f` on the wide orientation of `g` and restores the original shape.
fn oriented(g: &Matrix, f: impl FnOnce(&Matrix) -> Result<Matrix>) -> Result<Matrix> {
    if g.rows() > g.cols() {
        Ok(f(&g.transpose())?.transpose())
    } else {
        f(g)
    }
}

/// Exact polar factor `U·Vᵀ`, dropping directions with `σ ≤ 1e-10·σ_max`.
pub fn exact_polar(g: &Matrix) -> Result<Matrix> {
    ensure_nonzero(g, "exact_polar")?;
    oriented(g, |g| {
        let s = svd(g)?;
        let r = s.rank(RANK_TOL);
        Matrix::from_fn(g.rows(), g.cols(), |i, j| {
            (0..r).map(|k| s.u.get(i, k) * s.v.get(j, k)).sum()
        })
    })
}

/// Newton–Schulz approximation of the polar factor, without the `δ`
/// diagnostic. This is the path optimizer steps take.
pub fn orthogonalize(g: &Matrix, cfg: &NewtonSchulzConfig) -> Result<Matrix> {
    cfg.validate()?;
    ensure_nonzero(g, "newton_schulz")?;
    oriented(g, |g| iterate(g, cfg))
}

fn iterate(g: &Matrix, cfg: &NewtonSchulzConfig) -> Result<Matrix> {
    let (a, b, c) = cfg.coefficients;
    let run = || -> Result<Matrix> {
        let mut x = g.scale(1.0 / (g.frobenius_norm() + cfg.prescale_epsilon))?;
        for _ in 0..cfg.iterations {
            let gram = x.matmul_t(&x)?;
            let poly = if c == 0.0 {
                gram.scale(b)?
            } else {
                gram.scale(b)?.add(&gram.matmul(&gram)?.scale(c)?)?
            };
            x = x.scale(a)?.add(&poly.matmul(&x)?)?;
        }
        Ok(x)
    };
    run().map_err(|e| match e {
        Error::NonFinite { .. } => Error::NonFinite {
            op: "newton_schulz",
        },
        other => other,
    })
}

/// Newton–Schulz approximation together with the bracket half-width `δ`:
/// the retained singular values of the output lie in `[1 − δ, 1 + δ]`.
pub fn newton_schulz(g: &Matrix, cfg: &NewtonSchulzConfig) -> Result<NewtonSchulz> {
    let matrix = orthogonalize(g, cfg)?;
    let wide = |m: &Matrix| {
        if m.rows() > m.cols() {
            m.transpose()
        } else {
            m.clone()
        }
    };
    let rank = svd(&wide(g))?.rank(RANK_TOL);
    let out_sigma = svd(&wide(&matrix))?.sigma;
    let delta = out_sigma[..rank]
        .iter()
        .fold(0.0_f64, |acc, s| acc.max((s - 1.0).abs()));
    Ok(NewtonSchulz { matrix, delta })
}

/// Frobenius inner product `tr(Gᵀ·O)`.
pub fn trace_inner(g: &Matrix, o: &Matrix) -> Result<f64> {
    g.inner(o)
}

/// Singular-value summary behind the learning-rate comparison between GD
/// and Muon.
#[derive(Debug, Clone, PartialEq)]
pub struct Flatness {
    /// Descending singular values, `min(rows, cols)` of them.
    pub sigma: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `Σσ / m`.
    pub mean_sigma: f64,
    /// `Σσ / (m·σ_max)`, in `(0, 1]`; equals 1 for a perfectly flat spectrum.
    pub factor: f64,
}

pub fn spectral_flatness(g: &Matrix) -> Result<Flatness> {
    ensure_nonzero(g, "spectral_flatness")?;
    let wide = if g.rows() > g.cols() {
        g.transpose()
    } else {
        g.clone()
    };
    let s = svd(&wide)?;
    let cutoff = RANK_TOL * s.sigma[0];
    let sigma: Vec<f64> = s
        .sigma
        .iter()
        .map(|&v| if v > cutoff { v } else { 0.0 })
        .collect();
    let m = sigma.len() as f64;
    let sigma_max = sigma[0];
    let sigma_min = sigma[sigma.len() - 1];
    let mean_sigma = sigma.iter().sum::<f64>() / m;
    Ok(Flatness {
        factor: mean_sigma / sigma_max,
        sigma,
        sigma_max,
        sigma_min,
        mean_sigma,
    })
}
