//! Kronecker-factored quadratic objectives and the spectral quantities that
//! govern step-size limits and linear convergence rates of GD and Muon.
//!
//! Parameters are `m x n` matrices `W`, vectorized by column stacking. The
//! curvature of a layer with input `X` and output gradient `G` is modelled
//! as `H = XᵀX ⊗ G·Gᵀ`, so `vec(B·Δ·A) = (A ⊗ B)·vec(Δ)` lets every
//! quantity be evaluated in matrix form without materializing `H`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{spd_power, sqrt_inv_spd, sqrt_spd, sym_eig, EigResult, Matrix, EIG_FLOOR};
use crate::polar::spectral_flatness;
use crate::random::{gaussian_matrix, spd_with_condition, Rng};

/// `L(W) = ½·vec(W − W*)ᵀ·(A ⊗ B)·vec(W − W*)`, with `L* = 0`.
#[derive(Debug, Clone)]
pub struct KroneckerQuadratic {
    a: Matrix,
    b: Matrix,
    w_star: Matrix,
    eig_a: EigResult,
    eig_b: EigResult,
}

fn spd_eig(s: &Matrix, what: &'static str) -> Result<EigResult> {
    let e = sym_eig(s)?;
    if !(e.min() > 0.0) {
        return Err(Error::NotPositiveDefinite {
            op: what,
            lambda_min: e.min(),
            floor: 0.0,
        });
    }
    Ok(e)
}

impl KroneckerQuadratic {
    /// `a` is the `n x n` input factor, `b` the `m x m` output factor and
    /// `w_star` the `m x n` minimizer.
    pub fn new(a: Matrix, b: Matrix, w_star: Matrix) -> Result<Self> {
        if !a.is_square() || !b.is_square() || w_star.shape() != (b.rows(), a.rows()) {
            return Err(Error::DimensionMismatch {
                op: "KroneckerQuadratic::new",
                left_rows: b.rows(),
                left_cols: a.rows(),
                right_rows: w_star.rows(),
                right_cols: w_star.cols(),
            });
        }
        let eig_a = spd_eig(&a, "KroneckerQuadratic factor A")?;
        let eig_b = spd_eig(&b, "KroneckerQuadratic factor B")?;
        Ok(Self {
            a: a.symmetrize()?,
            b: b.symmetrize()?,
            w_star,
            eig_a,
            eig_b,
        })
    }

    /// Seeded instance with `cond(A) = cond_a`, `cond(B) = cond_b` and a
    /// standard normal minimizer.
    pub fn random(rng: &mut Rng, m: usize, n: usize, cond_a: f64, cond_b: f64) -> Result<Self> {
        let a = spd_with_condition(rng, n, cond_a);
        let b = spd_with_condition(rng, m, cond_b);
        let w_star = gaussian_matrix(rng, m, n);
        Self::new(a, b, w_star)
    }

    /// `(m, n)`: the parameter shape.
    pub fn dims(&self) -> (usize, usize) {
        self.w_star.shape()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn w_star(&self) -> &Matrix {
        &self.w_star
    }

    fn check_shape(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.dims() {
            return Err(self.w_star.mismatch("quadratic", w));
        }
        Ok(())
    }

    /// `B·Δ·A`, the Hessian applied to a direction `Δ` in matrix form.
    pub fn hessian_apply(&self, delta: &Matrix) -> Result<Matrix> {
        self.check_shape(delta)?;
        self.b.matmul(delta)?.matmul(&self.a)
    }

    /// `vec(Δ)ᵀ·H·vec(Δ) = tr(Δᵀ·B·Δ·A)`.
    pub fn quadratic_form(&self, delta: &Matrix) -> Result<f64> {
        delta.inner(&self.hessian_apply(delta)?)
    }

    pub fn loss(&self, w: &Matrix) -> Result<f64> {
        let delta = w
            .sub(&self.w_star)
            .map_err(|_| self.w_star.mismatch("loss", w))?;
        Ok(0.5 * self.quadratic_form(&delta)?.max(0.0))
    }

    /// `∇L(W) = B·(W − W*)·A`.
    pub fn gradient(&self, w: &Matrix) -> Result<Matrix> {
        let delta = w
            .sub(&self.w_star)
            .map_err(|_| self.w_star.mismatch("gradient", w))?;
        self.hessian_apply(&delta)
    }

    /// Materialized `A ⊗ B` (subject to the Kronecker cap).
    pub fn hessian(&self) -> Result<Matrix> {
        self.a.kron(&self.b)
    }

    /// `α = λ_min(H)`, from the factor spectra.
    pub fn lambda_min(&self) -> f64 {
        self.eig_a.min() * self.eig_b.min()
    }

    /// `β = λ_max(H)`, from the factor spectra.
    pub fn lambda_max(&self) -> f64 {
        self.eig_a.max() * self.eig_b.max()
    }

    /// `(α̃, β̃)` for the Muon preconditioner `P = I_n ⊗ (G·Gᵀ)^{-1/2}` built
    /// from the gradient `g`.
    ///
    /// `P^{1/2}·H·P^{1/2} = A ⊗ (C·B·C)` with `C = (G·Gᵀ)^{-1/4}`, so the
    /// extremes factor into those of `A` and of the small `m x m` matrix.
    pub fn muon_extremes(&self, g: &Matrix) -> Result<(f64, f64)> {
        self.check_shape(g)?;
        let c = spd_power(&g.matmul_t(g)?, -0.25)?;
        let inner = sym_eig(&c.matmul(&self.b)?.matmul(&c)?.symmetrize()?)?;
        let alpha = (self.eig_a.min() * inner.min()).max(0.0);
        let beta = self.eig_a.max() * inner.max();
        Ok((alpha, beta))
    }
}

fn positive(value: f64, what: &'static str) -> Result<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidArgument(what));
    }
    Ok(value)
}

/// Largest GD step that guarantees descent on an `L`-smooth quadratic:
/// `2 / λ_max(H)`.
pub fn eta_max_gd(lam_max_h: f64) -> Result<f64> {
    Ok(2.0 / positive(lam_max_h, "lambda_max(H) must be positive")?)
}

/// Largest Muon step with guaranteed descent: `(2 / λ_max(H))·(Σσ / m)`.
pub fn eta_max_muon(lam_max_h: f64, sigma: &[f64], m: usize) -> Result<f64> {
    let lam = positive(lam_max_h, "lambda_max(H) must be positive")?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1"));
    }
    if sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(
            "singular values must be finite and non-negative",
        ));
    }
    Ok(2.0 / lam * sigma.iter().sum::<f64>() / m as f64)
}

/// K-FAC factors of a layer: `A = XᵀX`, `B = G·Gᵀ`.
#[derive(Debug, Clone)]
pub struct KfacFactors {
    pub a: Matrix,
    pub b: Matrix,
    /// `λ_max(XᵀX)·σ_max(G)²`.
    pub lam_max_h: f64,
}

/// `x` is the `batch x n` layer input and `g` the `m x n` weight gradient.
pub fn kfac_factors(x: &Matrix, g: &Matrix) -> Result<KfacFactors> {
    if x.cols() != g.cols() {
        return Err(x.mismatch("kfac_factors", g));
    }
    let a = x.t_matmul(x)?;
    let b = g.matmul_t(g)?;
    let sigma_max = spectral_flatness(g)?.sigma_max;
    let lam_max_h = sym_eig(&a)?.max() * sigma_max * sigma_max;
    Ok(KfacFactors { a, b, lam_max_h })
}

fn checked_spd(s: &Matrix, op: &'static str) -> Result<EigResult> {
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

/// `(α/β, α̃/β̃)` for `H = A ⊗ GGᵀ` under GD and under Muon's preconditioner.
///
/// * GD: `λ_min(A)·λ_min(GGᵀ) / (λ_max(A)·λ_max(GGᵀ))`
/// * Muon: `λ_min(A)·λ_min(GGᵀ)^{1/2} / (λ_max(A)·λ_max(GGᵀ)^{1/2})`
pub fn condition_ratios(a: &Matrix, ggt: &Matrix) -> Result<(f64, f64)> {
    let ea = checked_spd(a, "condition_ratios (A)")?;
    let eb = checked_spd(ggt, "condition_ratios (GGᵀ)")?;
    let ka = ea.min() / ea.max();
    let kb = eb.min() / eb.max();
    Ok((ka * kb, ka * libm::sqrt(kb)))
}

/// `(α̃, β̃) = (λ_min(P·H), λ_max(P·H))`, computed on the similar symmetric
/// matrix `P^{1/2}·H·P^{1/2}`.
pub fn preconditioned_extremes(p: &Matrix, h: &Matrix) -> Result<(f64, f64)> {
    if p.shape() != h.shape() || !p.is_square() {
        return Err(p.mismatch("preconditioned_extremes", h));
    }
    let root = sqrt_spd(p)?;
    let q = root.matmul(h)?.matmul(&root)?.symmetrize()?;
    let e = sym_eig(&q)?;
    Ok((e.min().max(0.0), e.max().max(0.0)))
}

/// Materialized Muon preconditioner `I_n ⊗ (G·Gᵀ)^{-1/2}` for an `m x n`
/// gradient.
pub fn muon_preconditioner(g: &Matrix) -> Result<Matrix> {
    Matrix::identity(g.cols()).kron(&sqrt_inv_spd(&g.matmul_t(g)?)?)
}

/// Spectral summary of a gradient (and optionally its layer input).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub sigma: Vec<f64>,
    pub lam_max_a: f64,
    pub lam_min_a: f64,
    pub lam_max_b: f64,
    pub lam_min_b: f64,
    pub eta_max_gd: f64,
    pub eta_max_muon: f64,
    /// `α/β`; absent when `A` or `GGᵀ` is singular.
    pub ratio_gd: Option<f64>,
    /// `α̃/β̃`; absent when `A` or `GGᵀ` is singular.
    pub ratio_muon: Option<f64>,
    /// `Σσ / (m·σ_max)`.
    pub flatness: f64,
}

impl SpectralReport {
    /// `η_max^Muon / η_max^GD = Σσ/m`.
    pub fn eta_ratio(&self) -> f64 {
        self.eta_max_muon / self.eta_max_gd
    }
}

/// Builds the report for gradient `g` (`m x n`). When `x` is absent the
/// input factor is taken as `I_n`.
pub fn spectral_report(x: Option<&Matrix>, g: &Matrix) -> Result<SpectralReport> {
    let flat = spectral_flatness(g)?;
    let a = match x {
        Some(x) => {
            if x.cols() != g.cols() {
                return Err(x.mismatch("spectral_report", g));
            }
            x.t_matmul(x)?
        }
        None => Matrix::identity(g.cols()),
    };
    let ggt = g.matmul_t(g)?;
    let ea = sym_eig(&a)?;
    let eb = sym_eig(&ggt)?;
    let lam_max_h = ea.max() * flat.sigma_max * flat.sigma_max;
    // m ≤ n orientation: a tall gradient is treated through its transpose.
    let m = flat.sigma.len();
    let (ratio_gd, ratio_muon) = match condition_ratios(&a, &ggt) {
        Ok((gd, muon)) => (Some(gd), Some(muon)),
        Err(Error::NotPositiveDefinite { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(SpectralReport {
        eta_max_gd: eta_max_gd(lam_max_h)?,
        eta_max_muon: eta_max_muon(lam_max_h, &flat.sigma, m)?,
        sigma: flat.sigma,
        lam_max_a: ea.max(),
        lam_min_a: ea.min(),
        lam_max_b: eb.max(),
        lam_min_b: eb.min(),
        ratio_gd,
        ratio_muon,
        flatness: flat.factor,
    })
}
