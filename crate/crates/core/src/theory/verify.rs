//! Named numerical checks of the step-size and convergence theory.
//!
//! Each check is self-contained: it derives its own generator from the
//! configured seed and its name, measures a single residual and compares it
//! with a fixed tolerance. Counting checks (how many probes violated a
//! strict property) use tolerance 0.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::run::{run, EtaPolicy};
use super::threshold::{one_step_threshold, step_direction, theory_bound};
use super::trace::{Termination, GAP_FLOOR};
use crate::curvature::{
    condition_ratios, eta_max_gd, eta_max_muon, muon_preconditioner, preconditioned_extremes,
    KroneckerQuadratic,
};
use crate::error::{Error, Result};
use crate::linalg::{inv_spd, sqrt_spd, svd, sym_eig, Matrix};
use crate::optim::OptimizerKind;
use crate::polar::exact_polar;
use crate::random::{
    gaussian_matrix, seeded, spd_with_condition, uniform, with_singular_values, Rng,
};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Matrix shapes; each is used as `(min, max)` so that `m ≤ n`.
    pub sizes: Vec<(usize, usize)>,
    /// Quadratic instances per instance-based check, cycled over `sizes`.
    pub instances: usize,
    /// Starting points tested per instance in the threshold checks.
    pub points: usize,
    /// Steps per convergence run.
    pub steps: usize,
    /// Random probes per identity / inequality check.
    pub probes: usize,
    /// Largest condition number of the generated SPD factors.
    pub max_condition: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sizes: alloc::vec![(2, 2), (4, 6), (8, 8)],
            instances: 50,
            points: 4,
            steps: 200,
            probes: 100,
            max_condition: 100.0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::InvalidArgument(
                "sizes must be a non-empty list of positive dimensions",
            ));
        }
        if self.sizes.iter().any(|&(a, b)| a * b > 64) {
            return Err(Error::InvalidArgument("materialized checks need m·n ≤ 64"));
        }
        if self.instances == 0 || self.points == 0 || self.steps == 0 || self.probes == 0 {
            return Err(Error::InvalidArgument(
                "instances, points, steps and probes must be positive",
            ));
        }
        if !(self.max_condition >= 1.0 && self.max_condition.is_finite()) {
            return Err(Error::InvalidArgument("max_condition must be at least 1"));
        }
        Ok(())
    }

    fn shape(&self, i: usize) -> (usize, usize) {
        let (a, b) = self.sizes[i % self.sizes.len()];
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the check could not be evaluated.
    pub error: Option<String>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} residual={:.6e} tol={:.1e} {}",
            self.name,
            self.residual,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    /// Collects checks, sorted by name.
    pub fn new(mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(b.name));
        Self { checks }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A named check: measures a residual that must not exceed `tolerance`.
#[derive(Clone, Copy)]
pub struct CheckSpec {
    pub name: &'static str,
    pub tolerance: f64,
    pub measure: fn(&VerifyConfig) -> Result<f64>,
}

impl fmt::Debug for CheckSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CheckSpec")
            .field("name", &self.name)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

impl CheckSpec {
    pub fn run(&self, cfg: &VerifyConfig) -> Check {
        match (self.measure)(cfg) {
            Ok(residual) => Check {
                name: self.name,
                residual,
                tolerance: self.tolerance,
                passed: residual <= self.tolerance,
                error: None,
            },
            Err(e) => Check {
                name: self.name,
                residual: f64::NAN,
                tolerance: self.tolerance,
                passed: false,
                error: Some(alloc::format!("{e}")),
            },
        }
    }
}

macro_rules! checks {
    ($($name:literal => $tol:expr, $f:ident;)*) => {
        /// Every check, in name order.
        pub const CHECKS: &[CheckSpec] = &[
            $(CheckSpec { name: $name, tolerance: $tol, measure: $f },)*
        ];
    };
}

checks! {
    "algebra.kron_spectrum" => 1e-8, kron_spectrum;
    "algebra.polar_trace" => 1e-9, polar_trace;
    "algebra.rayleigh_bound" => 1e-12, rayleigh_bound;
    "algebra.taylor_exact" => 1e-10, taylor_exact;
    "algebra.vec_identity" => 1e-11, vec_identity;
    "conditioning.isotropic_edge" => 1e-12, isotropic_edge;
    "conditioning.ratio_gd" => 1e-9, conditioning_ratio_gd;
    "conditioning.ratio_muon" => 1e-9, conditioning_ratio_muon;
    "conditioning.relation" => 1e-11, conditioning_relation;
    "conditioning.strict_inequality" => 0.0, conditioning_strict;
    "gd_rate.contraction" => 1e-10, gd_contraction;
    "gd_step.sharpness" => 0.0, gd_sharpness;
    "gd_step.sufficiency" => 0.0, gd_sufficiency;
    "gd_step.threshold_above_bound" => 1e-6, gd_threshold_above_bound;
    "gd_step.threshold_closed_form" => 1e-6, gd_threshold_closed_form;
    "muon_rate.contraction" => 1e-9, muon_contraction;
    "muon_rate.monotone_gap" => 0.0, muon_monotone_gap;
    "muon_step.bound_ratio" => 1e-12, muon_bound_ratio;
    "muon_step.sufficiency" => 0.0, muon_sufficiency;
    "muon_step.threshold_above_bound" => 1e-6, muon_threshold_above_bound;
    "pl.quadratic_constant" => 1e-9, pl_constant;
    "relative.extremes_structured" => 1e-9, extremes_structured;
    "relative.pl" => 1e-9, relative_pl;
    "relative.smoothness" => 1e-9, relative_smoothness;
}

pub fn find_check(name: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|c| c.name == name)
}

/// Runs every check. Invalid configurations produce a report in which every
/// check fails with the validation error.
pub fn verify_all(cfg: &VerifyConfig) -> VerificationReport {
    VerificationReport::new(CHECKS.iter().map(|c| c.run(cfg)).collect())
}

fn rng_for(cfg: &VerifyConfig, name: &str) -> Result<Rng> {
    cfg.validate()?;
    // FNV-1a over the check name keeps streams independent across checks.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(seeded(cfg.seed ^ h))
}

fn log_uniform(rng: &mut Rng, hi: f64) -> f64 {
    libm::exp(uniform(rng, 0.0, libm::log(hi)))
}

fn quadratics(cfg: &VerifyConfig, rng: &mut Rng) -> Result<Vec<KroneckerQuadratic>> {
    (0..cfg.instances)
        .map(|i| {
            let (m, n) = cfg.shape(i);
            let (ca, cb) = (
                log_uniform(rng, cfg.max_condition),
                log_uniform(rng, cfg.max_condition),
            );
            KroneckerQuadratic::random(rng, m, n, ca, cb)
        })
        .collect()
}

/// Point whose gradient is exactly `g`: `W = W* + B⁻¹·G·A⁻¹`.
fn point_with_gradient(q: &KroneckerQuadratic, g: &Matrix) -> Result<Matrix> {
    let delta = inv_spd(q.b())?.matmul(g)?.matmul(&inv_spd(q.a())?)?;
    q.w_star().add(&delta)
}

/// Gradient with singular values drawn log-uniformly from `[1, cond]`.
fn conditioned_gradient(rng: &mut Rng, m: usize, n: usize, cond: f64) -> Result<Matrix> {
    let sigma: Vec<f64> = (0..m).map(|_| log_uniform(rng, cond)).collect();
    Ok(with_singular_values(rng, &sigma, n))
}

fn quad_vec(h: &Matrix, v: &Matrix) -> Result<f64> {
    v.t_matmul(&h.matmul(v)?).map(|s| s.get(0, 0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn kron_spectrum(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "algebra.kron_spectrum")?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.instances {
        let (m, n) = cfg.shape(i);
        let (ca, cb) = (
            log_uniform(&mut rng, cfg.max_condition),
            log_uniform(&mut rng, cfg.max_condition),
        );
        let a = spd_with_condition(&mut rng, n, ca);
        let b = spd_with_condition(&mut rng, m, cb);
        let ea = sym_eig(&a)?;
        let eb = sym_eig(&b)?;
        let mut products: Vec<f64> = ea
            .values
            .iter()
            .flat_map(|x| eb.values.iter().map(move |y| x * y))
            .collect();
        products.sort_by(f64::total_cmp);
        let ek = sym_eig(&a.kron(&b)?)?;
        let scale = ek.max();
        for (x, y) in ek.values.iter().zip(&products) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    Ok(worst)
}

fn polar_trace(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "algebra.polar_trace")?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let (m, n) = cfg.shape(i);
        let g = gaussian_matrix(&mut rng, m, n);
        let o = exact_polar(&g)?;
        let lhs = g.inner(&o)?;
        // Oracle: singular values from the Gram spectrum.
        let sum: f64 = sym_eig(&g.matmul_t(&g)?)?
            .values
            .iter()
            .map(|l| libm::sqrt(l.max(0.0)))
            .sum();
        worst = worst.max(rel(lhs, sum));
    }
    Ok(worst)
}

fn rayleigh_bound(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "algebra.rayleigh_bound")?;
    let qs = quadratics(cfg, &mut rng)?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let q = &qs[i % qs.len()];
        let (m, n) = q.dims();
        let d = gaussian_matrix(&mut rng, m, n);
        let bound = q.lambda_max() * d.inner(&d)?;
        worst = worst.max((q.quadratic_form(&d)? - bound).max(0.0) / bound);
    }
    Ok(worst)
}

fn taylor_exact(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "algebra.taylor_exact")?;
    let qs = quadratics(cfg, &mut rng)?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let q = &qs[i % qs.len()];
        let (m, n) = q.dims();
        let w = gaussian_matrix(&mut rng, m, n);
        let d = gaussian_matrix(&mut rng, m, n);
        let h = q.hessian()?;
        let model = q.loss(&w)? + q.gradient(&w)?.inner(&d)? + 0.5 * quad_vec(&h, &d.vec())?;
        let actual = q.loss(&w.add(&d)?)?;
        worst = worst.max(rel(actual, model));
    }
    Ok(worst)
}

fn vec_identity(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "algebra.vec_identity")?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let (p, q) = cfg.shape(i);
        let (r, s) = cfg.shape(i + 1);
        let a = gaussian_matrix(&mut rng, p, q);
        let b = gaussian_matrix(&mut rng, q, r);
        let c = gaussian_matrix(&mut rng, r, s);
        let lhs = a.matmul(&b)?.matmul(&c)?.vec();
        let rhs = c.transpose().kron(&a)?.matmul(&b.vec())?;
        let scale = lhs.max_abs().max(1.0);
        worst = worst.max(lhs.sub(&rhs)?.max_abs() / scale);
    }
    Ok(worst)
}

/// A quadratic, a point with a well-conditioned gradient there, and the
/// materialized `P = I ⊗ (GGᵀ)^{-1/2}`, `H` and `(α̃, β̃)`.
struct RelativeProbe {
    q: KroneckerQuadratic,
    w: Matrix,
    g: Matrix,
    p: Matrix,
    h: Matrix,
    extremes: (f64, f64),
}

fn relative_probes(cfg: &VerifyConfig, name: &str) -> Result<(Rng, Vec<RelativeProbe>)> {
    let mut rng = rng_for(cfg, name)?;
    let qs = quadratics(cfg, &mut rng)?;
    let mut probes = Vec::with_capacity(cfg.probes);
    for i in 0..cfg.probes {
        let q = qs[i % qs.len()].clone();
        let (m, n) = q.dims();
        let g = conditioned_gradient(&mut rng, m, n, libm::sqrt(cfg.max_condition))?;
        let w = point_with_gradient(&q, &g)?;
        let g = q.gradient(&w)?;
        let p = muon_preconditioner(&g)?;
        let h = q.hessian()?;
        let extremes = preconditioned_extremes(&p, &h)?;
        probes.push(RelativeProbe {
            q,
            w,
            g,
            p,
            h,
            extremes,
        });
    }
    Ok((rng, probes))
}

fn extremes_structured(cfg: &VerifyConfig) -> Result<f64> {
    let (_, probes) = relative_probes(cfg, "relative.extremes_structured")?;
    let mut worst = 0.0_f64;
    for pr in &probes {
        let (a, b) = pr.q.muon_extremes(&pr.g)?;
        worst = worst.max(rel(a, pr.extremes.0)).max(rel(b, pr.extremes.1));
    }
    Ok(worst)
}

fn relative_smoothness(cfg: &VerifyConfig) -> Result<f64> {
    let (mut rng, probes) = relative_probes(cfg, "relative.smoothness")?;
    let mut worst = 0.0_f64;
    for pr in &probes {
        // ΔᵀHΔ ≤ β̃·ΔᵀP⁻¹Δ.
        let p_inv = Matrix::identity(pr.g.cols()).kron(&sqrt_spd(&pr.g.matmul_t(&pr.g)?)?)?;
        let (m, n) = pr.q.dims();
        let d = gaussian_matrix(&mut rng, m, n).vec();
        let rhs = pr.extremes.1 * quad_vec(&p_inv, &d)?;
        worst = worst.max((quad_vec(&pr.h, &d)? - rhs).max(0.0) / rhs);
    }
    Ok(worst)
}

fn relative_pl(cfg: &VerifyConfig) -> Result<f64> {
    let (_, probes) = relative_probes(cfg, "relative.pl")?;
    let mut worst = 0.0_f64;
    for pr in &probes {
        // ½‖g‖²_P ≥ α̃·(L − L*).
        let lhs = 0.5 * quad_vec(&pr.p, &pr.g.vec())?;
        let rhs = pr.extremes.0 * pr.q.loss(&pr.w)?;
        worst = worst.max((rhs - lhs).max(0.0) / lhs);
    }
    Ok(worst)
}

fn pl_constant(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "pl.quadratic_constant")?;
    let qs = quadratics(cfg, &mut rng)?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let q = &qs[i % qs.len()];
        let (m, n) = q.dims();
        let w = gaussian_matrix(&mut rng, m, n);
        let g = q.gradient(&w)?;
        let ratio = 0.5 * g.inner(&g)? / q.loss(&w)?;
        worst = worst.max((q.lambda_min() - ratio).max(0.0) / q.lambda_min());
    }
    Ok(worst)
}

/// Runs `f` on every (instance, point) pair of a threshold check.
fn for_each_point(
    cfg: &VerifyConfig,
    name: &str,
    mut f: impl FnMut(&KroneckerQuadratic, &Matrix) -> Result<()>,
) -> Result<()> {
    let mut rng = rng_for(cfg, name)?;
    for q in quadratics(cfg, &mut rng)? {
        let (m, n) = q.dims();
        for _ in 0..cfg.points {
            let w = q.w_star().add(&gaussian_matrix(&mut rng, m, n))?;
            f(&q, &w)?;
        }
    }
    Ok(())
}

fn descends_at(
    q: &KroneckerQuadratic,
    w: &Matrix,
    kind: OptimizerKind,
    factor: f64,
) -> Result<bool> {
    let g = q.gradient(w)?;
    let eta = factor * theory_bound(q, &g, kind)?;
    let dir = step_direction(kind, &g)?;
    Ok(q.loss(&w.sub_scaled(&dir, eta)?)? < q.loss(w)?)
}

fn sufficiency(cfg: &VerifyConfig, name: &str, kind: OptimizerKind) -> Result<f64> {
    let mut failures = 0usize;
    for_each_point(cfg, name, |q, w| {
        failures += usize::from(!descends_at(q, w, kind, 0.999)?);
        Ok(())
    })?;
    Ok(failures as f64)
}

fn gd_sufficiency(cfg: &VerifyConfig) -> Result<f64> {
    sufficiency(cfg, "gd_step.sufficiency", OptimizerKind::Sgd)
}

fn muon_sufficiency(cfg: &VerifyConfig) -> Result<f64> {
    sufficiency(cfg, "muon_step.sufficiency", OptimizerKind::Muon)
}

fn gd_sharpness(cfg: &VerifyConfig) -> Result<f64> {
    let mut failures = 0usize;
    for_each_point(cfg, "gd_step.sharpness", |q, w| {
        let r = one_step_threshold(q, w, OptimizerKind::Sgd)?;
        let g = q.gradient(w)?;
        let above = w.sub_scaled(&g, 1.001 * r.eta_star_empirical)?;
        failures += usize::from(q.loss(&above)? < q.loss(w)?);
        Ok(())
    })?;
    Ok(failures as f64)
}

fn threshold_above_bound(cfg: &VerifyConfig, name: &str, kind: OptimizerKind) -> Result<f64> {
    let mut worst = 0.0_f64;
    for_each_point(cfg, name, |q, w| {
        let r = one_step_threshold(q, w, kind)?;
        worst = worst.max((1.0 - r.eta_star_empirical / r.eta_bound_theory).max(0.0));
        Ok(())
    })?;
    Ok(worst)
}

fn gd_threshold_above_bound(cfg: &VerifyConfig) -> Result<f64> {
    threshold_above_bound(cfg, "gd_step.threshold_above_bound", OptimizerKind::Sgd)
}

fn muon_threshold_above_bound(cfg: &VerifyConfig) -> Result<f64> {
    threshold_above_bound(cfg, "muon_step.threshold_above_bound", OptimizerKind::Muon)
}

fn gd_threshold_closed_form(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for_each_point(cfg, "gd_step.threshold_closed_form", |q, w| {
        let r = one_step_threshold(q, w, OptimizerKind::Sgd)?;
        let g = q.gradient(w)?;
        let closed = 2.0 * g.inner(&g)? / quad_vec(&q.hessian()?, &g.vec())?;
        worst = worst.max(rel(r.eta_star_empirical, closed));
        Ok(())
    })?;
    Ok(worst)
}

fn muon_bound_ratio(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for_each_point(cfg, "muon_step.bound_ratio", |q, w| {
        let sigma = svd(&q.gradient(w)?)?.sigma;
        let m = sigma.len();
        let mean = sigma.iter().sum::<f64>() / m as f64;
        let ratio = eta_max_muon(q.lambda_max(), &sigma, m)? / eta_max_gd(q.lambda_max())?;
        worst = worst.max(rel(ratio, mean));
        Ok(())
    })?;
    Ok(worst)
}

fn convergence_runs(
    cfg: &VerifyConfig,
    name: &str,
    kind: OptimizerKind,
    mut f: impl FnMut(&KroneckerQuadratic, &super::RunTrace),
) -> Result<()> {
    let mut rng = rng_for(cfg, name)?;
    let policy = match kind {
        OptimizerKind::Sgd => EtaPolicy::GdTheory,
        OptimizerKind::Muon => EtaPolicy::MuonTheory,
    };
    for q in quadratics(cfg, &mut rng)? {
        let (m, n) = q.dims();
        let w0 = q.w_star().add(&gaussian_matrix(&mut rng, m, n))?;
        let trace = run(&q, &w0, kind, policy, cfg.steps)?;
        f(&q, &trace);
    }
    Ok(())
}

fn gd_contraction(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    convergence_runs(
        cfg,
        "gd_rate.contraction",
        OptimizerKind::Sgd,
        |q, trace| {
            let bound = 1.0 - q.lambda_min() / q.lambda_max();
            for r in trace.records.iter().filter_map(|r| r.r_t) {
                worst = worst.max((r - bound).max(0.0));
            }
        },
    )?;
    Ok(worst)
}

fn muon_contraction(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    convergence_runs(
        cfg,
        "muon_rate.contraction",
        OptimizerKind::Muon,
        |_, trace| {
            for rec in &trace.records {
                if let (Some(r), Some(a), Some(b)) = (rec.r_t, rec.alpha_tilde, rec.beta_tilde) {
                    worst = worst.max((r - (1.0 - a / b)).max(0.0));
                }
            }
        },
    )?;
    Ok(worst)
}

fn muon_monotone_gap(cfg: &VerifyConfig) -> Result<f64> {
    let mut failures = 0usize;
    convergence_runs(
        cfg,
        "muon_rate.monotone_gap",
        OptimizerKind::Muon,
        |_, trace| {
            for pair in trace.records.windows(2) {
                let prev = pair[0].gap.unwrap_or(pair[0].loss);
                let next = pair[1].gap.unwrap_or(pair[1].loss);
                failures += usize::from(prev > GAP_FLOOR && next >= prev);
            }
            // Diverged runs would indicate a step larger than the bound allows.
            failures += usize::from(matches!(trace.termination, Termination::Diverged { .. }));
        },
    )?;
    Ok(failures as f64)
}

/// A layer input `X` (`batch x n`, full column rank) and gradient `G`
/// (`m x n`, full row rank) with singular values in `[1, √cond]`.
fn kfac_pair(rng: &mut Rng, cfg: &VerifyConfig, i: usize) -> Result<(Matrix, Matrix)> {
    let (m, n) = cfg.shape(i);
    let root = libm::sqrt(cfg.max_condition);
    let x = conditioned_gradient(rng, n, 2 * n, root)?.transpose();
    let g = conditioned_gradient(rng, m, n, root)?;
    Ok((x, g))
}

fn extreme_ratio(s: &Matrix) -> Result<f64> {
    let e = sym_eig(s)?;
    Ok(e.min() / e.max())
}

fn conditioning_pairs(
    cfg: &VerifyConfig,
    name: &str,
    mut f: impl FnMut(&Matrix, &Matrix, (f64, f64)) -> Result<()>,
) -> Result<()> {
    let mut rng = rng_for(cfg, name)?;
    for i in 0..cfg.probes {
        let (x, g) = kfac_pair(&mut rng, cfg, i)?;
        let a = x.t_matmul(&x)?;
        let ggt = g.matmul_t(&g)?;
        let ratios = condition_ratios(&a, &ggt)?;
        f(&a, &g, ratios)?;
    }
    Ok(())
}

fn conditioning_ratio_gd(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    conditioning_pairs(cfg, "conditioning.ratio_gd", |a, g, (gd, _)| {
        let h = a.kron(&g.matmul_t(g)?)?;
        worst = worst.max(rel(gd, extreme_ratio(&h)?));
        Ok(())
    })?;
    Ok(worst)
}

fn conditioning_ratio_muon(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    conditioning_pairs(cfg, "conditioning.ratio_muon", |a, g, (_, muon)| {
        let h = a.kron(&g.matmul_t(g)?)?;
        let (lo, hi) = preconditioned_extremes(&muon_preconditioner(g)?, &h)?;
        worst = worst.max(rel(muon, lo / hi));
        Ok(())
    })?;
    Ok(worst)
}

fn conditioning_relation(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    conditioning_pairs(cfg, "conditioning.relation", |_, g, (gd, muon)| {
        let factor = libm::sqrt(extreme_ratio(&g.matmul_t(g)?)?);
        worst = worst.max(rel(gd, muon * factor));
        Ok(())
    })?;
    Ok(worst)
}

fn conditioning_strict(cfg: &VerifyConfig) -> Result<f64> {
    let mut failures = 0usize;
    conditioning_pairs(cfg, "conditioning.strict_inequality", |_, g, (gd, muon)| {
        let e = sym_eig(&g.matmul_t(g)?)?;
        if e.min() < e.max() * (1.0 - 1e-9) {
            failures += usize::from(!(gd < muon));
        }
        Ok(())
    })?;
    Ok(failures as f64)
}

fn isotropic_edge(cfg: &VerifyConfig) -> Result<f64> {
    let mut rng = rng_for(cfg, "conditioning.isotropic_edge")?;
    let mut worst = 0.0_f64;
    for i in 0..cfg.probes {
        let (m, n) = cfg.shape(i);
        let (x, _) = kfac_pair(&mut rng, cfg, i)?;
        let c = log_uniform(&mut rng, 10.0);
        let g = with_singular_values(&mut rng, &alloc::vec![c; m], n);
        let (gd, muon) = condition_ratios(&x.t_matmul(&x)?, &g.matmul_t(&g)?)?;
        let factor = libm::sqrt(extreme_ratio(&g.matmul_t(&g)?)?);
        worst = worst.max(rel(gd, muon)).max((factor - 1.0).abs());
    }
    Ok(worst)
}
