//! Input normalizations applied in front of a dense layer, with their
//! backward passes.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Variances below this are floored, so constant columns map to zero.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Normalization applied to a layer's input before the matrix product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreLayerNorm {
    #[default]
    None,
    /// `X / ‖X‖_F`, which bounds `λ_max(XᵀX)` by one.
    FrobNorm,
    /// Per-feature zero mean, unit (population) variance over the batch.
    Standardize,
}

impl PreLayerNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::FrobNorm => "frobnorm",
            Self::Standardize => "standardize",
        }
    }
}

impl core::str::FromStr for PreLayerNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "frobnorm" => Ok(Self::FrobNorm),
            "standardize" => Ok(Self::Standardize),
            _ => Err(Error::InvalidArgument(
                "pre_layer_norm must be none, frobnorm or standardize",
            )),
        }
    }
}

/// Result of [`frobnorm`]. A zero input is returned unchanged with
/// `norm == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobNormed {
    pub matrix: Matrix,
    pub norm: f64,
}

impl FrobNormed {
    pub fn was_zero(&self) -> bool {
        self.norm == 0.0
    }
}

pub fn frobnorm(x: &Matrix) -> Result<FrobNormed> {
    let norm = x.frobenius_norm();
    let matrix = if norm == 0.0 {
        x.clone()
    } else {
        x.scale(1.0 / norm)?
    };
    Ok(FrobNormed { matrix, norm })
}

/// Column statistics of a standardized batch, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub matrix: Matrix,
    /// Per-column divisor `sqrt(max(var, floor))`.
    pub scale: Vec<f64>,
    /// Columns whose variance was floored; their divisor does not depend
    /// on the input.
    pub floored: Vec<bool>,
}

pub fn standardize(x: &Matrix) -> Result<Standardized> {
    let (b, d) = x.shape();
    if b < 2 {
        return Err(Error::InvalidArgument(
            "standardize needs a batch of at least two rows",
        ));
    }
    let mut out = x.clone();
    let mut scale = Vec::with_capacity(d);
    let mut floored = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / b as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / b as f64;
        let s = libm::sqrt(var.max(VARIANCE_FLOOR));
        for (i, v) in col.iter().enumerate() {
            out.set(i, j, (v - mean) / s);
        }
        scale.push(s);
        floored.push(var < VARIANCE_FLOOR);
    }
    Ok(Standardized {
        matrix: out,
        scale,
        floored,
    })
}

/// Normalization applied in a forward pass, with what backward needs.
#[derive(Debug, Clone)]
pub(crate) enum NormCache {
    None,
    Frob(f64),
    Standard(Standardized),
}

pub(crate) fn apply(norm: PreLayerNorm, x: &Matrix) -> Result<(Matrix, NormCache)> {
    Ok(match norm {
        PreLayerNorm::None => (x.clone(), NormCache::None),
        PreLayerNorm::FrobNorm => {
            let f = frobnorm(x)?;
            (f.matrix, NormCache::Frob(f.norm))
        }
        PreLayerNorm::Standardize => {
            let s = standardize(x)?;
            (s.matrix.clone(), NormCache::Standard(s))
        }
    })
}

/// Maps `∂L/∂X̃` to `∂L/∂X` given the normalized output `xt`.
pub(crate) fn backward(cache: &NormCache, xt: &Matrix, dxt: &Matrix) -> Result<Matrix> {
    match cache {
        NormCache::None => Ok(dxt.clone()),
        NormCache::Frob(norm) if *norm == 0.0 => Ok(dxt.clone()),
        NormCache::Frob(norm) => {
            // X̃ = X/‖X‖ ⇒ dX = (dX̃ − X̃·⟨X̃, dX̃⟩)/‖X‖.
            let proj = xt.inner(dxt)?;
            dxt.sub_scaled(xt, proj)?.scale(1.0 / norm)
        }
        NormCache::Standard(s) => {
            let b = xt.rows() as f64;
            let mut dx = dxt.clone();
            for j in 0..xt.cols() {
                let g = dxt.col(j);
                let mean_g = g.iter().sum::<f64>() / b;
                let mean_gx = if s.floored[j] {
                    0.0
                } else {
                    g.iter()
                        .enumerate()
                        .map(|(i, v)| v * xt.get(i, j))
                        .sum::<f64>()
                        / b
                };
                for (i, v) in g.iter().enumerate() {
                    dx.set(i, j, (v - mean_g - xt.get(i, j) * mean_gx) / s.scale[j]);
                }
            }
            Ok(dx)
        }
    }
}
