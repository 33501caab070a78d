//! SGD and Muon update rules, with optional heavy-ball momentum, and the
//! dual-optimizer router that sends matrix parameters to the optimizer under
//! study and everything else to a reference SGD.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::polar::{exact_polar, orthogonalize, NewtonSchulzConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OptimizerKind {
    Sgd,
    Muon,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Muon => "muon",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "muon" => Ok(OptimizerKind::Muon),
            _ => Err(Error::InvalidArgument(
                "optimizer kind must be `sgd` or `muon`",
            )),
        }
    }
}

/// Which matrix Muon orthogonalizes when momentum is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrthogonalizeTarget {
    /// `M ← μM + G`, step along `polar(M)`.
    #[default]
    Momentum,
    /// `M ← μM + polar(G)`, step along `M`.
    Gradient,
}

/// The optimizer block of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub mu: f64,
    pub ns_iterations: usize,
    pub exact_polar: bool,
}

impl OptimizerConfig {
    pub fn sgd(eta: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            eta,
            mu: 0.0,
            ns_iterations: NewtonSchulzConfig::default().iterations,
            exact_polar: false,
        }
    }

    pub fn muon(eta: f64) -> Self {
        Self {
            kind: OptimizerKind::Muon,
            ..Self::sgd(eta)
        }
    }

    pub fn with_momentum(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_exact_polar(mut self, exact: bool) -> Self {
        self.exact_polar = exact;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning rate must be finite and non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)"));
        }
        if self.ns_iterations == 0 {
            return Err(Error::InvalidArgument(
                "newton-schulz needs at least one iteration",
            ));
        }
        Ok(())
    }
}

/// Per-parameter optimizer state. One state serves exactly one parameter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub mu: f64,
    pub momentum_buffer: Option<Matrix>,
    pub ns_config: NewtonSchulzConfig,
    pub use_exact_polar: bool,
    pub orthogonalize: OrthogonalizeTarget,
    /// Number of polar factors this state has computed.
    pub polar_calls: u64,
}

impl OptimizerState {
    pub fn new(cfg: &OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            kind: cfg.kind,
            eta: cfg.eta,
            mu: cfg.mu,
            momentum_buffer: None,
            ns_config: NewtonSchulzConfig::with_iterations(cfg.ns_iterations),
            use_exact_polar: cfg.exact_polar,
            orthogonalize: OrthogonalizeTarget::default(),
            polar_calls: 0,
        })
    }

    fn polar(&mut self, m: &Matrix) -> Result<Matrix> {
        if m.max_abs() == 0.0 {
            return Err(Error::ZeroMatrix { op: "muon step" });
        }
        self.polar_calls += 1;
        if self.use_exact_polar {
            exact_polar(m)
        } else {
            orthogonalize(m, &self.ns_config)
        }
    }

    fn accumulate(&self, g: &Matrix) -> Result<Matrix> {
        match &self.momentum_buffer {
            Some(m) if self.mu != 0.0 => m.scale(self.mu)?.add(g),
            Some(m) if m.shape() != g.shape() => Err(m.mismatch("momentum", g)),
            _ => Ok(g.clone()),
        }
    }

    /// Update direction `D` for gradient `g` (so that `W ← W − η·D`),
    /// advancing the momentum buffer.
    pub fn direction(&mut self, g: &Matrix) -> Result<Matrix> {
        let (buffer, dir) = match (self.kind, self.orthogonalize) {
            (OptimizerKind::Sgd, _) => {
                let m = self.accumulate(g)?;
                (m.clone(), m)
            }
            (OptimizerKind::Muon, OrthogonalizeTarget::Momentum) => {
                let m = self.accumulate(g)?;
                let o = self.polar(&m)?;
                (m, o)
            }
            (OptimizerKind::Muon, OrthogonalizeTarget::Gradient) => {
                let o = self.polar(g)?;
                let m = self.accumulate(&o)?;
                (m.clone(), m)
            }
        };
        self.momentum_buffer = Some(buffer);
        Ok(dir)
    }

    /// One optimizer step: returns the updated parameter.
    pub fn step(&mut self, w: &Matrix, g: &Matrix) -> Result<Matrix> {
        if w.shape() != g.shape() {
            return Err(w.mismatch("step", g));
        }
        let dir = self.direction(g)?;
        w.sub_scaled(&dir, self.eta)
    }
}

/// Matrix-shaped parameters go to `target`; everything else to `reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptimizerPolicy {
    pub target: OptimizerConfig,
    pub reference: OptimizerConfig,
}

impl DualOptimizerPolicy {
    pub fn new(target: OptimizerConfig, reference_eta: f64) -> Self {
        Self {
            target,
            reference: OptimizerConfig::sgd(reference_eta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamGroup {
    pub label: String,
    pub shape: (usize, usize),
    pub is_matrix_param: bool,
    pub state: OptimizerState,
}

/// A parameter counts as a matrix when both of its dimensions exceed one.
pub fn is_matrix_shape((rows, cols): (usize, usize)) -> bool {
    rows > 1 && cols > 1
}

pub fn route(
    params: &[(&str, (usize, usize))],
    policy: &DualOptimizerPolicy,
) -> Result<Vec<ParamGroup>> {
    if policy.reference.kind != OptimizerKind::Sgd {
        return Err(Error::InvalidArgument(
            "the reference optimizer must be SGD",
        ));
    }
    let mut seen = BTreeSet::new();
    params
        .iter()
        .map(|&(label, shape)| {
            if !seen.insert(label) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            let is_matrix_param = is_matrix_shape(shape);
            let cfg = if is_matrix_param {
                &policy.target
            } else {
                &policy.reference
            };
            Ok(ParamGroup {
                label: label.to_string(),
                shape,
                is_matrix_param,
                state: OptimizerState::new(cfg)?,
            })
        })
        .collect()
}
