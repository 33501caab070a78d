//! Convergence comparison of SGD and Muon: per-run traces with gaps and
//! contraction ratios, plus accuracy milestones.

use rayon::prelude::*;
use spectral_opt_core::curvature::KroneckerQuadratic;
use spectral_opt_core::nn::{estimate_l_star, fill_gaps, mean_rt, milestone_epochs};
use spectral_opt_core::optim::OptimizerKind;
use spectral_opt_core::random::{gaussian_matrix, seeded};
use spectral_opt_core::theory::{self, EtaPolicy, RunTrace};

use crate::config::{Config, ConvergeMode};
use crate::error::{LabError, Result};
use crate::output::{opt, opt_usize};

/// Epochs whose `r_t` is averaged in the summary.
pub const RT_EPOCHS: std::ops::RangeInclusive<usize> = 2..=10;

#[derive(Debug, Clone)]
pub struct ConvergeRun {
    pub optimizer: OptimizerKind,
    pub eta: Option<f64>,
    pub seed: u64,
    pub trace: RunTrace,
    /// First epoch reaching each accuracy threshold (network runs only).
    pub milestones: Vec<Option<usize>>,
    pub mean_rt: Option<f64>,
}

impl ConvergeRun {
    pub fn file_name(&self) -> String {
        format!("trace_{}_seed{}.csv", self.optimizer, self.seed)
    }

    pub fn diverged(&self) -> bool {
        matches!(self.trace.termination, theory::Termination::Diverged { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Converge {
    pub mode: ConvergeMode,
    pub thresholds: Vec<f64>,
    pub l_star: Option<f64>,
    pub runs: Vec<ConvergeRun>,
}

/// Per-seed comparison at the middle accuracy threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSummary {
    pub threshold: Option<f64>,
    pub seeds: usize,
    /// Seeds where Muon reached the threshold no later than SGD.
    pub muon_not_later: usize,
    pub mean_rt_sgd: Option<f64>,
    pub mean_rt_muon: Option<f64>,
}

fn network_runs(cfg: &Config, mode: ConvergeMode) -> Result<Converge> {
    let exp = cfg.experiment()?;
    let data = exp.data.generate()?;
    let c = &cfg.converge;
    let (eta_sgd, eta_muon) = match mode {
        ConvergeMode::Equal => (c.eta, c.eta),
        _ => (c.eta_sgd, c.eta_muon),
    };
    let mut cells = Vec::new();
    for (kind, eta) in [
        (OptimizerKind::Sgd, eta_sgd),
        (OptimizerKind::Muon, eta_muon),
    ] {
        let tcfg = cfg.train_config(kind, eta)?;
        for &seed in &tcfg.seeds {
            cells.push((kind, eta, seed, tcfg.clone()));
        }
    }
    let results = cells
        .par_iter()
        .map(|(kind, eta, seed, tcfg)| Ok((*kind, *eta, exp.run(&data, tcfg, *seed)?)))
        .collect::<Result<Vec<_>>>()?;

    let traces: Vec<&RunTrace> = results.iter().map(|(_, _, r)| &r.trace).collect();
    let l_star = estimate_l_star(&traces);
    let thresholds = cfg.train.milestones.clone();
    let mut runs = Vec::with_capacity(results.len());
    for (kind, eta, r) in results {
        let mut trace = r.trace;
        if let Some(l) = l_star {
            fill_gaps(&mut trace, l)?;
        }
        runs.push(ConvergeRun {
            optimizer: kind,
            eta: Some(eta),
            seed: r.seed,
            milestones: milestone_epochs(&trace, &thresholds),
            mean_rt: mean_rt(&trace, RT_EPOCHS),
            trace,
        });
    }
    Ok(Converge {
        mode,
        thresholds,
        l_star,
        runs,
    })
}

fn quadratic_runs(cfg: &Config) -> Result<Converge> {
    let c = &cfg.converge;
    if c.m == 0 || c.n == 0 || c.steps == 0 {
        return Err(LabError::config(
            "converge: m, n and steps must be positive",
        ));
    }
    if !(c.cond_a >= 1.0 && c.cond_b >= 1.0) {
        return Err(LabError::config(
            "converge: condition numbers must be at least 1",
        ));
    }
    let base = cfg.seed.unwrap_or(0);
    let mut cells = Vec::new();
    for &seed in &cfg.train.seeds {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Muon] {
            cells.push((kind, seed));
        }
    }
    let runs = cells
        .par_iter()
        .map(|&(kind, seed)| {
            // Both optimizers of a seed see the same instance and start.
            let mut rng = seeded(base ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let q = KroneckerQuadratic::random(&mut rng, c.m, c.n, c.cond_a, c.cond_b)?;
            let w0 = gaussian_matrix(&mut rng, c.m, c.n);
            let policy = match kind {
                OptimizerKind::Sgd => EtaPolicy::GdTheory,
                OptimizerKind::Muon => EtaPolicy::MuonTheory,
            };
            let trace = theory::run(&q, &w0, kind, policy, c.steps)?;
            Ok(ConvergeRun {
                optimizer: kind,
                eta: None,
                seed,
                milestones: Vec::new(),
                mean_rt: None,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Converge {
        mode: ConvergeMode::Quadratic,
        thresholds: Vec::new(),
        l_star: Some(0.0),
        runs,
    })
}

pub fn run_converge(cfg: &Config) -> Result<Converge> {
    match cfg.converge_mode()? {
        ConvergeMode::Quadratic => quadratic_runs(cfg),
        mode => network_runs(cfg, mode),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Converge {
    pub fn summary(&self) -> ConvergeSummary {
        let mid = self.thresholds.len() / 2;
        let mut s = ConvergeSummary {
            threshold: self.thresholds.get(mid).copied(),
            seeds: 0,
            muon_not_later: 0,
            mean_rt_sgd: mean(
                self.runs
                    .iter()
                    .filter(|r| r.optimizer == OptimizerKind::Sgd)
                    .filter_map(|r| r.mean_rt),
            ),
            mean_rt_muon: mean(
                self.runs
                    .iter()
                    .filter(|r| r.optimizer == OptimizerKind::Muon)
                    .filter_map(|r| r.mean_rt),
            ),
        };
        if s.threshold.is_none() {
            return s;
        }
        for sgd in self
            .runs
            .iter()
            .filter(|r| r.optimizer == OptimizerKind::Sgd)
        {
            let Some(muon) = self
                .runs
                .iter()
                .find(|r| r.optimizer == OptimizerKind::Muon && r.seed == sgd.seed)
            else {
                continue;
            };
            s.seeds += 1;
            // A threshold never reached counts as later than any epoch; if
            // neither run reaches it the seed does not count for Muon.
            let not_later = match (muon.milestones[mid], sgd.milestones[mid]) {
                (Some(m), Some(g)) => m <= g,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if not_later {
                s.muon_not_later += 1;
            }
        }
        s
    }

    pub fn milestone_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "optimizer",
            "eta",
            "seed",
            "diverged",
            "final_loss",
            "mean_rt_2_10",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.thresholds.iter().map(|t| format!("milestone_{t}")));
        h
    }

    pub fn milestone_table(&self) -> Vec<Vec<String>> {
        self.runs
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.optimizer.to_string(),
                    opt(r.eta),
                    r.seed.to_string(),
                    r.diverged().to_string(),
                    r.trace.final_loss().to_string(),
                    opt(r.mean_rt),
                ];
                row.extend(r.milestones.iter().map(|m| opt_usize(*m)));
                row
            })
            .collect()
    }

    pub fn quadratic_header() -> Vec<String> {
        [
            "optimizer",
            "seed",
            "steps",
            "final_gap",
            "contraction_product",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    pub fn quadratic_table(&self) -> Vec<Vec<String>> {
        self.runs
            .iter()
            .map(|r| {
                vec![
                    r.optimizer.to_string(),
                    r.seed.to_string(),
                    (r.trace.records.len() - 1).to_string(),
                    r.trace.final_loss().to_string(),
                    // Only Muon records carry the preconditioned extremes.
                    match r.optimizer {
                        OptimizerKind::Muon => r.trace.contraction_product().to_string(),
                        OptimizerKind::Sgd => String::new(),
                    },
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_mode_runs_both_optimizers_per_seed() {
        let mut cfg = Config::default();
        cfg.converge.mode = "quadratic".into();
        cfg.converge.steps = 40;
        cfg.train.seeds = vec![0, 1];
        let c = run_converge(&cfg).unwrap();
        assert_eq!(c.runs.len(), 4);
        for r in &c.runs {
            assert!(r.trace.final_loss() < r.trace.records[0].loss);
            if r.optimizer == OptimizerKind::Muon {
                assert!(r.trace.contraction_product() < 1.0);
            }
        }
        let names: std::collections::BTreeSet<String> =
            c.runs.iter().map(|r| r.file_name()).collect();
        assert_eq!(names.len(), 4);
    }

    #[test]
    fn summary_treats_unreached_as_later() {
        let run = |kind, seed, mid: Option<usize>| ConvergeRun {
            optimizer: kind,
            eta: Some(0.1),
            seed,
            trace: RunTrace {
                records: vec![],
                termination: theory::Termination::Completed,
            },
            milestones: vec![None, mid, None],
            mean_rt: Some(if kind == OptimizerKind::Muon {
                0.5
            } else {
                0.9
            }),
        };
        use OptimizerKind::*;
        let c = Converge {
            mode: ConvergeMode::Equal,
            thresholds: vec![0.5, 0.6, 0.7],
            l_star: None,
            runs: vec![
                run(Sgd, 0, Some(3)),
                run(Muon, 0, Some(3)),
                run(Sgd, 1, None),
                run(Muon, 1, Some(9)),
                run(Sgd, 2, None),
                run(Muon, 2, None),
            ],
        };
        let s = c.summary();
        assert_eq!(s.threshold, Some(0.6));
        assert_eq!((s.seeds, s.muon_not_later), (3, 2));
        assert_eq!(s.mean_rt_muon, Some(0.5));
    }
}
