//! Learning-rate sweep on the toy network and the early-stability analysis
//! built on it.

use rayon::prelude::*;
use spectral_opt_core::nn::{loss_at_step, milestone_epochs, norm_growth, Split};
use spectral_opt_core::optim::OptimizerKind;

use crate::config::Config;
use crate::error::Result;
use crate::output::{opt, opt_usize};

/// Outcome of one (optimizer, η, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub seed: u64,
    pub diverged_step: Option<usize>,
    pub final_loss: f64,
    pub initial_loss: Option<f64>,
    pub probe_loss: Option<f64>,
    pub norm_growth: Option<f64>,
    pub milestones: Vec<Option<usize>>,
}

impl SweepRow {
    pub fn diverged(&self) -> bool {
        self.diverged_step.is_some()
    }

    /// Early loss strictly below the initial loss, without divergence.
    pub fn improved(&self) -> bool {
        !self.diverged()
            && matches!((self.probe_loss, self.initial_loss), (Some(p), Some(i)) if p < i)
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub probe_step: usize,
    pub milestones: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Per-η comparison of SGD and Muon over the shared seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaStability {
    pub eta: f64,
    pub seeds: usize,
    /// Seeds where SGD diverged while Muon's early loss fell below its
    /// initial loss.
    pub qualifying: usize,
    /// Seeds where both runs survived, so their norm growth is comparable.
    pub norm_compared: usize,
    /// Of those, seeds where Muon's norm grew at least as much as SGD's.
    pub norm_violations: usize,
}

impl EtaStability {
    /// SGD diverges and Muon improves in at least `need` seeds, and Muon
    /// never outgrows SGD where both survive.
    pub fn holds(&self, need: usize) -> bool {
        self.qualifying >= need && self.norm_violations == 0
    }
}

fn run_one(
    cfg: &Config,
    data: &Split,
    kind: OptimizerKind,
    eta: f64,
    seed: u64,
) -> Result<SweepRow> {
    let exp = cfg.experiment()?;
    let tcfg = cfg.sweep_config(kind, eta)?;
    let probe = cfg.sweep.probe_step;
    let r = exp.run(data, &tcfg, seed)?;
    let trace = &r.trace;
    Ok(SweepRow {
        optimizer: kind,
        eta,
        seed,
        diverged_step: r.diverged(),
        final_loss: trace.final_loss(),
        initial_loss: loss_at_step(trace, 0),
        probe_loss: loss_at_step(trace, probe),
        norm_growth: norm_growth(trace, probe),
        milestones: milestone_epochs(trace, &tcfg.milestones),
    })
}

/// Runs every (optimizer, η, seed) cell in parallel on the current rayon
/// pool. Rows come back in grid order regardless of scheduling.
pub fn run_sweep(cfg: &Config) -> Result<Sweep> {
    let kinds = cfg.sweep_optimizers()?;
    let exp = cfg.experiment()?;
    let data = exp.data.generate()?;
    let seeds = cfg.train.seeds.clone();
    let mut cells = Vec::new();
    for &kind in &kinds {
        for &eta in &cfg.sweep.etas {
            for &seed in &seeds {
                cells.push((kind, eta, seed));
            }
        }
    }
    // Validate once up front so a bad section fails before any training.
    cfg.sweep_config(kinds[0], cfg.sweep.etas[0])?;
    let rows = cells
        .par_iter()
        .map(|&(kind, eta, seed)| run_one(cfg, &data, kind, eta, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep {
        probe_step: cfg.sweep.probe_step,
        milestones: cfg.train.milestones.clone(),
        rows,
    })
}

impl Sweep {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "optimizer",
            "eta",
            "seed",
            "diverged",
            "diverged_step",
            "final_loss",
            "initial_loss",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.push(format!("step{}_loss", self.probe_step));
        h.push(format!("norm_growth_{}", self.probe_step));
        for t in &self.milestones {
            h.push(format!("milestone_{t}"));
        }
        h
    }

    pub fn table(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.optimizer.to_string(),
                    r.eta.to_string(),
                    r.seed.to_string(),
                    r.diverged().to_string(),
                    opt_usize(r.diverged_step),
                    r.final_loss.to_string(),
                    opt(r.initial_loss),
                    opt(r.probe_loss),
                    opt(r.norm_growth),
                ];
                row.extend(r.milestones.iter().map(|m| opt_usize(*m)));
                row
            })
            .collect()
    }

    fn find(&self, kind: OptimizerKind, eta: f64, seed: u64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.optimizer == kind && r.eta == eta && r.seed == seed)
    }

    /// SGD against Muon at every η both were run at.
    pub fn stability(&self) -> Vec<EtaStability> {
        let mut etas: Vec<f64> = self.rows.iter().map(|r| r.eta).collect();
        etas.sort_by(f64::total_cmp);
        etas.dedup();
        let mut out = Vec::new();
        for eta in etas {
            let mut s = EtaStability {
                eta,
                seeds: 0,
                qualifying: 0,
                norm_compared: 0,
                norm_violations: 0,
            };
            for sgd in self
                .rows
                .iter()
                .filter(|r| r.optimizer == OptimizerKind::Sgd && r.eta == eta)
            {
                let Some(muon) = self.find(OptimizerKind::Muon, eta, sgd.seed) else {
                    continue;
                };
                s.seeds += 1;
                if sgd.diverged() && muon.improved() {
                    s.qualifying += 1;
                }
                if !sgd.diverged() && !muon.diverged() {
                    if let (Some(gs), Some(gm)) = (sgd.norm_growth, muon.norm_growth) {
                        s.norm_compared += 1;
                        if gm >= gs {
                            s.norm_violations += 1;
                        }
                    }
                }
            }
            if s.seeds > 0 {
                out.push(s);
            }
        }
        out
    }
}

pub fn stability_header() -> Vec<String> {
    [
        "eta",
        "seeds",
        "qualifying",
        "norm_compared",
        "norm_violations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn stability_table(rows: &[EtaStability]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|s| {
            vec![
                s.eta.to_string(),
                s.seeds.to_string(),
                s.qualifying.to_string(),
                s.norm_compared.to_string(),
                s.norm_violations.to_string(),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        kind: OptimizerKind,
        seed: u64,
        div: Option<usize>,
        probe: f64,
        growth: f64,
    ) -> SweepRow {
        SweepRow {
            optimizer: kind,
            eta: 1.0,
            seed,
            diverged_step: div,
            final_loss: probe,
            initial_loss: Some(1.0),
            probe_loss: Some(probe),
            norm_growth: Some(growth),
            milestones: vec![],
        }
    }

    #[test]
    fn stability_counts_seeds() {
        use OptimizerKind::*;
        let sweep = Sweep {
            probe_step: 50,
            milestones: vec![],
            rows: vec![
                row(Sgd, 0, Some(3), f64::NAN, 0.0),
                row(Muon, 0, None, 0.5, 1.0),
                row(Sgd, 1, Some(2), f64::NAN, 0.0),
                row(Muon, 1, None, 1.5, 1.0),
                row(Sgd, 2, None, 0.9, 4.0),
                row(Muon, 2, None, 0.8, 1.0),
            ],
        };
        let s = sweep.stability();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].seeds, 3);
        assert_eq!(s[0].qualifying, 1);
        assert_eq!(s[0].norm_compared, 1);
        assert_eq!(s[0].norm_violations, 0);
        assert!(s[0].holds(1));
        assert!(!s[0].holds(2));
    }

    #[test]
    fn header_names_probe_and_milestones() {
        let sweep = Sweep {
            probe_step: 50,
            milestones: vec![0.5, 0.75],
            rows: vec![],
        };
        let h = sweep.header();
        assert_eq!(h[7], "step50_loss");
        assert_eq!(h[8], "norm_growth_50");
        assert_eq!(&h[9..], ["milestone_0.5", "milestone_0.75"]);
    }
}
