//! Subcommand bodies. Each returns the process exit code on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spectral_opt_core::curvature::spectral_report;
use spectral_opt_core::theory::{VerificationReport, CHECKS};

use crate::config::{Config, ConvergeMode};
use crate::converge::{run_converge, Converge};
use crate::error::{LabError, Result, EXIT_FAILURE, EXIT_OK};
use crate::matrix_io::read_matrix;
use crate::output::{create, write_nn_trace, write_table, write_text};
use crate::sweep::{run_sweep, stability_header, stability_table};

/// Environment variable holding the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "SPECTRAL_OPT_THREADS";

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            LabError::config(format!(
                "{THREADS_ENV}: expected a non-negative integer, got `{v}`"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::config(format!("{THREADS_ENV}: {e}")))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

pub fn verify(cfg: &Config, out: &Path) -> Result<i32> {
    let vcfg = cfg.verify_config()?;
    let checks = CHECKS.par_iter().map(|c| c.run(&vcfg)).collect();
    let report = VerificationReport::new(checks);
    let text = report.to_string();
    print!("{text}");
    write_text(&out.join("verify_report.txt"), &text)?;
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

pub fn lr_sweep(cfg: &Config, out: &Path) -> Result<i32> {
    let sweep = run_sweep(cfg)?;
    write_table(
        create(&out.join("sweep.csv"))?,
        &sweep.header(),
        &sweep.table(),
    )?;
    let stability = sweep.stability();
    write_table(
        create(&out.join("stability.csv"))?,
        &stability_header(),
        &stability_table(&stability),
    )?;
    let need = cfg.train.seeds.len().saturating_sub(1).max(1);
    for s in &stability {
        println!(
            "eta={} sgd_diverged_muon_improved={}/{} norm_violations={}/{}{}",
            s.eta,
            s.qualifying,
            s.seeds,
            s.norm_violations,
            s.norm_compared,
            if s.holds(need) { " stable-gap" } else { "" }
        );
    }
    println!(
        "wrote {} rows to {}",
        sweep.rows.len(),
        out.join("sweep.csv").display()
    );
    Ok(EXIT_OK)
}

fn print_summary(c: &Converge) {
    if let Some(l) = c.l_star {
        println!("l_star={l}");
    }
    if c.mode == ConvergeMode::Quadratic {
        return;
    }
    let s = c.summary();
    if let Some(t) = s.threshold {
        println!(
            "milestone_{t}: muon_not_later={}/{}",
            s.muon_not_later, s.seeds
        );
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!(
        "mean_rt_2_10 sgd={} muon={}",
        fmt(s.mean_rt_sgd),
        fmt(s.mean_rt_muon)
    );
}

pub fn converge(cfg: &Config, out: &Path) -> Result<i32> {
    let c = run_converge(cfg)?;
    for r in &c.runs {
        write_nn_trace(create(&out.join(r.file_name()))?, &r.trace)?;
    }
    match c.mode {
        ConvergeMode::Quadratic => write_table(
            create(&out.join("summary.csv"))?,
            &Converge::quadratic_header(),
            &c.quadratic_table(),
        )?,
        _ => write_table(
            create(&out.join("milestones.csv"))?,
            &c.milestone_header(),
            &c.milestone_table(),
        )?,
    }
    print_summary(&c);
    Ok(EXIT_OK)
}

/// `key=value` lines describing the spectrum of a gradient.
pub fn spectrum_text(
    input: Option<&spectral_opt_core::Matrix>,
    g: &spectral_opt_core::Matrix,
) -> Result<String> {
    let r = spectral_report(input, g)?;
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "rows={}", g.rows());
    let _ = writeln!(s, "cols={}", g.cols());
    let _ = writeln!(s, "sigma={}", join(&r.sigma));
    let _ = writeln!(s, "flatness={}", r.flatness);
    let _ = writeln!(s, "lam_max_a={}", r.lam_max_a);
    let _ = writeln!(s, "lam_min_a={}", r.lam_min_a);
    let _ = writeln!(s, "lam_max_b={}", r.lam_max_b);
    let _ = writeln!(s, "lam_min_b={}", r.lam_min_b);
    let _ = writeln!(s, "eta_max_gd={}", r.eta_max_gd);
    let _ = writeln!(s, "eta_max_muon={}", r.eta_max_muon);
    let _ = writeln!(s, "eta_ratio={}", r.eta_ratio());
    let _ = writeln!(s, "ratio_gd={}", opt(r.ratio_gd));
    let _ = writeln!(s, "ratio_muon={}", opt(r.ratio_muon));
    Ok(s)
}

pub fn spectrum(cfg: &Config, matrix: Option<PathBuf>, out: &Path) -> Result<i32> {
    let path = matrix
        .or_else(|| cfg.spectrum.matrix.clone())
        .ok_or_else(|| LabError::config("spectrum: no matrix file given"))?;
    let g = read_matrix(&path)?;
    let x = cfg.spectrum.input.as_deref().map(read_matrix).transpose()?;
    let text = spectrum_text(x.as_ref(), &g)?;
    print!("{text}");
    write_text(&out.join("spectrum.txt"), &text)?;
    Ok(EXIT_OK)
}
