//! CSV and report writers. Absent values are written as empty fields.

use std::io::Write;
use std::path::Path;

use spectral_opt_core::theory::{RunTrace, TraceRecord};

use crate::error::{LabError, Result};

pub const THEORY_TRACE_HEADER: [&str; 9] = [
    "step",
    "loss",
    "gap",
    "r_t",
    "eta",
    "alpha_tilde",
    "beta_tilde",
    "grad_fro",
    "param_fro",
];

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn theory_fields(r: &TraceRecord) -> Vec<String> {
    vec![
        r.step.to_string(),
        r.loss.to_string(),
        opt(r.gap),
        opt(r.r_t),
        opt(r.eta),
        opt(r.alpha_tilde),
        opt(r.beta_tilde),
        opt(r.grad_fro),
        opt(r.param_fro),
    ]
}

/// Trace with the quadratic-run schema.
pub fn write_theory_trace<W: Write>(out: W, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(THEORY_TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record(theory_fields(r))?;
    }
    w.flush().map_err(|e| LabError::Csv(e.into()))?;
    Ok(())
}

/// Trace with the network schema: the quadratic columns plus `val_acc` and
/// `epoch`.
pub fn write_nn_trace<W: Write>(out: W, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = THEORY_TRACE_HEADER.to_vec();
    header.extend(["val_acc", "epoch"]);
    w.write_record(&header)?;
    for r in &trace.records {
        let mut row = theory_fields(r);
        row.push(opt(r.val_acc));
        row.push(opt_usize(r.epoch));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| LabError::Csv(e.into()))?;
    Ok(())
}

/// Writes a table given its header and rows.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| LabError::Csv(e.into()))?;
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| LabError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use spectral_opt_core::theory::Termination;

    fn trace() -> RunTrace {
        RunTrace {
            records: vec![
                TraceRecord {
                    step: 0,
                    loss: 2.0,
                    gap: Some(2.0),
                    ..TraceRecord::default()
                },
                TraceRecord {
                    step: 1,
                    loss: 1.0,
                    gap: Some(1.0),
                    r_t: Some(0.5),
                    eta: Some(0.25),
                    val_acc: Some(0.75),
                    epoch: Some(1),
                    ..TraceRecord::default()
                },
            ],
            termination: Termination::Completed,
        }
    }

    #[test]
    fn theory_schema_leaves_absent_ratio_empty() {
        let mut buf = Vec::new();
        write_theory_trace(&mut buf, &trace()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "step,loss,gap,r_t,eta,alpha_tilde,beta_tilde,grad_fro,param_fro"
        );
        assert_eq!(lines[1], "0,2,2,,,,,,");
        assert_eq!(lines[2], "1,1,1,0.5,0.25,,,,");
    }

    #[test]
    fn nn_schema_appends_accuracy_and_epoch() {
        let mut buf = Vec::new();
        write_nn_trace(&mut buf, &trace()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "step,loss,gap,r_t,eta,alpha_tilde,beta_tilde,grad_fro,param_fro,val_acc,epoch\n"
        ));
        assert!(text.lines().nth(2).unwrap().ends_with(",0.75,1"));
    }
}
