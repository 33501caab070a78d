//! Plain-text matrix files: a `rows cols` header followed by the entries in
//! row-major order, whitespace separated. Lines starting with `#` are
//! comments.

use std::fmt::Write as _;
use std::path::Path;

use spectral_opt_core::Matrix;

use crate::error::{LabError, Result};

pub fn parse_matrix(text: &str) -> std::result::Result<Matrix, String> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    let mut dim = |what: &str| -> std::result::Result<usize, String> {
        let tok = tokens
            .next()
            .ok_or_else(|| format!("missing {what} in header"))?;
        tok.parse().map_err(|_| format!("invalid {what} `{tok}`"))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let data = tokens
        .map(|t| t.parse::<f64>().map_err(|_| format!("invalid entry `{t}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Matrix::new(rows, cols, data).map_err(|e| e.to_string())
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_matrix(&text).map_err(|message| LabError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_rows(&[[1.0 / 3.0, -2.5e-300], [1e300, 0.1]]).unwrap();
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn comments_and_free_layout() {
        let m = parse_matrix("# identity\n2 2\n1 0 0\n1\n").unwrap();
        assert_eq!(m, Matrix::identity(2));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2 2\n1 2 3").is_err());
        assert!(parse_matrix("2 x\n").is_err());
        assert!(parse_matrix("1 1\nnan").is_err());
        assert!(parse_matrix("1 1\nabc").is_err());
    }
}
