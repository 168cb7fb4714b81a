//! Matrices on disk: JSON objects `{"re": [[...]], "im": [[...]]}`, rows first.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use specflow::matcore::ComplexMatrix;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

pub fn parse(text: &str) -> Result<ComplexMatrix, String> {
    let m: MatrixFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let n = m.re.len();
    if n == 0 || m.re.iter().any(|row| row.len() != n) {
        return Err("matrix must be square and non-empty".into());
    }
    if let Some(im) = &m.im {
        if im.len() != n || im.iter().any(|row| row.len() != n) {
            return Err("`im` must have the same shape as `re`".into());
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::new(m.re[i][j], m.im.as_ref().map_or(0.0, |im| im[i][j]))
    }))
}

pub fn load(path: &Path) -> Result<ComplexMatrix, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}
