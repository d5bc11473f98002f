//! File formats: headerless numeric CSV, 0/1 pattern CSV, JSON sidecars and
//! dataset directories.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, MixingMatrix, SupportPattern};
use crate::simulate::SimConfig;
use crate::{Error, Matrix, Result};

pub const X_FILE: &str = "X.csv";
pub const S_FILE: &str = "S.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// One row per line, comma separated, shortest round-trip decimal form.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.len() * 20);
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("line {}: ragged row", lineno + 1)));
            }
        }
        rows.push(row);
    }
    crate::model::matrix_from_rows(&rows)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

pub fn pattern_to_csv(xi: &SupportPattern) -> String {
    let n = xi.n();
    let mut out = String::new();
    for i in 0..n {
        let line: Vec<&str> = (0..n).map(|j| if xi.get(i, j) { "1" } else { "0" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn pattern_from_csv(text: &str) -> Result<SupportPattern> {
    let m = matrix_from_csv(text)?;
    if !m.is_square() {
        return Err(Error::Parse("pattern must be square".into()));
    }
    if m.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Parse("pattern entries must be 0 or 1".into()));
    }
    Ok(SupportPattern::from_fn(m.nrows(), |i, j| m[(i, j)] == 1.0))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// JSON sidecar describing how a dataset was generated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub config: SimConfig,
    pub seed: u64,
    pub a: MixingMatrix,
    pub attempts: usize,
}

/// Writes `X.csv`, `S.csv` (when sources are known) and `truth.json`
/// (when `truth` is given) into `dir`, creating it if needed.
pub fn save_dataset(dir: &Path, data: &Dataset, truth: Option<&Truth>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join(X_FILE), &data.x)?;
    if let Some(s) = &data.true_s {
        write_matrix_csv(&dir.join(S_FILE), s)?;
    }
    if let Some(t) = truth {
        write_json(&dir.join(TRUTH_FILE), t)?;
    }
    Ok(())
}

/// Reads a dataset directory; `S.csv` and `truth.json` are optional.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, Option<Truth>)> {
    let x = read_matrix_csv(&dir.join(X_FILE))?;
    let s_path = dir.join(S_FILE);
    let s = if s_path.exists() {
        Some(read_matrix_csv(&s_path)?)
    } else {
        None
    };
    let t_path = dir.join(TRUTH_FILE);
    let truth: Option<Truth> = if t_path.exists() {
        Some(read_json(&t_path)?)
    } else {
        None
    };
    let ratio = truth.as_ref().map_or(0.0, |t| t.config.gaussian_ratio);
    let data = Dataset::new(x, truth.as_ref().map(|t| t.a.clone()), s, ratio)?;
    Ok((data, truth))
}
