//! Matrix Market files and problem bundles.
//!
//! Matrices and vectors are exchanged as Matrix Market files (array or
//! coordinate format, real, general). A problem bundle is either a directory
//! containing `A.mtx`, `b.mtx` and optionally `B.mtx`, `d.mtx`, or a JSON
//! manifest naming the four files; a missing B/d pair means an unconstrained
//! problem.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::problem::LseProblem;

fn parse_err(path: &Path, msg: impl Into<String>) -> LseError {
    LseError::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Reads a dense matrix from a Matrix Market file (array or coordinate,
/// real or integer, general symmetry).
pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?
        .trim()
        .to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(path, "expected `%%MatrixMarket matrix ...` header"));
    }
    let format = fields[2];
    let field = fields[3];
    let symmetry = fields[4];
    if field != "real" && field != "integer" {
        return Err(parse_err(path, format!("unsupported field `{field}`")));
    }
    if symmetry != "general" {
        return Err(parse_err(path, format!("unsupported symmetry `{symmetry}`")));
    }

    let tokens: Vec<&str> = lines
        .filter(|l| !l.trim_start().starts_with('%'))
        .flat_map(|l| l.split_whitespace())
        .collect();
    let mut pos = 0usize;
    let next_tok = |what: &str, pos: &mut usize| -> Result<&str> {
        let t = tokens
            .get(*pos)
            .ok_or_else(|| parse_err(path, format!("missing {what}")))?;
        *pos += 1;
        Ok(t)
    };
    macro_rules! next_usize {
        ($what:expr) => {
            next_tok($what, &mut pos)?
                .parse::<usize>()
                .map_err(|e| parse_err(path, format!("bad {}: {e}", $what)))?
        };
    }
    macro_rules! next_f64 {
        ($what:expr) => {{
            let t = next_tok($what, &mut pos)?;
            t.parse::<f64>()
                .map_err(|e| parse_err(path, format!("bad value `{t}`: {e}")))?
        }};
    }
    match format {
        "array" => {
            let m = next_usize!("row count");
            let n = next_usize!("column count");
            let mut data = Vec::with_capacity(m * n);
            for _ in 0..m * n {
                data.push(next_f64!("array entry"));
            }
            if pos != tokens.len() {
                return Err(parse_err(path, "trailing data after array entries"));
            }
            // array format is column-major
            Ok(DMatrix::from_vec(m, n, data))
        }
        "coordinate" => {
            let m = next_usize!("row count");
            let n = next_usize!("column count");
            let nnz = next_usize!("nonzero count");
            let mut out = DMatrix::zeros(m, n);
            for _ in 0..nnz {
                let i = next_usize!("row index");
                let j = next_usize!("column index");
                let v = next_f64!("coordinate value");
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(parse_err(path, format!("index ({i}, {j}) out of range")));
                }
                out[(i - 1, j - 1)] = v;
            }
            Ok(out)
        }
        other => Err(parse_err(path, format!("unsupported format `{other}`"))),
    }
}

/// Reads a vector: an m x 1 or 1 x n Matrix Market file.
pub fn read_matrix_market_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_market(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.as_slice()))
    } else if m.nrows() == 1 {
        Ok(m.transpose().column(0).into_owned())
    } else {
        Err(parse_err(
            path,
            format!("expected a vector, got shape {:?}", m.shape()),
        ))
    }
}

/// Writes a dense matrix in array format with 17 significant digits,
/// atomically (write to a temporary sibling, then rename).
pub fn write_matrix_market(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut body = String::from("%%MatrixMarket matrix array real general\n");
    body.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            body.push_str(&format!("{:.16e}\n", m[(i, j)]));
        }
    }
    atomic_write(path, body.as_bytes())
}

/// Writes a vector as an m x 1 array-format file.
pub fn write_matrix_market_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix_market(path, &m)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// JSON manifest naming the four data files; paths are relative to the
/// manifest location. B and d may be omitted for unconstrained problems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(rename = "b")]
    pub rhs: String,
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<String>,
}

/// Loads a problem from a bundle directory or a JSON manifest file.
pub fn load_bundle(path: &Path) -> Result<LseProblem> {
    let (dir, manifest): (PathBuf, BundleManifest) = if path.is_dir() {
        let has = |name: &str| path.join(name).exists();
        (
            path.to_path_buf(),
            BundleManifest {
                a: "A.mtx".into(),
                b: has("B.mtx").then(|| "B.mtx".into()),
                rhs: "b.mtx".into(),
                d: has("d.mtx").then(|| "d.mtx".into()),
            },
        )
    } else {
        let text = fs::read_to_string(path)?;
        let manifest: BundleManifest = serde_json::from_str(&text)
            .map_err(|e| parse_err(path, format!("bad manifest: {e}")))?;
        (
            path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf(),
            manifest,
        )
    };

    let a = read_matrix_market(&dir.join(&manifest.a))?;
    let rhs = read_matrix_market_vector(&dir.join(&manifest.rhs))?;
    let n = a.ncols();
    let (b, d) = match (&manifest.b, &manifest.d) {
        (Some(bp), Some(dp)) => (
            read_matrix_market(&dir.join(bp))?,
            read_matrix_market_vector(&dir.join(dp))?,
        ),
        (None, None) => (DMatrix::zeros(0, n), DVector::zeros(0)),
        _ => {
            return Err(parse_err(
                path,
                "B and d must be given together or both omitted",
            ))
        }
    };
    LseProblem::new(a, b, rhs, d)
}
