use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Binary,
    Real,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataKind::Binary => "binary",
            DataKind::Real => "real",
        })
    }
}

impl FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(DataKind::Binary),
            "real" => Ok(DataKind::Real),
            other => Err(Error::Config(format!("unknown data kind `{other}`"))),
        }
    }
}

/// Train/valid/test splits of fixed-width rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub dim: usize,
    pub kind: DataKind,
    pub train: Vec<Vec<f64>>,
    pub valid: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset after checking widths and (for binary data) values.
    pub fn new(
        name: impl Into<String>,
        kind: DataKind,
        train: Vec<Vec<f64>>,
        valid: Vec<Vec<f64>>,
        test: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let dim = train
            .first()
            .or(valid.first())
            .or(test.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Dataset("dataset has no rows".into()))?;
        for rows in [&train, &valid, &test] {
            validate_rows(rows, dim, kind)?;
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            kind,
            train,
            valid,
            test,
        })
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

/// Checks every row has width `dim` and finite (binary: 0/1) entries.
/// Rows and columns are reported 1-based.
pub fn validate_rows(rows: &[Vec<f64>], dim: usize, kind: DataKind) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Data {
                row: r + 1,
                col: row.len().min(dim) + 1,
                msg: format!("expected {dim} columns, found {}", row.len()),
            });
        }
        for (c, &v) in row.iter().enumerate() {
            let bad = match kind {
                DataKind::Binary => v != 0.0 && v != 1.0,
                DataKind::Real => !v.is_finite(),
            };
            if bad {
                return Err(Error::Data {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("value {v} is not valid {kind} data"),
                });
            }
        }
    }
    Ok(())
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|s| !s.is_empty())
}

/// Parses numeric text: one example per line, fields separated by whitespace,
/// commas or semicolons. Blank lines and lines starting with `#` are skipped.
pub fn parse_rows(text: &str, kind: DataKind) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::with_capacity(dim.unwrap_or(0));
        for (c, tok) in split_fields(line).enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Data {
                row: ln + 1,
                col: c + 1,
                msg: format!("`{tok}` is not a number"),
            })?;
            let bad = match kind {
                DataKind::Binary => v != 0.0 && v != 1.0,
                DataKind::Real => !v.is_finite(),
            };
            if bad {
                return Err(Error::Data {
                    row: ln + 1,
                    col: c + 1,
                    msg: format!("value {tok} is not valid {kind} data"),
                });
            }
            row.push(v);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Data {
                    row: ln + 1,
                    col: row.len().min(d) + 1,
                    msg: format!("ragged row: expected {d} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }
    Ok(rows)
}

pub fn load_rows(path: &Path, kind: DataKind) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text, kind).map_err(|e| match e {
        Error::Dataset(msg) => Error::Dataset(format!("{}: {msg}", path.display())),
        other => other,
    })
}

const SPLIT_EXTENSIONS: [&str; 5] = ["", ".txt", ".csv", ".amat", ".dat"];

fn find_split(dir: &Path, split: &str) -> Option<std::path::PathBuf> {
    SPLIT_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{split}{ext}")))
        .find(|p| p.is_file())
}

/// Loads a dataset from a file (all rows become the training split) or from a
/// directory holding `train`, and optionally `valid` and `test`, files with
/// an optional `.txt`, `.csv`, `.amat` or `.dat` extension.
pub fn load_dataset(path: &Path, kind: DataKind) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    if path.is_dir() {
        let train_path = find_split(path, "train")
            .ok_or_else(|| Error::Dataset(format!("{} has no train file", path.display())))?;
        let train = load_rows(&train_path, kind)?;
        let other = |split: &str| -> Result<Vec<Vec<f64>>> {
            match find_split(path, split) {
                Some(p) => load_rows(&p, kind),
                None => Ok(Vec::new()),
            }
        };
        let valid = other("valid")?;
        let test = other("test")?;
        Dataset::new(name, kind, train, valid, test)
    } else {
        let rows = load_rows(path, kind)?;
        Dataset::new(name, kind, rows, Vec::new(), Vec::new())
    }
}
