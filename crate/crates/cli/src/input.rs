//! Delimited-text matrix ingestion.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ndarray::Array2;
use pcskew::matrix::{self, DataMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Cells treated as missing rather than malformed.
const MISSING_TOKENS: [&str; 6] = ["", "na", "nan", "null", "?", "."];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}, column {column}: cannot parse `{token}` as a finite number")]
    Parse { line: usize, column: usize, token: String },
    #[error("line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("missing value at line {line}, column {column}")]
    MissingValue { line: usize, column: usize },
    #[error("input contains no data rows")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    /// Comma if the first data line has one, else tab, else whitespace.
    Auto,
    Comma,
    Tab,
    /// Any run of spaces or tabs.
    Space,
}

impl Delimiter {
    fn resolve(self, line: &str) -> Delimiter {
        match self {
            Delimiter::Auto if line.contains(',') => Delimiter::Comma,
            Delimiter::Auto if line.contains('\t') => Delimiter::Tab,
            Delimiter::Auto => Delimiter::Space,
            other => other,
        }
    }

    fn split<'a>(self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            _ => line.split_whitespace().collect(),
        }
    }
}

/// Which way observations run in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// One observation per line.
    Rows,
    /// One observation per column.
    Columns,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Rows => "rows",
            Orientation::Columns => "columns",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOptions {
    pub delimiter: Delimiter,
    /// `None` reads rows as observations and warns when that looks transposed.
    pub orientation: Option<Orientation>,
    pub header: bool,
    pub center: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Auto,
            orientation: None,
            header: false,
            center: false,
        }
    }
}

/// Identifies the exact input of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub path: String,
    pub n: usize,
    pub d: usize,
    /// SHA-256 of the raw file bytes, lowercase hex.
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub matrix: DataMatrix,
    pub fingerprint: Fingerprint,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a delimited numeric table with rows as written in the file.
///
/// Blank lines and lines starting with `#` are skipped. Reported line
/// numbers are 1-based positions in the text, columns are 1-based fields.
pub fn parse_table(text: &str, delimiter: Delimiter, header: bool) -> Result<Array2<f64>, InputError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    if header {
        lines.next();
    }
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    let mut resolved = None;
    for (line_no, line) in lines {
        let delim = *resolved.get_or_insert_with(|| delimiter.resolve(line));
        let fields = delim.split(line);
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(InputError::RaggedRows {
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        for (c, token) in fields.iter().enumerate() {
            if MISSING_TOKENS.contains(&token.to_ascii_lowercase().as_str()) {
                return Err(InputError::MissingValue {
                    line: line_no,
                    column: c + 1,
                });
            }
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(InputError::Parse {
                        line: line_no,
                        column: c + 1,
                        token: token.to_string(),
                    })
                }
            }
        }
        rows += 1;
    }
    let width = width.ok_or(InputError::EmptyInput)?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("rectangular by construction"))
}

/// Reads a matrix file and normalizes it to rows-are-observations.
pub fn read_matrix(path: &Path, options: &ReadOptions) -> Result<LoadedMatrix, InputError> {
    let bytes = std::fs::read(path).map_err(|e| InputError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let table = parse_table(&text, options.delimiter, options.header)?;
    let table = match options.orientation {
        Some(Orientation::Columns) => table.reversed_axes().as_standard_layout().into_owned(),
        _ => table,
    };
    let mut matrix = DataMatrix::new(table).map_err(|_| InputError::EmptyInput)?;
    let mut warnings = Vec::new();
    if options.orientation.is_none() && matrix.n() > matrix.d() {
        let w = format!(
            "read {} observations of {} variables (n > d); if observations are columns pass --orientation columns, \
             otherwise pass --orientation rows to confirm",
            matrix.n(),
            matrix.d()
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    if options.center {
        matrix = matrix::center_columns(&matrix);
    }
    Ok(LoadedMatrix {
        fingerprint: Fingerprint {
            path: path.display().to_string(),
            n: matrix.n(),
            d: matrix.d(),
            sha256: sha256_hex(&bytes),
        },
        matrix,
        warnings,
    })
}
