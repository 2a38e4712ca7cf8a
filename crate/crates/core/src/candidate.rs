//! Sensor candidate matrix and sensor subsets.
//!
//! Row indices are zero-based everywhere, including matrix files: line `i`
//! of a matrix CSV is candidate `i`.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// The `n x r` candidate matrix. Row `i` is the observation vector of
/// potential sensor location `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CandidateMatrix {
    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("need at least one row and column, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {cols}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn identity(size: usize) -> Result<Self> {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self::from_row_major(size, size, data)
    }

    /// Number of candidate locations `n`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of latent variables `r`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.rows {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, rows: self.rows })
        }
    }

    /// Reads a matrix from CSV: one candidate per line, `r` comma-separated
    /// values, no header. Blank lines are ignored.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::MatrixFile(e.to_string()))?;
            let row = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map_err(|_| {
                        Error::MatrixFile(format!("line {}: cannot parse {field:?} as a number", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::MatrixFile("no rows found".into()));
        }
        Self::from_rows(&rows)
    }

    /// Writes the matrix as CSV with 17 significant digits per entry, which
    /// round-trips every `f64` exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let line = self
                .row(i)
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "{line}")?;
        }
        out.flush()
    }
}

/// Selected row indices in selection order.
///
/// Equality and hashing use the canonical (sorted) form, so two subsets
/// holding the same indices in a different order compare equal.
#[derive(Debug, Clone, Default)]
pub struct SensorSubset {
    indices: Vec<usize>,
}

impl SensorSubset {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates indices against a matrix with `rows` candidates.
    pub fn new(indices: Vec<usize>, rows: usize) -> Result<Self> {
        let mut seen = vec![false; rows];
        for &i in &indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange { index: i, rows });
            }
            if seen[i] {
                return Err(Error::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// Sorted copy of the indices.
    pub fn canonical(&self) -> Vec<usize> {
        let mut c = self.indices.clone();
        c.sort_unstable();
        c
    }

    /// Returns a new subset with `index` appended. The caller guarantees
    /// `index` is valid; duplicates are rejected.
    pub fn with(&self, index: usize) -> Result<Self> {
        if self.contains(index) {
            return Err(Error::DuplicateIndex(index));
        }
        let mut indices = Vec::with_capacity(self.indices.len() + 1);
        indices.extend_from_slice(&self.indices);
        indices.push(index);
        Ok(Self { indices })
    }
}

impl PartialEq for SensorSubset {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }
}

impl Eq for SensorSubset {}

impl std::hash::Hash for SensorSubset {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

impl fmt::Display for SensorSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
