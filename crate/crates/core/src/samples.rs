//! Weighted sample sets over flattened assignments, and their CSV form.
//!
//! Header: `logw,<var>.<component>,...` in variable declaration order.
//! `logw` is the log of the normalized weight; equal-weight sets use `-ln n`.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Assignment, FactorGraph};
use crate::nested::{systematic_indices, NsResult};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("sample file is empty")]
    Empty,
    #[error("sample header must start with `logw`")]
    MissingWeightColumn,
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("row {row}: cannot parse {value:?} as a number")]
    BadNumber { row: usize, value: String },
    #[error("weights have no finite mass")]
    DegenerateWeights,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
    logw: Vec<f64>,
}

/// Whether a column label names a heading angle.
pub fn is_angle_label(label: &str) -> bool {
    label.ends_with(".theta")
}

impl SampleMatrix {
    /// Builds a set from rows and unnormalized log-weights; weights are
    /// normalized on construction.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>, logw: Vec<f64>) -> Result<Self, SampleError> {
        if rows.is_empty() {
            return Err(SampleError::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != labels.len() {
                return Err(SampleError::RowWidth {
                    row: i + 1,
                    expected: labels.len(),
                    found: r.len(),
                });
            }
        }
        assert_eq!(rows.len(), logw.len(), "one weight per row");
        let total = crate::graph::logsumexp(&logw);
        if !total.is_finite() {
            return Err(SampleError::DegenerateWeights);
        }
        let logw = logw.into_iter().map(|w| w - total).collect();
        Ok(SampleMatrix { labels, rows, logw })
    }

    pub fn equal_weight(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, SampleError> {
        let lw = -(rows.len() as f64).ln();
        let logw = vec![lw; rows.len()];
        Self::new(labels, rows, logw)
    }

    pub fn from_assignments(g: &FactorGraph, draws: &[Assignment]) -> Result<Self, SampleError> {
        Self::equal_weight(g.component_labels(), draws.iter().map(Assignment::flatten).collect())
    }

    pub fn from_nested(g: &FactorGraph, result: &NsResult<Assignment>) -> Result<Self, SampleError> {
        let rows = result.dead_points.iter().map(|d| d.theta.flatten()).collect();
        Self::new(g.component_labels(), rows, result.posterior_log_weights())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn logw(&self) -> &[f64] {
        &self.logw
    }

    pub fn weights(&self) -> Vec<f64> {
        self.logw.iter().map(|w| w.exp()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }

    pub fn angle_columns(&self) -> Vec<bool> {
        self.labels.iter().map(|l| is_angle_label(l)).collect()
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Systematic resampling to `n` equally weighted rows.
    pub fn resample(&self, n: usize, seed: u64) -> SampleMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = systematic_indices(&self.weights(), n, &mut rng)
            .into_iter()
            .map(|i| self.rows[i].clone())
            .collect();
        Self::equal_weight(self.labels.clone(), rows).expect("resampled set is nonempty")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SampleError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("logw").chain(self.labels.iter().map(String::as_str)))?;
        for (row, lw) in self.rows.iter().zip(&self.logw) {
            out.write_record(std::iter::once(lw).chain(row).map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SampleError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(r);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("logw") {
            return Err(SampleError::MissingWeightColumn);
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut logw = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != labels.len() + 1 {
                return Err(SampleError::RowWidth {
                    row,
                    expected: labels.len() + 1,
                    found: record.len(),
                });
            }
            let mut values = record.iter().map(|f| {
                f.trim().parse::<f64>().map_err(|_| SampleError::BadNumber {
                    row,
                    value: f.to_string(),
                })
            });
            logw.push(values.next().expect("width checked")?);
            rows.push(values.collect::<Result<Vec<f64>, _>>()?);
        }
        Self::new(labels, rows, logw)
    }
}
