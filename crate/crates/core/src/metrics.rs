//! Sample-set comparisons: weighted means, RMSE, and kernel MMD.
//!
//! Heading columns (labels ending in `.theta`) are circular: their mean is the
//! direction of the summed unit vectors, differences are wrapped, and they
//! enter the MMD kernel as `(cos θ, sin θ)`.

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::wrap_angle;
use crate::graph::{Assignment, FactorGraph};
use crate::samples::{is_angle_label, SampleMatrix};

/// Rows each set is resampled to before an MMD comparison.
pub const MMD_ROWS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("column labels differ")]
    LabelMismatch,
    #[error("circular mean of column {0} is undefined (zero resultant length)")]
    UndefinedMean(String),
}

/// A labelled point estimate, such as a sample mean or a MAP assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl Estimate {
    pub fn from_assignment(g: &FactorGraph, a: &Assignment) -> Self {
        Estimate {
            labels: g.component_labels(),
            values: a.flatten(),
        }
    }

    /// Restricts to the named columns, in the given order.
    pub fn select(&self, labels: &[String]) -> Option<Estimate> {
        let values = labels
            .iter()
            .map(|l| self.labels.iter().position(|m| m == l).map(|k| self.values[k]))
            .collect::<Option<Vec<f64>>>()?;
        Some(Estimate {
            labels: labels.to_vec(),
            values,
        })
    }
}

pub fn sample_mean(s: &SampleMatrix) -> Result<Estimate, MetricsError> {
    let w = s.weights();
    let total: f64 = w.iter().sum();
    let values = s
        .labels()
        .iter()
        .enumerate()
        .map(|(k, label)| {
            if is_angle_label(label) {
                let (mut sn, mut cs) = (0.0, 0.0);
                for (row, wi) in s.rows().iter().zip(&w) {
                    sn += wi * row[k].sin();
                    cs += wi * row[k].cos();
                }
                if sn.hypot(cs) <= 1e-12 * total {
                    return Err(MetricsError::UndefinedMean(label.clone()));
                }
                Ok(sn.atan2(cs))
            } else {
                Ok(s.rows().iter().zip(&w).map(|(row, wi)| wi * row[k]).sum::<f64>() / total)
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Estimate {
        labels: s.labels().to_vec(),
        values,
    })
}

/// Root mean squared componentwise difference, with wrapped angle errors.
pub fn rmse(estimate: &Estimate, reference: &Estimate) -> Result<f64, MetricsError> {
    if estimate.labels != reference.labels {
        return Err(MetricsError::LabelMismatch);
    }
    let d = estimate.values.len() as f64;
    let sq: f64 = estimate
        .labels
        .iter()
        .zip(estimate.values.iter().zip(&reference.values))
        .map(|(label, (a, b))| {
            let delta = if is_angle_label(label) { wrap_angle(a - b) } else { a - b };
            delta * delta
        })
        .sum();
    Ok((sq / d).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdReport {
    pub mmd: f64,
    /// Squared kernel length scale `ℓ²`.
    pub bandwidth_sq: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Kernel features: translations as-is, headings as `(cos, sin)`.
fn features(s: &SampleMatrix) -> Vec<Vec<f64>> {
    let angles = s.angle_columns();
    s.rows()
        .iter()
        .map(|row| {
            let mut f = Vec::with_capacity(row.len() + angles.iter().filter(|&&a| a).count());
            for (v, &is_angle) in row.iter().zip(&angles) {
                if is_angle {
                    f.push(v.cos());
                    f.push(v.sin());
                } else {
                    f.push(*v);
                }
            }
            f
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of squared distances over all unordered pairs of `pts`.
fn median_sq_distance(pts: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| ((i + 1)..pts.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&pts[i], &pts[j]))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, &mut upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Mean kernel value over all pairs; rows are reduced in index order.
fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], inv_two_l2: f64) -> f64 {
    let row_sums: Vec<f64> = a
        .par_iter()
        .map(|x| b.iter().map(|y| (-sq_dist(x, y) * inv_two_l2).exp()).sum::<f64>())
        .collect();
    row_sums.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// Biased MMD with an RBF kernel of squared length scale `bandwidth_sq`.
/// Rows are treated as equally weighted.
pub fn mmd_with_bandwidth(a: &SampleMatrix, b: &SampleMatrix, bandwidth_sq: f64) -> Result<f64, MetricsError> {
    if a.labels() != b.labels() {
        return Err(MetricsError::LabelMismatch);
    }
    if bandwidth_sq <= 0.0 {
        return Ok(0.0);
    }
    let (fa, fb) = (features(a), features(b));
    let inv = 0.5 / bandwidth_sq;
    let m2 = mean_kernel(&fa, &fa, inv) + mean_kernel(&fb, &fb, inv) - 2.0 * mean_kernel(&fa, &fb, inv);
    Ok(m2.max(0.0).sqrt())
}

/// Biased MMD with the pooled median heuristic for the bandwidth.
pub fn mmd(a: &SampleMatrix, b: &SampleMatrix) -> Result<MmdReport, MetricsError> {
    if a.labels() != b.labels() {
        return Err(MetricsError::LabelMismatch);
    }
    let pooled: Vec<Vec<f64>> = features(a).into_iter().chain(features(b)).collect();
    let bandwidth_sq = median_sq_distance(&pooled);
    Ok(MmdReport {
        mmd: mmd_with_bandwidth(a, b, bandwidth_sq)?,
        bandwidth_sq,
        n_a: a.n_rows(),
        n_b: b.n_rows(),
    })
}

/// Resamples both sets to [`MMD_ROWS`] equally weighted rows, then compares.
pub fn mmd_resampled(a: &SampleMatrix, b: &SampleMatrix, seed: u64) -> Result<MmdReport, MetricsError> {
    mmd(&a.resample(MMD_ROWS, seed), &b.resample(MMD_ROWS, seed.wrapping_add(1)))
}
