//! Sampling log-likelihood: loop-closing factors plus polar-draw corrections.

use crate::decompose::Decomposition;
use crate::graph::{Assignment, FactorGraph, FactorId};
use crate::priorgen::{segment_correction, HypercubeLayout, Segment};

/// Finite stand-in for `-inf`, keeping likelihoods totally ordered.
pub const LOG_FLOOR: f64 = -1e300;

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodSpec {
    pub lc_factors: Vec<FactorId>,
    /// Acyclic range draws whose polar correction enters the likelihood.
    pub ac_ranges: Vec<Segment>,
}

impl LikelihoodSpec {
    pub fn new(d: &Decomposition, layout: &HypercubeLayout) -> Self {
        LikelihoodSpec {
            lc_factors: d.lc.clone(),
            ac_ranges: layout.range_segments().cloned().collect(),
        }
    }

    pub fn ac_range_factors(&self) -> impl Iterator<Item = FactorId> + '_ {
        self.ac_ranges.iter().map(|s| s.factor)
    }
}

pub fn log_likelihood(a: &Assignment, spec: &LikelihoodSpec, g: &FactorGraph) -> f64 {
    let lc: f64 = spec.lc_factors.iter().map(|&id| g.factor(id).log_density(a)).sum();
    let corr: f64 = spec.ac_ranges.iter().map(|s| segment_correction(s, a)).sum();
    let l = lc + corr;
    if l.is_nan() {
        LOG_FLOOR
    } else {
        l.max(LOG_FLOOR)
    }
}
