//! Data-association hypotheses: fix every ambiguous range to one candidate,
//! weight each fixed graph by its evidence, and mix the posteriors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::decompose::{decompose, DecomposeError};
use crate::graph::{logsumexp, Assignment, FactorGraph, FactorId, FactorKind};
use crate::nested::{resample_equal, run_nested_partial, systematic_indices, NestedError, NsConfig, NsResult, Stall};

/// Upper bound on the number of enumerated hypotheses.
pub const MAX_HYPOTHESES: usize = 4096;
/// Largest weight a stalled hypothesis may carry.
pub const STALL_WEIGHT_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error("graph has no ambiguous range factors")]
    NoAmbiguity,
    #[error("{count} hypotheses exceed the limit of {MAX_HYPOTHESES}")]
    TooMany { count: u128 },
    #[error("hypothesis {index}: {source}")]
    Decompose { index: usize, source: DecomposeError },
    #[error("hypothesis {index}: {source}")]
    Nested { index: usize, source: NestedError },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// One fixed association and the graph it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Chosen candidate variable per ambiguous factor, in factor id order.
    pub choices: Vec<(FactorId, usize)>,
    pub graph: FactorGraph,
}

impl Hypothesis {
    /// Human-readable association, e.g. `f3=l1;f4=l0`.
    pub fn label(&self) -> String {
        self.choices
            .iter()
            .map(|(f, v)| format!("{f}={}", self.graph.var_name(*v)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Cartesian product over the candidates of every ambiguous factor, with the
/// last factor's choice varying fastest.
pub fn enumerate_hypotheses(g: &FactorGraph) -> Result<Vec<Hypothesis>, HypothesisError> {
    let ambiguous: Vec<(FactorId, Vec<usize>)> = g
        .factors()
        .iter()
        .filter(|f| matches!(f.kind, FactorKind::AmbiguousRange { .. }))
        .map(|f| (f.id, f.candidates().to_vec()))
        .collect();
    if ambiguous.is_empty() {
        return Err(HypothesisError::NoAmbiguity);
    }
    let count = ambiguous
        .iter()
        .fold(1u128, |acc, (_, c)| acc.saturating_mul(c.len() as u128));
    if count > MAX_HYPOTHESES as u128 {
        return Err(HypothesisError::TooMany { count });
    }

    let mut out = Vec::with_capacity(count as usize);
    let mut index = vec![0usize; ambiguous.len()];
    loop {
        let mut graph = g.clone();
        let mut choices = Vec::with_capacity(ambiguous.len());
        for ((id, cands), &k) in ambiguous.iter().zip(&index) {
            let f = g.factor(*id);
            let FactorKind::AmbiguousRange { z, sigma } = f.kind else {
                unreachable!("filtered above")
            };
            graph = graph.with_factor_replaced(*id, vec![f.vars[0], cands[k]], FactorKind::Range { z, sigma });
            choices.push((*id, cands[k]));
        }
        out.push(Hypothesis { choices, graph });

        let mut pos = ambiguous.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < ambiguous[pos].1.len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Softmax of the log-evidences.
pub fn hypothesis_weights(logzs: &[f64]) -> Vec<f64> {
    let total = logsumexp(logzs);
    logzs.iter().map(|z| (z - total).exp()).collect()
}

/// Draws `n` points from the weighted mixture of per-hypothesis posteriors.
///
/// Draw counts come from systematic resampling on `weights`; hypothesis `j`
/// then contributes `resample_equal(results[j], count_j, seed + j)`.
pub fn mix_posteriors<P: Clone>(results: &[NsResult<P>], weights: &[f64], n: usize, seed: u64) -> Vec<P> {
    assert_eq!(results.len(), weights.len(), "one weight per hypothesis");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut counts = vec![0usize; results.len()];
    for j in systematic_indices(weights, n, &mut rng) {
        counts[j] += 1;
    }
    results
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .flat_map(|(j, (r, &c))| resample_equal(r, c, seed.wrapping_add(j as u64)))
        .collect()
}

/// Solved hypothesis set. All vectors are in enumeration order.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub hypotheses: Vec<Hypothesis>,
    pub results: Vec<NsResult<Assignment>>,
    pub logzs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HypothesisSet {
    pub fn mixture(&self, n: usize, seed: u64) -> Vec<Assignment> {
        mix_posteriors(&self.results, &self.weights, n, seed)
    }
}

/// Enumerates and solves every hypothesis with the same sampler settings,
/// using up to `jobs` worker threads. Output does not depend on `jobs`.
///
/// A hypothesis whose walks stall keeps its partial run. Its evidence is then
/// only a lower bound, so the set is rejected if such a hypothesis carries
/// more than [`STALL_WEIGHT_TOL`] of the weight.
pub fn solve_hypotheses(g: &FactorGraph, config: &NsConfig, jobs: usize) -> Result<HypothesisSet, HypothesisError> {
    let hypotheses = enumerate_hypotheses(g)?;
    let solve = |(index, h): (usize, &Hypothesis)| -> Result<NsResult<Assignment>, HypothesisError> {
        let d = decompose(&h.graph).map_err(|source| HypothesisError::Decompose { index, source })?;
        run_nested_partial(&h.graph, &d, config).map_err(|source| HypothesisError::Nested { index, source })
    };
    let results: Vec<NsResult<Assignment>> = if jobs <= 1 {
        hypotheses.iter().enumerate().map(solve).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HypothesisError::Pool(e.to_string()))?;
        pool.install(|| hypotheses.par_iter().enumerate().map(solve).collect::<Result<_, _>>())?
    };
    let logzs: Vec<f64> = results.iter().map(|r| r.logz).collect();
    let weights = hypothesis_weights(&logzs);
    for (index, (r, w)) in results.iter().zip(&weights).enumerate() {
        if let Some(Stall { iteration, logl }) = r.stall {
            if *w > STALL_WEIGHT_TOL {
                return Err(HypothesisError::Nested {
                    index,
                    source: NestedError::Plateau { iteration, logl },
                });
            }
        }
    }
    Ok(HypothesisSet {
        hypotheses,
        results,
        logzs,
        weights,
    })
}
