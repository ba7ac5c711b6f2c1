//! Static nested sampler with random-walk replacement.
//!
//! Shrinkage is deterministic (`ln X_i = -i / n_live`). Dead-point weights use
//! the trapezoid rule in `(X, L)`, with the first interval weighted by `L_1`
//! alone so that a constant likelihood integrates exactly. When the remaining
//! live evidence bound `ln(1 + X max(L_live) / Z)` drops below `dlogz`, the
//! live points are deposited in ascending likelihood order, each owning
//! `X_final / n_live` of the prior volume.
//!
//! Replacement walks start at a uniformly chosen surviving live point and
//! propose independent Gaussian steps per cube axis, each proportional to the
//! live points' spread along that axis, reflected at the cube faces. Steps
//! along different axes stay uncorrelated: reflection keeps an axis-aligned
//! proposal symmetric, but not a correlated one. One scalar scale multiplies
//! the steps; it is held fixed during a walk and afterwards multiplied by `e^{b/dim}`, where
//! `b ∈ [-1, 1]` is the walk's accept-minus-reject fraction, steering toward
//! 50% acceptance. A walk that accepts nothing halves the scale instead.
//!
//! Randomness: iteration `i` draws from stream `i + 1` of a ChaCha8 generator
//! seeded with the run seed; stream 0 seeds the initial live set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::decompose::Decomposition;
use crate::graph::{logsumexp, Assignment, FactorGraph};
use crate::likelihood::{log_likelihood, LikelihoodSpec};
use crate::priorgen::{build_layout, prior_transform, HypercubeLayout, LayoutError};

/// Consecutive iterations with zero accepted moves before giving up.
pub const PLATEAU_ITERATIONS: usize = 50;
const MIN_SCALE: f64 = 1e-5;
const MAX_SCALE: f64 = 1.0;
const INITIAL_SCALE: f64 = 0.5;
/// Scale multiplier after a walk with no accepted move. The `e^{-1/dim}`
/// rule alone is too slow in high dimension to recover before the plateau
/// diagnostic fires.
const STALL_BACKOFF: f64 = 0.5;
const LOGZ_ERR_FLOOR: f64 = 1e-300;

/// A likelihood over the unit hypercube, reached through a prior transform.
pub trait NestedProblem {
    type Point: Clone;
    fn dim(&self) -> usize;
    /// Maps a point of the open unit cube to parameter space.
    fn transform(&self, u: &[f64]) -> Self::Point;
    fn log_likelihood(&self, p: &Self::Point) -> f64;
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NsConfig {
    pub n_live: usize,
    pub walk_steps: usize,
    pub dlogz: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            n_live: 500,
            walk_steps: 25,
            dlogz: 0.1,
            max_iters: 1_000_000,
            seed: 0,
        }
    }
}

impl NsConfig {
    pub const MIN_LIVE: usize = 10;

    pub fn validate(&self) -> Result<(), NestedError> {
        if self.n_live < Self::MIN_LIVE {
            return Err(NestedError::Config(format!(
                "n_live = {} is below the minimum of {}",
                self.n_live,
                Self::MIN_LIVE
            )));
        }
        if !(self.dlogz > 0.0 && self.dlogz.is_finite()) {
            return Err(NestedError::Config(format!("dlogz = {} must be positive", self.dlogz)));
        }
        if self.walk_steps == 0 {
            return Err(NestedError::Config("walk_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NestedError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("problem has zero dimensions")]
    EmptyProblem,
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(
        "replacement walks stalled: no move above logl = {logl} accepted for {PLATEAU_ITERATIONS} \
         consecutive iterations (iteration {iteration})"
    )]
    Plateau { iteration: usize, logl: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LivePoint<P> {
    pub u: Vec<f64>,
    pub theta: P,
    pub logl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadPoint<P> {
    pub u: Vec<f64>,
    pub theta: P,
    pub logl: f64,
    /// Unnormalized: `logsumexp` over all dead points equals `logz`.
    pub logw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsResult<P> {
    pub dead_points: Vec<DeadPoint<P>>,
    pub logz: f64,
    pub logz_err: f64,
    pub h: f64,
    pub n_calls: usize,
    pub iterations: usize,
    /// False when `max_iters` ran out or the walks stalled before the
    /// stopping rule fired.
    pub converged: bool,
    /// Set when the run was finalized early because replacement stalled.
    pub stall: Option<Stall>,
}

/// Where replacement walks stopped making progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stall {
    pub iteration: usize,
    pub logl: f64,
}

impl<P> NsResult<P> {
    /// `logw_i − logz`, summing to one in probability space.
    pub fn posterior_log_weights(&self) -> Vec<f64> {
        self.dead_points.iter().map(|d| d.logw - self.logz).collect()
    }

    pub fn posterior_weights(&self) -> Vec<f64> {
        self.dead_points.iter().map(|d| (d.logw - self.logz).exp()).collect()
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(e^a − e^b)` for `a > b`.
fn logsubexp(a: f64, b: f64) -> f64 {
    a + (-(b - a).exp()).ln_1p()
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Folds `x` into the open unit interval by reflection at 0 and 1.
fn reflect(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0);
    if y > 1.0 {
        y = 2.0 - y;
    }
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn iteration_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-axis standard deviation of the live points in the cube.
fn live_spread<P>(live: &[LivePoint<P>], dim: usize) -> Vec<f64> {
    let n = live.len() as f64;
    (0..dim)
        .map(|k| {
            let mean = live.iter().map(|p| p.u[k]).sum::<f64>() / n;
            let var = live.iter().map(|p| (p.u[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt().max(1e-12)
        })
        .collect()
}

/// Runs nested sampling on a generic problem. A stall is an error.
pub fn sample<Q: NestedProblem>(problem: &Q, config: &NsConfig) -> Result<NsResult<Q::Point>, NestedError> {
    let r = sample_partial(problem, config)?;
    match r.stall {
        Some(Stall { iteration, logl }) => Err(NestedError::Plateau { iteration, logl }),
        None => Ok(r),
    }
}

/// Like [`sample`], but a stall ends the run normally: the live points are
/// deposited as at convergence and `stall` records where it happened. The
/// evidence is then a lower bound.
pub fn sample_partial<Q: NestedProblem>(problem: &Q, config: &NsConfig) -> Result<NsResult<Q::Point>, NestedError> {
    config.validate()?;
    let dim = problem.dim();
    if dim == 0 {
        return Err(NestedError::EmptyProblem);
    }
    let n = config.n_live;
    let nf = n as f64;

    let mut rng = iteration_rng(config.seed, 0);
    let mut live: Vec<LivePoint<Q::Point>> = (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| open_uniform(&mut rng)).collect();
            let theta = problem.transform(&u);
            let logl = problem.log_likelihood(&theta);
            LivePoint { u, theta, logl }
        })
        .collect();
    let mut n_calls = n;

    let mut dead: Vec<DeadPoint<Q::Point>> = Vec::new();
    let mut logz = f64::NEG_INFINITY;
    let mut prev_logl: Option<f64> = None;
    let mut scale = INITIAL_SCALE;
    let mut idle_iterations = 0;
    let mut converged = false;
    let mut stall = None;
    let step_factor = (1.0 / dim as f64).exp();
    let mut iteration = 0;

    while iteration < config.max_iters {
        let log_x = -(iteration as f64) / nf;
        let max_live = live.iter().map(|p| p.logl).fold(f64::NEG_INFINITY, f64::max);
        let remaining = logaddexp(0.0, log_x + max_live - logz);
        if remaining < config.dlogz {
            converged = true;
            break;
        }
        iteration += 1;

        let worst = live
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.logl.total_cmp(&b.1.logl))
            .map(|(i, _)| i)
            .expect("live set is never empty");
        let l_star = live[worst].logl;
        let log_dx = logsubexp(log_x, -(iteration as f64) / nf);
        let l_prev = prev_logl.unwrap_or(l_star);
        let logw = log_dx + logaddexp(l_prev, l_star) - std::f64::consts::LN_2;
        logz = logaddexp(logz, logw);
        prev_logl = Some(l_star);

        let mut rng = iteration_rng(config.seed, iteration as u64);
        let axis_sd = live_spread(&live, dim);
        let mut start = rng.random_range(0..n - 1);
        if start >= worst {
            start += 1;
        }
        let mut current_u = live[start].u.clone();
        let mut current_theta = live[start].theta.clone();
        let mut current_logl = live[start].logl;
        let mut accepted = 0;
        for _ in 0..config.walk_steps {
            let proposal: Vec<f64> = current_u
                .iter()
                .zip(&axis_sd)
                .map(|(u, sd)| reflect(u + scale * sd * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let theta = problem.transform(&proposal);
            let logl = problem.log_likelihood(&theta);
            n_calls += 1;
            if logl >= l_star {
                current_u = proposal;
                current_theta = theta;
                current_logl = logl;
                accepted += 1;
            }
        }
        // The scale is frozen within a walk so each walk is a valid
        // constrained-uniform kernel.
        let factor = if accepted == 0 {
            STALL_BACKOFF
        } else {
            step_factor.powf((2.0 * accepted as f64 - config.walk_steps as f64) / config.walk_steps as f64)
        };
        scale = (scale * factor).clamp(MIN_SCALE, MAX_SCALE);

        let replacement = LivePoint {
            u: current_u,
            theta: current_theta,
            logl: current_logl,
        };
        let removed = std::mem::replace(&mut live[worst], replacement);
        dead.push(DeadPoint {
            u: removed.u,
            theta: removed.theta,
            logl: removed.logl,
            logw,
        });

        if accepted == 0 {
            idle_iterations += 1;
            if idle_iterations >= PLATEAU_ITERATIONS {
                stall = Some(Stall { iteration, logl: l_star });
                break;
            }
        } else {
            idle_iterations = 0;
        }
    }

    let log_share = -(iteration as f64) / nf - nf.ln();
    live.sort_by(|a, b| a.logl.total_cmp(&b.logl));
    for p in live {
        let logw = p.logl + log_share;
        logz = logaddexp(logz, logw);
        dead.push(DeadPoint {
            u: p.u,
            theta: p.theta,
            logl: p.logl,
            logw,
        });
    }

    let logws: Vec<f64> = dead.iter().map(|d| d.logw).collect();
    logz = logsumexp(&logws);
    let h = dead
        .iter()
        .map(|d| {
            let p = (d.logw - logz).exp();
            if p > 0.0 {
                p * (d.logl - logz)
            } else {
                0.0
            }
        })
        .sum::<f64>();
    let logz_err = (h.max(0.0) / nf).sqrt().max(LOGZ_ERR_FLOOR);

    Ok(NsResult {
        dead_points: dead,
        logz,
        logz_err,
        h,
        n_calls,
        iterations: iteration,
        converged,
        stall,
    })
}

/// Factor-graph sampling problem: ancestral prior over the acyclic factors,
/// likelihood from the loop-closing ones.
pub struct GraphProblem<'a> {
    pub graph: &'a FactorGraph,
    pub layout: HypercubeLayout,
    pub spec: LikelihoodSpec,
}

impl<'a> GraphProblem<'a> {
    pub fn new(graph: &'a FactorGraph, d: &Decomposition) -> Result<Self, LayoutError> {
        let layout = build_layout(d, graph)?;
        let spec = LikelihoodSpec::new(d, &layout);
        Ok(GraphProblem { graph, layout, spec })
    }
}

impl NestedProblem for GraphProblem<'_> {
    type Point = Assignment;

    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn transform(&self, u: &[f64]) -> Assignment {
        prior_transform(u, &self.layout, self.graph)
            .expect("sampler keeps points inside the open cube")
            .assignment
    }

    fn log_likelihood(&self, a: &Assignment) -> f64 {
        log_likelihood(a, &self.spec, self.graph)
    }
}

pub fn run_nested(g: &FactorGraph, d: &Decomposition, config: &NsConfig) -> Result<NsResult<Assignment>, NestedError> {
    let problem = GraphProblem::new(g, d)?;
    sample(&problem, config)
}

/// [`run_nested`] that finalizes a stalled run instead of failing.
pub fn run_nested_partial(g: &FactorGraph, d: &Decomposition, config: &NsConfig) -> Result<NsResult<Assignment>, NestedError> {
    let problem = GraphProblem::new(g, d)?;
    sample_partial(&problem, config)
}

/// Systematic resampling: indices into `weights` (not necessarily
/// normalized), `n` of them, in nondecreasing order.
pub fn systematic_indices(weights: &[f64], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(!weights.is_empty(), "cannot resample from an empty set");
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0 && total.is_finite(), "weights must have positive finite mass");
    let offset: f64 = rng.random();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0] / total;
    let mut i = 0;
    let last = weights.len() - 1;
    for k in 0..n {
        let pos = (k as f64 + offset) / n as f64;
        while pos >= cum && i < last {
            i += 1;
            cum += weights[i] / total;
        }
        out.push(i);
    }
    out
}

/// Draws `n` equally weighted points from a weighted run.
pub fn resample_equal<P: Clone>(result: &NsResult<P>, n: usize, seed: u64) -> Vec<P> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    systematic_indices(&result.posterior_weights(), n, &mut rng)
        .into_iter()
        .map(|i| result.dead_points[i].theta.clone())
        .collect()
}
