//! Gauss-Newton MAP estimation and the Laplace approximation around it.
//!
//! The state is the tangent-space stacking of all variables in declaration
//! order: three coordinates per pose (right perturbation `x · exp(δ)`), two per
//! point (additive). Residuals are whitened, so the objective is `½ Σ ‖e‖²`
//! and the information matrix is `JᵀJ`.

use nalgebra::{DMatrix, DVector, Matrix2x3, SMatrix, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::decompose::{decompose, DecomposeError};
use crate::geom::{se2_between, se2_left_jacobian_inv, se2_log, se2_right_jacobian_inv, Point2, TangentVec3};
use crate::graph::{Assignment, Factor, FactorGraph, FactorId, FactorKind, GraphError, Value, VarKind};
use crate::priorgen::{build_layout, prior_transform, LayoutError};

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("factor {0} is a mixture and has no least-squares form")]
    Ambiguous(FactorId),
    #[error("normal equations are singular; the graph is under-determined")]
    Singular,
    #[error("information matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("MAP estimate did not converge")]
    NotConverged,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub assignment: Assignment,
    /// `JᵀJ` over the tangent stacking, evaluated at `assignment`.
    pub info: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `½ Σ ‖e‖²` at `assignment`.
    pub cost: f64,
}

/// Whitened residual of one factor and its Jacobian blocks, one per variable
/// in `factor.vars` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub residual: DVector<f64>,
    pub blocks: Vec<(usize, DMatrix<f64>)>,
}

fn dyn_mat<const R: usize, const C: usize>(m: SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// `∂ translation / ∂ tangent` for a variable under its retraction.
fn translation_jacobian(a: &Assignment, var: usize) -> DMatrix<f64> {
    match a.get(var) {
        Value::Pose(p) => {
            let r = p.rotation_matrix();
            dyn_mat(Matrix2x3::new(r[(0, 0)], r[(0, 1)], 0.0, r[(1, 0)], r[(1, 1)], 0.0))
        }
        Value::Point(_) => DMatrix::identity(2, 2),
    }
}

/// Whitened residual of a least-squares factor.
pub fn whitened_residual(f: &Factor, a: &Assignment) -> Result<DVector<f64>, LaplaceError> {
    Ok(linearize_impl(f, a, false)?.residual)
}

/// Whitened residual and analytic Jacobian of a least-squares factor.
pub fn linearize(f: &Factor, a: &Assignment) -> Result<Linearization, LaplaceError> {
    linearize_impl(f, a, true)
}

fn linearize_impl(f: &Factor, a: &Assignment, jacobians: bool) -> Result<Linearization, LaplaceError> {
    let mut blocks = Vec::new();
    let residual = match &f.kind {
        FactorKind::PriorPose2 { mean, noise } => {
            let r = se2_log(&se2_between(mean, &a.pose(f.vars[0])));
            if jacobians {
                blocks.push((f.vars[0], dyn_mat(noise.sqrt_info() * se2_right_jacobian_inv(r))));
            }
            DVector::from_column_slice(noise.whiten(&r.to_vector()).as_slice())
        }
        FactorKind::PriorPoint2 { mean, noise } => {
            let r = a.point(f.vars[0]).to_vector() - mean.to_vector();
            if jacobians {
                blocks.push((f.vars[0], dyn_mat(*noise.sqrt_info())));
            }
            DVector::from_column_slice(noise.whiten(&r).as_slice())
        }
        FactorKind::OdometryPose2 { rel, noise } => {
            let (xi, xj) = (a.pose(f.vars[0]), a.pose(f.vars[1]));
            let r = se2_log(&se2_between(rel, &se2_between(&xi, &xj)));
            if jacobians {
                let w = noise.sqrt_info();
                let ji = -se2_left_jacobian_inv(r) * rel.inverse().adjoint();
                blocks.push((f.vars[0], dyn_mat(w * ji)));
                blocks.push((f.vars[1], dyn_mat(w * se2_right_jacobian_inv(r))));
            }
            DVector::from_column_slice(noise.whiten(&r.to_vector()).as_slice())
        }
        FactorKind::Range { z, sigma } => {
            let (ta, tb) = (a.translation(f.vars[0]), a.translation(f.vars[1]));
            let d = ta.distance(tb);
            if jacobians {
                let dir = if d > 0.0 {
                    Vector2::new(tb.x - ta.x, tb.y - ta.y) / d
                } else {
                    Vector2::new(1.0, 0.0)
                };
                let row = DMatrix::from_row_slice(1, 2, &[dir.x / sigma, dir.y / sigma]);
                blocks.push((f.vars[0], -&row * translation_jacobian(a, f.vars[0])));
                blocks.push((f.vars[1], &row * translation_jacobian(a, f.vars[1])));
            }
            DVector::from_element(1, (d - z) / sigma)
        }
        FactorKind::AmbiguousRange { .. } => return Err(LaplaceError::Ambiguous(f.id)),
    };
    Ok(Linearization { residual, blocks })
}

/// Tangent offset of each variable in the stacked state.
pub fn tangent_offsets(g: &FactorGraph) -> Vec<usize> {
    let mut offset = 0;
    g.variables()
        .iter()
        .map(|v| {
            let o = offset;
            offset += v.kind.dim();
            o
        })
        .collect()
}

fn cost(g: &FactorGraph, a: &Assignment) -> Result<f64, LaplaceError> {
    let mut c = 0.0;
    for f in g.factors() {
        c += 0.5 * whitened_residual(f, a)?.norm_squared();
    }
    Ok(c)
}

/// Normal-equation terms `(JᵀJ, Jᵀe)` at `a`.
fn normal_equations(g: &FactorGraph, a: &Assignment, offsets: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>), LaplaceError> {
    let n = g.dim();
    let mut h = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for f in g.factors() {
        let lin = linearize(f, a)?;
        for (vi, ji) in &lin.blocks {
            let oi = offsets[*vi];
            let jte = ji.transpose() * &lin.residual;
            let mut rows = b.rows_mut(oi, ji.ncols());
            rows += &jte;
            for (vj, jj) in &lin.blocks {
                let oj = offsets[*vj];
                let block = ji.transpose() * jj;
                let mut view = h.view_mut((oi, oj), (ji.ncols(), jj.ncols()));
                view += &block;
            }
        }
    }
    Ok((h, b))
}

/// Applies a stacked tangent update to every variable.
pub fn retract_all(a: &Assignment, delta: &DVector<f64>, offsets: &[usize]) -> Assignment {
    let values = a
        .values()
        .iter()
        .zip(offsets)
        .map(|(v, &o)| match v {
            Value::Pose(p) => Value::Pose(p.retract(TangentVec3::new(delta[o], delta[o + 1], delta[o + 2]))),
            Value::Point(p) => Value::Point(Point2::new(p.x + delta[o], p.y + delta[o + 1])),
        })
        .collect();
    Assignment::new(values)
}

/// Tangent-space Gauss-Newton with step halving. Converged once the step or
/// the relative cost decrease falls below `tol`.
pub fn gauss_newton_map(g: &FactorGraph, init: &Assignment, max_iters: usize, tol: f64) -> Result<MapResult, LaplaceError> {
    init.validate_for(g)?;
    if let Some(f) = g.factors().iter().find(|f| matches!(f.kind, FactorKind::AmbiguousRange { .. })) {
        return Err(LaplaceError::Ambiguous(f.id));
    }
    let offsets = tangent_offsets(g);
    let mut a = init.clone();
    let mut current = cost(g, &a)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let (h, b) = normal_equations(g, &a, &offsets)?;
        let delta = h.cholesky().ok_or(LaplaceError::Singular)?.solve(&(-b));
        if delta.amax() < tol {
            a = retract_all(&a, &delta, &offsets);
            current = cost(g, &a)?;
            converged = true;
            break;
        }
        let mut step = delta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = retract_all(&a, &step, &offsets);
            let c = cost(g, &candidate)?;
            if c <= current {
                accepted = Some((candidate, c));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, c)) => {
                let decrease = current - c;
                a = next;
                current = c;
                if decrease <= tol * current.max(1.0) {
                    converged = true;
                    break;
                }
            }
            None => break,
        }
    }
    let (info, _) = normal_equations(g, &a, &offsets)?;
    Ok(MapResult {
        assignment: a,
        info,
        converged,
        iterations,
        cost: current,
    })
}

/// Starting point: ground truth when every variable has it, otherwise the
/// prior transform at the cube center.
pub fn default_init(g: &FactorGraph) -> Result<Assignment, LaplaceError> {
    if let Some(t) = g.truth_assignment() {
        return Ok(t);
    }
    let d = decompose(g)?;
    let layout = build_layout(&d, g)?;
    Ok(prior_transform(&vec![0.5; layout.dim()], &layout, g)
        .expect("cube center is a valid input")
        .assignment)
}

/// Tangent covariance `info⁻¹` of the Laplace approximation.
pub fn covariance(m: &MapResult) -> Result<DMatrix<f64>, LaplaceError> {
    m.info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(LaplaceError::NotPositiveDefinite)
}

/// Draws from `N(0, info⁻¹)` in the tangent space, retracted onto the MAP.
pub fn laplace_samples(m: &MapResult, n: usize, seed: u64) -> Result<Vec<Assignment>, LaplaceError> {
    if !m.converged {
        return Err(LaplaceError::NotConverged);
    }
    let chol = m.info.clone().cholesky().ok_or(LaplaceError::NotPositiveDefinite)?;
    let lt = chol.l().transpose();
    let dim = m.info.nrows();
    let kinds: Vec<VarKind> = m.assignment.values().iter().map(Value::kind).collect();
    let mut offsets = Vec::with_capacity(kinds.len());
    let mut o = 0;
    for k in &kinds {
        offsets.push(o);
        o += k.dim();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let delta = lt.solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal");
            retract_all(&m.assignment, &delta, &offsets)
        })
        .collect())
}
