//! Factor-graph data model and factor log-densities.
//!
//! A [`FactorGraph`] owns its variable declarations and factors in insertion
//! order. Factors refer to variables by index into that declaration list, and
//! an [`Assignment`] holds one value per declared variable in the same order.

mod format;

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};
use thiserror::Error;

use crate::geom::{se2_between, se2_log, Point2, Pose2};

pub use format::{load_graph, save_graph, ParseError, ParseErrorKind};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid variable name {0:?}")]
    InvalidName(String),
    #[error("variable {0} declared twice")]
    DuplicateVariable(String),
    #[error("undeclared variable {0}")]
    UndeclaredVariable(String),
    #[error("variable {var} is a {actual}, expected {expected}")]
    KindMismatch {
        var: String,
        expected: VarKind,
        actual: VarKind,
    },
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("non-finite measurement value")]
    NonFinite,
    #[error("ambiguous range needs at least 2 candidates, got {0}")]
    TooFewCandidates(usize),
    #[error("factor connects variable {0} to itself")]
    SelfLoop(String),
    #[error("graph has no prior factor to anchor the gauge")]
    NoPrior,
    #[error("assignment has {actual} values, graph declares {expected} variables")]
    AssignmentSize { expected: usize, actual: usize },
    #[error("assignment value for {0} has the wrong kind")]
    AssignmentKind(String),
}

/// Name of a variable, e.g. `x0` or `l1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('#') {
            return Err(GraphError::InvalidName(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for VariableId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Pose2,
    Point2,
}

impl VarKind {
    /// Tangent-space dimension.
    pub const fn dim(self) -> usize {
        match self {
            VarKind::Pose2 => 3,
            VarKind::Point2 => 2,
        }
    }

    /// Component labels used in sample files.
    pub const fn components(self) -> &'static [&'static str] {
        match self {
            VarKind::Pose2 => &["x", "y", "theta"],
            VarKind::Point2 => &["x", "y"],
        }
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Pose2 => f.write_str("POSE2"),
            VarKind::Point2 => f.write_str("POINT2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDecl {
    pub id: VariableId,
    pub kind: VarKind,
}

/// Value of a single variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Pose(Pose2),
    Point(Point2),
}

impl Value {
    pub fn kind(&self) -> VarKind {
        match self {
            Value::Pose(_) => VarKind::Pose2,
            Value::Point(_) => VarKind::Point2,
        }
    }

    pub fn translation(&self) -> Point2 {
        match self {
            Value::Pose(p) => p.translation(),
            Value::Point(p) => *p,
        }
    }

    /// Flattened components in the order of [`VarKind::components`].
    pub fn components(&self) -> Vec<f64> {
        match self {
            Value::Pose(p) => vec![p.x(), p.y(), p.theta()],
            Value::Point(p) => vec![p.x, p.y],
        }
    }
}

/// One value per graph variable, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    values: Vec<Value>,
}

impl Assignment {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, var: usize) -> &Value {
        &self.values[var]
    }

    pub fn set(&mut self, var: usize, value: Value) {
        self.values[var] = value;
    }

    /// Panics if `var` does not hold a pose; factor construction guarantees it does.
    pub fn pose(&self, var: usize) -> Pose2 {
        match self.values[var] {
            Value::Pose(p) => p,
            Value::Point(_) => panic!("variable {var} holds a point, expected a pose"),
        }
    }

    pub fn point(&self, var: usize) -> Point2 {
        match self.values[var] {
            Value::Point(p) => p,
            Value::Pose(_) => panic!("variable {var} holds a pose, expected a point"),
        }
    }

    pub fn translation(&self, var: usize) -> Point2 {
        self.values[var].translation()
    }

    /// Checks that this assignment covers exactly the variables of `g`.
    pub fn validate_for(&self, g: &FactorGraph) -> Result<(), GraphError> {
        if self.values.len() != g.variables.len() {
            return Err(GraphError::AssignmentSize {
                expected: g.variables.len(),
                actual: self.values.len(),
            });
        }
        for (decl, value) in g.variables.iter().zip(&self.values) {
            if decl.kind != value.kind() {
                return Err(GraphError::AssignmentKind(decl.id.to_string()));
            }
        }
        Ok(())
    }

    /// Flattened components, variable by variable.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(Value::components).collect()
    }
}

/// Zero-mean Gaussian noise on a `D`-dimensional residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian<const D: usize> {
    cov: SMatrix<f64, D, D>,
    chol: SMatrix<f64, D, D>,
    sqrt_info: SMatrix<f64, D, D>,
    log_norm: f64,
}

pub type Gaussian2 = Gaussian<2>;
pub type Gaussian3 = Gaussian<3>;

impl<const D: usize> Gaussian<D> {
    pub fn new(cov: SMatrix<f64, D, D>) -> Result<Self, GraphError> {
        if cov.iter().any(|v| !v.is_finite()) || (cov - cov.transpose()).amax() > 0.0 {
            return Err(GraphError::NotPositiveDefinite);
        }
        let chol = cov.cholesky().ok_or(GraphError::NotPositiveDefinite)?.l();
        let sqrt_info = chol
            .solve_lower_triangular(&SMatrix::<f64, D, D>::identity())
            .ok_or(GraphError::NotPositiveDefinite)?;
        let log_det_sqrt: f64 = (0..D).map(|i| chol[(i, i)].ln()).sum();
        Ok(Self {
            cov,
            chol,
            sqrt_info,
            log_norm: -0.5 * D as f64 * LN_2PI - log_det_sqrt,
        })
    }

    pub fn cov(&self) -> &SMatrix<f64, D, D> {
        &self.cov
    }

    /// Lower Cholesky factor `L`, `cov = L Lᵀ`.
    pub fn chol(&self) -> &SMatrix<f64, D, D> {
        &self.chol
    }

    /// `L⁻¹`, mapping residuals to unit-covariance residuals.
    pub fn sqrt_info(&self) -> &SMatrix<f64, D, D> {
        &self.sqrt_info
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn whiten(&self, r: &SVector<f64, D>) -> SVector<f64, D> {
        self.sqrt_info * r
    }

    pub fn log_density(&self, r: &SVector<f64, D>) -> f64 {
        self.log_norm - 0.5 * self.whiten(r).norm_squared()
    }
}

/// Builds a symmetric 3×3 matrix from its row-major upper triangle.
pub fn sym3(c11: f64, c12: f64, c13: f64, c22: f64, c23: f64, c33: f64) -> Matrix3<f64> {
    Matrix3::new(c11, c12, c13, c12, c22, c23, c13, c23, c33)
}

pub fn sym2(c11: f64, c12: f64, c22: f64) -> Matrix2<f64> {
    Matrix2::new(c11, c12, c12, c22)
}

/// Scalar Gaussian log-density of a residual.
pub fn scalar_log_density(residual: f64, sigma: f64) -> f64 {
    let e = residual / sigma;
    -0.5 * LN_2PI - sigma.ln() - 0.5 * e * e
}

/// Numerically stable `ln Σ exp(xᵢ)`; `-∞` for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorId(pub usize);

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    PriorPose2 { mean: Pose2, noise: Gaussian3 },
    PriorPoint2 { mean: Point2, noise: Gaussian2 },
    OdometryPose2 { rel: Pose2, noise: Gaussian3 },
    Range { z: f64, sigma: f64 },
    /// Equal-weight mixture over the candidate landmarks `vars[1..]`.
    AmbiguousRange { z: f64, sigma: f64 },
}

impl FactorKind {
    pub fn is_prior(&self) -> bool {
        matches!(self, FactorKind::PriorPose2 { .. } | FactorKind::PriorPoint2 { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FactorKind::PriorPose2 { .. } => "PRIOR_POSE2",
            FactorKind::PriorPoint2 { .. } => "PRIOR_POINT2",
            FactorKind::OdometryPose2 { .. } => "ODOM_POSE2",
            FactorKind::Range { .. } => "RANGE",
            FactorKind::AmbiguousRange { .. } => "AMB_RANGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub id: FactorId,
    /// Variable indices. For `AmbiguousRange` the pose comes first, then the candidates.
    pub vars: Vec<usize>,
    pub kind: FactorKind,
}

impl Factor {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn candidates(&self) -> &[usize] {
        match self.kind {
            FactorKind::AmbiguousRange { .. } => &self.vars[1..],
            _ => &[],
        }
    }

    /// Log-density of this factor at `a`, normalization constants included.
    pub fn log_density(&self, a: &Assignment) -> f64 {
        match &self.kind {
            FactorKind::PriorPose2 { mean, noise } => {
                let r = se2_log(&se2_between(mean, &a.pose(self.vars[0])));
                noise.log_density(&r.to_vector())
            }
            FactorKind::PriorPoint2 { mean, noise } => {
                let r: Vector2<f64> = a.point(self.vars[0]).to_vector() - mean.to_vector();
                noise.log_density(&r)
            }
            FactorKind::OdometryPose2 { rel, noise } => {
                let observed = se2_between(&a.pose(self.vars[0]), &a.pose(self.vars[1]));
                let r: Vector3<f64> = se2_log(&se2_between(rel, &observed)).to_vector();
                noise.log_density(&r)
            }
            FactorKind::Range { z, sigma } => {
                let d = a.translation(self.vars[0]).distance(a.translation(self.vars[1]));
                scalar_log_density(z - d, *sigma)
            }
            FactorKind::AmbiguousRange { z, sigma } => {
                let origin = a.translation(self.vars[0]);
                let log_weight = -(self.candidates().len() as f64).ln();
                let terms: Vec<f64> = self
                    .candidates()
                    .iter()
                    .map(|&c| {
                        log_weight + scalar_log_density(z - origin.distance(a.translation(c)), *sigma)
                    })
                    .collect();
                logsumexp(&terms)
            }
        }
    }
}

/// Sum of log-densities over a set of factors.
pub fn sum_log_density<'a>(factors: impl IntoIterator<Item = &'a Factor>, a: &Assignment) -> f64 {
    factors.into_iter().map(|f| f.log_density(a)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<VariableDecl>,
    factors: Vec<Factor>,
    truth: Vec<Option<Value>>,
    index: HashMap<VariableId, usize>,
}

impl FactorGraph {
    pub fn variables(&self) -> &[VariableDecl] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: FactorId) -> &Factor {
        &self.factors[id.0]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_name(&self, var: usize) -> &VariableId {
        &self.variables[var].id
    }

    /// Total tangent dimension of all variables.
    pub fn dim(&self) -> usize {
        self.variables.iter().map(|v| v.kind.dim()).sum()
    }

    pub fn truth(&self, var: usize) -> Option<&Value> {
        self.truth[var].as_ref()
    }

    /// Ground truth, if every variable has a TRUTH record.
    pub fn truth_assignment(&self) -> Option<Assignment> {
        self.truth
            .iter()
            .map(|t| t.as_ref().copied())
            .collect::<Option<Vec<_>>>()
            .map(Assignment::new)
    }

    pub fn total_log_density(&self, a: &Assignment) -> f64 {
        sum_log_density(&self.factors, a)
    }

    /// Rejects graphs without any prior factor.
    pub fn ensure_anchored(&self) -> Result<(), GraphError> {
        if self.factors.iter().any(|f| f.kind.is_prior()) {
            Ok(())
        } else {
            Err(GraphError::NoPrior)
        }
    }

    /// Same variables and truth, factor `id` replaced by `kind` over `vars`.
    pub(crate) fn with_factor_replaced(&self, id: FactorId, vars: Vec<usize>, kind: FactorKind) -> Self {
        let mut g = self.clone();
        g.factors[id.0] = Factor { id, vars, kind };
        g
    }

    /// Subgraph over the variables selected by `keep`, with every factor whose
    /// variables all survive. Declaration order is preserved and factor ids
    /// are renumbered densely.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut map = vec![None; self.variables.len()];
        let mut variables = Vec::new();
        let mut truth = Vec::new();
        let mut index = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if keep(i) {
                map[i] = Some(variables.len());
                index.insert(v.id.clone(), variables.len());
                variables.push(v.clone());
                truth.push(self.truth[i]);
            }
        }
        let mut factors = Vec::new();
        for f in &self.factors {
            if let Some(vars) = f.vars.iter().map(|&v| map[v]).collect::<Option<Vec<_>>>() {
                factors.push(Factor {
                    id: FactorId(factors.len()),
                    vars,
                    kind: f.kind.clone(),
                });
            }
        }
        FactorGraph {
            variables,
            factors,
            truth,
            index,
        }
    }

    /// Column labels `var.component` in declaration order.
    pub fn component_labels(&self) -> Vec<String> {
        self.variables
            .iter()
            .flat_map(|v| v.kind.components().iter().map(move |c| format!("{}.{}", v.id, c)))
            .collect()
    }
}

/// Incremental construction of a [`FactorGraph`].
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    variables: Vec<VariableDecl>,
    factors: Vec<Factor>,
    truth: Vec<Option<Value>>,
    index: HashMap<VariableId, usize>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: &str, kind: VarKind) -> Result<usize, GraphError> {
        let id = VariableId::new(name)?;
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateVariable(name.to_string()));
        }
        let idx = self.variables.len();
        self.index.insert(id.clone(), idx);
        self.variables.push(VariableDecl { id, kind });
        self.truth.push(None);
        Ok(idx)
    }

    pub fn pose(&mut self, name: &str) -> Result<usize, GraphError> {
        self.add_variable(name, VarKind::Pose2)
    }

    pub fn point(&mut self, name: &str) -> Result<usize, GraphError> {
        self.add_variable(name, VarKind::Point2)
    }

    fn lookup(&self, name: &str, expected: Option<VarKind>) -> Result<usize, GraphError> {
        let idx = *self
            .index
            .get(name)
            .ok_or_else(|| GraphError::UndeclaredVariable(name.to_string()))?;
        if let Some(expected) = expected {
            let actual = self.variables[idx].kind;
            if actual != expected {
                return Err(GraphError::KindMismatch {
                    var: name.to_string(),
                    expected,
                    actual,
                });
            }
        }
        Ok(idx)
    }

    fn push(&mut self, vars: Vec<usize>, kind: FactorKind) -> FactorId {
        let id = FactorId(self.factors.len());
        self.factors.push(Factor { id, vars, kind });
        id
    }

    pub fn prior_pose2(&mut self, var: &str, mean: Pose2, cov: Matrix3<f64>) -> Result<FactorId, GraphError> {
        let v = self.lookup(var, Some(VarKind::Pose2))?;
        finite(&[mean.x(), mean.y(), mean.theta()])?;
        let noise = Gaussian3::new(cov)?;
        Ok(self.push(vec![v], FactorKind::PriorPose2 { mean, noise }))
    }

    pub fn prior_point2(&mut self, var: &str, mean: Point2, cov: Matrix2<f64>) -> Result<FactorId, GraphError> {
        let v = self.lookup(var, Some(VarKind::Point2))?;
        finite(&[mean.x, mean.y])?;
        let noise = Gaussian2::new(cov)?;
        Ok(self.push(vec![v], FactorKind::PriorPoint2 { mean, noise }))
    }

    pub fn odometry(&mut self, from: &str, to: &str, rel: Pose2, cov: Matrix3<f64>) -> Result<FactorId, GraphError> {
        let a = self.lookup(from, Some(VarKind::Pose2))?;
        let b = self.lookup(to, Some(VarKind::Pose2))?;
        if a == b {
            return Err(GraphError::SelfLoop(from.to_string()));
        }
        finite(&[rel.x(), rel.y(), rel.theta()])?;
        let noise = Gaussian3::new(cov)?;
        Ok(self.push(vec![a, b], FactorKind::OdometryPose2 { rel, noise }))
    }

    pub fn range(&mut self, a: &str, b: &str, z: f64, sigma: f64) -> Result<FactorId, GraphError> {
        let ia = self.lookup(a, None)?;
        let ib = self.lookup(b, None)?;
        if ia == ib {
            return Err(GraphError::SelfLoop(a.to_string()));
        }
        check_range(z, sigma)?;
        Ok(self.push(vec![ia, ib], FactorKind::Range { z, sigma }))
    }

    pub fn ambiguous_range(&mut self, origin: &str, z: f64, sigma: f64, candidates: &[&str]) -> Result<FactorId, GraphError> {
        let io = self.lookup(origin, None)?;
        if candidates.len() < 2 {
            return Err(GraphError::TooFewCandidates(candidates.len()));
        }
        let mut vars = vec![io];
        for c in candidates {
            let ic = self.lookup(c, None)?;
            if ic == io {
                return Err(GraphError::SelfLoop(origin.to_string()));
            }
            vars.push(ic);
        }
        check_range(z, sigma)?;
        Ok(self.push(vars, FactorKind::AmbiguousRange { z, sigma }))
    }

    pub fn truth(&mut self, var: &str, value: Value) -> Result<(), GraphError> {
        let v = self.lookup(var, Some(value.kind()))?;
        finite(&value.components())?;
        self.truth[v] = Some(value);
        Ok(())
    }

    pub fn build(self) -> FactorGraph {
        FactorGraph {
            variables: self.variables,
            factors: self.factors,
            truth: self.truth,
            index: self.index,
        }
    }
}

fn finite(values: &[f64]) -> Result<(), GraphError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GraphError::NonFinite)
    }
}

fn check_range(z: f64, sigma: f64) -> Result<(), GraphError> {
    finite(&[z])?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GraphError::InvalidSigma(sigma));
    }
    Ok(())
}

/// `ln(2π)`, exposed for the range-prior correction terms.
pub fn ln_two_pi() -> f64 {
    LN_2PI
}
