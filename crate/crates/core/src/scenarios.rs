//! Seeded synthetic SLAM problems with ground truth.
//!
//! Every variable carries the time step at which it first appears, so a
//! scenario can be replayed incrementally with [`Scenario::at_step`].
//! Measurements are simulated from the truth with the declared noise. A sigma
//! of zero draws no noise, and its declared covariance is floored at
//! [`SIGMA_FLOOR`] so noise-free graphs stay proper.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{se2_between, se2_compose, Point2, Pose2, TangentVec3};
use crate::graph::{FactorGraph, GraphBuilder, GraphError, Value};

pub const SIGMA_FLOOR: f64 = 1e-9;

/// Heading change per step of the ambiguous-association arc.
const ARC_TURN: f64 = 0.35;
/// Heading drift bound per step for the multi-robot random walks.
const ROBOT_TURN: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    PoseGraph,
    RangeOnly,
    MultiRobotRange,
    AmbiguousRange,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::PoseGraph, Family::RangeOnly, Family::MultiRobotRange, Family::AmbiguousRange];

    pub fn name(self) -> &'static str {
        match self {
            Family::PoseGraph => "POSE_GRAPH",
            Family::RangeOnly => "RANGE_ONLY",
            Family::MultiRobotRange => "MULTI_ROBOT_RANGE",
            Family::AmbiguousRange => "AMBIGUOUS_RANGE",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ScenarioError;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| ScenarioError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario family {0:?}")]
    UnknownFamily(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Full generator configuration. Serialized as the metadata sidecar, so every
/// default is explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    /// Poses per robot.
    pub poses: usize,
    pub robots: usize,
    pub landmarks: usize,
    pub loops: usize,
    /// Distance travelled per step, metres.
    pub step_length: f64,
    /// Lateral landmark offset from the line of travel (range-only), metres.
    pub landmark_offset: f64,
    pub odom_sigma_xy: f64,
    pub odom_sigma_theta: f64,
    pub range_sigma: f64,
    /// Anchor prior on the first pose (of the first robot).
    pub prior_sigma_xy: f64,
    pub prior_sigma_theta: f64,
    /// Start prior of every other robot.
    pub weak_prior_sigma_xy: f64,
    pub weak_prior_sigma_theta: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Defaults for `family`.
    pub fn new(family: Family) -> Self {
        let (poses, robots, landmarks, loops) = match family {
            Family::PoseGraph => (6, 1, 0, 4),
            Family::RangeOnly => (4, 1, 1, 0),
            Family::MultiRobotRange => (6, 3, 0, 0),
            Family::AmbiguousRange => (8, 1, 2, 0),
        };
        ScenarioSpec {
            family,
            poses,
            robots,
            landmarks,
            loops,
            step_length: 5.0,
            landmark_offset: 10.0,
            odom_sigma_xy: 0.05,
            odom_sigma_theta: 0.01,
            range_sigma: 0.5,
            prior_sigma_xy: 0.05,
            prior_sigma_theta: 0.01,
            weak_prior_sigma_xy: 10.0,
            weak_prior_sigma_theta: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same geometry with every noise sigma set to zero (floored on use).
    pub fn noise_free(mut self) -> Self {
        self.odom_sigma_xy = 0.0;
        self.odom_sigma_theta = 0.0;
        self.range_sigma = 0.0;
        self.prior_sigma_xy = 0.0;
        self.prior_sigma_theta = 0.0;
        self.weak_prior_sigma_xy = 0.0;
        self.weak_prior_sigma_theta = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Infeasible(msg));
        let sigmas = [
            self.odom_sigma_xy,
            self.odom_sigma_theta,
            self.range_sigma,
            self.prior_sigma_xy,
            self.prior_sigma_theta,
            self.weak_prior_sigma_xy,
            self.weak_prior_sigma_theta,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise sigmas must be finite and non-negative".into());
        }
        if !(self.step_length.is_finite() && self.step_length > 0.0) {
            return bad(format!("step length {} must be positive", self.step_length));
        }
        if !self.landmark_offset.is_finite() {
            return bad("landmark offset must be finite".into());
        }
        match self.family {
            Family::PoseGraph => {
                if self.poses < 2 {
                    return bad("a pose graph needs at least 2 poses".into());
                }
                let pairs = (self.poses - 1) * (self.poses - 2) / 2;
                if self.loops > pairs {
                    return bad(format!("{} loop closures exceed the {pairs} non-consecutive pose pairs", self.loops));
                }
            }
            Family::RangeOnly => {
                if self.poses < 2 || self.landmarks < 1 {
                    return bad("range-only needs at least 2 poses and 1 landmark".into());
                }
            }
            Family::MultiRobotRange => {
                if !(2..=26).contains(&self.robots) || self.poses < 1 {
                    return bad("multi-robot needs 2 to 26 robots and at least 1 pose each".into());
                }
            }
            Family::AmbiguousRange => {
                if self.poses < 5 || self.landmarks != 2 {
                    return bad("ambiguous association needs at least 5 poses and exactly 2 landmarks".into());
                }
            }
        }
        Ok(())
    }
}

/// A generated graph plus the time step at which each variable appears.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub graph: FactorGraph,
    pub steps: Vec<usize>,
}

impl Scenario {
    pub fn final_step(&self) -> usize {
        self.steps.iter().copied().max().unwrap_or(0)
    }

    /// The graph as known at step `t`: variables up to `t` and the factors
    /// among them.
    pub fn at_step(&self, t: usize) -> FactorGraph {
        self.graph.restrict(|v| self.steps[v] <= t)
    }
}

/// Builder wrapper that records steps and adds simulated measurements.
struct Sim {
    b: GraphBuilder,
    steps: Vec<usize>,
    rng: ChaCha8Rng,
    spec: ScenarioSpec,
}

fn floor(sigma: f64) -> f64 {
    sigma.max(SIGMA_FLOOR)
}

fn pose_cov(xy: f64, theta: f64) -> Matrix3<f64> {
    let (xy, theta) = (floor(xy), floor(theta));
    Matrix3::from_diagonal(&Vector3::new(xy * xy, xy * xy, theta * theta))
}

impl Sim {
    fn new(spec: &ScenarioSpec) -> Self {
        Sim {
            b: GraphBuilder::new(),
            steps: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec: spec.clone(),
        }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn pose(&mut self, name: &str, step: usize, truth: Pose2) -> Result<(), ScenarioError> {
        self.b.pose(name)?;
        self.b.truth(name, Value::Pose(truth))?;
        self.steps.push(step);
        Ok(())
    }

    fn point(&mut self, name: &str, step: usize, truth: Point2) -> Result<(), ScenarioError> {
        self.b.point(name)?;
        self.b.truth(name, Value::Point(truth))?;
        self.steps.push(step);
        Ok(())
    }

    /// Priors are centred on the truth; they fix the gauge rather than model
    /// a measurement.
    fn prior(&mut self, name: &str, truth: Pose2, xy: f64, theta: f64) -> Result<(), ScenarioError> {
        self.b.prior_pose2(name, truth, pose_cov(xy, theta))?;
        Ok(())
    }

    fn relative(&mut self, from: &str, to: &str, a: Pose2, b: Pose2) -> Result<(), ScenarioError> {
        let (xy, theta) = (self.spec.odom_sigma_xy, self.spec.odom_sigma_theta);
        let xi = TangentVec3::new(xy * self.normal(), xy * self.normal(), theta * self.normal());
        let rel = se2_between(&a, &b).retract(xi);
        self.b.odometry(from, to, rel, pose_cov(xy, theta))?;
        Ok(())
    }

    fn measured_range(&mut self, a: Point2, b: Point2) -> (f64, f64) {
        let sigma = self.spec.range_sigma;
        (a.distance(b) + sigma * self.normal(), floor(sigma))
    }

    fn range(&mut self, a: &str, b: &str, ta: Point2, tb: Point2) -> Result<(), ScenarioError> {
        let (z, sigma) = self.measured_range(ta, tb);
        self.b.range(a, b, z, sigma)?;
        Ok(())
    }

    fn finish(self) -> Scenario {
        Scenario {
            spec: self.spec,
            graph: self.b.build(),
            steps: self.steps,
        }
    }
}

fn forward(step: f64, turn: f64) -> Pose2 {
    Pose2::new(step, 0.0, turn)
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    match spec.family {
        Family::PoseGraph => pose_graph(spec),
        Family::RangeOnly => range_only(spec),
        Family::MultiRobotRange => multi_robot(spec),
        Family::AmbiguousRange => ambiguous(spec),
    }
}

/// Random walk of right-angle-ish turns; loop closures join the closest
/// non-consecutive pairs in the truth.
fn pose_graph(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut sim = Sim::new(spec);
    let mut truth = vec![Pose2::new(0.0, 0.0, 0.0)];
    for _ in 1..spec.poses {
        let turn = [-FRAC_PI_2, 0.0, FRAC_PI_2][sim.rng.random_range(0..3)] + 0.1 * sim.normal();
        let next = se2_compose(truth.last().expect("nonempty"), &forward(spec.step_length, turn));
        truth.push(next);
    }
    let names: Vec<String> = (0..spec.poses).map(|k| format!("x{k}")).collect();
    for (k, p) in truth.iter().enumerate() {
        sim.pose(&names[k], k, *p)?;
    }
    sim.prior(&names[0], truth[0], spec.prior_sigma_xy, spec.prior_sigma_theta)?;
    for k in 1..spec.poses {
        sim.relative(&names[k - 1], &names[k], truth[k - 1], truth[k])?;
    }
    let mut pairs: Vec<(f64, usize, usize)> = (0..spec.poses)
        .flat_map(|i| (i + 2..spec.poses).map(move |j| (i, j)))
        .map(|(i, j)| (truth[i].translation().distance(truth[j].translation()), i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut loops: Vec<(usize, usize)> = pairs.iter().take(spec.loops).map(|&(_, i, j)| (i, j)).collect();
    loops.sort_unstable();
    for (i, j) in loops {
        sim.relative(&names[i], &names[j], truth[i], truth[j])?;
    }
    Ok(sim.finish())
}

/// Straight line along +x with a final pose turning off it; landmarks sit at
/// a lateral offset from the line.
fn range_only(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut sim = Sim::new(spec);
    let s = spec.step_length;
    let mut truth: Vec<Pose2> = (0..spec.poses - 1).map(|k| Pose2::new(s * k as f64, 0.0, 0.0)).collect();
    let last = *truth.last().expect("at least 2 poses");
    truth.push(se2_compose(&last, &Pose2::new(s * FRAC_PI_4.cos(), s * FRAC_PI_4.sin(), FRAC_PI_4)));
    let landmarks: Vec<Point2> = (0..spec.landmarks)
        .map(|j| Point2::new(s * (j + 1) as f64, spec.landmark_offset))
        .collect();
    let lnames: Vec<String> = (0..spec.landmarks).map(|j| format!("l{j}")).collect();

    sim.pose("x0", 0, truth[0])?;
    for (name, l) in lnames.iter().zip(&landmarks) {
        sim.point(name, 0, *l)?;
    }
    for k in 1..spec.poses {
        sim.pose(&format!("x{k}"), k, truth[k])?;
    }
    sim.prior("x0", truth[0], spec.prior_sigma_xy, spec.prior_sigma_theta)?;
    for k in 0..spec.poses {
        let name = format!("x{k}");
        if k > 0 {
            sim.relative(&format!("x{}", k - 1), &name, truth[k - 1], truth[k])?;
        }
        for (lname, l) in lnames.iter().zip(&landmarks) {
            sim.range(&name, lname, truth[k].translation(), *l)?;
        }
    }
    Ok(sim.finish())
}

/// Robots start evenly spaced on a circle heading tangentially and wander
/// with small random turns. The first robot has the anchor prior, the others
/// weak start priors.
fn multi_robot(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut sim = Sim::new(spec);
    let radius = 2.0 * spec.step_length;
    let letters: Vec<char> = (b'a'..=b'z').map(char::from).take(spec.robots).collect();
    let name = |r: usize, k: usize| format!("{}{k}", letters[r]);
    let mut truth: Vec<Vec<Pose2>> = (0..spec.robots)
        .map(|r| {
            let phi = 2.0 * PI * r as f64 / spec.robots as f64;
            vec![Pose2::new(radius * phi.cos(), radius * phi.sin(), phi + FRAC_PI_2)]
        })
        .collect();
    for k in 1..spec.poses {
        for path in truth.iter_mut() {
            let turn = sim.rng.random_range(-ROBOT_TURN..ROBOT_TURN);
            let next = se2_compose(&path[k - 1], &forward(spec.step_length, turn));
            path.push(next);
        }
    }
    for k in 0..spec.poses {
        for (r, path) in truth.iter().enumerate() {
            sim.pose(&name(r, k), k, path[k])?;
        }
    }
    for (r, path) in truth.iter().enumerate() {
        let (xy, theta) = if r == 0 {
            (spec.prior_sigma_xy, spec.prior_sigma_theta)
        } else {
            (spec.weak_prior_sigma_xy, spec.weak_prior_sigma_theta)
        };
        sim.prior(&name(r, 0), path[0], xy, theta)?;
    }
    for k in 0..spec.poses {
        if k > 0 {
            for (r, path) in truth.iter().enumerate() {
                sim.relative(&name(r, k - 1), &name(r, k), path[k - 1], path[k])?;
            }
        }
        for r in 0..spec.robots {
            for q in r + 1..spec.robots {
                sim.range(&name(r, k), &name(q, k), truth[r][k].translation(), truth[q][k].translation())?;
            }
        }
    }
    Ok(sim.finish())
}

/// Constant-turn arc. Poses 1 to 4 report ranges without knowing which of the
/// two landmarks they saw: the first two observe `l1`, the next two `l2`.
/// Pose 0 and poses after 4 range both landmarks unambiguously.
fn ambiguous(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut sim = Sim::new(spec);
    let scale = spec.step_length / 5.0;
    let mut truth = vec![Pose2::new(0.0, 0.0, 0.0)];
    for k in 1..spec.poses {
        let next = se2_compose(&truth[k - 1], &forward(spec.step_length, ARC_TURN));
        truth.push(next);
    }
    let marks = [("l1", Point2::new(7.0 * scale, -7.0 * scale)), ("l2", Point2::new(23.0 * scale, 5.0 * scale))];
    let observed = |k: usize| if k <= 2 { 0 } else { 1 };

    sim.pose("x0", 0, truth[0])?;
    for (name, l) in marks {
        sim.point(name, 0, l)?;
    }
    for (k, p) in truth.iter().enumerate().skip(1) {
        sim.pose(&format!("x{k}"), k, *p)?;
    }
    sim.prior("x0", truth[0], spec.prior_sigma_xy, spec.prior_sigma_theta)?;
    for k in 0..spec.poses {
        let name = format!("x{k}");
        if k > 0 {
            sim.relative(&format!("x{}", k - 1), &name, truth[k - 1], truth[k])?;
        }
        let here = truth[k].translation();
        if (1..=4).contains(&k) {
            let (z, sigma) = sim.measured_range(here, marks[observed(k)].1);
            sim.b.ambiguous_range(&name, z, sigma, &["l1", "l2"])?;
        } else {
            for (lname, l) in marks {
                sim.range(&name, lname, here, l)?;
            }
        }
    }
    Ok(sim.finish())
}
