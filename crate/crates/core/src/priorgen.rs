//! Ancestral prior transform: unit hypercube → assignments distributed as the
//! product of the acyclic factors.
//!
//! Each acyclic factor owns a contiguous block of hypercube coordinates and
//! draws the one variable it introduces, conditioned on the variable it
//! shares with earlier factors:
//!
//! | factor                     | width | draw                                   |
//! |----------------------------|-------|----------------------------------------|
//! | prior on a pose            | 3     | `mean · exp(L Φ⁻¹(u))`                 |
//! | prior on a point           | 2     | `mean + L Φ⁻¹(u)`                      |
//! | odometry                   | 3     | `parent · rel · exp(L Φ⁻¹(u))` (or its inverse when the child is `from`) |
//! | range reaching a point     | 2     | polar offset, radius `Φ⁻¹` quantile, angle `2πu` |
//! | range reaching a pose      | 3     | as above plus a uniform heading        |
//!
//! Polar draws put density `f(r) / (2π r)` on the new point instead of the
//! range factor's `f(r)`. The shortfall, `ln(2π) + ln r` per range (plus
//! `ln(2π)` for a uniform heading), is moved into the likelihood, so the
//! sampled target stays the exact factor product.

use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::decompose::Decomposition;
use crate::geom::{gaussian_quantile, std_normal_quantile, Point2, Pose2, TangentVec3};
use crate::graph::{ln_two_pi, sum_log_density, Assignment, FactorGraph, FactorId, FactorKind, Value, VarKind};

/// Lower clamp on sampled radii.
pub const MIN_RADIUS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("acyclic factor {0} does not introduce exactly one new variable")]
    NotAncestral(FactorId),
    #[error("factor {0} cannot be sampled ancestrally")]
    Unsupported(FactorId),
    #[error("variable {0} is not reached by any acyclic factor")]
    Uncovered(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("hypercube vector has {actual} coordinates, layout needs {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("hypercube coordinate {index} = {value} outside (0, 1)")]
    OutsideCube { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    PriorPose,
    PriorPoint,
    /// Child is the odometry factor's `to` variable.
    OdometryForward,
    /// Child is the odometry factor's `from` variable.
    OdometryBackward,
    RangePoint,
    RangePose,
}

impl Draw {
    pub const fn width(self) -> usize {
        match self {
            Draw::PriorPoint | Draw::RangePoint => 2,
            _ => 3,
        }
    }

    fn is_range(self) -> bool {
        matches!(self, Draw::RangePoint | Draw::RangePose)
    }
}

/// Hypercube block owned by one acyclic factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub factor: FactorId,
    pub offset: usize,
    pub width: usize,
    pub draw: Draw,
    /// Already-sampled variable the draw is conditioned on.
    pub parent: Option<usize>,
    /// Variable drawn by this segment.
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypercubeLayout {
    segments: Vec<Segment>,
    dim: usize,
    n_vars: usize,
}

impl HypercubeLayout {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Acyclic range factors, whose polar draws need a likelihood correction.
    pub fn range_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.draw.is_range())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSample {
    pub assignment: Assignment,
    /// `Σ ln ‖child − parent‖` over acyclic range factors.
    pub log_correction: f64,
}

pub fn build_layout(d: &Decomposition, g: &FactorGraph) -> Result<HypercubeLayout, LayoutError> {
    let mut known = vec![false; g.variables().len()];
    let mut segments = Vec::with_capacity(d.ac.len());
    let mut offset = 0;
    for &id in &d.ac {
        let f = g.factor(id);
        let new: Vec<usize> = f.vars.iter().copied().filter(|&v| !known[v]).collect();
        if new.len() != 1 || f.arity() > 2 {
            return Err(LayoutError::NotAncestral(id));
        }
        let child = new[0];
        let parent = f.vars.iter().copied().find(|&v| v != child);
        let draw = match (&f.kind, g.variables()[child].kind) {
            (FactorKind::PriorPose2 { .. }, _) => Draw::PriorPose,
            (FactorKind::PriorPoint2 { .. }, _) => Draw::PriorPoint,
            (FactorKind::OdometryPose2 { .. }, _) if child == f.vars[1] => Draw::OdometryForward,
            (FactorKind::OdometryPose2 { .. }, _) => Draw::OdometryBackward,
            (FactorKind::Range { .. }, VarKind::Point2) => Draw::RangePoint,
            (FactorKind::Range { .. }, VarKind::Pose2) => Draw::RangePose,
            (FactorKind::AmbiguousRange { .. }, _) => return Err(LayoutError::Unsupported(id)),
        };
        known[child] = true;
        segments.push(Segment {
            factor: id,
            offset,
            width: draw.width(),
            draw,
            parent,
            child,
        });
        offset += draw.width();
    }
    if let Some(v) = known.iter().position(|k| !k) {
        return Err(LayoutError::Uncovered(g.var_name(v).to_string()));
    }
    Ok(HypercubeLayout {
        segments,
        dim: offset,
        n_vars: g.variables().len(),
    })
}

fn normal3(u: &[f64]) -> Vector3<f64> {
    Vector3::new(ppf(u[0]), ppf(u[1]), ppf(u[2]))
}

fn normal2(u: &[f64]) -> Vector2<f64> {
    Vector2::new(ppf(u[0]), ppf(u[1]))
}

fn ppf(u: f64) -> f64 {
    std_normal_quantile(u).expect("cube coordinates are validated before the transform")
}

/// Maps a point of the open unit hypercube to an assignment.
pub fn prior_transform(u: &[f64], layout: &HypercubeLayout, g: &FactorGraph) -> Result<PriorSample, TransformError> {
    if u.len() != layout.dim {
        return Err(TransformError::Dimension {
            expected: layout.dim,
            actual: u.len(),
        });
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
        return Err(TransformError::OutsideCube { index, value });
    }

    let placeholder = Value::Point(Point2::new(0.0, 0.0));
    let mut values = vec![placeholder; layout.n_vars];
    let mut log_correction = 0.0;
    for seg in &layout.segments {
        let block = &u[seg.offset..seg.offset + seg.width];
        let f = g.factor(seg.factor);
        let value = match (&f.kind, seg.draw) {
            (FactorKind::PriorPose2 { mean, noise }, _) => {
                let xi = TangentVec3::from_vector(noise.chol() * normal3(block));
                Value::Pose(mean.retract(xi))
            }
            (FactorKind::PriorPoint2 { mean, noise }, _) => {
                Value::Point(Point2::from_vector(mean.to_vector() + noise.chol() * normal2(block)))
            }
            (FactorKind::OdometryPose2 { rel, noise }, draw) => {
                let parent = pose_of(&values, seg.parent);
                let step = rel.retract(TangentVec3::from_vector(noise.chol() * normal3(block)));
                if draw == Draw::OdometryForward {
                    Value::Pose(crate::geom::se2_compose(&parent, &step))
                } else {
                    Value::Pose(crate::geom::se2_compose(&parent, &step.inverse()))
                }
            }
            (FactorKind::Range { z, sigma }, draw) => {
                let origin = values[seg.parent.expect("range segments have a parent")].translation();
                let radius = gaussian_quantile(block[0], *z, *sigma)
                    .expect("sigma validated at construction")
                    .max(MIN_RADIUS);
                let angle = TAU * block[1];
                let (s, c) = angle.sin_cos();
                let x = origin.x + radius * c;
                let y = origin.y + radius * s;
                log_correction += origin.distance(Point2::new(x, y)).ln();
                if draw == Draw::RangePose {
                    Value::Pose(Pose2::new(x, y, TAU * block[2] - std::f64::consts::PI))
                } else {
                    Value::Point(Point2::new(x, y))
                }
            }
            (FactorKind::AmbiguousRange { .. }, _) => unreachable!("rejected by build_layout"),
        };
        values[seg.child] = value;
    }
    Ok(PriorSample {
        assignment: Assignment::new(values),
        log_correction,
    })
}

fn pose_of(values: &[Value], var: Option<usize>) -> Pose2 {
    match values[var.expect("odometry segments have a parent")] {
        Value::Pose(p) => p,
        Value::Point(_) => unreachable!("odometry connects poses"),
    }
}

/// Log-density correction that turns the pushforward prior into the product
/// of acyclic factors: `ln(2π) + ln ‖child − parent‖` per acyclic range, plus
/// `ln(2π)` per range that also draws a heading.
pub fn range_correction(layout: &HypercubeLayout, a: &Assignment) -> f64 {
    layout.range_segments().map(|s| segment_correction(s, a)).sum()
}

/// Correction contributed by one acyclic range segment; zero for other draws.
pub fn segment_correction(s: &Segment, a: &Assignment) -> f64 {
    if !s.draw.is_range() {
        return 0.0;
    }
    let parent = a.translation(s.parent.expect("range segments have a parent"));
    let r = parent.distance(a.translation(s.child)).max(MIN_RADIUS);
    let heading = if s.draw == Draw::RangePose { ln_two_pi() } else { 0.0 };
    ln_two_pi() + r.ln() + heading
}

/// Log-density of the pushforward prior at `a`.
pub fn prior_log_density(layout: &HypercubeLayout, g: &FactorGraph, a: &Assignment) -> f64 {
    let ac = sum_log_density(layout.segments.iter().map(|s| g.factor(s.factor)), a);
    ac - range_correction(layout, a)
}
