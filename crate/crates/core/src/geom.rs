//! SE(2) Lie-group operations and Gaussian quantile transforms.
//!
//! Tangent vectors are ordered `[vx, vy, omega]`: translational part first,
//! rotation last. Poses are perturbed on the right, `x · exp(ξ)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this rotation magnitude `V(θ)` and its inverse use Taylor terms.
const SERIES_SWITCH: f64 = 1e-6;
/// Below this rotation magnitude the SE(2) Jacobians use Taylor terms.
const JACOBIAN_SERIES_SWITCH: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
}

/// Wraps an angle into the canonical branch (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut wrapped = (theta + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped += TAU;
    }
    wrapped
}

/// A 2D position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Lie-algebra coordinates of an SE(2) perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVec3 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl TangentVec3 {
    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.omega)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

/// A rigid-body transform in the plane. `theta` is always in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    x: f64,
    y: f64,
    theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn rotation_matrix(&self) -> Matrix2<f64> {
        rotation(self.theta)
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)
    }

    /// Maps a point from this pose's local frame into the world frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Adjoint matrix acting on `[vx, vy, omega]` tangent vectors.
    pub fn adjoint(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.y, s, c, -self.x, 0.0, 0.0, 1.0)
    }

    /// Right-perturbed pose `self · exp(xi)`.
    pub fn retract(&self, xi: TangentVec3) -> Pose2 {
        se2_compose(self, &se2_exp(xi))
    }
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `sin θ / θ` and `(1 − cos θ) / θ`, the entries of `V(θ)`.
fn v_coefficients(theta: f64) -> (f64, f64) {
    if theta.abs() < SERIES_SWITCH {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, theta / 2.0 - theta * t2 / 24.0)
    } else {
        let half = 0.5 * theta;
        (theta.sin() / theta, 2.0 * half.sin() * half.sin() / theta)
    }
}

/// SE(2) exponential map.
pub fn se2_exp(xi: TangentVec3) -> Pose2 {
    let (a, b) = v_coefficients(xi.omega);
    Pose2::new(a * xi.vx - b * xi.vy, b * xi.vx + a * xi.vy, xi.omega)
}

/// SE(2) logarithm; the rotation coordinate is the canonical angle of `p`.
pub fn se2_log(p: &Pose2) -> TangentVec3 {
    let theta = p.theta;
    let (a, b) = v_coefficients(theta);
    let det = a * a + b * b;
    TangentVec3::new(
        (a * p.x + b * p.y) / det,
        (-b * p.x + a * p.y) / det,
        theta,
    )
}

/// Group product `a · b`.
pub fn se2_compose(a: &Pose2, b: &Pose2) -> Pose2 {
    let (s, c) = a.theta.sin_cos();
    Pose2::new(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )
}

/// Relative pose `a⁻¹ · b`.
pub fn se2_between(a: &Pose2, b: &Pose2) -> Pose2 {
    let (s, c) = a.theta.sin_cos();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    Pose2::new(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)
}

/// Right Jacobian of the SE(2) exponential map at `xi`.
pub fn se2_right_jacobian(xi: TangentVec3) -> Matrix3<f64> {
    let (rho1, rho2, theta) = (xi.vx, xi.vy, xi.omega);
    let (a, b, c13, c23) = if theta.abs() < JACOBIAN_SERIES_SWITCH {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0,
            theta / 2.0 - theta * t2 / 24.0,
            -rho2 / 2.0 + rho1 * theta / 6.0 + rho2 * t2 / 24.0,
            rho1 / 2.0 + rho2 * theta / 6.0 - rho1 * t2 / 24.0,
        )
    } else {
        let s = theta.sin();
        let half = 0.5 * theta;
        let one_minus_cos = 2.0 * half.sin() * half.sin();
        let t2 = theta * theta;
        (
            s / theta,
            one_minus_cos / theta,
            (rho1 * (theta - s) - rho2 * one_minus_cos) / t2,
            (rho1 * one_minus_cos + rho2 * (theta - s)) / t2,
        )
    };
    Matrix3::new(a, b, c13, -b, a, c23, 0.0, 0.0, 1.0)
}

/// Inverse of [`se2_right_jacobian`], exploiting its block upper-triangular form.
pub fn se2_right_jacobian_inv(xi: TangentVec3) -> Matrix3<f64> {
    let jr = se2_right_jacobian(xi);
    let a = jr[(0, 0)];
    let b = jr[(0, 1)];
    let det = a * a + b * b;
    let block_inv = Matrix2::new(a, -b, b, a) / det;
    let tail = -block_inv * Vector2::new(jr[(0, 2)], jr[(1, 2)]);
    Matrix3::new(
        block_inv[(0, 0)],
        block_inv[(0, 1)],
        tail[0],
        block_inv[(1, 0)],
        block_inv[(1, 1)],
        tail[1],
        0.0,
        0.0,
        1.0,
    )
}

/// Inverse left Jacobian, `Jl⁻¹(ξ) = Jr⁻¹(−ξ)`.
pub fn se2_left_jacobian_inv(xi: TangentVec3) -> Matrix3<f64> {
    se2_right_jacobian_inv(TangentVec3::new(-xi.vx, -xi.vy, -xi.omega))
}

/// `mu + sigma · Φ⁻¹(u)`.
pub fn gaussian_quantile(u: f64, mu: f64, sigma: f64) -> Result<f64, GeomError> {
    if !(sigma > 0.0) {
        return Err(GeomError::NonPositiveSigma(sigma));
    }
    Ok(mu + sigma * std_normal_quantile(u)?)
}

/// Standard-normal quantile Φ⁻¹(u), Wichura's AS241 (PPND16) rational
/// approximation, relative accuracy about 1e-16.
pub fn std_normal_quantile(u: f64) -> Result<f64, GeomError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(GeomError::ProbabilityOutOfRange(u));
    }
    Ok(ppnd16(u))
}

const PPND_A: [f64; 8] = [
    3.387132872796366608,
    133.14166789178437745,
    1971.5909503065514427,
    13731.693765509461125,
    45921.953931549871457,
    67265.770927008700853,
    33430.575583588128105,
    2509.0809287301226727,
];
const PPND_B: [f64; 8] = [
    1.0,
    42.313330701600911252,
    687.1870074920579083,
    5394.1960214247511077,
    21213.794301586595867,
    39307.89580009271061,
    28729.085735721942674,
    5226.495278852545925,
];
const PPND_C: [f64; 8] = [
    1.42343711074968357734,
    4.6303378461565452959,
    5.7694972214606914055,
    3.64784832476320460504,
    1.27045825245236838258,
    0.24178072517745061177,
    0.0227238449892691845833,
    7.7454501427834140764e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.05319162663775882187,
    1.6763848301838038494,
    0.68976733498510000455,
    0.14810397642748007459,
    0.0151986665636164571966,
    5.475938084995344946e-4,
    1.05075007164441684324e-9,
];
const PPND_E: [f64; 8] = [
    6.6579046435011037772,
    5.4637849111641143699,
    1.7848265399172913358,
    0.29656057182850489123,
    0.026532189526576123093,
    0.0012426609473880784386,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    0.59983220655588793769,
    0.13692988092273580531,
    0.0148753612908506148525,
    7.868691311456132591e-4,
    1.8463183175100546818e-5,
    1.4215117583164458887e-7,
    2.04426310338993978564e-15,
];

/// Evaluates a polynomial with coefficients in ascending order.
fn horner(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&PPND_A, r) / horner(&PPND_B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        horner(&PPND_C, r) / horner(&PPND_D, r)
    } else {
        let r = r - 5.0;
        horner(&PPND_E, r) / horner(&PPND_F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}
