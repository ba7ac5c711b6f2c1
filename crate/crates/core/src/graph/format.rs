//! Line-oriented text format for factor graphs.
//!
//! ```text
//! VAR POSE2 <name> | VAR POINT2 <name>
//! PRIOR_POSE2 <var> <x> <y> <theta> <c11> <c12> <c13> <c22> <c23> <c33>
//! PRIOR_POINT2 <var> <x> <y> <c11> <c12> <c22>
//! ODOM_POSE2 <from> <to> <dx> <dy> <dtheta> <c11> <c12> <c13> <c22> <c23> <c33>
//! RANGE <a> <b> <z> <sigma>
//! AMB_RANGE <pose> <z> <sigma> <k> <cand1> ... <candk>
//! TRUTH_POSE2 <var> <x> <y> <theta> | TRUTH_POINT2 <var> <x> <y>
//! ```
//!
//! Covariances are given as their row-major upper triangle. Variables must be
//! declared before a factor or truth record mentions them.

use std::fmt::{self, Write as _};

use nalgebra::{Matrix2, Matrix3};
use thiserror::Error;

use super::{sym2, sym3, FactorGraph, FactorKind, GraphBuilder, GraphError, Value, VarKind};
use crate::geom::{Point2, Pose2};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("unknown record tag {0:?}")]
    UnknownTag(String),
    #[error("{tag} expects {expected} fields, found {found}")]
    Arity {
        tag: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot parse {0:?} as a number")]
    BadNumber(String),
    #[error("cannot parse {0:?} as a candidate count")]
    BadCount(String),
    #[error("unknown variable kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parses a graph from its text representation.
pub fn load_graph(text: &str) -> Result<FactorGraph, ParseError> {
    let mut builder = GraphBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        parse_record(&mut builder, &tokens).map_err(|kind| ParseError { line, kind })?;
    }
    Ok(builder.build())
}

fn parse_record(b: &mut GraphBuilder, tokens: &[&str]) -> Result<(), ParseErrorKind> {
    let tag = tokens[0];
    let fields = &tokens[1..];
    let arity = |expected: usize| {
        if fields.len() == expected {
            Ok(())
        } else {
            Err(ParseErrorKind::Arity {
                tag: tag.to_string(),
                expected,
                found: fields.len(),
            })
        }
    };
    match tag {
        "VAR" => {
            arity(2)?;
            let kind = match fields[0] {
                "POSE2" => VarKind::Pose2,
                "POINT2" => VarKind::Point2,
                other => return Err(ParseErrorKind::UnknownKind(other.to_string())),
            };
            b.add_variable(fields[1], kind)?;
        }
        "PRIOR_POSE2" => {
            arity(10)?;
            let v = numbers(&fields[1..])?;
            b.prior_pose2(fields[0], Pose2::new(v[0], v[1], v[2]), cov3(&v[3..]))?;
        }
        "PRIOR_POINT2" => {
            arity(6)?;
            let v = numbers(&fields[1..])?;
            b.prior_point2(fields[0], Point2::new(v[0], v[1]), cov2(&v[2..]))?;
        }
        "ODOM_POSE2" => {
            arity(11)?;
            let v = numbers(&fields[2..])?;
            b.odometry(fields[0], fields[1], Pose2::new(v[0], v[1], v[2]), cov3(&v[3..]))?;
        }
        "RANGE" => {
            arity(4)?;
            let v = numbers(&fields[2..])?;
            b.range(fields[0], fields[1], v[0], v[1])?;
        }
        "AMB_RANGE" => {
            if fields.len() < 4 {
                return Err(ParseErrorKind::Arity {
                    tag: tag.to_string(),
                    expected: 4,
                    found: fields.len(),
                });
            }
            let k: usize = fields[3]
                .parse()
                .map_err(|_| ParseErrorKind::BadCount(fields[3].to_string()))?;
            arity(4 + k)?;
            let v = numbers(&fields[1..3])?;
            b.ambiguous_range(fields[0], v[0], v[1], &fields[4..])?;
        }
        "TRUTH_POSE2" => {
            arity(4)?;
            let v = numbers(&fields[1..])?;
            b.truth(fields[0], Value::Pose(Pose2::new(v[0], v[1], v[2])))?;
        }
        "TRUTH_POINT2" => {
            arity(3)?;
            let v = numbers(&fields[1..])?;
            b.truth(fields[0], Value::Point(Point2::new(v[0], v[1])))?;
        }
        other => return Err(ParseErrorKind::UnknownTag(other.to_string())),
    }
    Ok(())
}

fn numbers(fields: &[&str]) -> Result<Vec<f64>, ParseErrorKind> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ParseErrorKind::BadNumber(f.to_string()))
        })
        .collect()
}

fn cov3(v: &[f64]) -> Matrix3<f64> {
    sym3(v[0], v[1], v[2], v[3], v[4], v[5])
}

fn cov2(v: &[f64]) -> Matrix2<f64> {
    sym2(v[0], v[1], v[2])
}

/// Serializes a graph: declarations, then factors, then truth records.
pub fn save_graph(g: &FactorGraph) -> String {
    let mut out = String::new();
    write_graph(&mut out, g).expect("writing to a String cannot fail");
    out
}

fn write_graph(out: &mut String, g: &FactorGraph) -> fmt::Result {
    for v in g.variables() {
        writeln!(out, "VAR {} {}", v.kind, v.id)?;
    }
    for f in g.factors() {
        let name = |i: usize| g.var_name(f.vars[i]).as_str();
        match &f.kind {
            FactorKind::PriorPose2 { mean, noise } => {
                let c = noise.cov();
                writeln!(
                    out,
                    "PRIOR_POSE2 {} {} {} {} {} {} {} {} {} {}",
                    name(0),
                    mean.x(),
                    mean.y(),
                    mean.theta(),
                    c[(0, 0)],
                    c[(0, 1)],
                    c[(0, 2)],
                    c[(1, 1)],
                    c[(1, 2)],
                    c[(2, 2)]
                )?;
            }
            FactorKind::PriorPoint2 { mean, noise } => {
                let c = noise.cov();
                writeln!(
                    out,
                    "PRIOR_POINT2 {} {} {} {} {} {}",
                    name(0),
                    mean.x,
                    mean.y,
                    c[(0, 0)],
                    c[(0, 1)],
                    c[(1, 1)]
                )?;
            }
            FactorKind::OdometryPose2 { rel, noise } => {
                let c = noise.cov();
                writeln!(
                    out,
                    "ODOM_POSE2 {} {} {} {} {} {} {} {} {} {} {}",
                    name(0),
                    name(1),
                    rel.x(),
                    rel.y(),
                    rel.theta(),
                    c[(0, 0)],
                    c[(0, 1)],
                    c[(0, 2)],
                    c[(1, 1)],
                    c[(1, 2)],
                    c[(2, 2)]
                )?;
            }
            FactorKind::Range { z, sigma } => {
                writeln!(out, "RANGE {} {} {} {}", name(0), name(1), z, sigma)?;
            }
            FactorKind::AmbiguousRange { z, sigma } => {
                write!(out, "AMB_RANGE {} {} {} {}", name(0), z, sigma, f.vars.len() - 1)?;
                for i in 1..f.vars.len() {
                    write!(out, " {}", name(i))?;
                }
                writeln!(out)?;
            }
        }
    }
    for (i, v) in g.variables().iter().enumerate() {
        match g.truth(i) {
            Some(Value::Pose(p)) => writeln!(out, "TRUTH_POSE2 {} {} {} {}", v.id, p.x(), p.y(), p.theta())?,
            Some(Value::Point(p)) => writeln!(out, "TRUTH_POINT2 {} {} {}", v.id, p.x, p.y)?,
            None => {}
        }
    }
    Ok(())
}
