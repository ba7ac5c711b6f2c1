//! Fixtures shared by unit tests.

use crate::geom::{se2_between, se2_compose, Point2, Pose2};
use crate::graph::{sym3, FactorGraph, GraphBuilder, Value};

/// Three poses and two landmarks wired like the classic five-variable SLAM
/// example: prior on x0, odometry x0→x1→x2, ranges x0–l0, x1–l1, x2–l1.
/// Measurements are exact, so every residual vanishes at the stored truth.
pub fn fig1a_graph() -> FactorGraph {
    let x0 = Pose2::identity();
    let x1 = Pose2::new(5.0, 0.0, 0.1);
    let x2 = se2_compose(&x1, &Pose2::new(5.0, 0.0, 0.1));
    let l0 = Point2::new(3.0, 6.0);
    let l1 = Point2::new(8.0, -5.0);
    let odom_cov = sym3(0.04, 0.0, 0.0, 0.04, 0.0, 0.01);

    let mut b = GraphBuilder::new();
    for (name, value) in [
        ("x0", Value::Pose(x0)),
        ("l0", Value::Point(l0)),
        ("x1", Value::Pose(x1)),
        ("l1", Value::Point(l1)),
        ("x2", Value::Pose(x2)),
    ] {
        b.add_variable(name, value.kind()).unwrap();
        b.truth(name, value).unwrap();
    }
    b.prior_pose2("x0", x0, sym3(0.01, 0.0, 0.0, 0.01, 0.0, 0.001)).unwrap();
    b.range("x0", "l0", x0.translation().distance(l0), 0.5).unwrap();
    b.odometry("x0", "x1", se2_between(&x0, &x1), odom_cov).unwrap();
    b.range("x1", "l1", x1.translation().distance(l1), 0.5).unwrap();
    b.odometry("x1", "x2", se2_between(&x1, &x2), odom_cov).unwrap();
    b.range("x2", "l1", x2.translation().distance(l1), 0.5).unwrap();
    b.build()
}

/// Random connected graph mixing every factor kind, factors in shuffled order.
pub fn random_graph(seed: u64) -> FactorGraph {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_poses = rng.random_range(1..8);
    let n_points = rng.random_range(0..4);
    let mut b = GraphBuilder::new();
    let poses: Vec<String> = (0..n_poses).map(|i| format!("x{i}")).collect();
    let points: Vec<String> = (0..n_points).map(|i| format!("l{i}")).collect();
    for p in &poses {
        b.pose(p).unwrap();
    }
    for p in &points {
        b.point(p).unwrap();
    }

    enum Spec {
        PriorPose(usize),
        PriorPoint(usize),
        Odom(usize, usize),
        Range(String, String),
        Amb(usize, Vec<usize>),
    }
    let mut specs = vec![Spec::PriorPose(0)];
    for i in 1..n_poses {
        specs.push(Spec::Odom(rng.random_range(0..i), i));
    }
    for (j, _) in points.iter().enumerate() {
        let pose = rng.random_range(0..n_poses);
        specs.push(Spec::Range(poses[pose].clone(), points[j].clone()));
    }
    for _ in 0..rng.random_range(0..5) {
        match rng.random_range(0..5) {
            0 if n_poses > 1 => {
                let a = rng.random_range(0..n_poses);
                let b = (a + rng.random_range(1..n_poses)) % n_poses;
                specs.push(Spec::Odom(a, b));
            }
            1 if n_points > 0 => specs.push(Spec::PriorPoint(rng.random_range(0..n_points))),
            2 if n_points >= 2 => {
                let mut cands: Vec<usize> = (0..n_points).collect();
                cands.shuffle(&mut rng);
                cands.truncate(rng.random_range(2..=n_points));
                specs.push(Spec::Amb(rng.random_range(0..n_poses), cands));
            }
            3 => specs.push(Spec::PriorPose(rng.random_range(0..n_poses))),
            _ => {
                let all: Vec<&String> = poses.iter().chain(&points).collect();
                if all.len() > 1 {
                    let a = rng.random_range(0..all.len());
                    let b = (a + rng.random_range(1..all.len())) % all.len();
                    specs.push(Spec::Range(all[a].clone(), all[b].clone()));
                }
            }
        }
    }
    specs.shuffle(&mut rng);

    let cov3 = sym3(0.2, 0.01, 0.0, 0.3, 0.02, 0.05);
    let cov2 = crate::graph::sym2(0.5, 0.1, 0.4);
    for s in specs {
        match s {
            Spec::PriorPose(i) => {
                let mean = Pose2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0));
                b.prior_pose2(&poses[i], mean, cov3).unwrap();
            }
            Spec::PriorPoint(i) => {
                let mean = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                b.prior_point2(&points[i], mean, cov2).unwrap();
            }
            Spec::Odom(a, c) => {
                let rel = Pose2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
                b.odometry(&poses[a], &poses[c], rel, cov3).unwrap();
            }
            Spec::Range(a, c) => {
                b.range(&a, &c, rng.random_range(0.5..10.0), rng.random_range(0.1..1.0)).unwrap();
            }
            Spec::Amb(p, cands) => {
                let names: Vec<&str> = cands.iter().map(|&c| points[c].as_str()).collect();
                b.ambiguous_range(&poses[p], rng.random_range(0.5..10.0), 0.5, &names).unwrap();
            }
        }
    }
    b.build()
}

/// Uniformly scattered values of the right kind for every variable of `g`.
pub fn random_assignment(g: &FactorGraph, seed: u64) -> crate::graph::Assignment {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = g
        .variables()
        .iter()
        .map(|v| match v.kind {
            crate::graph::VarKind::Pose2 => Value::Pose(Pose2::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-3.1..3.1),
            )),
            crate::graph::VarKind::Point2 => {
                Value::Point(Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            }
        })
        .collect();
    crate::graph::Assignment::new(values)
}
