use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use fgnest::decompose::decompose;
use fgnest::graph::{load_graph, logsumexp, save_graph, FactorGraph};
use fgnest::hypotheses::solve_hypotheses;
use fgnest::laplace::{default_init, gauss_newton_map, laplace_samples, DEFAULT_TOL};
use fgnest::metrics::{mmd, rmse, sample_mean, MMD_ROWS};
use fgnest::nested::run_nested;
use fgnest::samples::SampleMatrix;
use fgnest::scenarios::{generate, ScenarioSpec};

use crate::error::{self, CliError};
use crate::{Command, Metric};

/// One per solve, laplace, or hypotheses run. `wall_time_s` is the only
/// field that varies between identical invocations.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config: serde_json::Value,
    seed: u64,
    input: String,
    input_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    logz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logz_err: Option<f64>,
    converged: bool,
    wall_time_s: f64,
    outputs: Vec<String>,
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate {
            scenario,
            seed,
            poses,
            robots,
            loops,
            landmarks,
            steps,
            output,
            metadata,
        } => {
            let mut spec = ScenarioSpec::new(scenario).with_seed(seed);
            spec.poses = poses.unwrap_or(spec.poses);
            spec.robots = robots.unwrap_or(spec.robots);
            spec.loops = loops.unwrap_or(spec.loops);
            spec.landmarks = landmarks.unwrap_or(spec.landmarks);
            cmd_generate(spec, steps, &output, &metadata.unwrap_or_else(|| suffixed(&output, ".json")))
        }
        Command::Decompose { graph } => cmd_decompose(&graph),
        Command::Solve {
            graph,
            output,
            ns,
            resample,
            manifest,
        } => {
            let manifest = manifest.unwrap_or_else(|| suffixed(&output, ".manifest.json"));
            cmd_solve(&graph, &output, &manifest, &ns.config(), resample)
        }
        Command::Laplace {
            graph,
            output,
            draws,
            seed,
            max_iters,
            manifest,
        } => {
            let manifest = manifest.unwrap_or_else(|| suffixed(&output, ".manifest.json"));
            cmd_laplace(&graph, &output, &manifest, draws, seed, max_iters)
        }
        Command::Evaluate { metric, a, b, seed } => cmd_evaluate(metric, &a, &b, seed),
        Command::Hypotheses {
            graph,
            output,
            weights,
            jobs,
            draws,
            ns,
            manifest,
        } => {
            let weights = weights.unwrap_or_else(|| suffixed(&output, ".weights.csv"));
            let manifest = manifest.unwrap_or_else(|| suffixed(&output, ".manifest.json"));
            cmd_hypotheses(&graph, &output, &weights, &manifest, &ns.config(), jobs, draws)
        }
    }
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn digest(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

/// Graph plus the digest of the exact bytes it was parsed from.
fn load(path: &Path) -> Result<(FactorGraph, String), CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::parse(path, e))?;
    let g = load_graph(&text).map_err(|e| error::graph_parse(path, e))?;
    Ok((g, digest(&bytes)))
}

fn load_samples(path: &Path) -> Result<SampleMatrix, CliError> {
    let bytes = read(path)?;
    SampleMatrix::read_csv(bytes.as_slice()).map_err(|e| error::samples(path, e))
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    write(path, text.as_bytes())
}

fn display(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn cmd_generate(spec: ScenarioSpec, step: Option<usize>, output: &Path, metadata: &Path) -> Result<(), CliError> {
    let scenario = generate(&spec).map_err(|e| CliError::Invalid(e.to_string()))?;
    let final_step = scenario.final_step();
    if let Some(t) = step {
        if t > final_step {
            return Err(CliError::Invalid(format!("step {t} is past the final step {final_step}")));
        }
    }
    let graph = step.map_or_else(|| scenario.graph.clone(), |t| scenario.at_step(t));
    let variables: Vec<_> = scenario
        .graph
        .variables()
        .iter()
        .zip(&scenario.steps)
        .filter(|(_, &s)| step.is_none_or(|t| s <= t))
        .map(|(v, &s)| json!({ "name": v.id.as_str(), "step": s }))
        .collect();
    let meta = json!({
        "scenario": spec,
        "truncated_at": step,
        "final_step": final_step,
        "variables": variables,
    });
    write(output, save_graph(&graph).as_bytes())?;
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    write(metadata, text.as_bytes())
}

fn cmd_decompose(path: &Path) -> Result<(), CliError> {
    let (g, _) = load(path)?;
    let d = decompose(&g).map_err(|e| CliError::Invalid(e.to_string()))?;
    let ids = |v: &[fgnest::graph::FactorId]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    println!("|AC| = {}", d.ac.len());
    println!("|LC| = {}", d.lc.len());
    println!("AC: {}", ids(&d.ac));
    println!("LC: {}", ids(&d.lc));
    Ok(())
}

fn cmd_solve(
    path: &Path,
    output: &Path,
    manifest: &Path,
    config: &fgnest::nested::NsConfig,
    resample: Option<usize>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let (g, input_digest) = load(path)?;
    let d = decompose(&g).map_err(|e| CliError::Invalid(e.to_string()))?;
    let r = run_nested(&g, &d, config).map_err(error::nested)?;
    let weighted = SampleMatrix::from_nested(&g, &r).map_err(|e| CliError::Invalid(e.to_string()))?;
    let samples = match resample {
        Some(n) if n == 0 => return Err(CliError::Invalid("--resample must be positive".into())),
        Some(n) => weighted.resample(n, config.seed),
        None => weighted,
    };
    write(output, samples.to_csv_string().as_bytes())?;
    write_manifest(
        manifest,
        &RunManifest {
            command: "solve",
            config: json!({ "nested": config, "resample": resample }),
            seed: config.seed,
            input: path.display().to_string(),
            input_digest,
            logz: Some(r.logz),
            logz_err: Some(r.logz_err),
            converged: r.converged,
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs: display(&[output, manifest]),
        },
    )?;
    if !r.converged {
        return Err(CliError::NotConverged(format!(
            "stopping rule not reached within {} iterations",
            config.max_iters
        )));
    }
    Ok(())
}

fn cmd_laplace(path: &Path, output: &Path, manifest: &Path, draws: usize, seed: u64, max_iters: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let (g, input_digest) = load(path)?;
    let init = default_init(&g).map_err(error::laplace)?;
    let m = gauss_newton_map(&g, &init, max_iters, DEFAULT_TOL).map_err(error::laplace)?;
    let draws_out = laplace_samples(&m, draws, seed).map_err(error::laplace)?;
    let samples = SampleMatrix::from_assignments(&g, &draws_out).map_err(|e| CliError::Invalid(e.to_string()))?;
    write(output, samples.to_csv_string().as_bytes())?;
    write_manifest(
        manifest,
        &RunManifest {
            command: "laplace",
            config: json!({ "draws": draws, "max_iters": max_iters, "tol": DEFAULT_TOL, "map_cost": m.cost, "map_iterations": m.iterations }),
            seed,
            input: path.display().to_string(),
            input_digest,
            logz: None,
            logz_err: None,
            converged: m.converged,
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs: display(&[output, manifest]),
        },
    )
}

/// Equal-weight sets are compared as they are; weighted ones are first
/// resampled, with the same seed for both sides.
fn mmd_input(s: SampleMatrix, seed: u64) -> SampleMatrix {
    let first = s.logw()[0];
    if s.logw().iter().all(|&w| w == first) {
        s
    } else {
        s.resample(MMD_ROWS, seed)
    }
}

fn cmd_evaluate(metric: Metric, a_path: &Path, b_path: &Path, seed: u64) -> Result<(), CliError> {
    let a = load_samples(a_path)?;
    let b = load_samples(b_path)?;
    if a.labels() != b.labels() {
        return Err(CliError::Invalid("sample files have different columns".into()));
    }
    let invalid = |e: fgnest::metrics::MetricsError| CliError::Invalid(e.to_string());
    let report = match metric {
        Metric::Rmse => {
            let value = rmse(&sample_mean(&a).map_err(invalid)?, &sample_mean(&b).map_err(invalid)?).map_err(invalid)?;
            json!({ "metric": "rmse", "value": value, "rows_a": a.n_rows(), "rows_b": b.n_rows() })
        }
        Metric::Mmd => {
            let (a, b) = (mmd_input(a, seed), mmd_input(b, seed));
            let r = mmd(&a, &b).map_err(invalid)?;
            json!({ "metric": "mmd", "value": r.mmd, "bandwidth_sq": r.bandwidth_sq, "rows_a": r.n_a, "rows_b": r.n_b })
        }
    };
    println!("{report}");
    Ok(())
}

fn cmd_hypotheses(
    path: &Path,
    output: &Path,
    weights_path: &Path,
    manifest: &Path,
    config: &fgnest::nested::NsConfig,
    jobs: usize,
    draws: usize,
) -> Result<(), CliError> {
    let start = Instant::now();
    if jobs == 0 || draws == 0 {
        return Err(CliError::Invalid("--jobs and --draws must be positive".into()));
    }
    let (g, input_digest) = load(path)?;
    let set = solve_hypotheses(&g, config, jobs).map_err(error::hypotheses)?;

    let mut table = String::from("index,label,logz,logz_err,weight,stalled\n");
    for (i, (h, r)) in set.hypotheses.iter().zip(&set.results).enumerate() {
        table += &format!("{i},{},{},{},{:e},{}\n", h.label(), r.logz, r.logz_err, set.weights[i], r.stall.is_some());
    }
    let mixed = SampleMatrix::from_assignments(&g, &set.mixture(draws, config.seed)).map_err(|e| CliError::Invalid(e.to_string()))?;
    write(weights_path, table.as_bytes())?;
    write(output, mixed.to_csv_string().as_bytes())?;

    // Uniform association prior: the mixture model's evidence is the mean of
    // the per-hypothesis evidences.
    let logz = logsumexp(&set.logzs) - (set.logzs.len() as f64).ln();
    let logz_err = set
        .weights
        .iter()
        .zip(&set.results)
        .map(|(w, r)| (w * r.logz_err).powi(2))
        .sum::<f64>()
        .sqrt();
    let converged = set.results.iter().all(|r| r.converged);
    write_manifest(
        manifest,
        &RunManifest {
            command: "hypotheses",
            config: json!({ "nested": config, "jobs": jobs, "draws": draws, "hypotheses": set.hypotheses.len() }),
            seed: config.seed,
            input: path.display().to_string(),
            input_digest,
            logz: Some(logz),
            logz_err: Some(logz_err),
            converged,
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs: display(&[output, weights_path, manifest]),
        },
    )
}
