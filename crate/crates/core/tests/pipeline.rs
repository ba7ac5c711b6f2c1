//! Text file to weighted samples and back, checked against a closed form.
//!
//! Two independent priors on one landmark form a linear-Gaussian model: one
//! prior is sampled, the other is the likelihood. With diagonal covariances
//! the evidence and posterior factor per axis.

use fgnest::decompose::decompose;
use fgnest::graph::{load_graph, save_graph};
use fgnest::metrics::sample_mean;
use fgnest::nested::{run_nested, NsConfig};
use fgnest::samples::SampleMatrix;

const GRAPH: &str = "\
# landmark seen by two independent surveys
VAR POSE2 x0
VAR POINT2 l0
PRIOR_POSE2 x0 0 0 0 0.01 0 0 0.01 0 0.0001
PRIOR_POINT2 l0 3 -1 4 0 1
PRIOR_POINT2 l0 4.5 0 1 0 0.25
";

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

#[test]
fn file_to_samples_matches_gaussian_product() {
    let g = load_graph(GRAPH).unwrap();
    assert_eq!(load_graph(&save_graph(&g)).unwrap(), g);

    let d = decompose(&g).unwrap();
    assert_eq!((d.ac.len(), d.lc.len()), (2, 1));
    let r = run_nested(&g, &d, &NsConfig { n_live: 800, seed: 4, ..NsConfig::default() }).unwrap();

    // Per axis: prior N(m1, v1), likelihood N(m2; l, v2).
    let axes = [(3.0, 4.0, 4.5, 1.0), (-1.0, 1.0, 0.0, 0.25)];
    let logz: f64 = axes.iter().map(|&(m1, v1, m2, v2)| ln_normal(m2, m1, v1 + v2)).sum();
    assert!((r.logz - logz).abs() <= 3.0 * r.logz_err, "{} ± {} vs {logz}", r.logz, r.logz_err);

    let s = SampleMatrix::from_nested(&g, &r).unwrap();
    let text = s.to_csv_string();
    let back = SampleMatrix::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back.labels(), s.labels());
    assert_eq!(back.n_rows(), s.n_rows());

    let mean = sample_mean(&back).unwrap();
    let ess = 1.0 / back.weights().iter().map(|w| w * w).sum::<f64>();
    for (k, &(m1, v1, m2, v2)) in axes.iter().enumerate() {
        let v = 1.0 / (1.0 / v1 + 1.0 / v2);
        let m = v * (m1 / v1 + m2 / v2);
        let label = ["l0.x", "l0.y"][k];
        let got = mean.values[mean.labels.iter().position(|l| l == label).unwrap()];
        assert!((got - m).abs() <= 4.0 * (v / ess).sqrt(), "{label}: {got} vs {m}");
    }
}
