//! Small Monte Carlo scenarios that complement the acceptance gate.

use factor_count::analysis::{estimate_command, EstimateOptions, PanelDataset};
use factor_count::harness::replicate;
use factor_count::methods::{evaluate, EstimatorParams, Method};
use factor_count::sim::{sample_data, FactorModelSpec, ModelOrigin, Population, SeededRng};
use factor_count::spectral::{covariance_spectrum, DataMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// With loadings `10·I` on the first `K` series, the noisy series `K + 1`
/// sits between the factor spikes and the bulk, and covariance ratio
/// methods count it as a factor.
#[test]
fn scaled_noise_series_inflates_covariance_estimates() {
    let (p, k, n) = (200, 5, 300);
    let mut b = DMatrix::zeros(p, k);
    for j in 0..k {
        b[(j, j)] = 10.0;
    }
    let mut nu2 = vec![1.0; p];
    nu2[k] = 25.0;
    let spec = FactorModelSpec::new(
        b,
        nu2,
        vec![0.0; p],
        Population::Gaussian,
        ModelOrigin::Custom,
    )
    .unwrap();
    let params = EstimatorParams::new(20);
    let over = replicate(50, 0, |r| {
        let mut rng = SeededRng::new(3, r as u64).rng();
        let cov = covariance_spectrum(&sample_data(&spec, n, &mut rng).unwrap()).unwrap();
        evaluate(Method::Er, &cov, n, &params).unwrap() > k
    });
    let share = over.iter().filter(|&&o| o).count() as f64 / over.len() as f64;
    assert!(
        share >= 0.9,
        "ER overestimated in {share:.2} of replications"
    );
}

#[test]
fn pure_noise_gives_zero_factors() {
    let (n, p) = (200, 40);
    let zeros = replicate(40, 0, |r| {
        let mut rng = SeededRng::new(17, r as u64).rng();
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let ds = PanelDataset::new(names, DataMatrix::new(x).unwrap()).unwrap();
        let report = estimate_command(&ds, &[Method::Act], &EstimateOptions::default()).unwrap();
        report.estimate(Method::Act) == Some(0)
    });
    let share = zeros.iter().filter(|&&z| z).count() as f64 / zeros.len() as f64;
    assert!(
        share >= 0.95,
        "ACT returned 0 in {share:.2} of noise datasets"
    );
}
