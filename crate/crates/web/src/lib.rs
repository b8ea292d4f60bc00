//! Browser bindings: each export returns a JSON string for `www/main.js`.

use std::io::Cursor;

use factor_count::act::{act_threshold, predicted_spike, SpectralLaw};
use factor_count::analysis::{
    estimate_command, parse_csv, EstimateOptions, IngestOptions, PanelDataset,
};
use factor_count::harness::FIXED_LOADING_STREAM;
use factor_count::methods::Method;
use factor_count::report::to_json;
use factor_count::sim::{build_case, sample_data, SeededRng};
use factor_count::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Simulation {
    case: u8,
    k: usize,
    #[serde(flatten)]
    estimate: factor_count::analysis::EstimateReport,
}

/// Draws one dataset from a simulation case and runs the table estimators.
pub fn simulate_json(case: u8, p: usize, n: usize, k: usize, seed: u64) -> Result<String> {
    let spec = build_case(
        case,
        p,
        k,
        &mut SeededRng::new(seed, FIXED_LOADING_STREAM).rng(),
    )?;
    let data = sample_data(&spec, n, &mut SeededRng::new(seed, 0).rng())?;
    let names = (1..=p).map(|j| format!("y{j}")).collect();
    let ds = PanelDataset::new(names, data)?;
    let estimate = estimate_command(&ds, &Method::TABLE, &EstimateOptions::default())?;
    to_json(&Simulation { case, k, estimate }, false)
}

#[derive(Serialize)]
struct SpikeCurve {
    rho: f64,
    /// Smallest population spike that separates from the noise bulk; also
    /// the ACT cutoff when `p / (n − 1) = rho`.
    detection: f64,
    /// Upper edge of the noise bulk in the sample.
    bulk_edge: f64,
    population: Vec<f64>,
    sample: Vec<f64>,
}

/// Sample location of a population spike over unit-variance noise, for
/// spikes from the detection boundary up to `max_spike`.
pub fn spike_curve_json(rho: f64, max_spike: f64, points: usize) -> Result<String> {
    let law = SpectralLaw::point_mass(1.0, rho)?;
    let detection = 1.0 + rho.sqrt();
    let hi = max_spike.max(detection);
    let steps = points.max(2) - 1;
    let population: Vec<f64> = (0..=steps)
        .map(|i| detection + (hi - detection) * i as f64 / steps as f64)
        .collect();
    let sample = population
        .iter()
        .map(|&l| predicted_spike(l, &law))
        .collect::<Result<_>>()?;
    let curve = SpikeCurve {
        rho,
        detection,
        bulk_edge: detection * detection,
        population,
        sample,
    };
    to_json(&curve, false)
}

/// Runs the estimators on pasted CSV text.
pub fn estimate_csv_json(text: &str, methods: &str) -> Result<String> {
    let methods = Method::parse_list(methods)?;
    let ds = parse_csv(Cursor::new(text.as_bytes()), &IngestOptions::default())?;
    let report = estimate_command(&ds, &methods, &EstimateOptions::default())?;
    to_json(&report, false)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate(
    case: u8,
    p: usize,
    n: usize,
    k: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    js(simulate_json(case, p, n, k, seed.into()))
}

#[wasm_bindgen(js_name = spikeCurve)]
pub fn spike_curve(
    rho: f64,
    max_spike: f64,
    points: usize,
) -> std::result::Result<String, JsError> {
    js(spike_curve_json(rho, max_spike, points))
}

#[wasm_bindgen(js_name = estimateCsv)]
pub fn estimate_csv(text: &str, methods: &str) -> std::result::Result<String, JsError> {
    js(estimate_csv_json(text, methods))
}

/// The ACT cutoff, exported so the page can label its plot.
#[wasm_bindgen(js_name = actThreshold)]
pub fn threshold(p: usize, n: usize) -> f64 {
    act_threshold(p, n)
}
