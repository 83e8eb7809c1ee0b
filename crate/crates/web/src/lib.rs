//! Browser bindings: solve a scenario, sweep the offered load, run a short
//! simulation. Every call takes TOML text and returns a JSON string.

use edca_core::metrics::{self, Metrics};
use edca_core::sim;
use edca_core::{parse_scenario, ScenarioDocument, SolveError, SolveOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest simulation accepted from the page, seconds.
pub const MAX_SIM_SECONDS: f64 = 20.0;
pub const MAX_SWEEP_POINTS: usize = 50;

#[derive(Serialize)]
struct Solved {
    converged: bool,
    iterations: usize,
    metrics: Metrics,
}

#[derive(Serialize)]
struct SweepPoint {
    load_bps: f64,
    converged: bool,
    metrics: Metrics,
}

fn doc(toml: &str) -> Result<ScenarioDocument, String> {
    parse_scenario(toml).map_err(|e| e.to_string())
}

fn solve_metrics(doc: &ScenarioDocument) -> Result<(bool, usize, Metrics), String> {
    let model = match edca_core::solve(&doc.scenario, &SolveOptions::default()) {
        Ok(m) => m,
        Err(SolveError::MaxIterations(best)) => *best,
        Err(e) => return Err(e.to_string()),
    };
    let m = metrics::compute(&model).map_err(|e| e.to_string())?;
    Ok((model.converged, model.iterations, m))
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn solve_json(toml: &str) -> Result<String, String> {
    let (converged, iterations, metrics) = solve_metrics(&doc(toml)?)?;
    json(&Solved {
        converged,
        iterations,
        metrics,
    })
}

/// Per-flow offered load from `from` to `to` bps in `points` steps.
pub fn sweep_json(toml: &str, from: f64, to: f64, points: usize) -> Result<String, String> {
    if !(2..=MAX_SWEEP_POINTS).contains(&points) {
        return Err(format!("points must be between 2 and {MAX_SWEEP_POINTS}"));
    }
    if !(from.is_finite() && to.is_finite() && 0.0 <= from && from < to) {
        return Err("load range must satisfy 0 <= from < to".into());
    }
    let base = doc(toml)?;
    let rows = (0..points)
        .map(|k| {
            let load_bps = from + (to - from) * k as f64 / (points - 1) as f64;
            let d = ScenarioDocument {
                scenario: base.scenario.with_offered_load(load_bps),
                traffic: base.traffic.clone(),
            };
            let (converged, _, metrics) = solve_metrics(&d)?;
            Ok(SweepPoint {
                load_bps,
                converged,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    json(&rows)
}

pub fn simulate_json(toml: &str, seed: u64, seconds: f64) -> Result<String, String> {
    if !(seconds > 0.0 && seconds <= MAX_SIM_SECONDS) {
        return Err(format!("duration must be in (0, {MAX_SIM_SECONDS}] s"));
    }
    let d = doc(toml)?;
    let stats = sim::run(&d.scenario, &d.traffic, seed, seconds).map_err(|e| e.to_string())?;
    json(&stats.metrics())
}

#[wasm_bindgen]
pub fn solve(toml: &str) -> Result<String, JsError> {
    solve_json(toml).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(toml: &str, from: f64, to: f64, points: usize) -> Result<String, JsError> {
    sweep_json(toml, from, to, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(toml: &str, seed: u64, seconds: f64) -> Result<String, JsError> {
    simulate_json(toml, seed, seconds).map_err(|e| JsError::new(&e))
}
