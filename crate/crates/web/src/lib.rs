//! WebAssembly bindings for the demo page in `www/`. Every export takes and
//! returns JSON strings; the plain `*_json` functions hold the logic so they
//! can be tested natively.

use multiand::buzzers::information_cost;
use multiand::concavity::{concavity_report, CanonicalMeasure};
use multiand::optimize::{maximize, Budget, Objective, SupportPattern};
use multiand::InputDistribution;
use wasm_bindgen::prelude::*;

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("results serialize")
}

/// Cost report for a measure given as `{"k": .., "mass": {"01": ..}}`.
pub fn cost_json(measure: &str) -> Result<String, String> {
    let mu = InputDistribution::from_json_str(measure).map_err(|e| e.to_string())?;
    information_cost(&mu).map(|r| to_json(&r)).map_err(|e| e.to_string())
}

/// Deficit report for the canonical measure with sender `s` (from 1).
pub fn concavity_json(k: usize, s: usize, beta: f64, eps: f64) -> Result<String, String> {
    let c = CanonicalMeasure::new(k, s, beta).map_err(|e| e.to_string())?;
    concavity_report(&c, eps).map(|r| to_json(&r)).map_err(|e| e.to_string())
}

/// Maximum cost over measures vanishing on `zeros`; the trace is dropped.
pub fn maximize_json(zeros: &str, k: usize, internal: bool) -> Result<String, String> {
    let pattern = SupportPattern::parse(Some(k), zeros).map_err(|e| e.to_string())?;
    let objective = if internal { Objective::Internal } else { Objective::External };
    let mut r = maximize(&pattern, objective, Budget::default()).map_err(|e| e.to_string())?;
    r.trace.clear();
    Ok(to_json(&r))
}

#[wasm_bindgen]
pub fn cost(measure: &str) -> Result<String, JsError> {
    cost_json(measure).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn concavity(k: usize, s: usize, beta: f64, eps: f64) -> Result<String, JsError> {
    concavity_json(k, s, beta, eps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn optimum(zeros: &str, k: usize, internal: bool) -> Result<String, JsError> {
    maximize_json(zeros, k, internal).map_err(|e| JsError::new(&e))
}
