//! Browser bindings: Pocock boundaries, a side-by-side simulation of the
//! three testing procedures, and control-variates data efficiency.

use dasense_core::power::{fit_gamma_model, ModelSource};
use dasense_core::rank::{data_efficiency, EfficiencyInputs};
use dasense_core::sequential::{
    make_plan, pocock_monte_carlo, run_procedure, Outcome, PlanKind, PocockEstimate, ScoreStream,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureSummary {
    pub kind: PlanKind,
    pub label: String,
    pub per_look_alpha: f64,
    pub power: f64,
    pub mean_spend: f64,
    /// Fraction of runs stopped at each look.
    pub stops_by_look: Vec<f64>,
}

pub fn pocock(peeks: usize, alpha: f64, reps: usize, seed: u64) -> dasense_core::Result<PocockEstimate> {
    pocock_monte_carlo(peeks, alpha, reps, seed)
}

/// Runs each procedure `reps` times on Gamma judgment models whose means
/// differ by `delta`; replicate `r` sees the same judgments under every plan.
pub fn simulate_procedures(
    mean: f64,
    variance: f64,
    delta: f64,
    budget: usize,
    peeks: usize,
    reps: usize,
    seed: u64,
) -> dasense_core::Result<Vec<ProcedureSummary>> {
    let a = fit_gamma_model(mean, variance)?;
    let b = a.shifted(-delta)?;
    PlanKind::ALL
        .iter()
        .map(|&kind| {
            let looks = if kind == PlanKind::Fixed { 1 } else { peeks };
            let plan = make_plan(kind, budget, looks, 0.05, None)?;
            let (mut significant, mut spent) = (0usize, 0usize);
            let mut stops = vec![0usize; looks];
            for r in 0..reps {
                let mut data = ScoreStream::new(ModelSource::new(&a, &b, seed, &[r as u64]));
                let result = run_procedure(&plan, &mut data)?;
                significant += usize::from(result.outcome == Outcome::Significant);
                spent += result.judgments_spent;
                stops[result.stopped_at_peek - 1] += 1;
            }
            Ok(ProcedureSummary {
                kind,
                label: plan.label(),
                per_look_alpha: plan.per_look_alpha,
                power: significant as f64 / reps as f64,
                mean_spend: spent as f64 / reps as f64,
                stops_by_look: stops.iter().map(|&s| s as f64 / reps as f64).collect(),
            })
        })
        .collect()
}

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// JSON `{critical_z, per_look_alpha, achieved_fpr}`.
#[wasm_bindgen(js_name = pocockBoundary)]
pub fn pocock_boundary(peeks: usize, alpha: f64, reps: usize, seed: u32) -> Result<String, JsValue> {
    let estimate = pocock(peeks, alpha, reps, u64::from(seed)).map_err(js_err)?;
    serde_json::to_string(&estimate).map_err(js_err)
}

/// JSON array with one [`ProcedureSummary`] per plan kind.
#[wasm_bindgen(js_name = compareProcedures)]
pub fn compare_procedures(
    mean: f64,
    variance: f64,
    delta: f64,
    budget: usize,
    peeks: usize,
    reps: usize,
    seed: u32,
) -> Result<String, JsValue> {
    let summaries =
        simulate_procedures(mean, variance, delta, budget, peeks, reps, u64::from(seed)).map_err(js_err)?;
    serde_json::to_string(&summaries).map_err(js_err)
}

#[wasm_bindgen(js_name = dataEfficiency)]
pub fn data_efficiency_js(rho: f64, reducible: f64) -> Result<f64, JsValue> {
    let inputs = EfficiencyInputs::from_reducible(rho, reducible).map_err(js_err)?;
    data_efficiency(inputs).map_err(js_err)
}
