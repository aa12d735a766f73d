//! WebAssembly bindings behind the demo page in `www/`.
//!
//! Every export returns JSON text. The `*_json` functions hold the logic so
//! they can be tested natively.

use std::collections::BTreeMap;

use gridflood::engine::EngineConfig;
use gridflood::geometry::{envelope_samples, equidistant_tangent_points, max_relax_error, optimal_tangent_points, PfVariant};
use gridflood::grid::{convert_depths, FloodScenario, ScenarioSet, DEFAULT_THRESHOLDS};
use gridflood::mitigation::{plan_cost, CostTable, MitigationPlan};
use gridflood::recourse::RecourseContext;
use gridflood::synthetic::toy_case;
use gridflood::twostage::{ModelKind, Study, StudyOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn text(e: impl ToString) -> String {
    e.to_string()
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Optimal and equidistant tangent points plus sampled envelopes.
pub fn tangents_json(t: usize, theta_delta_max: f64, samples: usize) -> Out {
    let opt = optimal_tangent_points(t, theta_delta_max).map_err(text)?;
    let eq = if t >= 2 { Some(equidistant_tangent_points(t, theta_delta_max).map_err(text)?) } else { None };
    let a = envelope_samples(&opt, samples);
    let b = eq.as_ref().map(|e| envelope_samples(e, samples));
    let rows: Vec<Value> = a
        .iter()
        .enumerate()
        .map(|(i, s)| json!({ "theta": s[0], "cos": s[1], "optimal": s[2], "equidistant": b.as_ref().map(|b| b[i][2]), "b2": s[3] }))
        .collect();
    Ok(json!({
        "optimal": { "points": opt.points, "max_error": max_relax_error(&opt) },
        "equidistant": eq.as_ref().map(|e| json!({ "points": e.points, "max_error": max_relax_error(e) })),
        "samples": rows,
    })
    .to_string())
}

fn plan_json(plan: &MitigationPlan) -> Value {
    json!(plan.to_level_map(&toy_case()))
}

/// Second-stage outcome on the toy grid for a given protection plan and
/// flood depths.
pub fn recourse_json(pf: &str, level_k1: usize, level_k2: usize, depth_k1: f64, depth_k2: f64) -> Out {
    let case = toy_case();
    let variant = PfVariant::parse(pf).map_err(text)?;
    let levels = DEFAULT_THRESHOLDS.len();
    if level_k1 >= levels || level_k2 >= levels {
        return Err(format!("protection levels must be below {levels}"));
    }
    let plan = MitigationPlan::from_levels(&[level_k1, level_k2], levels);
    let xi = convert_depths(&[depth_k1, depth_k2], &DEFAULT_THRESHOLDS).map_err(text)?;
    let ctx = RecourseContext::new(&case, variant).map_err(text)?;
    let s = ctx.evaluate(&plan, &xi, &EngineConfig::default()).map_err(text)?;
    Ok(json!({
        "cost": plan_cost(&plan, &CostTable::from_case(&case, levels)),
        "objective": s.objective,
        "load_shed": s.load_shed,
        "overgeneration": s.overgeneration,
        "chi": s.chi,
        "bus_live": s.alpha,
        "branch_live": s.beta,
        "p_flow": s.p_flow,
    })
    .to_string())
}

fn toy_set(depth_k1: f64, depth_k2: f64, prob_k1: f64) -> ScenarioSet {
    let scenario = |id: &str, prob: f64, k: &str, d: f64| FloodScenario {
        id: id.into(),
        prob,
        depths: BTreeMap::from([(k.to_string(), d)]),
    };
    ScenarioSet {
        thresholds: DEFAULT_THRESHOLDS.to_vec(),
        scenarios: vec![scenario("w1", prob_k1, "k1", depth_k1), scenario("w2", 1.0 - prob_k1, "k2", depth_k2)],
    }
}

/// All eight models over budgets `0..=max_budget` on the toy grid with two
/// scenarios: `k1` flooded with probability `prob_k1`, otherwise `k2`.
pub fn sweep_json(pf: &str, depth_k1: f64, depth_k2: f64, prob_k1: f64, max_budget: u64) -> Out {
    let case = toy_case();
    let set = toy_set(depth_k1, depth_k2, prob_k1);
    set.validate_for(&case).map_err(text)?;
    let study = Study::new(&case, &set, PfVariant::parse(pf).map_err(text)?, StudyOptions::for_case(&case)).map_err(text)?;
    let mut rows = Vec::new();
    for f in 0..=max_budget {
        let mut row = json!({ "budget": f });
        for kind in ModelKind::ALL {
            let r = study.solve(kind, f).map_err(text)?;
            row[kind.name()] = json!({ "z": r.z, "plan": r.plan.as_ref().map(plan_json) });
        }
        rows.push(row);
    }
    let threshold = |k| study.threshold(k).map_err(text);
    Ok(json!({ "thresholds": { "SP": threshold(ModelKind::Sp)?, "RO": threshold(ModelKind::Ro)? }, "rows": rows }).to_string())
}

#[wasm_bindgen]
pub fn tangents(t: usize, theta_delta_max: f64, samples: usize) -> Result<String, JsValue> {
    js(tangents_json(t, theta_delta_max, samples))
}

#[wasm_bindgen]
pub fn recourse(pf: &str, level_k1: usize, level_k2: usize, depth_k1: f64, depth_k2: f64) -> Result<String, JsValue> {
    js(recourse_json(pf, level_k1, level_k2, depth_k1, depth_k2))
}

#[wasm_bindgen]
pub fn sweep(pf: &str, depth_k1: f64, depth_k2: f64, prob_k1: f64, max_budget: u32) -> Result<String, JsValue> {
    js(sweep_json(pf, depth_k1, depth_k2, prob_k1, max_budget as u64))
}
