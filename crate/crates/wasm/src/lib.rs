//! Bindings behind `www/index.html`. Each exported function has a plain Rust
//! twin returning `Result<_, String>` so it can be tested off the browser.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cellbalance_core::ctp::{softmax3, traffic_score, ScoreVector};
use cellbalance_core::hexgrid::{HexLayout, ScopeRule, TRIANGLES_PER_HEX};
use cellbalance_core::metrics::Comparison;
use cellbalance_core::pct::{balance, Assignment};
use cellbalance_core::rng::Stream;
use cellbalance_core::svg::{render, SvgOptions};
use cellbalance_core::trafficgen::{gen_traffic, Scenario, ScenarioSpec};

#[derive(Serialize)]
pub struct Moved {
    pub triangle: String,
    pub from: usize,
    pub to: usize,
    pub score: f64,
}

#[derive(Serialize)]
pub struct BalanceDemo {
    pub before_svg: String,
    pub after_svg: String,
    pub totals_before: Vec<f64>,
    pub totals_after: Vec<f64>,
    pub moved: Vec<Moved>,
    pub metrics: Option<Comparison>,
}

/// Scores drawn from U(40, 80); hexagon 0 is scaled by `hot`.
pub fn demo_scores(layout: &HexLayout, seed: u64, hot: f64) -> Vec<f64> {
    let mut rng = Stream::new(seed);
    (0..layout.n_triangles())
        .map(|i| {
            let s = rng.uniform_range(40.0, 80.0);
            if i < TRIANGLES_PER_HEX {
                s * hot
            } else {
                s
            }
        })
        .collect()
}

pub fn balance_demo(preset: &str, seed: u64, hot: f64, second_ring: bool) -> Result<BalanceDemo, String> {
    let layout = HexLayout::preset(preset).ok_or_else(|| format!("unknown layout {preset:?}"))?;
    if !(hot.is_finite() && hot > 0.0) {
        return Err("hotspot factor must be positive".into());
    }
    let scores = ScoreVector::new(demo_scores(&layout, seed, hot)).map_err(|e| e.to_string())?;
    let rule = ScopeRule {
        include_second_ring: second_ring,
    };
    let r = balance(&scores, &layout, rule).map_err(|e| e.to_string())?;
    let draw = |title: &str, a: &Assignment| {
        let opts = SvgOptions {
            title: Some(title),
            scores: None,
            scale: Some(70.0),
        };
        render(&layout, a, &opts)
    };
    let metrics = if layout.n_hex() >= 2 {
        Some(Comparison::new(&r.hex_traffic_before, &r.hex_traffic_after).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(BalanceDemo {
        before_svg: draw("before", &Assignment::identity(&layout)),
        after_svg: draw("after", &r.assignment),
        totals_before: r.hex_traffic_before.clone(),
        totals_after: r.hex_traffic_after.clone(),
        moved: r
            .added
            .iter()
            .map(|t| Moved {
                triangle: t.triangle.to_string(),
                from: t.from,
                to: t.to,
                score: t.score,
            })
            .collect(),
        metrics,
    })
}

pub fn scenario_series(
    scenario: &str,
    base: f64,
    ratio: f64,
    changepoint: usize,
    sigma: f64,
    seed: u64,
    length: usize,
) -> Result<Vec<f64>, String> {
    let scenario = match scenario {
        "flat" => Scenario::Flat,
        "weekly" => Scenario::Weekly { weekend_ratio: ratio },
        "changepoint" => Scenario::Changepoint {
            changepoint_step: changepoint,
            post_ratio: ratio,
        },
        other => return Err(format!("unknown scenario {other:?}")),
    };
    let spec = ScenarioSpec {
        scenario,
        base,
        noise_sigma: sigma,
        seed,
    };
    gen_traffic(&spec, length).map(|s| s.values).map_err(|e| e.to_string())
}

/// Activates raw priority forecasts and scores them: `[w1, w2, w3, score]`.
pub fn score_breakdown(traffic: f64, p1: f64, p2: f64, p3: f64) -> Result<Vec<f64>, String> {
    let (w1, w2, w3) = softmax3(p1, p2, p3);
    let score = traffic_score(traffic, w1, w2, w3).map_err(|e| e.to_string())?;
    Ok(vec![w1, w2, w3, score])
}

/// Balances a preset layout (`wnl1` or `wnl2`) with seeded scores and
/// returns a JSON object with both maps, totals, moves and metrics.
#[wasm_bindgen(js_name = balancePreset)]
pub fn balance_preset(preset: &str, seed: u32, hot: f64, second_ring: bool) -> Result<String, JsError> {
    let demo = balance_demo(preset, seed.into(), hot, second_ring).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&demo).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scenarioSeries)]
pub fn scenario_series_js(
    scenario: &str,
    base: f64,
    ratio: f64,
    changepoint: u32,
    sigma: f64,
    seed: u32,
    length: u32,
) -> Result<Vec<f64>, JsError> {
    scenario_series(
        scenario,
        base,
        ratio,
        changepoint as usize,
        sigma,
        seed.into(),
        length as usize,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scoreBreakdown)]
pub fn score_breakdown_js(traffic: f64, p1: f64, p2: f64, p3: f64) -> Result<Vec<f64>, JsError> {
    score_breakdown(traffic, p1, p2, p3).map_err(|e| JsError::new(&e))
}
