//! Browser bindings for the interactive demo page.
//!
//! Three operations, each returning a JSON string the page plots directly:
//! game equilibria, the implied kernel of the price approach, and optimal
//! execution schedules under a chosen decay kernel.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use impact_games::{
    aggregate_drift, implied_kernel_price, multi_agent_equilibrium, optimal_schedule,
    scale_to_unit, shape_report, ExecutionProblem, FlowSeries, GameSpec, KernelSpec, TimeGrid,
};

#[derive(Serialize)]
struct EquilibriumCurves {
    times: Vec<f64>,
    strategies: Vec<Vec<f64>>,
    expected_costs: Vec<f64>,
    directional_u_shape: bool,
    stability_threshold: f64,
}

#[derive(Serialize)]
struct ImpliedCurve {
    lags: Vec<f64>,
    g: Vec<f64>,
    g_scaled: Vec<f64>,
    g0: f64,
    concave: bool,
}

#[derive(Serialize)]
struct Schedule {
    times: Vec<f64>,
    trades: Vec<f64>,
    u_shape: bool,
}

fn constant_game(
    n_steps: usize,
    g1: f64,
    theta: f64,
    agents: usize,
) -> Result<GameSpec, impact_games::Error> {
    let grid = TimeGrid::equidistant(n_steps, 1.0)?;
    let mut inventories = vec![0.0; agents.max(2)];
    inventories[0] = 1.0;
    GameSpec::new(grid, KernelSpec::Constant { g1 }, theta, inventories)
}

fn equilibrium_curves_impl(
    n_steps: usize,
    g1: f64,
    theta: f64,
    agents: usize,
) -> Result<String, impact_games::Error> {
    let spec = constant_game(n_steps, g1, theta, agents)?;
    let eq = multi_agent_equilibrium(&spec)?;
    let strategies = (0..eq.n_agents())
        .map(|i| eq.agent(i).iter().copied().collect())
        .collect();
    let directional_u_shape = shape_report(&eq.agent(0), 1e-10).is_u_shape();
    let curves = EquilibriumCurves {
        times: spec.grid.times().to_vec(),
        strategies,
        expected_costs: eq.expected_costs.clone(),
        directional_u_shape,
        stability_threshold: g1 / 4.0,
    };
    Ok(serde_json::to_string(&curves).expect("serializable"))
}

fn implied_price_curve_impl(
    n_steps: usize,
    g1: f64,
    theta: f64,
    agents: usize,
) -> Result<String, impact_games::Error> {
    let spec = constant_game(n_steps, g1, theta, agents)?;
    let eq = multi_agent_equilibrium(&spec)?;
    let mats = spec.matrices()?;
    let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
    let drift = aggregate_drift(&mats, &aggregate)?;
    let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
    let kernel = implied_kernel_price(&directional, &drift)?;
    let scaled = scale_to_unit(&kernel)?;
    let curve = ImpliedCurve {
        lags: spec.grid.times().to_vec(),
        g0: kernel.g0(),
        concave: kernel.diagnostics.get("concave").copied() == Some(1.0),
        g: kernel.g,
        g_scaled: scaled.g,
    };
    Ok(serde_json::to_string(&curve).expect("serializable"))
}

fn tim_schedule_impl(
    kernel_json: &str,
    n_steps: usize,
    theta: f64,
) -> Result<String, impact_games::Error> {
    let kernel: KernelSpec = serde_json::from_str(kernel_json)
        .map_err(|e| impact_games::Error::InvalidKernel(format!("kernel JSON: {e}")))?;
    let grid = TimeGrid::equidistant(n_steps, 1.0)?;
    let prob = ExecutionProblem::new(grid.clone(), kernel, theta, 1.0)?;
    let trades = optimal_schedule(&prob)?;
    let schedule = Schedule {
        times: grid.times().to_vec(),
        u_shape: shape_report(&trades, 1e-10).is_u_shape(),
        trades: trades.iter().copied().collect(),
    };
    Ok(serde_json::to_string(&schedule).expect("serializable"))
}

/// Nash equilibrium curves of the constant-kernel game with one directional
/// agent and `agents - 1` arbitrageurs.
#[wasm_bindgen]
pub fn equilibrium_curves(
    n_steps: usize,
    g1: f64,
    theta: f64,
    agents: usize,
) -> Result<String, JsError> {
    equilibrium_curves_impl(n_steps, g1, theta, agents).map_err(into_js)
}

/// Implied transient impact kernel recovered from the game's price drift and
/// the directional agent's flow.
#[wasm_bindgen]
pub fn implied_price_curve(
    n_steps: usize,
    g1: f64,
    theta: f64,
    agents: usize,
) -> Result<String, JsError> {
    implied_price_curve_impl(n_steps, g1, theta, agents).map_err(into_js)
}

/// Optimal execution schedule for a unit inventory under a kernel given as
/// JSON, e.g. `{"family":"exponential","lambda":1,"rho":1,"gamma":0}`.
#[wasm_bindgen]
pub fn tim_schedule(kernel_json: &str, n_steps: usize, theta: f64) -> Result<String, JsError> {
    tim_schedule_impl(kernel_json, n_steps, theta).map_err(into_js)
}

fn into_js(err: impact_games::Error) -> JsError {
    JsError::new(&err.to_string())
}
