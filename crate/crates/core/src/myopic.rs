//! The myopic variant of the game: both agents re-solve a one-period Nash
//! problem at every step, ignoring future impact.
//!
//! With a constant kernel both agents trade the fraction `α = 2/(3G + 4θ)`
//! of the running price, which therefore decays geometrically with ratio
//! `1 - 2αG`. The number of rounds follows from the inventory constraint.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{expected_cost, fundamental_solutions};
use crate::kernel::KernelMatrices;

/// Outcome of the myopic game for two identical agents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MyopicOutcome {
    /// Trade fraction `2 / (3G + 4θ)` of the running price.
    pub alpha: f64,
    /// Per-agent trades: `n_rounds` geometric rounds plus the final residual.
    pub trades: Vec<f64>,
    /// Expected price at the start of each executed round.
    pub prices: Vec<f64>,
    /// Number of full geometric rounds (the round count formula, rounded down).
    pub n_rounds: usize,
    /// Inventory cleared by the appended final trade.
    pub residual_trade: f64,
    /// Expected cost of one agent over the realized trades.
    pub total_cost: f64,
}

/// Myopic equilibrium for two identical agents each liquidating `inventory`
/// from initial price `s0` under constant impact `g` and temporary impact
/// `theta`.
pub fn myopic_equilibrium(g: f64, theta: f64, s0: f64, inventory: f64) -> Result<MyopicOutcome> {
    if !(g > 0.0 && theta > 0.0 && s0 > 0.0) {
        return Err(Error::Domain("myopic game needs g, theta, s0 > 0".into()));
    }
    if !(theta > g / 4.0) {
        return Err(Error::Domain(
            "myopic price ratio needs theta > g/4, otherwise prices oscillate".into(),
        ));
    }
    let depletion = 1.0 - 2.0 * inventory * g / s0;
    if !(depletion > 0.0) {
        return Err(Error::Domain(format!(
            "inventory {inventory} cannot be liquidated from s0 = {s0}: 1 - 2Xg/s0 = {depletion}"
        )));
    }
    let alpha = 2.0 / (3.0 * g + 4.0 * theta);
    let ratio = 1.0 - 2.0 * alpha * g;
    let n_rounds = (depletion.ln() / ratio.ln()).floor() as usize;

    let mut trades = Vec::with_capacity(n_rounds + 1);
    let mut prices = Vec::with_capacity(n_rounds + 1);
    let mut price = s0;
    let mut remaining = inventory;
    for _ in 0..n_rounds {
        let trade = alpha * price;
        trades.push(trade);
        prices.push(price);
        remaining -= trade;
        price *= ratio;
    }
    // The formula is fractional in general; one last trade clears the book.
    let residual_trade = remaining;
    trades.push(residual_trade);
    prices.push(price);

    let xi = DVector::from_vec(trades.clone());
    let mats = KernelMatrices::constant(g, theta, trades.len());
    let total_cost = expected_cost(&xi, &xi, &mats)?;

    Ok(MyopicOutcome {
        alpha,
        trades,
        prices,
        n_rounds,
        residual_trade,
        total_cost,
    })
}

/// Myopic outcome next to the dynamic equilibrium of the same game, matched
/// on grid length and inventories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MyopicComparison {
    pub outcome: MyopicOutcome,
    /// `α s0`, the myopic trade at the first round before any inventory cap.
    pub myopic_first_trade: f64,
    pub equilibrium_first_trade: f64,
    pub myopic_cost: f64,
    pub equilibrium_cost: f64,
}

/// Runs the myopic game and the dynamic game with both inventories equal to
/// `inventory` on a grid of the same length, and compares first trades and
/// per-agent expected costs.
pub fn myopic_comparison(g: f64, theta: f64, s0: f64, inventory: f64) -> Result<MyopicComparison> {
    let outcome = myopic_equilibrium(g, theta, s0, inventory)?;
    let len = outcome.trades.len();
    let mats = KernelMatrices::constant(g, theta, len);
    let equilibrium = if len == 1 {
        DVector::from_element(1, inventory)
    } else {
        let (v, _) = fundamental_solutions(&mats)?;
        v * inventory
    };
    let equilibrium_cost = expected_cost(&equilibrium, &equilibrium, &mats)?;
    Ok(MyopicComparison {
        myopic_first_trade: outcome.alpha * s0,
        equilibrium_first_trade: equilibrium[0],
        myopic_cost: outcome.total_cost,
        equilibrium_cost,
        outcome,
    })
}
