//! Market impact games and implied transient impact.
//!
//! A small numerical library around one phenomenon: when several strategic
//! agents trade through a *permanent* linear price impact, the impact an
//! outside observer infers from any single agent's behaviour is *transient*.
//!
//! The pieces:
//!
//! * [`kernel`] — decay-kernel families, the matrices `Γ`, `Γθ`, `Γ̃` they
//!   generate on a [`grid::TimeGrid`], and explicit closed-form inverses.
//! * [`game`] — Nash equilibria of the J-agent liquidation game, expected
//!   costs, best responses and shape diagnostics; [`myopic`] holds the
//!   per-period variant.
//! * [`execution`] — single-agent optimal execution under a transient
//!   impact kernel, the forward problem of the inverse procedures.
//! * [`implied_price`] — recovering a kernel from price drift and one
//!   agent's flow by forward substitution (unique).
//! * [`implied_exec`] — recovering all kernels whose optimal execution
//!   matches a given schedule (rank-deficient affine family), plus the
//!   linear-kernel characterization.
//! * [`fit`] — parametric and shape-constrained non-parametric kernel fits
//!   against a target schedule.
//! * [`multiasset`] — the cross-impact game, decoupled spectrally.
//! * [`export`] — deterministic CSV/JSON output helpers.

// Validation uses `!(x > 0.0)` so that NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod execution;
pub mod export;
pub mod fit;
pub mod game;
pub mod grid;
pub mod implied_exec;
pub mod implied_price;
pub mod kernel;
pub mod multiasset;
pub mod myopic;

pub use error::{Error, Result};
pub use execution::{kernel_shift_schedule, optimal_schedule, ExecutionProblem};
pub use fit::{fit_nonparametric, fit_parametric, fit_parametric_multi, FitFamily, FitResult};
pub use game::{
    best_response, constant_kernel_closed_form, expected_cost, fundamental_solutions,
    multi_agent_equilibrium, shape_report, two_agent_equilibrium, Equilibrium, GameSpec,
    ShapeReport,
};
pub use grid::TimeGrid;
pub use implied_exec::{
    build_h, constant_game_linear_slope, linear_condition_check, linear_implied_slope, solve_h,
    solve_h_with_tol, HSystem,
};
pub use implied_price::{
    ac_flow_variant, aggregate_drift, implied_kernel_price, scale_to_unit, DriftSeries,
    FlowSeries, ImpliedKernel, Provenance,
};
pub use kernel::{closed_form_inverses, linear_kernel_inverse, KernelMatrices, KernelSpec};
pub use multiasset::{
    eigendecompose, multiasset_equilibrium, multiasset_equilibrium_direct, CrossImpact,
    MultiAssetEquilibrium, StabilityWarning,
};
pub use myopic::{myopic_comparison, myopic_equilibrium, MyopicComparison, MyopicOutcome};
