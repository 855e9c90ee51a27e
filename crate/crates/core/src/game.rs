//! Nash equilibria of the J-agent market impact game.
//!
//! Each agent liquidates an inventory `X_i` over the grid while paying the
//! quadratic expected cost `½ ξᵢᵀ Γθ ξᵢ + ξᵢᵀ Γ̃ Σ_{j≠i} ξⱼ`. The first-order
//! conditions `Γθ ξᵢ + Γ̃ Σ_{j≠i} ξⱼ = νᵢ e` together with the inventory
//! constraints form one linear system; for two agents the solution is the
//! combination of the fundamental vectors `v` and `w`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::{KernelMatrices, KernelSpec};

/// A J-agent game: grid, kernel, temporary impact and per-agent inventories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub grid: TimeGrid,
    pub kernel: KernelSpec,
    pub theta: f64,
    pub inventories: Vec<f64>,
}

impl GameSpec {
    pub fn new(grid: TimeGrid, kernel: KernelSpec, theta: f64, inventories: Vec<f64>) -> Result<Self> {
        let spec = Self {
            grid,
            kernel,
            theta,
            inventories,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.inventories.len() < 2 {
            return Err(Error::WrongArity {
                expected: 2,
                got: self.inventories.len(),
            });
        }
        if !(self.theta > 0.0) {
            return Err(Error::Domain(
                "the game needs theta > 0; Gamma_theta is singular at theta = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.inventories.len()
    }

    pub fn matrices(&self) -> Result<KernelMatrices> {
        KernelMatrices::build(&self.kernel, &self.grid, self.theta)
    }
}

/// An equilibrium of the game: one strategy row per agent.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// J x (N+1) trade sizes.
    pub strategies: DMatrix<f64>,
    /// Fundamental solution `v` (two-agent games only).
    pub fundamental_v: Option<DVector<f64>>,
    /// Fundamental solution `w` (two-agent games only).
    pub fundamental_w: Option<DVector<f64>>,
    /// Equality-constraint multipliers, one per agent.
    pub multipliers: Vec<f64>,
    /// Expected cost per agent at the equilibrium.
    pub expected_costs: Vec<f64>,
}

impl Equilibrium {
    pub fn n_agents(&self) -> usize {
        self.strategies.nrows()
    }

    pub fn agent(&self, i: usize) -> DVector<f64> {
        self.strategies.row(i).transpose()
    }

    /// Sum of all agents' strategies.
    pub fn aggregate_flow(&self) -> DVector<f64> {
        let mut total = DVector::zeros(self.strategies.ncols());
        for i in 0..self.n_agents() {
            total += self.agent(i);
        }
        total
    }

    /// Sum of every agent's strategy except agent `i`.
    pub fn others_sum(&self, i: usize) -> DVector<f64> {
        self.aggregate_flow() - self.agent(i)
    }
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

fn solve_normalized(matrix: DMatrix<f64>, context: &str) -> Result<DVector<f64>> {
    let n = matrix.nrows();
    let x = matrix.lu().solve(&ones(n)).ok_or_else(|| Error::Singular {
        context: context.into(),
    })?;
    let total = x.sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Singular {
            context: format!("{context}: solution does not normalize"),
        });
    }
    Ok(x / total)
}

/// The fundamental solutions: `v ∝ (Γθ + Γ̃)⁻¹ e` and `w ∝ (Γθ - Γ̃)⁻¹ e`,
/// each normalized to unit sum.
pub fn fundamental_solutions(mats: &KernelMatrices) -> Result<(DVector<f64>, DVector<f64>)> {
    let v = solve_normalized(
        mats.gamma_theta() + mats.gamma_tilde(),
        "Gamma_theta + Gamma_tilde",
    )?;
    let w = solve_normalized(
        mats.gamma_theta() - mats.gamma_tilde(),
        "Gamma_theta - Gamma_tilde",
    )?;
    Ok((v, w))
}

/// Closed form of the fundamental solutions for a constant kernel:
/// `v_1 = 1/(λ(1 - a^{N+1}))`, `v_n = a^{n-1} v_1` with `λ = 2θ/G1 + 1/2`,
/// `a = 1 - 1/λ`, and `w` is `v` reversed.
pub fn constant_kernel_closed_form(g1: f64, theta: f64, n: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(g1 > 0.0) {
        return Err(Error::InvalidKernel("constant kernel needs g1 > 0".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Domain("closed form needs theta > 0".into()));
    }
    let size = n + 1;
    let lambda = 2.0 * theta / g1 + 0.5;
    let a = 1.0 - 1.0 / lambda;
    let v1 = 1.0 / (lambda * (1.0 - a.powi(size as i32)));
    let v = DVector::from_fn(size, |k, _| v1 * a.powi(k as i32));
    let w = DVector::from_fn(size, |k, _| v[size - 1 - k]);
    Ok((v, w))
}

/// Expected cost of trading `own` while the rest of the market trades
/// `others_sum`: `½ ownᵀ Γθ own + ownᵀ Γ̃ others_sum`.
pub fn expected_cost(own: &DVector<f64>, others_sum: &DVector<f64>, mats: &KernelMatrices) -> Result<f64> {
    let n = mats.n_points();
    if own.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: own.len(),
        });
    }
    if others_sum.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: others_sum.len(),
        });
    }
    Ok(0.5 * own.dot(&(mats.gamma_theta() * own)) + own.dot(&(mats.gamma_tilde() * others_sum)))
}

/// The cost-minimizing response to `others_sum` under the inventory
/// constraint `eᵀξ = inventory`: `ξ = Γθ⁻¹(ν e - Γ̃ others_sum)` with `ν`
/// pinned by the constraint. Serves as the fixed-point oracle for any
/// computed equilibrium.
pub fn best_response(
    others_sum: &DVector<f64>,
    mats: &KernelMatrices,
    inventory: f64,
) -> Result<DVector<f64>> {
    let n = mats.n_points();
    if others_sum.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: others_sum.len(),
        });
    }
    let lu = mats.gamma_theta().clone().lu();
    let singular = || Error::Singular {
        context: "Gamma_theta in best response".into(),
    };
    let y_e = lu.solve(&ones(n)).ok_or_else(singular)?;
    let y_other = lu
        .solve(&(mats.gamma_tilde() * others_sum))
        .ok_or_else(singular)?;
    let denom = y_e.sum();
    if denom == 0.0 {
        return Err(singular());
    }
    let nu = (inventory + y_other.sum()) / denom;
    Ok(y_e * nu - y_other)
}

fn multiplier(own: &DVector<f64>, others_sum: &DVector<f64>, mats: &KernelMatrices) -> f64 {
    let foc = mats.gamma_theta() * own + mats.gamma_tilde() * others_sum;
    foc.sum() / foc.len() as f64
}

fn finish_equilibrium(
    strategies: DMatrix<f64>,
    fundamental: Option<(DVector<f64>, DVector<f64>)>,
    mats: &KernelMatrices,
) -> Result<Equilibrium> {
    let j = strategies.nrows();
    let mut total = DVector::zeros(strategies.ncols());
    for i in 0..j {
        total += strategies.row(i).transpose();
    }
    let mut multipliers = Vec::with_capacity(j);
    let mut expected_costs = Vec::with_capacity(j);
    for i in 0..j {
        let own = strategies.row(i).transpose();
        let others = &total - &own;
        multipliers.push(multiplier(&own, &others, mats));
        expected_costs.push(expected_cost(&own, &others, mats)?);
    }
    let (fundamental_v, fundamental_w) = match fundamental {
        Some((v, w)) => (Some(v), Some(w)),
        None => (None, None),
    };
    Ok(Equilibrium {
        strategies,
        fundamental_v,
        fundamental_w,
        multipliers,
        expected_costs,
    })
}

/// Two-agent Nash equilibrium:
/// `ξ₁ = ½(X₁+X₂)v + ½(X₁-X₂)w` and `ξ₂ = ½(X₁+X₂)v - ½(X₁-X₂)w`.
pub fn two_agent_equilibrium(spec: &GameSpec) -> Result<Equilibrium> {
    spec.validate()?;
    if spec.n_agents() != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            got: spec.n_agents(),
        });
    }
    let mats = spec.matrices()?;
    let (v, w) = fundamental_solutions(&mats)?;
    let (x1, x2) = (spec.inventories[0], spec.inventories[1]);
    let sum_part = &v * (0.5 * (x1 + x2));
    let diff_part = &w * (0.5 * (x1 - x2));
    let xi1 = &sum_part + &diff_part;
    let xi2 = &sum_part - &diff_part;
    let mut strategies = DMatrix::zeros(2, mats.n_points());
    strategies.row_mut(0).copy_from(&xi1.transpose());
    strategies.row_mut(1).copy_from(&xi2.transpose());
    finish_equilibrium(strategies, Some((v, w)), &mats)
}

/// J-agent Nash equilibrium from the stacked first-order system
/// `Γθ ξᵢ + Γ̃ Σ_{j≠i} ξⱼ = νᵢ e`, `eᵀ ξᵢ = Xᵢ`, solved as one dense
/// KKT system of dimension `J(N+1) + J`.
pub fn multi_agent_equilibrium(spec: &GameSpec) -> Result<Equilibrium> {
    spec.validate()?;
    let mats = spec.matrices()?;
    let j = spec.n_agents();
    let n = mats.n_points();
    let dim = j * n + j;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for i in 0..j {
        let row0 = i * n;
        for l in 0..j {
            let block = if l == i {
                mats.gamma_theta()
            } else {
                mats.gamma_tilde()
            };
            kkt.view_mut((row0, l * n), (n, n)).copy_from(block);
        }
        for k in 0..n {
            // -νᵢ e moved to the left-hand side.
            kkt[(row0 + k, j * n + i)] = -1.0;
            // Inventory constraint row for agent i.
            kkt[(j * n + i, row0 + k)] = 1.0;
        }
        rhs[j * n + i] = spec.inventories[i];
    }
    let solution = kkt.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "stacked first-order system".into(),
    })?;
    let mut strategies = DMatrix::zeros(j, n);
    for i in 0..j {
        for k in 0..n {
            strategies[(i, k)] = solution[i * n + k];
        }
    }
    let fundamental = if j == 2 {
        fundamental_solutions(&mats).ok()
    } else {
        None
    };
    finish_equilibrium(strategies, fundamental, &mats)
}

/// Shape flags of a schedule, each asserted within a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeReport {
    /// `ξ_k = ξ_{N+2-k}` for all k.
    pub symmetric: bool,
    /// No entry below `-tol`.
    pub positive: bool,
    /// Strictly decreasing over the first `⌊(N+1)/2⌋` entries.
    pub decreasing_first_half: bool,
    /// Second differences all above `-tol` (weak convexity).
    pub convex: bool,
}

impl ShapeReport {
    /// Time-symmetric, positive, decreasing then increasing, convex.
    pub fn is_u_shape(&self) -> bool {
        self.symmetric && self.positive && self.decreasing_first_half && self.convex
    }
}

/// Classifies the shape of a schedule. Needs at least three entries.
pub fn shape_report(xi: &DVector<f64>, tol: f64) -> ShapeReport {
    let n = xi.len();
    assert!(n >= 3, "shape_report needs at least three entries");
    let symmetric = (0..n).all(|k| (xi[k] - xi[n - 1 - k]).abs() <= tol);
    let positive = xi.iter().all(|&x| x > -tol);
    let half = n / 2;
    let decreasing_first_half = (0..half.saturating_sub(1)).all(|k| xi[k + 1] - xi[k] < -tol);
    let convex = (1..n - 1).all(|k| xi[k + 1] - 2.0 * xi[k] + xi[k - 1] >= -tol);
    ShapeReport {
        symmetric,
        positive,
        decreasing_first_half,
        convex,
    }
}
