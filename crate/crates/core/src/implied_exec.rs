//! The inverse optimal-execution problem.
//!
//! Requiring a symmetric Toeplitz `Π = Toep(g)` to make a given schedule
//! `ξ` TIM-optimal means `Π ξ = e`, which folds into the linear system
//! `H g = e` in the kernel's lag values. For a time-symmetric U-shaped
//! schedule the system is rank-deficient, so the kernel is identified only
//! up to an affine family; a linear kernel always lies in that family.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::shape_report;

/// The folded system `H g = e` for a target schedule, optionally completed
/// with its rank, minimum-norm solution and nullspace.
#[derive(Debug, Clone)]
pub struct HSystem {
    pub h: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub rank: Option<usize>,
    /// Minimum-norm solution of `H g = e`.
    pub particular: Option<DVector<f64>>,
    /// Orthonormal basis of the nullspace of `H`; the solution set is
    /// `particular + span(basis)`.
    pub nullspace_basis: Vec<DVector<f64>>,
    /// `‖H g - e‖` at the particular solution.
    pub residual: Option<f64>,
    /// Set when the schedule fed to `solve_h` was not U-shaped, in which
    /// case the rank law does not apply.
    pub u_shape_warning: bool,
}

impl HSystem {
    /// All solutions `particular + Σ cᵢ basisᵢ` for the given coefficients.
    pub fn solution(&self, coefficients: &[f64]) -> Option<DVector<f64>> {
        let particular = self.particular.as_ref()?;
        let mut g = particular.clone();
        for (c, b) in coefficients.iter().zip(&self.nullspace_basis) {
            g += b * *c;
        }
        Some(g)
    }

    /// Distance from `g` to the affine solution set.
    pub fn membership_residual(&self, g: &DVector<f64>) -> Option<f64> {
        let particular = self.particular.as_ref()?;
        let mut diff = g - particular;
        for b in &self.nullspace_basis {
            let c = b.dot(&diff);
            diff -= b * c;
        }
        Some(diff.norm())
    }
}

/// Assembles `H` from the schedule: entry `(k, l)` collects the `ξ` entries
/// that multiply `g_l` in `(Toep(g) ξ)_k`.
pub fn build_h(xi: &DVector<f64>) -> HSystem {
    let n = xi.len();
    assert!(n >= 2, "the folded system needs at least two trading times");
    let mut h = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            let mut acc = 0.0;
            if l == 0 {
                acc = xi[k];
            } else {
                if k >= l {
                    acc += xi[k - l];
                }
                if k + l < n {
                    acc += xi[k + l];
                }
            }
            h[(k, l)] = acc;
        }
    }
    HSystem {
        h,
        xi: xi.clone(),
        rank: None,
        particular: None,
        nullspace_basis: Vec::new(),
        residual: None,
        u_shape_warning: false,
    }
}

/// Default relative threshold on singular values when ranking `H`.
pub const DEFAULT_RANK_RTOL: f64 = 1e-10;

/// Completes the system with rank, minimum-norm particular solution and
/// nullspace basis via a singular value decomposition.
pub fn solve_h(sys: HSystem) -> Result<HSystem> {
    solve_h_with_tol(sys, DEFAULT_RANK_RTOL)
}

pub fn solve_h_with_tol(mut sys: HSystem, rank_rtol: f64) -> Result<HSystem> {
    let n = sys.h.nrows();
    let svd = sys.h.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = rank_rtol * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let e = DVector::from_element(n, 1.0);

    // Minimum-norm least-squares solution through the truncated SVD.
    let mut particular = DVector::zeros(n);
    for i in 0..rank {
        let coeff = u.column(i).dot(&e) / svd.singular_values[i];
        particular += v_t.row(i).transpose() * coeff;
    }
    let residual = (&sys.h * &particular - &e).norm();
    if residual > 1e-8 * (n as f64).sqrt() {
        return Err(Error::Inconsistent { residual });
    }

    let nullspace_basis = (rank..n).map(|i| v_t.row(i).transpose()).collect();

    sys.u_shape_warning = sys.xi.len() >= 3 && !shape_report(&sys.xi, 1e-10).is_u_shape();
    sys.rank = Some(rank);
    sys.particular = Some(particular);
    sys.residual = Some(residual);
    sys.nullspace_basis = nullspace_basis;
    Ok(sys)
}

/// True when the ratios `(ξ_{k-1} - ξ_k) / (X - 2 Σ_{i<k} ξᵢ)` agree within
/// `tol` for all `k <= ⌊N/2 + 1⌋`, the necessary and sufficient condition
/// for a linear implied kernel.
pub fn linear_condition_check(xi: &DVector<f64>, inventory: f64, tol: f64) -> Result<bool> {
    let ratios = linear_condition_ratios(xi, inventory)?;
    Ok(ratios
        .windows(2)
        .all(|pair| (pair[0] - pair[1]).abs() <= tol))
}

fn linear_condition_ratios(xi: &DVector<f64>, inventory: f64) -> Result<Vec<f64>> {
    let n_steps = xi.len() - 1;
    let last = n_steps / 2 + 1; // k = 2..=⌊N/2 + 1⌋, 1-indexed
    let mut ratios = Vec::new();
    let mut partial = xi[0];
    for k in 2..=last {
        let denom = inventory - 2.0 * partial;
        if denom.abs() < 1e-14 * inventory.abs().max(1.0) {
            return Err(Error::DegenerateSchedule(format!(
                "partial-sum denominator vanishes at k = {k}"
            )));
        }
        ratios.push((xi[k - 2] - xi[k - 1]) / denom);
        partial += xi[k - 1];
    }
    Ok(ratios)
}

/// Slope of the linear implied kernel,
/// `β = -2θN (ξ_1 - ξ_2) / (X - 2ξ_1)`.
pub fn linear_implied_slope(xi: &DVector<f64>, theta: f64, n: usize, inventory: f64) -> Result<f64> {
    if !linear_condition_check(xi, inventory, 1e-8)? {
        return Err(Error::NoLinearSolution(
            "the schedule's difference ratios are not constant".into(),
        ));
    }
    let denom = inventory - 2.0 * xi[0];
    if denom.abs() < 1e-14 * inventory.abs().max(1.0) {
        return Err(Error::DegenerateSchedule("X - 2ξ_1 vanishes".into()));
    }
    Ok(-2.0 * theta * n as f64 * (xi[0] - xi[1]) / denom)
}

/// The same slope in closed form for the constant-kernel game,
/// `β = -4θN G1² / (16θ² - G1²)`.
pub fn constant_game_linear_slope(g1: f64, theta: f64, n: usize) -> f64 {
    -4.0 * theta * n as f64 * g1 * g1 / (16.0 * theta * theta - g1 * g1)
}
