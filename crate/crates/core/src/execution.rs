//! Single-agent optimal execution under a transient impact kernel.
//!
//! The expected cost of a schedule `η` is `½ ηᵀ Γθ η`, so the optimum under
//! the inventory constraint is `η* = X Γθ⁻¹e / (eᵀ Γθ⁻¹ e)`. Inverting this
//! map is what defines the exec-approach implied kernel.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::{linear_kernel_inverse, KernelMatrices, KernelSpec};

/// A single-agent execution problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionProblem {
    pub grid: TimeGrid,
    pub kernel: KernelSpec,
    pub theta: f64,
    pub inventory: f64,
}

impl ExecutionProblem {
    pub fn new(grid: TimeGrid, kernel: KernelSpec, theta: f64, inventory: f64) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::Domain(format!("theta must be nonnegative, got {theta}")));
        }
        kernel.validate()?;
        Ok(Self {
            grid,
            kernel,
            theta,
            inventory,
        })
    }
}

/// `Γθ⁻¹ e` for the problem's kernel and grid.
///
/// With `theta = 0` and a linear kernel on an equidistant grid the explicit
/// near-tridiagonal inverse applies; everything else goes through a dense
/// solve.
fn solve_unit(prob: &ExecutionProblem) -> Result<DVector<f64>> {
    let n_points = prob.grid.n_points();
    let e = DVector::from_element(n_points, 1.0);
    if prob.theta == 0.0 {
        if let KernelSpec::Linear { alpha, beta } = prob.kernel {
            if beta != 0.0 && prob.grid.is_equidistant() {
                // Γ_ij = alpha + beta*T*|i-j|/N on an equidistant grid over [0, T].
                let inv = linear_kernel_inverse(alpha, beta * prob.grid.horizon(), prob.grid.n_steps())?;
                return Ok(inv * e);
            }
        }
    }
    let mats = KernelMatrices::build(&prob.kernel, &prob.grid, prob.theta)?;
    mats.gamma_theta()
        .clone()
        .lu()
        .solve(&e)
        .ok_or_else(|| Error::Singular {
            context: format!(
                "Gamma_theta for {} kernel with theta = {}",
                prob.kernel.family_name(),
                prob.theta
            ),
        })
}

/// The optimal schedule `η* = X Γθ⁻¹e / (eᵀ Γθ⁻¹ e)`.
pub fn optimal_schedule(prob: &ExecutionProblem) -> Result<DVector<f64>> {
    let y = solve_unit(prob)?;
    let denom = y.sum();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Singular {
            context: format!(
                "eᵀΓθ⁻¹e vanishes for {} kernel with theta = {}",
                prob.kernel.family_name(),
                prob.theta
            ),
        });
    }
    Ok(y * (prob.inventory / denom))
}

/// The optimal schedule under the shifted kernel `G(t) + k_shift`.
///
/// Sherman–Morrison shows the schedule is unchanged for every admissible
/// shift; `k_shift = -1/(eᵀΓθ⁻¹e)` is the single excluded value.
pub fn kernel_shift_schedule(prob: &ExecutionProblem, k_shift: f64) -> Result<DVector<f64>> {
    let y = solve_unit(prob)?;
    let s = y.sum();
    let denom = 1.0 + k_shift * s;
    if denom.abs() <= 1e-12 * (1.0 + (k_shift * s).abs()) {
        return Err(Error::DegenerateShift { shift: k_shift });
    }
    let shifted = ExecutionProblem {
        grid: prob.grid.clone(),
        kernel: prob.kernel.shifted(k_shift),
        theta: prob.theta,
        inventory: prob.inventory,
    };
    optimal_schedule(&shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::equidistant(n, 1.0).unwrap()
    }

    fn problem(kernel: KernelSpec, theta: f64) -> ExecutionProblem {
        ExecutionProblem::new(grid(25), kernel, theta, 1.0).unwrap()
    }

    #[test]
    fn constant_kernel_trades_uniformly() {
        let schedule = optimal_schedule(&problem(KernelSpec::Constant { g1: 1.0 }, 1.0)).unwrap();
        for k in 0..26 {
            assert_abs_diff_eq!(schedule[k], 1.0 / 26.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_kernel_no_temporary_impact_concentrates_at_endpoints() {
        let schedule = optimal_schedule(&problem(
            KernelSpec::Linear {
                alpha: 1.0,
                beta: -0.5,
            },
            0.0,
        ))
        .unwrap();
        assert_abs_diff_eq!(schedule[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(schedule[25], 0.5, epsilon = 1e-10);
        for k in 1..25 {
            assert_abs_diff_eq!(schedule[k], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn exponential_kernel_u_shape() {
        let schedule = optimal_schedule(&problem(
            KernelSpec::Exponential {
                lambda: 1.0,
                rho: 1.0,
                gamma: 0.0,
            },
            1.0,
        ))
        .unwrap();
        let report = crate::game::shape_report(&schedule, 1e-10);
        assert!(report.is_u_shape());
    }

    #[test]
    fn schedule_sums_to_inventory() {
        for inventory in [1.0, -2.5, 0.0] {
            let prob = ExecutionProblem::new(
                grid(11),
                KernelSpec::Exponential {
                    lambda: 2.0,
                    rho: 0.5,
                    gamma: 0.1,
                },
                0.7,
                inventory,
            )
            .unwrap();
            let schedule = optimal_schedule(&prob).unwrap();
            assert_abs_diff_eq!(schedule.sum(), inventory, epsilon = 1e-12);
        }
    }

    #[test]
    fn schedule_time_symmetric() {
        let schedule = optimal_schedule(&problem(
            KernelSpec::PowerLaw {
                b: 1.0,
                p: 0.4,
                c: 0.0,
            },
            0.5,
        ))
        .unwrap();
        let n = schedule.len();
        for k in 0..n {
            assert_abs_diff_eq!(schedule[k], schedule[n - 1 - k], epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_among_random_admissible_strategies() {
        use rand::{Rng, SeedableRng};
        let prob = problem(
            KernelSpec::Exponential {
                lambda: 1.0,
                rho: 1.0,
                gamma: 0.0,
            },
            1.0,
        );
        let mats = KernelMatrices::build(&prob.kernel, &prob.grid, prob.theta).unwrap();
        let schedule = optimal_schedule(&prob).unwrap();
        let best = 0.5 * schedule.dot(&(mats.gamma_theta() * &schedule));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = schedule.len();
        for _ in 0..100 {
            let mut z = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let mean = z.sum() / n as f64;
            z.apply(|x| *x -= mean);
            let candidate = DVector::from_element(n, prob.inventory / n as f64) + z;
            let cost = 0.5 * candidate.dot(&(mats.gamma_theta() * &candidate));
            assert!(best <= cost + 1e-12);
        }
    }

    #[test]
    fn shift_leaves_schedule_unchanged() {
        let prob = problem(
            KernelSpec::Linear {
                alpha: 2.0,
                beta: -1.0,
            },
            1.0,
        );
        let base = optimal_schedule(&prob).unwrap();
        for shift in [5.0, -0.3, 0.0] {
            let shifted = kernel_shift_schedule(&prob, shift).unwrap();
            assert!((&shifted - &base).abs().max() < 1e-10);
        }
    }

    #[test]
    fn shift_of_tabulated_kernel() {
        let g = grid(7);
        let values = vec![2.0, 1.5, 1.1, 0.8, 0.6, 0.45, 0.35, 0.3];
        let prob = ExecutionProblem::new(
            g.clone(),
            KernelSpec::tabulated(&g, values).unwrap(),
            1.0,
            1.0,
        )
        .unwrap();
        let base = optimal_schedule(&prob).unwrap();
        let shifted = kernel_shift_schedule(&prob, 1.0).unwrap();
        assert!((&shifted - &base).abs().max() < 1e-10);
    }

    #[test]
    fn singular_theta_zero_named_in_error() {
        // A constant kernel with theta = 0 has a rank-one Gamma.
        let prob = problem(KernelSpec::Constant { g1: 1.0 }, 0.0);
        match optimal_schedule(&prob) {
            Err(Error::Singular { context }) => {
                assert!(context.contains("constant"));
                assert!(context.contains("theta = 0"));
            }
            other => panic!("expected a singularity error, got {other:?}"),
        }
    }

    #[test]
    fn forbidden_shift_detected() {
        let prob = problem(KernelSpec::Constant { g1: 1.0 }, 1.0);
        let mats = KernelMatrices::build(&prob.kernel, &prob.grid, prob.theta).unwrap();
        let e = DVector::from_element(26, 1.0);
        let s = mats.gamma_theta().clone().lu().solve(&e).unwrap().sum();
        let forbidden = -1.0 / s;
        assert!(matches!(
            kernel_shift_schedule(&prob, forbidden),
            Err(Error::DegenerateShift { .. })
        ));
    }

    #[test]
    fn problem_json_round_trip() {
        let prob = problem(
            KernelSpec::PowerLaw {
                b: 1.0,
                p: 0.4,
                c: -0.2,
            },
            0.5,
        );
        let json = serde_json::to_string(&prob).unwrap();
        let back: ExecutionProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(prob, back);
    }

    #[test]
    fn positive_scaling_invariance() {
        // Scaling the whole cost matrix c·Γθ means scaling both the kernel
        // and theta; the normalized schedule cannot change.
        let kernel = KernelSpec::Exponential {
            lambda: 1.0,
            rho: 2.0,
            gamma: 0.2,
        };
        let base = optimal_schedule(&problem(kernel.clone(), 1.0)).unwrap();
        for c in [0.5, 3.0, 10.0] {
            let scaled = optimal_schedule(&ExecutionProblem {
                grid: grid(25),
                kernel: kernel.scaled(c),
                theta: c * 1.0,
                inventory: 1.0,
            })
            .unwrap();
            assert!((&scaled - &base).abs().max() < 1e-10);
        }
    }
}
