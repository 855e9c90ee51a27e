//! Kernel fitting against a target schedule.
//!
//! Both fits minimize the distance between the optimal execution schedule of
//! a candidate kernel and a target schedule. The parametric fit runs damped
//! Gauss-Newton over one of three families (quadratic polynomial,
//! exponential, power law), each with its intercept eliminated by the
//! normalization `G(T) = 0`. The non-parametric fit descends over a
//! tabulated kernel constrained to be convex, decreasing and zero at the
//! horizon; the cone is parametrized by nonnegative weights on the hinge
//! functions `(t_j - t)_+`, so first/second-difference feasibility reduces
//! to clamping.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::execution::{optimal_schedule, ExecutionProblem};
use crate::grid::TimeGrid;
use crate::implied_price::{ImpliedKernel, Provenance};
use crate::kernel::KernelSpec;

/// Families available to the parametric fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitFamily {
    /// `G(t) = alpha2 t^2 + alpha1 t + alpha0`.
    Polynomial,
    /// `G(t) = lambda e^{-rho t} + gamma`.
    Exponential,
    /// `G(t) = b (1 + t)^{p - 1} + c`.
    PowerLaw,
}

impl FitFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Polynomial => "polynomial",
            Self::Exponential => "exponential",
            Self::PowerLaw => "power-law",
        }
    }

    pub fn param_names(&self) -> [&'static str; 2] {
        match self {
            Self::Polynomial => ["alpha2", "alpha1"],
            Self::Exponential => ["lambda", "rho"],
            Self::PowerLaw => ["b", "p"],
        }
    }

    /// Kernel values on the grid lags, intercept pinned by `G(T) = 0`.
    fn values(&self, params: &[f64], times: &[f64], horizon: f64) -> Vec<f64> {
        let eval = |t: f64| -> f64 {
            match self {
                Self::Polynomial => params[0] * t * t + params[1] * t,
                Self::Exponential => params[0] * (-params[1] * t).exp(),
                Self::PowerLaw => params[0] * (1.0 + t).powf(params[1] - 1.0),
            }
        };
        let at_horizon = eval(horizon);
        times.iter().map(|&t| eval(t) - at_horizon).collect()
    }

    /// The fitted kernel with its constrained intercept resolved.
    pub fn kernel(&self, params: &[f64], horizon: f64) -> KernelSpec {
        match self {
            // The quadratic family has no dedicated variant; exporting it
            // tabulated would tie it to one grid, so expose the dominant
            // linear part only through `values` and return the exact family
            // here for the two families that exist.
            Self::Polynomial => KernelSpec::Linear {
                alpha: -(params[0] * horizon * horizon + params[1] * horizon),
                beta: params[1],
            },
            Self::Exponential => KernelSpec::Exponential {
                lambda: params[0],
                rho: params[1],
                gamma: -params[0] * (-params[1] * horizon).exp(),
            },
            Self::PowerLaw => KernelSpec::PowerLaw {
                b: params[0],
                p: params[1],
                c: -params[0] * (1.0 + horizon).powf(params[1] - 1.0),
            },
        }
    }
}

/// A parametric fit: estimates, Gaussian standard errors and 95% intervals,
/// the squared 2-norm of the schedule residual, and the fitted schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub family: String,
    pub params: Vec<(String, f64)>,
    pub std_errors: Vec<(String, f64)>,
    pub ci95: Vec<(String, (f64, f64))>,
    /// Squared 2-norm of the residual.
    pub residual_norm: f64,
    pub fitted_schedule: Vec<f64>,
    pub fitted_kernel_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

struct ScheduleObjective<'a> {
    grid: &'a TimeGrid,
    theta: f64,
    inventory: f64,
}

impl ScheduleObjective<'_> {
    fn schedule_for(&self, values: &[f64]) -> Option<DVector<f64>> {
        let kernel = KernelSpec::tabulated(self.grid, values.to_vec()).ok()?;
        let prob =
            ExecutionProblem::new(self.grid.clone(), kernel, self.theta, self.inventory).ok()?;
        optimal_schedule(&prob).ok()
    }
}

const GN_MAX_ITERATIONS: usize = 500;
const GN_LAMBDA_INIT: f64 = 1e-3;
/// Relative function tolerance, the stock nonlinear-least-squares default.
const GN_RELATIVE_FTOL: f64 = 1e-6;
/// Residual-evaluation budget, the stock default of 100 per free parameter.
/// The exponential and power-law families reach the linear kernel only in a
/// parameter limit (rho -> 0, p -> 1), so their objectives have flat valleys
/// with no finite minimizer; without a standard budget the iteration crawls
/// along the valley indefinitely instead of reporting a converged estimate.
const GN_MAX_EVALS: usize = 200;

/// Fits `family` so its TIM-optimal schedule matches `target`, starting the
/// damped Gauss-Newton iteration from `init` (one value per free parameter).
pub fn fit_parametric(
    target: &DVector<f64>,
    family: FitFamily,
    grid: &TimeGrid,
    theta: f64,
    inventory: f64,
    init: &[f64],
) -> Result<FitResult> {
    if target.len() != grid.n_points() {
        return Err(Error::LengthMismatch {
            expected: grid.n_points(),
            got: target.len(),
        });
    }
    if init.len() != 2 {
        return Err(Error::Domain(format!(
            "{} family has 2 free parameters, got {}",
            family.name(),
            init.len()
        )));
    }
    let objective = ScheduleObjective {
        grid,
        theta,
        inventory,
    };
    let times = grid.times();
    let horizon = grid.horizon();
    let evals = std::cell::Cell::new(0usize);
    let residual_at = |p: &[f64]| -> Option<DVector<f64>> {
        evals.set(evals.get() + 1);
        let schedule = objective.schedule_for(&family.values(p, times, horizon))?;
        Some(schedule - target)
    };

    let mut p = init.to_vec();
    let mut r = residual_at(&p).ok_or_else(|| {
        Error::Domain("initial parameters give a singular execution problem".into())
    })?;
    let mut cost = r.norm_squared();
    let mut lambda = GN_LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian_fd(&residual_at, &p, &r);

    while iterations < GN_MAX_ITERATIONS && evals.get() < GN_MAX_EVALS {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        if jtr.amax() <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut stepped = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for i in 0..p.len() {
                damped[(i, i)] += lambda * (1.0 + jtj[(i, i)].abs());
            }
            let Some(delta) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            match residual_at(&candidate) {
                Some(r_new) if r_new.norm_squared() < cost => {
                    let improvement = cost - r_new.norm_squared();
                    p = candidate;
                    r = r_new;
                    cost = r.norm_squared();
                    lambda = (lambda / 10.0).max(1e-14);
                    jac = jacobian_fd(&residual_at, &p, &r);
                    stepped = true;
                    if delta.norm() <= 1e-10 * (1.0 + DVector::from_vec(p.clone()).norm())
                        || improvement <= GN_RELATIVE_FTOL * cost
                    {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !stepped {
            // No damping level improves the cost: treat as converged to the
            // achievable floor.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let names = family.param_names();
    let (std_errors, ci95) = gaussian_errors(&jac, cost, target.len(), &p, &names);
    let fitted_values = family.values(&p, times, horizon);
    let fitted_schedule = objective
        .schedule_for(&fitted_values)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_default();
    Ok(FitResult {
        family: family.name().into(),
        params: names.iter().map(|s| s.to_string()).zip(p.clone()).collect(),
        std_errors,
        ci95,
        residual_norm: cost,
        fitted_schedule,
        fitted_kernel_values: fitted_values,
        converged,
        iterations,
    })
}

/// Runs `fit_parametric` from several starts and keeps the best residual.
pub fn fit_parametric_multi(
    target: &DVector<f64>,
    family: FitFamily,
    grid: &TimeGrid,
    theta: f64,
    inventory: f64,
    inits: &[[f64; 2]],
) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    for init in inits {
        if let Ok(fit) = fit_parametric(target, family, grid, theta, inventory, init) {
            if best
                .as_ref()
                .map(|b| fit.residual_norm < b.residual_norm)
                .unwrap_or(true)
            {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| Error::Domain("no start converged".into()))
}

fn jacobian_fd<F>(residual_at: &F, p: &[f64], r0: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let m = r0.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    for i in 0..n {
        let h = 6e-6 * p[i].abs().max(1e-3);
        let mut plus = p.to_vec();
        plus[i] += h;
        let mut minus = p.to_vec();
        minus[i] -= h;
        match (residual_at(&plus), residual_at(&minus)) {
            (Some(rp), Some(rm)) => jac.set_column(i, &((rp - rm) / (2.0 * h))),
            (Some(rp), None) => jac.set_column(i, &((rp - r0) / h)),
            (None, Some(rm)) => jac.set_column(i, &((r0 - rm) / h)),
            (None, None) => {}
        }
    }
    jac
}

type NamedErrors = (Vec<(String, f64)>, Vec<(String, (f64, f64))>);

fn gaussian_errors(
    jac: &DMatrix<f64>,
    cost: f64,
    m: usize,
    p: &[f64],
    names: &[&'static str; 2],
) -> NamedErrors {
    let n = p.len();
    let dof = m.saturating_sub(n).max(1) as f64;
    let sigma2 = cost / dof;
    let jtj = jac.transpose() * jac;
    let cov = jtj.lu().try_inverse().map(|inv| inv * sigma2);
    let mut std_errors = Vec::with_capacity(n);
    let mut ci95 = Vec::with_capacity(n);
    for i in 0..n {
        let se = cov
            .as_ref()
            .map(|c| c[(i, i)].max(0.0).sqrt())
            .unwrap_or(f64::NAN);
        std_errors.push((names[i].to_string(), se));
        ci95.push((names[i].to_string(), (p[i] - 1.96 * se, p[i] + 1.96 * se)));
    }
    (std_errors, ci95)
}

/// Minimum-norm continuation phases. The kernels reproducing a given
/// schedule form a whole convex family (scale and nullspace degeneracy), so
/// an unanchored descent converges to an arbitrary member of it. Each phase
/// minimizes `‖η(g) - target‖² + μ‖g‖²`; the shrinking ridge steers the
/// iterate to the minimum-norm member, and the final pure phase polishes
/// the schedule error in place under a tight step cap so the iterate cannot
/// wander back out along the degenerate directions.
struct Phase {
    mu: f64,
    step_cap: f64,
    budget: usize,
    relative_ftol: f64,
    cost_target: f64,
}

const NONPARAM_PHASES: [Phase; 11] = [
    Phase { mu: 1e-2, step_cap: 1.0, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-3, step_cap: 1.0, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-4, step_cap: 1.0, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-5, step_cap: 1.0, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-6, step_cap: 0.5, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-7, step_cap: 0.5, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-8, step_cap: 0.5, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-9, step_cap: 0.1, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-10, step_cap: 0.1, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 1e-11, step_cap: 0.1, budget: 400, relative_ftol: 1e-6, cost_target: 0.0 },
    Phase { mu: 0.0, step_cap: 0.05, budget: 400, relative_ftol: 1e-9, cost_target: 1e-20 },
];
/// Schedule error below which a start is already a solution.
const NONPARAM_EXACT_TOL: f64 = 1e-11;

/// Non-parametric fit of a tabulated kernel under convexity and
/// monotonicity, normalized to `G(T) = 0`. `start` is projected onto the
/// constraint set first. Returns the fitted kernel with the final schedule
/// error in its diagnostics.
pub fn fit_nonparametric(
    target: &DVector<f64>,
    start: &[f64],
    grid: &TimeGrid,
    theta: f64,
    inventory: f64,
) -> Result<ImpliedKernel> {
    let n_points = grid.n_points();
    if target.len() != n_points {
        return Err(Error::LengthMismatch {
            expected: n_points,
            got: target.len(),
        });
    }
    if start.len() != n_points {
        return Err(Error::LengthMismatch {
            expected: n_points,
            got: start.len(),
        });
    }
    if !grid.is_equidistant() {
        return Err(Error::Domain(
            "the non-parametric fit tabulates the kernel on the grid lags, which requires an equidistant grid".into(),
        ));
    }
    let times = grid.times();
    // Hinge matrix: column j-1 is (t_j - t)_+ on the grid, j = 1..N. Any
    // nonnegative combination is convex, decreasing and zero at the horizon,
    // and every such kernel is exactly one nonnegative combination.
    let hinges = DMatrix::from_fn(n_points, n_points - 1, |k, j| {
        (times[j + 1] - times[k]).max(0.0)
    });

    // Project the start: shift to G(T) = 0, then nonnegative least squares
    // onto the hinge weights by clamping the unconstrained solution.
    let shifted = DVector::from_fn(n_points, |k, _| start[k] - start[n_points - 1]);
    let mut u = hinges
        .clone()
        .svd(true, true)
        .solve(&shifted, 1e-12)
        .map_err(|e| Error::Domain(format!("start projection failed: {e}")))?;
    u.apply(|x| *x = x.max(0.0));

    let schedule_error = |u: &DVector<f64>| -> Option<f64> {
        let g = &hinges * u;
        let eta = tim_schedule(&g, theta, inventory)?;
        Some((eta - target).norm())
    };

    let start_error = schedule_error(&u)
        .ok_or_else(|| Error::Domain("projected start gives a singular problem".into()))?;
    let mut total_iterations = 0;
    let mut converged = true;

    if start_error > NONPARAM_EXACT_TOL {
        for phase in &NONPARAM_PHASES {
            let (u_next, iterations, phase_converged) =
                lm_phase(target, &hinges, theta, inventory, u, phase);
            u = u_next;
            total_iterations += iterations;
            converged = phase_converged;
        }
    }

    let g = &hinges * &u;
    let final_error = schedule_error(&u).unwrap_or(f64::NAN);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("schedule_error".into(), final_error);
    diagnostics.insert("iterations".into(), total_iterations as f64);
    diagnostics.insert("converged".into(), if converged { 1.0 } else { 0.0 });
    diagnostics.insert("g0".into(), g[0]);
    Ok(ImpliedKernel {
        g: g.iter().copied().collect(),
        provenance: Provenance::Fitted,
        diagnostics,
    })
}

/// `Γθ = Toep(g) + 2θI` for kernel values `g` on the grid lags.
fn toeplitz_gamma_theta(g: &DVector<f64>, theta: f64) -> DMatrix<f64> {
    let n = g.len();
    DMatrix::from_fn(n, n, |i, j| {
        let lag = i.abs_diff(j);
        g[lag] + if lag == 0 { 2.0 * theta } else { 0.0 }
    })
}

/// Optimal schedule `X Γθ⁻¹e / (eᵀΓθ⁻¹e)` for tabulated kernel values.
fn tim_schedule(g: &DVector<f64>, theta: f64, inventory: f64) -> Option<DVector<f64>> {
    let n = g.len();
    let lu = toeplitz_gamma_theta(g, theta).lu();
    let y = lu.solve(&DVector::from_element(n, 1.0))?;
    let s = y.sum();
    if s == 0.0 || !s.is_finite() {
        return None;
    }
    Some(y * (inventory / s))
}

/// Schedule plus its exact Jacobian in the kernel values:
/// `∂η/∂g_l = -(X/s)(I - y eᵀ/s) Γθ⁻¹ T_l y` with `(T_l)_{ij} = 1{|i-j| = l}`
/// and `y = Γθ⁻¹e`, `s = eᵀy`. One LU factorization serves all columns.
fn tim_schedule_with_jacobian(
    g: &DVector<f64>,
    theta: f64,
    inventory: f64,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = g.len();
    let lu = toeplitz_gamma_theta(g, theta).lu();
    let y = lu.solve(&DVector::from_element(n, 1.0))?;
    let s = y.sum();
    if s == 0.0 || !s.is_finite() {
        return None;
    }
    let eta = &y * (inventory / s);
    let mut jac = DMatrix::zeros(n, n);
    for l in 0..n {
        let mut v = DVector::zeros(n);
        if l == 0 {
            v.copy_from(&y);
        } else {
            for i in 0..n {
                if i >= l {
                    v[i] += y[i - l];
                }
                if i + l < n {
                    v[i] += y[i + l];
                }
            }
        }
        let z = lu.solve(&v)?;
        let col = (&z - &y * (z.sum() / s)) * (-inventory / s);
        jac.set_column(l, &col);
    }
    Some((eta, jac))
}

/// One damped Gauss-Newton phase of `‖η(g(u)) - target‖² + μ‖g(u)‖²` over
/// the nonnegative hinge weights `u`.
fn lm_phase(
    target: &DVector<f64>,
    hinges: &DMatrix<f64>,
    theta: f64,
    inventory: f64,
    mut u: DVector<f64>,
    phase: &Phase,
) -> (DVector<f64>, usize, bool) {
    let n_points = hinges.nrows();
    let n_weights = hinges.ncols();
    let sqrt_mu = phase.mu.sqrt();
    let ext_residual = |g: &DVector<f64>, eta: &DVector<f64>| -> DVector<f64> {
        let mut ext = DVector::zeros(2 * n_points);
        for k in 0..n_points {
            ext[k] = eta[k] - target[k];
            ext[n_points + k] = sqrt_mu * g[k];
        }
        ext
    };

    let mut g = hinges * &u;
    let Some((eta, mut jac_g)) = tim_schedule_with_jacobian(&g, theta, inventory) else {
        return (u, 0, false);
    };
    let mut r = ext_residual(&g, &eta);
    let mut cost = r.norm_squared();
    let ridge_block = hinges * sqrt_mu;
    let mut lambda = GN_LAMBDA_INIT;
    let mut iterations = 0;
    let mut converged = cost <= phase.cost_target;
    while iterations < phase.budget && !converged {
        iterations += 1;
        let mut jac = DMatrix::zeros(2 * n_points, n_weights);
        jac.view_mut((0, 0), (n_points, n_weights))
            .copy_from(&(&jac_g * hinges));
        jac.view_mut((n_points, 0), (n_points, n_weights))
            .copy_from(&ridge_block);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut stepped = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for i in 0..n_weights {
                damped[(i, i)] += lambda * (1.0 + jtj[(i, i)].abs());
            }
            let Some(mut delta) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let kernel_step = (hinges * &delta).abs().max();
            if kernel_step > phase.step_cap {
                delta *= phase.step_cap / kernel_step;
            }
            let mut candidate = &u + &delta;
            candidate.apply(|x| *x = x.max(0.0));
            let g_cand = hinges * &candidate;
            let Some(eta_cand) = tim_schedule(&g_cand, theta, inventory) else {
                lambda *= 10.0;
                continue;
            };
            let r_cand = ext_residual(&g_cand, &eta_cand);
            if r_cand.norm_squared() < cost {
                let moved = (&candidate - &u).norm();
                u = candidate;
                g = g_cand;
                r = r_cand;
                let improvement = cost - r.norm_squared();
                cost = r.norm_squared();
                lambda = (lambda / 10.0).max(1e-14);
                stepped = true;
                if let Some((_, jac_new)) = tim_schedule_with_jacobian(&g, theta, inventory) {
                    jac_g = jac_new;
                }
                if moved <= 1e-13
                    || improvement <= phase.relative_ftol * cost
                    || cost <= phase.cost_target
                {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            converged = true;
        }
    }
    (u, iterations, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{two_agent_equilibrium, GameSpec};
    use approx::assert_abs_diff_eq;

    fn target_setup() -> (DVector<f64>, TimeGrid) {
        let grid = TimeGrid::equidistant(25, 1.0).unwrap();
        let spec = GameSpec::new(
            grid.clone(),
            KernelSpec::Constant { g1: 1.0 },
            1.0,
            vec![1.0, 0.0],
        )
        .unwrap();
        (two_agent_equilibrium(&spec).unwrap().agent(0), grid)
    }

    #[test]
    fn polynomial_fit_recovers_the_linear_slope() {
        let (target, grid) = target_setup();
        let fit =
            fit_parametric(&target, FitFamily::Polynomial, &grid, 1.0, 1.0, &[0.0, -1.0]).unwrap();
        assert!(fit.converged);
        let alpha1 = fit.params[1].1;
        assert_abs_diff_eq!(alpha1, -6.6667, epsilon = 1e-2);
        assert!(fit.residual_norm <= 1e-10);
    }

    #[test]
    fn exponential_fit_residual_scale() {
        let (target, grid) = target_setup();
        let fit = fit_parametric_multi(
            &target,
            FitFamily::Exponential,
            &grid,
            1.0,
            1.0,
            &[[10.0, 0.1], [100.0, 0.05], [1.0, 1.0]],
        )
        .unwrap();
        // Best achievable squared residual for this family is 8.3847e-6.
        assert!(fit.residual_norm < 8.3847e-5);
        assert!(fit.residual_norm > 8.3847e-7);
    }

    #[test]
    fn power_law_fit_is_the_worst_family() {
        let (target, grid) = target_setup();
        let poly =
            fit_parametric(&target, FitFamily::Polynomial, &grid, 1.0, 1.0, &[0.0, -1.0]).unwrap();
        let expo = fit_parametric_multi(
            &target,
            FitFamily::Exponential,
            &grid,
            1.0,
            1.0,
            &[[10.0, 0.1], [100.0, 0.05]],
        )
        .unwrap();
        let pow = fit_parametric_multi(
            &target,
            FitFamily::PowerLaw,
            &grid,
            1.0,
            1.0,
            &[[10.0, 0.5], [100.0, 0.9], [1000.0, 0.99]],
        )
        .unwrap();
        assert!(pow.residual_norm > expo.residual_norm);
        assert!(expo.residual_norm > poly.residual_norm);
        // The squared residual reported for the power law is ~2.6e-3.
        assert!(pow.residual_norm < 0.1);
    }

    #[test]
    fn fitted_kernels_vanish_at_the_horizon() {
        let (target, grid) = target_setup();
        for family in [FitFamily::Polynomial, FitFamily::Exponential, FitFamily::PowerLaw] {
            let fit = fit_parametric(&target, family, &grid, 1.0, 1.0, &[1.0, 0.5]).unwrap();
            let last = fit.fitted_kernel_values.last().copied().unwrap();
            assert_abs_diff_eq!(last, 0.0, epsilon = 1e-12);
            let kernel = family.kernel(
                &[fit.params[0].1, fit.params[1].1],
                grid.horizon(),
            );
            if !matches!(family, FitFamily::Polynomial) {
                assert_abs_diff_eq!(kernel.eval(grid.horizon()).unwrap(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn nonparametric_fixed_point_at_the_linear_kernel() {
        let (target, grid) = target_setup();
        let beta = -100.0 / 15.0;
        let start: Vec<f64> = grid.times().iter().map(|&t| -beta + beta * t).collect();
        let fitted = fit_nonparametric(&target, &start, &grid, 1.0, 1.0).unwrap();
        assert!(fitted.diagnostics["schedule_error"] <= 1e-10);
        for (g, s) in fitted.g.iter().zip(&start) {
            assert_abs_diff_eq!(*g, *s, epsilon = 1e-8);
        }
    }

    #[test]
    fn nonparametric_fit_from_an_exponential_start() {
        let (target, grid) = target_setup();
        let start: Vec<f64> = grid
            .times()
            .iter()
            .map(|&t| 30.0 * (-0.5f64 * t).exp())
            .collect();
        let fitted = fit_nonparametric(&target, &start, &grid, 1.0, 1.0).unwrap();
        assert!(fitted.diagnostics["schedule_error"] <= 1e-4);
        // The fitted kernel hugs the linear implied kernel.
        for (k, &t) in grid.times().iter().enumerate() {
            let line = 6.6667 * (1.0 - t);
            assert!((fitted.g[k] - line).abs() < 0.2);
        }
        // Feasibility: decreasing and convex.
        for w in fitted.g.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        for w in fitted.g.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-10);
        }
    }

    #[test]
    fn nonparametric_restart_refines() {
        let (target, grid) = target_setup();
        let start: Vec<f64> = grid
            .times()
            .iter()
            .map(|&t| 8.0 * (1.0f64 + t).powf(-0.7))
            .collect();
        let first = fit_nonparametric(&target, &start, &grid, 1.0, 1.0).unwrap();
        let second = fit_nonparametric(&target, &first.g, &grid, 1.0, 1.0).unwrap();
        assert!(second.diagnostics["schedule_error"] <= 1e-6);
    }
}
