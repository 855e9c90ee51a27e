//! Decay-kernel families and the matrices of the impact game.
//!
//! A kernel `G(t)` weights the lagged price impact of a unit order. The game
//! is driven by three matrices built from it on a time grid:
//!
//! * `Γ` with `Γ_ij = G(|t_i - t_j|)`,
//! * `Γθ = Γ + 2θI` adding the temporary-impact coefficient,
//! * `Γ̃`, the strictly causal lower-triangular half with diagonal `G(0)/2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A decay-kernel family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// Permanent impact `G(t) = g1`.
    Constant { g1: f64 },
    /// `G(t) = alpha + beta t`.
    Linear { alpha: f64, beta: f64 },
    /// `G(t) = lambda e^{-rho t} + gamma`.
    Exponential { lambda: f64, rho: f64, gamma: f64 },
    /// `G(t) = b / (1 + t)^{1 - p} + c`.
    PowerLaw { b: f64, p: f64, c: f64 },
    /// Kernel values at the grid lags, defined nowhere else.
    Tabulated { lags: Vec<f64>, values: Vec<f64> },
}

/// Absolute/relative tolerance for matching a lag of a tabulated kernel.
const LAG_MATCH_TOL: f64 = 1e-12;

impl KernelSpec {
    /// Tabulated kernel on the lags of `grid`.
    pub fn tabulated(grid: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        Ok(Self::Tabulated {
            lags: grid.times().to_vec(),
            values,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { g1 } => {
                if !(*g1 > 0.0) {
                    return Err(Error::InvalidKernel("constant kernel needs g1 > 0".into()));
                }
            }
            Self::Exponential { rho, .. } => {
                if *rho < 0.0 {
                    return Err(Error::InvalidKernel("exponential kernel needs rho >= 0".into()));
                }
            }
            Self::Tabulated { lags, values } => {
                if lags.len() != values.len() {
                    return Err(Error::LengthMismatch {
                        expected: lags.len(),
                        got: values.len(),
                    });
                }
                if lags.is_empty() {
                    return Err(Error::InvalidKernel("empty tabulated kernel".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Kernel value at lag `t >= 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("kernel lag must be nonnegative, got {t}")));
        }
        match self {
            Self::Constant { g1 } => Ok(*g1),
            Self::Linear { alpha, beta } => Ok(alpha + beta * t),
            Self::Exponential { lambda, rho, gamma } => Ok(lambda * (-rho * t).exp() + gamma),
            Self::PowerLaw { b, p, c } => Ok(b / (1.0 + t).powf(1.0 - p) + c),
            Self::Tabulated { lags, values } => lags
                .iter()
                .position(|lag| (t - lag).abs() <= LAG_MATCH_TOL * lag.abs().max(1.0))
                .map(|i| values[i])
                .ok_or(Error::LagMismatch { lag: t }),
        }
    }

    /// `G(0)`.
    pub fn g0(&self) -> Result<f64> {
        self.eval(0.0)
    }

    /// The stability threshold `G(0) / 4`; equilibria oscillate below it.
    pub fn stability_threshold(&self) -> Result<f64> {
        Ok(self.g0()? / 4.0)
    }

    /// The kernel `G(t) + shift`, same family.
    pub fn shifted(&self, shift: f64) -> Self {
        match self {
            Self::Constant { g1 } => Self::Constant { g1: g1 + shift },
            Self::Linear { alpha, beta } => Self::Linear {
                alpha: alpha + shift,
                beta: *beta,
            },
            Self::Exponential { lambda, rho, gamma } => Self::Exponential {
                lambda: *lambda,
                rho: *rho,
                gamma: gamma + shift,
            },
            Self::PowerLaw { b, p, c } => Self::PowerLaw {
                b: *b,
                p: *p,
                c: c + shift,
            },
            Self::Tabulated { lags, values } => Self::Tabulated {
                lags: lags.clone(),
                values: values.iter().map(|v| v + shift).collect(),
            },
        }
    }

    /// The kernel `scale * G(t)`, same family.
    pub fn scaled(&self, scale: f64) -> Self {
        match self {
            Self::Constant { g1 } => Self::Constant { g1: g1 * scale },
            Self::Linear { alpha, beta } => Self::Linear {
                alpha: alpha * scale,
                beta: beta * scale,
            },
            Self::Exponential { lambda, rho, gamma } => Self::Exponential {
                lambda: lambda * scale,
                rho: *rho,
                gamma: gamma * scale,
            },
            Self::PowerLaw { b, p, c } => Self::PowerLaw {
                b: b * scale,
                p: *p,
                c: c * scale,
            },
            Self::Tabulated { lags, values } => Self::Tabulated {
                lags: lags.clone(),
                values: values.iter().map(|v| v * scale).collect(),
            },
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Linear { .. } => "linear",
            Self::Exponential { .. } => "exponential",
            Self::PowerLaw { .. } => "power-law",
            Self::Tabulated { .. } => "tabulated",
        }
    }
}

/// The dense matrices of a kernel on a grid.
#[derive(Debug, Clone)]
pub struct KernelMatrices {
    times: Vec<f64>,
    gamma: DMatrix<f64>,
    gamma_theta: DMatrix<f64>,
    gamma_tilde: DMatrix<f64>,
    theta: f64,
}

impl KernelMatrices {
    /// Builds `Γ`, `Γθ` and `Γ̃` for `kernel` on `grid` with temporary impact
    /// `theta >= 0`.
    pub fn build(kernel: &KernelSpec, grid: &TimeGrid, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::Domain(format!("theta must be nonnegative, got {theta}")));
        }
        kernel.validate()?;
        let times = grid.times();
        let n = times.len();
        let mut gamma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let g = kernel.eval(times[i] - times[j])?;
                gamma[(i, j)] = g;
                gamma[(j, i)] = g;
            }
        }
        Ok(Self::from_gamma(times.to_vec(), gamma, theta))
    }

    /// Matrices of a constant kernel for `len` trading times. The grid is
    /// irrelevant for a constant kernel, so no `TimeGrid` is required; this
    /// also covers the single-round games of the myopic comparison.
    pub fn constant(g1: f64, theta: f64, len: usize) -> Self {
        let gamma = DMatrix::from_element(len, len, g1);
        let times = (0..len).map(|k| k as f64).collect();
        Self::from_gamma(times, gamma, theta)
    }

    fn from_gamma(times: Vec<f64>, gamma: DMatrix<f64>, theta: f64) -> Self {
        let n = gamma.nrows();
        let mut gamma_theta = gamma.clone();
        for i in 0..n {
            gamma_theta[(i, i)] += 2.0 * theta;
        }
        let mut gamma_tilde = DMatrix::zeros(n, n);
        for i in 0..n {
            gamma_tilde[(i, i)] = 0.5 * gamma[(i, i)];
            for j in 0..i {
                gamma_tilde[(i, j)] = gamma[(i, j)];
            }
        }
        Self {
            times,
            gamma,
            gamma_theta,
            gamma_tilde,
            theta,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_points(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn gamma_theta(&self) -> &DMatrix<f64> {
        &self.gamma_theta
    }

    pub fn gamma_tilde(&self) -> &DMatrix<f64> {
        &self.gamma_tilde
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `G(0)`, read off the diagonal of `Γ`.
    pub fn g0(&self) -> f64 {
        self.gamma[(0, 0)]
    }
}

/// Explicit inverses of `Γθ - Γ̃` and `Γθ + Γ̃` for a constant kernel.
///
/// `Γθ - Γ̃` is upper triangular with diagonal `G1 λ`, `λ = 2θ/G1 + 1/2`; its
/// inverse has diagonal `1/(G1 λ)` and off-diagonals
/// `-(λ-1)^{k-1} / (G1 λ^{k+1})` at offset `k`. `Γθ + Γ̃` equals
/// `(Γθ - Γ̃)ᵀ + G1 e eᵀ`, so its inverse follows from Sherman–Morrison.
/// Both are nonsingular whenever `g1 > 0` and `theta > 0`.
pub fn closed_form_inverses(g1: f64, theta: f64, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(g1 > 0.0) {
        return Err(Error::InvalidKernel("constant kernel needs g1 > 0".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Singular {
            context: "closed-form inverses need theta > 0".into(),
        });
    }
    let size = n + 1;
    let lambda = 2.0 * theta / g1 + 0.5;
    let mut minus_inv = DMatrix::zeros(size, size);
    for i in 0..size {
        minus_inv[(i, i)] = 1.0 / (g1 * lambda);
        for j in (i + 1)..size {
            let k = (j - i) as i32;
            minus_inv[(i, j)] = -(lambda - 1.0).powi(k - 1) / (g1 * lambda.powi(k + 1));
        }
    }
    let bt = minus_inv.transpose();
    let e = DVector::from_element(size, 1.0);
    let col = &bt * &e; // B⁻ᵀ e
    let row = &minus_inv * &e; // (eᵀ B⁻ᵀ)ᵀ = B⁻¹ e
    let denom = 1.0 + g1 * col.sum();
    let plus_inv = &bt - (&col * row.transpose()) * (g1 / denom);
    Ok((minus_inv, plus_inv))
}

/// Explicit inverse of the linear-kernel matrix `Γ_ij = beta |i-j| / n + alpha`
/// on the equidistant grid with `n` intervals over `[0, 1]`.
///
/// The inverse is tridiagonal up to its four corner entries and scaled by
/// `1/(2 beta)`; it degenerates when `2 alpha beta + beta^2 n = 0`.
pub fn linear_kernel_inverse(alpha: f64, beta: f64, n: usize) -> Result<DMatrix<f64>> {
    if beta == 0.0 {
        return Err(Error::DegenerateKernel("linear kernel needs beta != 0".into()));
    }
    // Per-step kernel increment; the matrix is Toep(alpha, alpha + b, ...).
    let b = beta / n as f64;
    let nf = n as f64;
    let eta_next = 2.0 * alpha * b + b * b * nf;
    if eta_next.abs() <= f64::EPSILON * (2.0 * alpha * b).abs().max(b * b * nf) {
        return Err(Error::DegenerateKernel(format!(
            "2*alpha*b + b^2*n = {eta_next} vanishes (alpha = -beta/2)"
        )));
    }
    let eta = 2.0 * alpha * b + b * b * (nf - 1.0);
    let size = n + 1;
    let mut m = DMatrix::zeros(size, size);
    for i in 1..size.saturating_sub(1) {
        m[(i, i)] = -2.0;
    }
    m[(0, 0)] = -eta / eta_next;
    m[(size - 1, size - 1)] = -eta / eta_next;
    for i in 0..size - 1 {
        m[(i, i + 1)] += 1.0;
        m[(i + 1, i)] += 1.0;
    }
    // The anti-corners overlap the off-diagonal band when n = 1.
    m[(0, size - 1)] += b * b / eta_next;
    m[(size - 1, 0)] += b * b / eta_next;
    Ok(m / (2.0 * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::equidistant(n, 1.0).unwrap()
    }

    #[test]
    fn eval_families() {
        let c = KernelSpec::Constant { g1: 1.0 };
        assert_eq!(c.eval(0.37).unwrap(), 1.0);

        // Fitted linear kernel vanishes at the horizon.
        let l = KernelSpec::Linear {
            alpha: 6.6667,
            beta: -6.6667,
        };
        assert_abs_diff_eq!(l.eval(1.0).unwrap(), 0.0, epsilon = 1e-12);

        let gamma = -3.0;
        let e = KernelSpec::Exponential {
            lambda: 193.7472,
            rho: 0.0357,
            gamma,
        };
        assert_abs_diff_eq!(e.eval(0.0).unwrap(), 193.7472 + gamma, epsilon = 1e-12);

        let p = KernelSpec::PowerLaw {
            b: 2.0,
            p: 0.5,
            c: 1.0,
        };
        assert_abs_diff_eq!(p.eval(0.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(c.eval(-0.1).is_err());
    }

    #[test]
    fn tabulated_only_at_grid_lags() {
        let g = grid(4);
        let spec = KernelSpec::tabulated(&g, vec![1.0, 0.8, 0.6, 0.4, 0.2]).unwrap();
        assert_eq!(spec.eval(0.25).unwrap(), 0.8);
        assert_eq!(spec.eval(0.25 + 1e-13).unwrap(), 0.8);
        assert!(matches!(spec.eval(0.3), Err(Error::LagMismatch { .. })));
        assert!(KernelSpec::tabulated(&g, vec![1.0; 3]).is_err());
    }

    #[test]
    fn stability_thresholds() {
        assert_eq!(KernelSpec::Constant { g1: 1.0 }.stability_threshold().unwrap(), 0.25);
        assert_eq!(KernelSpec::Constant { g1: 4.0 }.stability_threshold().unwrap(), 1.0);
        let e = KernelSpec::Exponential {
            lambda: 1.0,
            rho: 1.0,
            gamma: 0.0,
        };
        assert_eq!(e.stability_threshold().unwrap(), 0.25);
    }

    #[test]
    fn matrices_constant_n1() {
        let mats = KernelMatrices::build(&KernelSpec::Constant { g1: 1.0 }, &grid(1), 1.0).unwrap();
        assert_eq!(mats.gamma(), &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(
            mats.gamma_theta(),
            &DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0])
        );
        assert_eq!(
            mats.gamma_tilde(),
            &DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 0.5])
        );
    }

    #[test]
    fn matrices_linear_match_closed_form() {
        let n = 6;
        let (alpha, beta) = (2.0, -1.5);
        let mats =
            KernelMatrices::build(&KernelSpec::Linear { alpha, beta }, &grid(n), 0.5).unwrap();
        for i in 0..=n {
            for j in 0..=n {
                let expected = beta * (i as f64 - j as f64).abs() / n as f64 + alpha;
                assert_abs_diff_eq!(mats.gamma()[(i, j)], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tilde_halves_recombine() {
        let specs = [
            KernelSpec::Constant { g1: 2.0 },
            KernelSpec::Exponential {
                lambda: 1.0,
                rho: 2.0,
                gamma: 0.3,
            },
        ];
        for spec in &specs {
            let mats = KernelMatrices::build(spec, &grid(7), 0.7).unwrap();
            let recombined = mats.gamma_tilde() + mats.gamma_tilde().transpose();
            let diff = (recombined - mats.gamma()).abs().max();
            assert!(diff <= 1e-14);
        }
    }

    #[test]
    fn closed_form_inverse_2x2() {
        // lambda = 2.5, so the inverse of [[2.5, 1], [0, 2.5]] is
        // [[0.4, -0.16], [0, 0.4]].
        let (minus_inv, _) = closed_form_inverses(1.0, 1.0, 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.4, -0.16, 0.0, 0.4]);
        assert!((minus_inv - expected).abs().max() < 1e-14);
    }

    #[test]
    fn closed_form_inverses_invert() {
        for &(g1, theta, n) in &[(1.0, 1.0, 25usize), (0.5, 0.3, 5), (2.0, 10.0, 12)] {
            let mats =
                KernelMatrices::build(&KernelSpec::Constant { g1 }, &grid(n), theta).unwrap();
            let minus = mats.gamma_theta() - mats.gamma_tilde();
            let plus = mats.gamma_theta() + mats.gamma_tilde();
            let (minus_inv, plus_inv) = closed_form_inverses(g1, theta, n).unwrap();
            let id = DMatrix::<f64>::identity(n + 1, n + 1);
            assert!((minus_inv * minus - &id).abs().max() < 1e-12);
            assert!((plus_inv * plus - &id).abs().max() < 1e-12);
        }
        assert!(closed_form_inverses(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn closed_form_plus_inverse_matches_lu() {
        let (g1, theta, n) = (1.0, 1.0, 25usize);
        let mats = KernelMatrices::build(&KernelSpec::Constant { g1 }, &grid(n), theta).unwrap();
        let plus = mats.gamma_theta() + mats.gamma_tilde();
        let dense_inv = plus.lu().try_inverse().unwrap();
        let (_, plus_inv) = closed_form_inverses(g1, theta, n).unwrap();
        assert!((plus_inv - dense_inv).abs().max() < 1e-10);
    }

    #[test]
    fn linear_inverse_against_lu() {
        let (alpha, beta, n) = (1.0, -0.5, 10usize);
        let inv = linear_kernel_inverse(alpha, beta, n).unwrap();
        let mats =
            KernelMatrices::build(&KernelSpec::Linear { alpha, beta }, &grid(n), 0.0).unwrap();
        let id = DMatrix::<f64>::identity(n + 1, n + 1);
        assert!((&inv * mats.gamma() - &id).abs().max() < 1e-10);
        // Inverse of a symmetric matrix is symmetric.
        assert!((&inv - inv.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn linear_inverse_concentrates_mass_at_endpoints() {
        for &(alpha, beta, n) in &[(1.0, -0.5, 10usize), (3.0, 2.0, 7), (0.7, -0.6, 2)] {
            let inv = linear_kernel_inverse(alpha, beta, n).unwrap();
            let e = DVector::from_element(n + 1, 1.0);
            let y = &inv * e;
            let schedule = &y / y.sum();
            assert_abs_diff_eq!(schedule[0], 0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(schedule[n], 0.5, epsilon = 1e-10);
            for k in 1..n {
                assert_abs_diff_eq!(schedule[k], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn linear_inverse_degenerate() {
        assert!(linear_kernel_inverse(1.0, 0.0, 4).is_err());
        // The kernel matrix is singular exactly at alpha = -beta/2.
        assert!(linear_kernel_inverse(1.0, -2.0, 4).is_err());
        assert!(linear_kernel_inverse(1.0, -2.0, 1).is_err());
    }

    #[test]
    fn kernel_json_round_trip() {
        let spec = KernelSpec::Exponential {
            lambda: 1.5,
            rho: 0.25,
            gamma: -0.1,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"family\":\"exponential\""));
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        let parsed: KernelSpec =
            serde_json::from_str(r#"{"family":"constant","g1":2.0}"#).unwrap();
        assert_eq!(parsed, KernelSpec::Constant { g1: 2.0 });
    }
}
