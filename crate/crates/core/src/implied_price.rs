//! The price approach to implied transient impact.
//!
//! The expected price drift generated by an aggregate flow `Ξ` is
//! `S = -C Ξ` with `C` the causal lower-triangular kernel matrix. On an
//! equidistant grid the same system reads `S = -M g` with `M` the
//! lower-triangular Toeplitz matrix of the flows, so observing the drift and
//! one agent's flow identifies `g` uniquely by forward substitution whenever
//! the flow at `t_0` is nonzero. Feeding the directional's flow but the
//! drift of the whole game is what makes a permanent kernel look transient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrices;

/// A per-step trade-size series on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSeries {
    pub flows: Vec<f64>,
}

impl FlowSeries {
    pub fn new(flows: Vec<f64>) -> Self {
        Self { flows }
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Constant flow `inventory / len` at every step.
    pub fn uniform(inventory: f64, len: usize) -> Self {
        Self::new(vec![inventory / len as f64; len])
    }
}

/// Expected cumulative price changes `S̄_k - S_0`, one entry per trading time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub drifts: Vec<f64>,
}

impl DriftSeries {
    pub fn new(drifts: Vec<f64>) -> Self {
        Self { drifts }
    }

    pub fn len(&self) -> usize {
        self.drifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drifts.is_empty()
    }
}

/// Where an implied kernel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PriceApproach,
    AcFlowVariant,
    ExecApproach,
    Fitted,
}

/// A tabulated kernel over the grid lags, with its provenance and solver
/// diagnostics (residual, rank, scale, shape flags).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpliedKernel {
    pub g: Vec<f64>,
    pub provenance: Provenance,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ImpliedKernel {
    pub fn g0(&self) -> f64 {
        self.g[0]
    }
}

/// Relative threshold below which the leading flow counts as zero; forward
/// substitution amplifies observation noise as `1/Ξ_1`.
const FLOW_TOL: f64 = 1e-12;

/// The drift generated by `flows` under the matrices' kernel: the price
/// sampled right after each trading time, `S_k = -Σ_{j<=k} G(t_k - t_j) Ξ_j`.
/// That is the lower triangle of `Γ` applied to the flow vector.
pub fn aggregate_drift(mats: &KernelMatrices, flows: &FlowSeries) -> Result<DriftSeries> {
    let n = mats.n_points();
    if flows.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: flows.len(),
        });
    }
    let gamma = mats.gamma();
    let mut drifts = vec![0.0; n];
    for k in 0..n {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += gamma[(k, j)] * flows.flows[j];
        }
        drifts[k] = -acc;
    }
    Ok(DriftSeries::new(drifts))
}

/// Solves `M g = -S` by forward substitution, where `M` is the
/// lower-triangular Toeplitz matrix of `flows`. Unique whenever `Ξ_1 != 0`.
pub fn implied_kernel_price(flows: &FlowSeries, drift: &DriftSeries) -> Result<ImpliedKernel> {
    let n = flows.len();
    if drift.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: drift.len(),
        });
    }
    if n == 0 {
        return Err(Error::LengthMismatch { expected: 1, got: 0 });
    }
    let xi = &flows.flows;
    let scale = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if xi[0].abs() < FLOW_TOL * scale || xi[0] == 0.0 {
        return Err(Error::SingularFlow);
    }
    let mut g = vec![0.0; n];
    for k in 0..n {
        let mut acc = -drift.drifts[k];
        for j in 0..k {
            acc -= xi[k - j] * g[j];
        }
        g[k] = acc / xi[0];
    }

    let mut diagnostics = BTreeMap::new();
    let residual = (0..n)
        .map(|k| {
            let row: f64 = (0..=k).map(|j| xi[k - j] * g[j]).sum();
            (row + drift.drifts[k]).abs()
        })
        .fold(0.0f64, f64::max);
    diagnostics.insert("residual".into(), residual);
    diagnostics.insert("rank".into(), n as f64);
    diagnostics.insert("g0".into(), g[0]);
    diagnostics.insert("concave".into(), if is_concave(&g) { 1.0 } else { 0.0 });
    Ok(ImpliedKernel {
        g,
        provenance: Provenance::PriceApproach,
        diagnostics,
    })
}

fn is_concave(g: &[f64]) -> bool {
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    g.windows(3)
        .all(|w| w[2] - 2.0 * w[1] + w[0] <= 1e-10 * scale)
}

/// Divides the kernel by its value at lag zero; the scale is recorded in the
/// diagnostics.
pub fn scale_to_unit(kernel: &ImpliedKernel) -> Result<ImpliedKernel> {
    let g0 = kernel.g0();
    if g0 == 0.0 {
        return Err(Error::ZeroScale);
    }
    let mut scaled = kernel.clone();
    scaled.g.iter_mut().for_each(|v| *v /= g0);
    scaled.diagnostics.insert("scale".into(), g0);
    Ok(scaled)
}

/// The companion variant: inverts the same drift against the uniform
/// `X/(N+1)` schedule instead of the game flow.
pub fn ac_flow_variant(drift: &DriftSeries, inventory: f64, n: usize) -> Result<ImpliedKernel> {
    if inventory == 0.0 {
        return Err(Error::Domain("the uniform flow needs a nonzero inventory".into()));
    }
    let flows = FlowSeries::uniform(inventory, n + 1);
    let mut kernel = implied_kernel_price(&flows, drift)?;
    kernel.provenance = Provenance::AcFlowVariant;
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{multi_agent_equilibrium, two_agent_equilibrium, GameSpec};
    use crate::grid::TimeGrid;
    use crate::kernel::KernelSpec;
    use approx::assert_abs_diff_eq;

    fn constant_game(theta: f64, n: usize, inventories: Vec<f64>) -> GameSpec {
        GameSpec::new(
            TimeGrid::equidistant(n, 1.0).unwrap(),
            KernelSpec::Constant { g1: 1.0 },
            theta,
            inventories,
        )
        .unwrap()
    }

    #[test]
    fn zero_flow_zero_drift() {
        let spec = constant_game(1.0, 5, vec![1.0, 0.0]);
        let mats = spec.matrices().unwrap();
        let drift = aggregate_drift(&mats, &FlowSeries::new(vec![0.0; 6])).unwrap();
        assert!(drift.drifts.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn unit_trade_at_start() {
        let spec = constant_game(1.0, 5, vec![1.0, 0.0]);
        let mats = spec.matrices().unwrap();
        let mut flows = vec![0.0; 6];
        flows[0] = 1.0;
        let drift = aggregate_drift(&mats, &FlowSeries::new(flows)).unwrap();
        for &s in &drift.drifts {
            assert_abs_diff_eq!(s, -1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn drift_converges_to_inventory() {
        let spec = constant_game(1.0, 25, vec![1.0, 0.0]);
        let eq = two_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let flows = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
        let drift = aggregate_drift(&mats, &flows).unwrap();
        assert_abs_diff_eq!(drift.drifts[25].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn drift_increments_proportional_to_flow_under_constant_kernel() {
        let spec = constant_game(1.0, 10, vec![1.0, 0.0]);
        let eq = two_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let aggregate = eq.aggregate_flow();
        let flows = FlowSeries::new(aggregate.iter().copied().collect());
        let drift = aggregate_drift(&mats, &flows).unwrap();
        assert_abs_diff_eq!(drift.drifts[0], -aggregate[0], epsilon = 1e-12);
        for k in 1..drift.len() {
            let increment = drift.drifts[k] - drift.drifts[k - 1];
            assert_abs_diff_eq!(increment, -aggregate[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn two_agent_implied_g0_near_two() {
        let spec = constant_game(1.0, 25, vec![1.0, 0.0]);
        let eq = two_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
        let drift = aggregate_drift(&mats, &aggregate).unwrap();
        let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
        let kernel = implied_kernel_price(&directional, &drift).unwrap();
        // Exact value 2/(1 + a^N) with a = 0.6, N = 25.
        let a: f64 = 0.6;
        let expected = 2.0 / (1.0 + a.powi(25));
        assert_abs_diff_eq!(kernel.g0(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(kernel.g0(), 2.0, epsilon = 1e-5);
        // Headline transience: the implied kernel is decidedly non-constant.
        let max = kernel.g.iter().cloned().fold(f64::MIN, f64::max);
        let min = kernel.g.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min > 0.1);
        assert_eq!(kernel.diagnostics["concave"], 1.0);
    }

    #[test]
    fn three_agent_implied_g0_near_three() {
        let spec = constant_game(1.0, 25, vec![1.0, 0.0, 0.0]);
        let eq = multi_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
        let drift = aggregate_drift(&mats, &aggregate).unwrap();
        let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
        let kernel = implied_kernel_price(&directional, &drift).unwrap();
        assert_abs_diff_eq!(kernel.g0(), 3.0, epsilon = 1e-4);
    }

    #[test]
    fn round_trip_recovers_tabulated_kernel() {
        let grid = TimeGrid::equidistant(9, 1.0).unwrap();
        let values = vec![2.0, 1.7, 1.45, 1.25, 1.1, 1.0, 0.92, 0.86, 0.82, 0.8];
        let kernel = KernelSpec::tabulated(&grid, values.clone()).unwrap();
        let mats = KernelMatrices::build(&kernel, &grid, 0.0).unwrap();
        let flows = FlowSeries::new(vec![0.3, -0.1, 0.25, 0.0, 0.2, 0.05, -0.3, 0.1, 0.2, 0.3]);
        let drift = aggregate_drift(&mats, &flows).unwrap();
        let implied = implied_kernel_price(&flows, &drift).unwrap();
        for (got, want) in implied.g.iter().zip(&values) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-12);
        }
    }

    #[test]
    fn inversion_is_linear_in_the_drift() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let flows = FlowSeries::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        if flows.flows[0].abs() < 0.1 {
            // Seed chosen so this does not happen.
            panic!("leading flow too small for the linearity check");
        }
        let s0 = DriftSeries::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let delta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s1 = DriftSeries::new(
            s0.drifts
                .iter()
                .zip(&delta)
                .map(|(s, d)| s + d)
                .collect(),
        );
        let g0 = implied_kernel_price(&flows, &s0).unwrap();
        let g1 = implied_kernel_price(&flows, &s1).unwrap();
        // g changes by exactly -M⁻¹ δ.
        let minus_delta = DriftSeries::new(delta.clone());
        let diff_expected = implied_kernel_price(&flows, &minus_delta).unwrap();
        for k in 0..n {
            assert_abs_diff_eq!(g1.g[k] - g0.g[k], diff_expected.g[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_leading_flow_rejected() {
        let flows = FlowSeries::new(vec![0.0, 1.0, 1.0]);
        let drift = DriftSeries::new(vec![-1.0, -2.0, -3.0]);
        assert!(matches!(
            implied_kernel_price(&flows, &drift),
            Err(Error::SingularFlow)
        ));
    }

    #[test]
    fn scaling_to_unit() {
        let spec = constant_game(1.0, 25, vec![1.0, 0.0]);
        let eq = two_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
        let drift = aggregate_drift(&mats, &aggregate).unwrap();
        let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
        let kernel = implied_kernel_price(&directional, &drift).unwrap();
        let scaled = scale_to_unit(&kernel).unwrap();
        assert_abs_diff_eq!(scaled.g[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(scaled.diagnostics["scale"], kernel.g0(), epsilon = 1e-14);
        // Positive scaling preserves the argmax.
        let argmax = |g: &[f64]| {
            g.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        assert_eq!(argmax(&kernel.g), argmax(&scaled.g));

        let zero = ImpliedKernel {
            g: vec![0.0, 1.0],
            provenance: Provenance::PriceApproach,
            diagnostics: BTreeMap::new(),
        };
        assert!(matches!(scale_to_unit(&zero), Err(Error::ZeroScale)));
    }

    #[test]
    fn more_arbitrageurs_steepen_the_scaled_kernel() {
        let implied_scaled = |inventories: Vec<f64>| {
            let spec = constant_game(1.0, 25, inventories);
            let eq = multi_agent_equilibrium(&spec).unwrap();
            let mats = spec.matrices().unwrap();
            let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
            let drift = aggregate_drift(&mats, &aggregate).unwrap();
            let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
            scale_to_unit(&implied_kernel_price(&directional, &drift).unwrap()).unwrap()
        };
        let two = implied_scaled(vec![1.0, 0.0]);
        let five = implied_scaled(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(five.g[1] < two.g[1]);
    }

    #[test]
    fn ac_flow_variant_identity() {
        let spec = constant_game(1.0, 25, vec![1.0, 0.0]);
        let eq = two_agent_equilibrium(&spec).unwrap();
        let mats = spec.matrices().unwrap();
        let aggregate = eq.aggregate_flow();
        let drift =
            aggregate_drift(&mats, &FlowSeries::new(aggregate.iter().copied().collect())).unwrap();
        let kernel = ac_flow_variant(&drift, 1.0, 25).unwrap();
        // With a uniform unit flow, g0 = (N+1) * (aggregate flow at t0).
        assert_abs_diff_eq!(kernel.g0(), 26.0 * aggregate[0], epsilon = 1e-10);
        // Positive and non-increasing on the two-agent drift.
        assert!(kernel.g.iter().all(|&v| v > 0.0));
        for w in kernel.g.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        assert_eq!(kernel.provenance, Provenance::AcFlowVariant);
    }

    #[test]
    fn ac_flow_zero_drift() {
        let drift = DriftSeries::new(vec![0.0; 11]);
        let kernel = ac_flow_variant(&drift, 1.0, 10).unwrap();
        assert!(kernel.g.iter().all(|&v| v == 0.0));
        assert!(ac_flow_variant(&drift, 0.0, 10).is_err());
    }

    #[test]
    fn implied_kernel_json_report() {
        let kernel = ImpliedKernel {
            g: vec![2.0, 1.0],
            provenance: Provenance::PriceApproach,
            diagnostics: BTreeMap::from([("g0".into(), 2.0)]),
        };
        let json = serde_json::to_string(&kernel).unwrap();
        assert!(json.contains("\"provenance\":\"price-approach\""));
        let back: ImpliedKernel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.g, kernel.g);
    }
}
