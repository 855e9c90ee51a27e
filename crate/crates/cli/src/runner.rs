//! Experiment configs, procedure execution and the output manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use impact_games::export::{equilibrium_csv, fmt_float, kernel_csv, schedule_csv};
use impact_games::{
    ac_flow_variant, aggregate_drift, build_h, fit_nonparametric, fit_parametric,
    implied_kernel_price, linear_condition_check, linear_implied_slope, multi_agent_equilibrium,
    multiasset_equilibrium, myopic_comparison, optimal_schedule, scale_to_unit, shape_report,
    solve_h_with_tol, DriftSeries, Equilibrium, ExecutionProblem, FitFamily, FlowSeries, GameSpec,
    KernelSpec, TimeGrid,
};

/// One experiment: a game (or several), a list of procedures, an output
/// directory and a seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub games: Vec<GameSpec>,
    pub procedures: Vec<Procedure>,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Default tolerance for shape flags, rank decisions and ratio checks.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_seed() -> u64 {
    42
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Procedure {
    /// Nash equilibrium of each configured game, with shape flags.
    Equilibrium,
    /// Myopic game against the matched dynamic equilibrium.
    Myopic {
        g: f64,
        theta: f64,
        s0: f64,
        inventory: f64,
    },
    /// Single-agent optimal execution schedule.
    Tim {
        kernel: KernelSpec,
        theta: f64,
        inventory: f64,
        n_steps: usize,
        horizon: f64,
    },
    /// Implied kernel from price drift and the directional's flow.
    ImpliedPrice {
        #[serde(default)]
        ac_flow: bool,
    },
    /// The folded system of the inverse optimal-execution problem.
    ImpliedExec,
    /// Parametric table fits, plus optional non-parametric multi-start.
    Fit {
        #[serde(default = "all_families")]
        families: Vec<String>,
        #[serde(default)]
        exponential_starts: usize,
        #[serde(default)]
        power_law_starts: usize,
    },
    /// Cross-impact game solved spectrally.
    Multiasset {
        q: Vec<Vec<f64>>,
        inventories: Vec<Vec<f64>>,
        g1: f64,
        theta: f64,
        n_steps: usize,
        horizon: f64,
    },
    /// Equilibria across a list of transaction-cost levels.
    ThetaSweep { thetas: Vec<f64> },
}

fn all_families() -> Vec<String> {
    vec!["polynomial".into(), "exponential".into(), "power-law".into()]
}

#[derive(Debug, Serialize)]
pub struct ProcedureReport {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub name: String,
    pub tool_version: String,
    pub seed: u64,
    pub tol: f64,
    pub config_sha256: String,
    pub procedures: Vec<ProcedureReport>,
    pub outputs: BTreeMap<String, String>,
}

/// Runs every procedure, writes outputs plus a `manifest.json`, and returns
/// the manifest. Procedure failures are recorded and do not abort the batch.
pub fn run(config: &ExperimentConfig) -> anyhow::Result<Manifest> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let config_json = serde_json::to_string_pretty(config)?;
    let mut outputs: BTreeMap<String, String> = BTreeMap::new();
    let mut reports = Vec::new();

    for (index, procedure) in config.procedures.iter().enumerate() {
        let name = procedure_name(procedure);
        let result = run_procedure(config, procedure, index, &mut outputs);
        reports.push(match result {
            Ok(()) => ProcedureReport {
                name,
                status: "ok".into(),
                error: None,
            },
            Err(err) => ProcedureReport {
                name,
                status: "error".into(),
                error: Some(format!("{err:#}")),
            },
        });
    }

    let manifest = Manifest {
        name: config.name.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        tol: config.tol,
        config_sha256: sha256_hex(config_json.as_bytes()),
        procedures: reports,
        outputs,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    fs::write(config.output_dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.procedures.iter().all(|p| p.status == "ok")
    }
}

fn procedure_name(p: &Procedure) -> String {
    match p {
        Procedure::Equilibrium => "equilibrium".into(),
        Procedure::Myopic { .. } => "myopic".into(),
        Procedure::Tim { .. } => "tim".into(),
        Procedure::ImpliedPrice { ac_flow: false } => "implied-price".into(),
        Procedure::ImpliedPrice { ac_flow: true } => "implied-price-ac".into(),
        Procedure::ImpliedExec => "implied-exec".into(),
        Procedure::Fit { .. } => "fit".into(),
        Procedure::Multiasset { .. } => "multiasset".into(),
        Procedure::ThetaSweep { .. } => "theta-sweep".into(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_output(
    dir: &Path,
    outputs: &mut BTreeMap<String, String>,
    file: &str,
    contents: &str,
) -> anyhow::Result<()> {
    fs::write(dir.join(file), contents).with_context(|| format!("writing {file}"))?;
    outputs.insert(file.into(), sha256_hex(contents.as_bytes()));
    Ok(())
}

fn games_or_error(config: &ExperimentConfig) -> anyhow::Result<&[GameSpec]> {
    if config.games.is_empty() {
        Err(anyhow!("this procedure needs at least one game"))
    } else {
        Ok(&config.games)
    }
}

fn solve_game(game: &GameSpec) -> anyhow::Result<Equilibrium> {
    Ok(multi_agent_equilibrium(game)?)
}

fn run_procedure(
    config: &ExperimentConfig,
    procedure: &Procedure,
    index: usize,
    outputs: &mut BTreeMap<String, String>,
) -> anyhow::Result<()> {
    let dir = config.output_dir.clone();
    match procedure {
        Procedure::Equilibrium => {
            let games = games_or_error(config)?;
            let multiple = games.len() > 1;
            for (gi, game) in games.iter().enumerate() {
                let eq = solve_game(game)?;
                let j = game.n_agents();
                let tag = if multiple {
                    format!("game{gi}-{j}agents")
                } else {
                    format!("{j}agents")
                };
                write_output(
                    &dir,
                    outputs,
                    &format!("equilibrium-{tag}.csv"),
                    &equilibrium_csv(&eq, game.grid.times()),
                )?;
                for i in 0..j {
                    write_output(
                        &dir,
                        outputs,
                        &format!("equilibrium-{tag}-agent{}.csv", i + 1),
                        &schedule_csv(game.grid.times(), &eq.agent(i)),
                    )?;
                }
                let mut shapes = BTreeMap::new();
                for i in 0..j {
                    shapes.insert(
                        format!("agent_{}", i + 1),
                        shape_report(&eq.agent(i), config.tol),
                    );
                }
                let report = serde_json::json!({
                    "inventories": game.inventories,
                    "theta": game.theta,
                    "expected_costs": eq.expected_costs,
                    "multipliers": eq.multipliers,
                    "shape": shapes,
                });
                write_output(
                    &dir,
                    outputs,
                    &format!("equilibrium-{tag}.json"),
                    &serde_json::to_string_pretty(&report)?,
                )?;
            }
        }
        Procedure::Myopic {
            g,
            theta,
            s0,
            inventory,
        } => {
            let cmp = myopic_comparison(*g, *theta, *s0, *inventory)?;
            let mut csv = String::from("round,trade,price\n");
            for (k, (trade, price)) in cmp
                .outcome
                .trades
                .iter()
                .zip(&cmp.outcome.prices)
                .enumerate()
            {
                csv.push_str(&format!("{k},{},{}\n", fmt_float(*trade), fmt_float(*price)));
            }
            write_output(&dir, outputs, "myopic.csv", &csv)?;
            write_output(
                &dir,
                outputs,
                "myopic.json",
                &serde_json::to_string_pretty(&cmp)?,
            )?;
        }
        Procedure::Tim {
            kernel,
            theta,
            inventory,
            n_steps,
            horizon,
        } => {
            let grid = TimeGrid::equidistant(*n_steps, *horizon)?;
            let prob = ExecutionProblem::new(grid.clone(), kernel.clone(), *theta, *inventory)?;
            let schedule = optimal_schedule(&prob)?;
            write_output(
                &dir,
                outputs,
                &format!("tim-schedule-{index}.csv"),
                &schedule_csv(grid.times(), &schedule),
            )?;
            let report = serde_json::json!({
                "kernel": kernel,
                "theta": theta,
                "shape": shape_report(&schedule, config.tol),
            });
            write_output(
                &dir,
                outputs,
                &format!("tim-schedule-{index}.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
        }
        Procedure::ImpliedPrice { ac_flow } => {
            for game in games_or_error(config)? {
                let eq = solve_game(game)?;
                let mats = game.matrices()?;
                let aggregate = FlowSeries::new(eq.aggregate_flow().iter().copied().collect());
                let drift = aggregate_drift(&mats, &aggregate)?;
                let kernel = if *ac_flow {
                    ac_flow_variant(&drift, game.inventories[0], game.grid.n_steps())?
                } else {
                    let directional = FlowSeries::new(eq.agent(0).iter().copied().collect());
                    implied_kernel_price(&directional, &drift)?
                };
                let scaled_tag = if *ac_flow { "ac-" } else { "" };
                let j = game.n_agents();
                write_output(
                    &dir,
                    outputs,
                    &format!("implied-kernel-{scaled_tag}{j}agents.csv"),
                    &kernel_csv(game.grid.times(), &kernel),
                )?;
                let scaled = scale_to_unit(&kernel)?;
                write_output(
                    &dir,
                    outputs,
                    &format!("implied-kernel-{scaled_tag}{j}agents.json"),
                    &serde_json::to_string_pretty(&scaled)?,
                )?;
                write_drift(&dir, outputs, game, &drift, &format!("{scaled_tag}{j}agents"))?;
            }
        }
        Procedure::ImpliedExec => {
            for game in games_or_error(config)? {
                let eq = solve_game(game)?;
                let xi = eq.agent(0);
                let sys = solve_h_with_tol(build_h(&xi), 1e-10)?;
                let inventory = game.inventories[0];
                let n = game.grid.n_steps();
                let linear_ok = linear_condition_check(&xi, inventory, config.tol.max(1e-8))?;
                let slope = if linear_ok {
                    Some(linear_implied_slope(&xi, game.theta, n, inventory)?)
                } else {
                    None
                };
                let j = game.n_agents();
                let particular = sys.particular.as_ref().unwrap();
                let mut csv = String::from("lag,g_min_norm\n");
                for (t, g) in game.grid.times().iter().zip(particular.iter()) {
                    csv.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*g)));
                }
                write_output(&dir, outputs, &format!("implied-exec-{j}agents.csv"), &csv)?;
                let report = serde_json::json!({
                    "rank": sys.rank,
                    "nullspace_dimension": sys.nullspace_basis.len(),
                    "residual": sys.residual,
                    "u_shape_warning": sys.u_shape_warning,
                    "linear_condition": linear_ok,
                    "linear_slope": slope,
                });
                write_output(
                    &dir,
                    outputs,
                    &format!("implied-exec-{j}agents.json"),
                    &serde_json::to_string_pretty(&report)?,
                )?;
            }
        }
        Procedure::Fit {
            families,
            exponential_starts,
            power_law_starts,
        } => {
            let game = games_or_error(config)?
                .first()
                .expect("checked non-empty");
            let eq = solve_game(game)?;
            let target = eq.agent(0);
            let grid = &game.grid;
            let theta = game.theta;
            let inventory = game.inventories[0];
            let mut results = Vec::new();
            for family in families {
                let (family, init): (FitFamily, [f64; 2]) = match family.as_str() {
                    "polynomial" => (FitFamily::Polynomial, [0.0, -1.0]),
                    "exponential" => (FitFamily::Exponential, [10.0, 0.1]),
                    "power-law" => (FitFamily::PowerLaw, [10.0, 0.5]),
                    other => return Err(anyhow!("unknown fit family {other}")),
                };
                let fit = fit_parametric(&target, family, grid, theta, inventory, &init)?;
                let mut csv = String::from("lag,g\n");
                for (t, g) in grid.times().iter().zip(&fit.fitted_kernel_values) {
                    csv.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*g)));
                }
                write_output(
                    &dir,
                    outputs,
                    &format!("fitted-kernel-{}.csv", fit.family),
                    &csv,
                )?;
                results.push(fit);
            }
            write_output(
                &dir,
                outputs,
                "fit-results.json",
                &serde_json::to_string_pretty(&results)?,
            )?;

            let total_starts = exponential_starts + power_law_starts;
            if total_starts > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let mut errors = Vec::new();
                let mut kernels_csv = String::from("start,lag,g\n");
                for start_index in 0..total_starts {
                    let start =
                        random_start(&mut rng, grid, start_index < *exponential_starts);
                    let fitted = fit_nonparametric(&target, &start, grid, theta, inventory)?;
                    errors.push(fitted.diagnostics["schedule_error"]);
                    for (t, g) in grid.times().iter().zip(&fitted.g) {
                        kernels_csv.push_str(&format!(
                            "{start_index},{},{}\n",
                            fmt_float(*t),
                            fmt_float(*g)
                        ));
                    }
                }
                let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
                write_output(&dir, outputs, "nonparametric-kernels.csv", &kernels_csv)?;
                let report = serde_json::json!({
                    "exponential_starts": exponential_starts,
                    "power_law_starts": power_law_starts,
                    "schedule_errors": errors,
                    "mean_schedule_error": mean_error,
                });
                write_output(
                    &dir,
                    outputs,
                    "nonparametric-fit.json",
                    &serde_json::to_string_pretty(&report)?,
                )?;
            }
        }
        Procedure::Multiasset {
            q,
            inventories,
            g1,
            theta,
            n_steps,
            horizon,
        } => {
            let m = q.len();
            let q = DMatrix::from_fn(m, m, |i, j| q[i][j]);
            let j_agents = inventories.len();
            let inv = DMatrix::from_fn(j_agents, m, |i, l| inventories[i][l]);
            let grid = TimeGrid::equidistant(*n_steps, *horizon)?;
            let ma = multiasset_equilibrium(&q, &inv, *g1, *theta, &grid)?;
            let mut csv = String::from("t,agent,asset,trade\n");
            for (agent, strategy) in ma.strategies.iter().enumerate() {
                for asset in 0..m {
                    for (k, t) in grid.times().iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            fmt_float(*t),
                            agent + 1,
                            asset + 1,
                            fmt_float(strategy[(asset, k)])
                        ));
                    }
                }
            }
            write_output(&dir, outputs, "multiasset.csv", &csv)?;
            let report = serde_json::json!({
                "eigenvalues": ma.cross_impact.eigenvalues.as_slice(),
                "stability_warnings": ma.stability_warnings,
            });
            write_output(
                &dir,
                outputs,
                "multiasset.json",
                &serde_json::to_string_pretty(&report)?,
            )?;
        }
        Procedure::ThetaSweep { thetas } => {
            let base = games_or_error(config)?
                .first()
                .expect("checked non-empty");
            let mut summary = String::from("theta,arbitrageur_sup_norm,directional_uniform_deviation\n");
            let n_points = base.grid.n_points();
            let uniform =
                DVector::from_element(n_points, base.inventories[0] / n_points as f64);
            for (i, theta) in thetas.iter().enumerate() {
                let game = GameSpec::new(
                    base.grid.clone(),
                    base.kernel.clone(),
                    *theta,
                    base.inventories.clone(),
                )?;
                let eq = solve_game(&game)?;
                write_output(
                    &dir,
                    outputs,
                    &format!("equilibrium-theta-{i}.csv"),
                    &equilibrium_csv(&eq, game.grid.times()),
                )?;
                let arb_norm = eq.agent(1).abs().max();
                let direc_dev = (eq.agent(0) - &uniform).abs().max();
                summary.push_str(&format!(
                    "{},{},{}\n",
                    fmt_float(*theta),
                    fmt_float(arb_norm),
                    fmt_float(direc_dev)
                ));
            }
            write_output(&dir, outputs, "theta-sweep.csv", &summary)?;
        }
    }
    Ok(())
}

fn write_drift(
    dir: &Path,
    outputs: &mut BTreeMap<String, String>,
    game: &GameSpec,
    drift: &DriftSeries,
    tag: &str,
) -> anyhow::Result<()> {
    let mut csv = String::from("t,drift\n");
    for (t, s) in game.grid.times().iter().zip(&drift.drifts) {
        csv.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*s)));
    }
    write_output(dir, outputs, &format!("drift-{tag}.csv"), &csv)
}

/// A random convex decreasing start kernel with `G(T) = 0` and a scale at or
/// below the linear implied kernel's.
fn random_start(rng: &mut ChaCha8Rng, grid: &TimeGrid, exponential: bool) -> Vec<f64> {
    let scale = rng.gen_range(0.5..6.0);
    let horizon = grid.horizon();
    let unscaled: Vec<f64> = if exponential {
        let rho = 10f64.powf(rng.gen_range(-1.0..0.7));
        grid.times()
            .iter()
            .map(|&t| (-rho * t).exp() - (-rho * horizon).exp())
            .collect()
    } else {
        let p: f64 = rng.gen_range(0.05..0.95);
        grid.times()
            .iter()
            .map(|&t| (1.0 + t).powf(p - 1.0) - (1.0 + horizon).powf(p - 1.0))
            .collect()
    };
    unscaled.iter().map(|v| scale * v / unscaled[0]).collect()
}
