//! Experiment runner for market impact games and implied transient impact.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use impact_games::{GameSpec, KernelSpec, TimeGrid};
use impact_games_cli::presets;
use impact_games_cli::runner::{self, ExperimentConfig, Procedure};

#[derive(Parser)]
#[command(
    name = "impact-games",
    version,
    about = "Nash equilibria of market impact games and the transient impact they imply"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Load a full experiment config (JSON) instead of the inline flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSVs, reports and the manifest.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Seed for randomized procedures (non-parametric starts).
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,
    /// Tolerance for shape flags and ratio checks.
    #[arg(long, default_value_t = 1e-10, global = true)]
    tol: f64,
}

#[derive(Args, Clone)]
struct GameArgs {
    /// Number of trading intervals N (the grid has N+1 points).
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Trading horizon T.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Constant impact level G1 (ignored when --kernel is given).
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    /// Decay kernel as JSON, e.g. '{"family":"exponential","lambda":1.0,"rho":1.0,"gamma":0.0}'.
    #[arg(long)]
    kernel: Option<String>,
    /// Temporary impact coefficient.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Comma-separated inventories, one per agent.
    #[arg(long, default_value = "1,0", value_delimiter = ',')]
    inventories: Vec<f64>,
}

impl GameArgs {
    fn kernel(&self) -> anyhow::Result<KernelSpec> {
        match &self.kernel {
            Some(json) => serde_json::from_str(json).context("parsing --kernel JSON"),
            None => Ok(KernelSpec::Constant { g1: self.g1 }),
        }
    }

    fn game(&self) -> anyhow::Result<GameSpec> {
        Ok(GameSpec::new(
            TimeGrid::equidistant(self.n, self.horizon)?,
            self.kernel()?,
            self.theta,
            self.inventories.clone(),
        )?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Nash equilibrium of a J-agent game.
    Equilibrium {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Myopic game and its comparison with the dynamic equilibrium.
    Myopic {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10.0)]
        s0: f64,
        #[arg(long, default_value_t = 1.0)]
        inventory: f64,
    },
    /// Optimal execution schedule in the transient impact model.
    Tim {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 1.0)]
        inventory: f64,
    },
    /// Implied kernel from price drift and the directional's flow.
    ImpliedPrice {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
        /// Invert against the uniform X/(N+1) flow instead.
        #[arg(long)]
        ac_flow: bool,
    },
    /// Rank, solution family and linear kernel of the inverse execution problem.
    ImpliedExec {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Parametric table fits and optional non-parametric multi-start.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
        /// Families to fit.
        #[arg(long, default_value = "polynomial,exponential,power-law", value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long, default_value_t = 0)]
        exponential_starts: usize,
        #[arg(long, default_value_t = 0)]
        power_law_starts: usize,
    },
    /// Cross-impact game solved by spectral decoupling.
    Multiasset {
        #[command(flatten)]
        common: CommonArgs,
        /// Cross-impact matrix as JSON rows, e.g. '[[2,1],[1,2]]'.
        #[arg(long)]
        q: String,
        /// Per-agent inventory rows as JSON, e.g. '[[0.707,0.707],[0,0]]'.
        #[arg(long)]
        inventories: String,
        #[arg(long, default_value_t = 1.0)]
        g1: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Equilibria across a sweep of transaction-cost levels.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value = "0.5,1,2,5,20", value_delimiter = ',')]
        thetas: Vec<f64>,
    },
    /// Run a built-in preset experiment.
    Reproduce {
        #[command(flatten)]
        common: CommonArgs,
        /// Preset name, or "list" to print the available presets.
        preset: String,
    },
}

fn config_from(common: &CommonArgs, fallback: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)?;
            config.output_dir = common.out.clone();
            Ok(config)
        }
        None => Ok(fallback),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let (common, config) = match &cli.command {
        Command::Equilibrium { common, game } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "equilibrium".into(),
                    games: vec![game.game()?],
                    procedures: vec![Procedure::Equilibrium],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Myopic {
            common,
            g,
            theta,
            s0,
            inventory,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "myopic".into(),
                    games: Vec::new(),
                    procedures: vec![Procedure::Myopic {
                        g: *g,
                        theta: *theta,
                        s0: *s0,
                        inventory: *inventory,
                    }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Tim {
            common,
            game,
            inventory,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "tim".into(),
                    games: Vec::new(),
                    procedures: vec![Procedure::Tim {
                        kernel: game.kernel()?,
                        theta: game.theta,
                        inventory: *inventory,
                        n_steps: game.n,
                        horizon: game.horizon,
                    }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::ImpliedPrice {
            common,
            game,
            ac_flow,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "implied-price".into(),
                    games: vec![game.game()?],
                    procedures: vec![Procedure::ImpliedPrice { ac_flow: *ac_flow }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::ImpliedExec { common, game } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "implied-exec".into(),
                    games: vec![game.game()?],
                    procedures: vec![Procedure::ImpliedExec],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Fit {
            common,
            game,
            families,
            exponential_starts,
            power_law_starts,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "fit".into(),
                    games: vec![game.game()?],
                    procedures: vec![Procedure::Fit {
                        families: families.clone(),
                        exponential_starts: *exponential_starts,
                        power_law_starts: *power_law_starts,
                    }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Multiasset {
            common,
            q,
            inventories,
            g1,
            theta,
            n,
            horizon,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "multiasset".into(),
                    games: Vec::new(),
                    procedures: vec![Procedure::Multiasset {
                        q: serde_json::from_str(q).context("parsing --q JSON")?,
                        inventories: serde_json::from_str(inventories)
                            .context("parsing --inventories JSON")?,
                        g1: *g1,
                        theta: *theta,
                        n_steps: *n,
                        horizon: *horizon,
                    }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Sweep {
            common,
            game,
            thetas,
        } => (
            common.clone(),
            config_from(
                common,
                ExperimentConfig {
                    name: "theta-sweep".into(),
                    games: vec![game.game()?],
                    procedures: vec![Procedure::ThetaSweep {
                        thetas: thetas.clone(),
                    }],
                    output_dir: common.out.clone(),
                    seed: common.seed,
                    tol: common.tol,
                },
            )?,
        ),
        Command::Reproduce { common, preset } => {
            if preset == "list" {
                for name in presets::PRESET_NAMES {
                    println!("{name}");
                }
                return Ok(true);
            }
            (
                common.clone(),
                config_from(
                    common,
                    presets::preset(preset, &common.out, common.seed, common.tol)?,
                )?,
            )
        }
    };
    let _ = &common;
    let manifest = runner::run(&config)?;
    for report in &manifest.procedures {
        match &report.error {
            None => println!("{}: ok", report.name),
            Some(err) => eprintln!("{}: ERROR: {err}", report.name),
        }
    }
    println!(
        "wrote {} outputs to {}",
        manifest.outputs.len(),
        config.output_dir.display()
    );
    Ok(manifest.all_ok())
}
