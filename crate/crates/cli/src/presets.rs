//! Built-in experiment presets, one per figure or table.

use std::path::Path;

use anyhow::anyhow;

use impact_games::{GameSpec, KernelSpec, TimeGrid};

use crate::runner::{ExperimentConfig, Procedure};

pub const PRESET_NAMES: &[&str] = &[
    "fig-equilibrium",
    "fig-tim",
    "fig-3agents",
    "theta-sweep",
    "implied-price",
    "implied-price-ac",
    "implied-exec",
    "worked-example",
    "table-fits",
    "nonparam-fit",
    "multiasset",
    "myopic",
];

fn constant_game(n_steps: usize, theta: f64, inventories: Vec<f64>) -> anyhow::Result<GameSpec> {
    Ok(GameSpec::new(
        TimeGrid::equidistant(n_steps, 1.0)?,
        KernelSpec::Constant { g1: 1.0 },
        theta,
        inventories,
    )?)
}

pub fn preset(name: &str, out: &Path, seed: u64, tol: f64) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig {
        name: name.to_string(),
        games: Vec::new(),
        procedures: Vec::new(),
        output_dir: out.to_path_buf(),
        seed,
        tol,
    };
    match name {
        "fig-equilibrium" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0])?];
            config.procedures = vec![Procedure::Equilibrium];
        }
        "fig-tim" => {
            config.procedures = vec![Procedure::Tim {
                kernel: KernelSpec::Exponential {
                    lambda: 1.0,
                    rho: 1.0,
                    gamma: 0.0,
                },
                theta: 1.0,
                inventory: 1.0,
                n_steps: 25,
                horizon: 1.0,
            }];
        }
        "fig-3agents" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0, 0.0])?];
            config.procedures = vec![Procedure::Equilibrium];
        }
        "theta-sweep" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0])?];
            config.procedures = vec![Procedure::ThetaSweep {
                thetas: vec![0.5, 1.0, 2.0, 5.0, 20.0],
            }];
        }
        "implied-price" => {
            config.games = vec![
                constant_game(25, 1.0, vec![1.0, 0.0])?,
                constant_game(25, 1.0, vec![1.0, 0.0, 0.0])?,
                constant_game(25, 1.0, vec![1.0, 0.0, 0.0, 0.0, 0.0])?,
            ];
            config.procedures = vec![Procedure::ImpliedPrice { ac_flow: false }];
        }
        "implied-price-ac" => {
            config.games = vec![
                constant_game(25, 1.0, vec![1.0, 0.0])?,
                constant_game(25, 1.0, vec![1.0, 0.0, 0.0])?,
            ];
            config.procedures = vec![Procedure::ImpliedPrice { ac_flow: true }];
        }
        "implied-exec" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0])?];
            config.procedures = vec![Procedure::ImpliedExec];
        }
        "worked-example" => {
            // The 4x4 example: schedule (5,1,1,5)/12 from Toep(1, 0.6, 0.5, 0.2).
            let grid = TimeGrid::equidistant(3, 1.0)?;
            let kernel = KernelSpec::tabulated(&grid, vec![1.0, 0.6, 0.5, 0.2])?;
            config.procedures = vec![Procedure::Tim {
                kernel,
                theta: 0.0,
                inventory: 1.0,
                n_steps: 3,
                horizon: 1.0,
            }];
        }
        "table-fits" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0])?];
            config.procedures = vec![Procedure::Fit {
                families: vec![
                    "polynomial".into(),
                    "exponential".into(),
                    "power-law".into(),
                ],
                exponential_starts: 0,
                power_law_starts: 0,
            }];
        }
        "nonparam-fit" => {
            config.games = vec![constant_game(25, 1.0, vec![1.0, 0.0])?];
            config.procedures = vec![Procedure::Fit {
                families: vec!["polynomial".into()],
                exponential_starts: 10,
                power_law_starts: 10,
            }];
        }
        "multiasset" => {
            let s = 1.0 / 2.0f64.sqrt();
            config.procedures = vec![Procedure::Multiasset {
                q: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
                inventories: vec![vec![s, s], vec![0.0, 0.0]],
                g1: 1.0,
                theta: 1.0,
                n_steps: 25,
                horizon: 1.0,
            }];
        }
        "myopic" => {
            config.procedures = vec![Procedure::Myopic {
                g: 1.0,
                theta: 1.0,
                s0: 10.0,
                inventory: 4.9,
            }];
        }
        other => {
            return Err(anyhow!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            ))
        }
    }
    Ok(config)
}
