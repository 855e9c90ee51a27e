//! The multi-asset game with a symmetric positive-definite cross-impact
//! matrix `Q`.
//!
//! Diagonalizing `Q = V D Vᵀ` decouples the game into independent one-asset
//! games with kernels `G1 λ_l`; strategies rotate back with `V`. A dense
//! stacked solve in original coordinates is kept as the reference route.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{multi_agent_equilibrium, GameSpec};
use crate::grid::TimeGrid;
use crate::kernel::KernelSpec;

/// A cross-impact matrix with its sorted spectral decomposition.
#[derive(Debug, Clone)]
pub struct CrossImpact {
    pub q: DMatrix<f64>,
    /// Orthogonal matrix of eigenvectors, one per column, each with its
    /// largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
    /// Eigenvalues sorted descending; all positive.
    pub eigenvalues: DVector<f64>,
}

const SYMMETRY_TOL: f64 = 1e-10;

/// Spectral decomposition of a symmetric positive-definite matrix.
pub fn eigendecompose(q: &DMatrix<f64>) -> Result<CrossImpact> {
    let m = q.nrows();
    if q.ncols() != m || m == 0 {
        return Err(Error::LengthMismatch {
            expected: m.max(1),
            got: q.ncols(),
        });
    }
    let scale = q.abs().max().max(1.0);
    let asym = (q - q.transpose()).abs().max();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { tol: SYMMETRY_TOL });
    }
    let eig = q.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues = DVector::from_fn(m, |i, _| eig.eigenvalues[order[i]]);
    if let Some(&offender) = eigenvalues.iter().find(|&&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite { eigenvalue: offender });
    }
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (new_col, &old_col) in order.iter().enumerate() {
        let mut column = eig.eigenvectors.column(old_col).clone_owned();
        // Sign convention: largest-magnitude entry positive.
        let lead = column
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        if column[lead] < 0.0 {
            column.neg_mut();
        }
        eigenvectors.set_column(new_col, &column);
    }
    Ok(CrossImpact {
        q: q.clone(),
        eigenvectors,
        eigenvalues,
    })
}

/// One eigen-asset game sat below its stability threshold `G1 λ / 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityWarning {
    pub asset: usize,
    pub eigenvalue: f64,
    pub threshold: f64,
}

/// Strategies of the multi-asset game.
#[derive(Debug, Clone)]
pub struct MultiAssetEquilibrium {
    /// One `M x (N+1)` strategy matrix per agent.
    pub strategies: Vec<DMatrix<f64>>,
    pub cross_impact: CrossImpact,
    /// Eigen-asset games whose equilibria may oscillate.
    pub stability_warnings: Vec<StabilityWarning>,
}

/// Solves the game by rotating inventories into the eigenbasis of `Q`,
/// solving one constant-kernel game per eigen-asset with kernel `G1 λ_l`,
/// and rotating the strategies back.
pub fn multiasset_equilibrium(
    q: &DMatrix<f64>,
    inventories: &DMatrix<f64>,
    g1: f64,
    theta: f64,
    grid: &TimeGrid,
) -> Result<MultiAssetEquilibrium> {
    let cross_impact = eigendecompose(q)?;
    let m = q.nrows();
    let j = inventories.nrows();
    if inventories.ncols() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: inventories.ncols(),
        });
    }
    if !(g1 > 0.0) {
        return Err(Error::InvalidKernel("multi-asset game needs g1 > 0".into()));
    }
    let n_points = grid.n_points();
    let v = &cross_impact.eigenvectors;
    let rotated = inventories * v; // row i holds Vᵀ xᵢ

    let mut stability_warnings = Vec::new();
    let mut eigen_strategies = Vec::with_capacity(m);
    for l in 0..m {
        let lambda = cross_impact.eigenvalues[l];
        let threshold = g1 * lambda / 4.0;
        if theta < threshold {
            stability_warnings.push(StabilityWarning {
                asset: l,
                eigenvalue: lambda,
                threshold,
            });
        }
        let spec = GameSpec::new(
            grid.clone(),
            KernelSpec::Constant { g1: g1 * lambda },
            theta,
            rotated.column(l).iter().copied().collect(),
        )?;
        eigen_strategies.push(multi_agent_equilibrium(&spec)?.strategies);
    }

    let mut strategies = Vec::with_capacity(j);
    for agent in 0..j {
        let mut per_asset = DMatrix::zeros(m, n_points);
        for h in 0..m {
            for l in 0..m {
                let weight = v[(h, l)];
                for k in 0..n_points {
                    per_asset[(h, k)] += weight * eigen_strategies[l][(agent, k)];
                }
            }
        }
        strategies.push(per_asset);
    }
    Ok(MultiAssetEquilibrium {
        strategies,
        cross_impact,
        stability_warnings,
    })
}

/// Reference route: the stacked first-order system in original coordinates,
/// with block kernel `g1 (Q ⊗ ones)` and per-agent, per-asset inventory
/// constraints. Kept independent of the spectral route so the two can be
/// cross-checked.
pub fn multiasset_equilibrium_direct(
    q: &DMatrix<f64>,
    inventories: &DMatrix<f64>,
    g1: f64,
    theta: f64,
    grid: &TimeGrid,
) -> Result<Vec<DMatrix<f64>>> {
    let m = q.nrows();
    let j = inventories.nrows();
    if inventories.ncols() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: inventories.ncols(),
        });
    }
    let n = grid.n_points();
    let ones = DMatrix::from_element(n, n, 1.0);
    let mut lower_half = DMatrix::zeros(n, n);
    for a in 0..n {
        lower_half[(a, a)] = 0.5;
        for b in 0..a {
            lower_half[(a, b)] = 1.0;
        }
    }
    let gamma_theta = {
        let mut gt = q.kronecker(&ones) * g1;
        for d in 0..m * n {
            gt[(d, d)] += 2.0 * theta;
        }
        gt
    };
    let gamma_tilde = q.kronecker(&lower_half) * g1;

    let block = m * n;
    let dim = j * block + j * m;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for i in 0..j {
        let row0 = i * block;
        for l in 0..j {
            let src = if l == i { &gamma_theta } else { &gamma_tilde };
            kkt.view_mut((row0, l * block), (block, block)).copy_from(src);
        }
        for asset in 0..m {
            let nu_col = j * block + i * m + asset;
            for k in 0..n {
                kkt[(row0 + asset * n + k, nu_col)] = -1.0;
                kkt[(nu_col, row0 + asset * n + k)] = 1.0;
            }
            rhs[nu_col] = inventories[(i, asset)];
        }
    }
    let solution = kkt.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "stacked multi-asset system".into(),
    })?;
    let mut strategies = Vec::with_capacity(j);
    for i in 0..j {
        let mut per_asset = DMatrix::zeros(m, n);
        for asset in 0..m {
            for k in 0..n {
                per_asset[(asset, k)] = solution[i * block + asset * n + k];
            }
        }
        strategies.push(per_asset);
    }
    Ok(strategies)
}
