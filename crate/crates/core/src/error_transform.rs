//! The disagreement-coordinate transform.
//!
//! States xi in R^N are mapped to error coordinates zeta in R^(N-1) by a
//! banded matrix P whose rows are scaled differences of consecutive agents:
//! rooted pairs compare delta_i xi_i against delta_{i+1} xi_{i+1}, the
//! bridge row compares the last rooted agent (scaled) against the first
//! follower, and follower rows compare consecutive followers. A companion
//! matrix Q right-inverts P on the error subspace, so the closed-loop
//! update xi(k+1) = L xi(k) induces zeta(k+1) = A zeta(k) with A = P L Q
//! and the exact intertwining identity A P = P L. Coordination of the
//! original network is equivalent to zeta -> 0.

use crate::error::{CoordError, Result};
use crate::gains::SystemConfig;
use crate::graph::LaplacianBlocks;
use crate::spectral;
use crate::tol;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn check_dims(blocks: &LaplacianBlocks, cfg: &SystemConfig) -> Result<()> {
    if blocks.m != cfg.m() || blocks.n != cfg.n {
        return Err(CoordError::DimensionMismatch(format!(
            "blocks are ({}, {}) agents but config is ({}, {})",
            blocks.m,
            blocks.n,
            cfg.m(),
            cfg.n
        )));
    }
    if blocks.n < 2 {
        return Err(CoordError::InvalidConfig(
            "error coordinates need at least two agents".into(),
        ));
    }
    Ok(())
}

/// Full coupling matrix in permuted coordinates:
/// [[diag(rho) L1 diag(delta), 0], [L2 diag(delta), L3]].
pub fn coupling_matrix(blocks: &LaplacianBlocks, cfg: &SystemConfig) -> Result<DMatrix<f64>> {
    check_dims(blocks, cfg)?;
    let (m, n) = (blocks.m, blocks.n);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = cfg.rho[i] * blocks.l1[(i, j)] * cfg.delta[j];
        }
    }
    for i in 0..n - m {
        for j in 0..m {
            out[(m + i, j)] = blocks.l2[(i, j)] * cfg.delta[j];
        }
        for j in 0..n - m {
            out[(m + i, m + j)] = blocks.l3[(i, j)];
        }
    }
    Ok(out)
}

/// One-step transition matrix of the network: I - eps * coupling.
pub fn transition_matrix(blocks: &LaplacianBlocks, cfg: &SystemConfig) -> Result<DMatrix<f64>> {
    let m = coupling_matrix(blocks, cfg)?;
    Ok(DMatrix::identity(blocks.n, blocks.n) - cfg.epsilon * m)
}

/// The (N-1) x N difference map P.
pub fn build_p(cfg: &SystemConfig) -> Result<DMatrix<f64>> {
    let (m, n) = (cfg.m(), cfg.n);
    if n < 2 {
        return Err(CoordError::InvalidConfig(
            "error coordinates need at least two agents".into(),
        ));
    }
    let mut p = DMatrix::zeros(n - 1, n);
    for i in 0..m - 1 {
        p[(i, i)] = cfg.delta[i];
        p[(i, i + 1)] = -cfg.delta[i + 1];
    }
    if m <= n - 1 {
        // bridge row: last rooted agent against first follower
        p[(m - 1, m - 1)] = cfg.delta[m - 1];
        p[(m - 1, m)] = -1.0;
    }
    for i in m..n - 1 {
        p[(i, i)] = 1.0;
        p[(i, i + 1)] = -1.0;
    }
    Ok(p)
}

/// The N x (N-1) companion map Q with P (L Q) = A and A P = P L.
pub fn build_q(cfg: &SystemConfig) -> Result<DMatrix<f64>> {
    let (m, n) = (cfg.m(), cfg.n);
    if n < 2 {
        return Err(CoordError::InvalidConfig(
            "error coordinates need at least two agents".into(),
        ));
    }
    let mut q = DMatrix::zeros(n, n - 1);
    for i in 0..m {
        for j in i..n - 1 {
            q[(i, j)] = 1.0 / cfg.delta[i];
        }
    }
    for i in m..n - 1 {
        for j in i..n - 1 {
            q[(i, j)] = 1.0;
        }
    }
    Ok(q)
}

/// Error-coordinate dynamics A together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// zeta(k+1) = A zeta(k)
    pub a: DMatrix<f64>,
    /// xi(k+1) = transition * xi(k)
    pub transition: DMatrix<f64>,
}

/// Assemble A = P (I - eps M) Q and verify the intertwining identity
/// A P = P (I - eps M) to working precision.
pub fn build_error_system(blocks: &LaplacianBlocks, cfg: &SystemConfig) -> Result<ErrorSystem> {
    let transition = transition_matrix(blocks, cfg)?;
    let p = build_p(cfg)?;
    let q = build_q(cfg)?;
    let a = &p * &transition * &q;
    let residual = &a * &p - &p * &transition;
    let scale = 1.0 + spectral::norm_scale(&transition) * spectral::norm_scale(&p);
    let max_err = residual.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max_err > tol::TRANSFORM_IDENTITY_TOL * scale {
        return Err(CoordError::Numerical(format!(
            "intertwining identity A P = P L violated by {max_err:.3e}"
        )));
    }
    Ok(ErrorSystem {
        p,
        q,
        a,
        transition,
    })
}

/// A assembled entry-by-entry from closed-form partial sums of Laplacian
/// rows, bypassing the P L Q product entirely. Used as an independent
/// cross-check of `build_error_system`.
///
/// Index conventions (1-based in the formulas, shifted here): row ii of A
/// couples agents ii and ii+1; products w_i = rho_i delta_i enter rows that
/// involve rooted agents; the row for the last rooted agent mixes a raw
/// Laplacian row with a weighted one.
pub fn build_a_elementwise(blocks: &LaplacianBlocks, cfg: &SystemConfig) -> Result<DMatrix<f64>> {
    check_dims(blocks, cfg)?;
    let (m, n) = (blocks.m, blocks.n);
    let l = &blocks.full;
    let eps = cfg.epsilon;
    let w = cfg.products();
    let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut out = DMatrix::zeros(n - 1, n - 1);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let (ii, jj) = (i + 1, j + 1); // 1-based
            out[(i, j)] = if ii < m {
                if jj > m {
                    0.0
                } else {
                    let s: f64 = (0..jj)
                        .map(|h| w[ii] * l[(ii, h)] - w[ii - 1] * l[(ii - 1, h)])
                        .sum();
                    kron(ii, jj) + eps * s
                }
            } else if ii == m {
                if jj <= m {
                    let s: f64 = (0..jj)
                        .map(|h| l[(m, h)] - w[m - 1] * l[(m - 1, h)])
                        .sum();
                    kron(ii, jj) + eps * s
                } else {
                    let mut s: f64 = (0..m)
                        .map(|h| l[(m, h)] - w[m - 1] * l[(m - 1, h)])
                        .sum();
                    s += (m..jj).map(|h| l[(m, h)]).sum::<f64>();
                    eps * s
                }
            } else {
                let s: f64 = (0..jj).map(|h| l[(ii, h)] - l[(ii - 1, h)]).sum();
                kron(ii, jj) + eps * s
            };
        }
    }
    Ok(out)
}

/// Check that the spectrum of the transition matrix equals the spectrum of
/// A plus a single eigenvalue at 1, by greedy closest-pair matching within
/// an absolute tolerance.
pub fn eigen_correspondence(
    transition: &DMatrix<f64>,
    a: &DMatrix<f64>,
    tol_abs: f64,
) -> Result<bool> {
    let full = spectral::eigenvalues(transition)?;
    let mut reduced = spectral::eigenvalues(a)?;
    reduced.push(Complex64::new(1.0, 0.0));
    if full.len() != reduced.len() {
        return Err(CoordError::DimensionMismatch(format!(
            "{} state eigenvalues vs {} error eigenvalues plus one",
            full.len(),
            reduced.len() - 1
        )));
    }
    let mut used = vec![false; reduced.len()];
    // repeatedly take the globally closest unmatched pair
    let mut remaining: Vec<usize> = (0..full.len()).collect();
    while !remaining.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        for (slot, &fi) in remaining.iter().enumerate() {
            for (ri, &u) in used.iter().enumerate() {
                if u {
                    continue;
                }
                let d = (full[fi] - reduced[ri]).norm();
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, slot, ri));
                }
            }
        }
        let (d, slot, ri) = best.expect("counts match");
        if d > tol_abs {
            return Ok(false);
        }
        used[ri] = true;
        remaining.swap_remove(slot);
    }
    Ok(true)
}

/// Right eigenvector of the transition matrix at eigenvalue 1, in permuted
/// coordinates: rooted agents carry 1/delta_i, followers carry 1.
pub fn consensus_direction(cfg: &SystemConfig) -> DVector<f64> {
    DVector::from_fn(cfg.n, |i, _| {
        if i < cfg.m() {
            1.0 / cfg.delta[i]
        } else {
            1.0
        }
    })
}
