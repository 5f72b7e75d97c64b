//! Gain feasibility analysis and design for the rooted subnetwork.
//!
//! The rooted agents run xi(k+1) = xi(k) + eps * u(k) with coupling matrix
//! G = D_gain * L1 * D_scale built from per-agent gains and scalings. The
//! network coordinates exactly when G has a simple zero eigenvalue and the
//! rest of its spectrum in the open right half plane. Two independent
//! routes decide that: the spectrum of G directly, and a Routh-Hurwitz test
//! on the reduced characteristic polynomial whose coefficients are
//! weighted principal-minor sums of L1. Both are computed and compared.

use crate::error::{CoordError, Result};
use crate::graph::Digraph;
use crate::spectral::{self, RouthVerdict};
use crate::tol;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Per-agent design parameters of the coordination model.
///
/// `delta` holds the rooted agents' scalings (negative = antagonistic),
/// `rho` their gains; followers are unscaled. `epsilon` is the step size
/// and `n` the total number of agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub delta: Vec<f64>,
    pub rho: Vec<f64>,
    pub epsilon: f64,
    pub n: usize,
}

impl SystemConfig {
    pub fn new(delta: Vec<f64>, rho: Vec<f64>, epsilon: f64, n: usize) -> Result<Self> {
        if delta.is_empty() {
            return Err(CoordError::InvalidConfig(
                "at least one rooted agent is required".into(),
            ));
        }
        if delta.len() != rho.len() {
            return Err(CoordError::InvalidConfig(format!(
                "{} scalings but {} gains",
                delta.len(),
                rho.len()
            )));
        }
        if n < delta.len() {
            return Err(CoordError::InvalidConfig(format!(
                "{} rooted agents exceed {} total agents",
                delta.len(),
                n
            )));
        }
        if delta.iter().any(|d| *d == 0.0 || !d.is_finite()) {
            return Err(CoordError::InvalidConfig(
                "scalings must be nonzero and finite".into(),
            ));
        }
        if rho.iter().any(|r| *r == 0.0 || !r.is_finite()) {
            return Err(CoordError::InvalidConfig(
                "gains must be nonzero and finite".into(),
            ));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(CoordError::InvalidConfig(format!(
                "step size must be positive and finite, got {epsilon}"
            )));
        }
        Ok(SystemConfig {
            delta,
            rho,
            epsilon,
            n,
        })
    }

    pub fn m(&self) -> usize {
        self.delta.len()
    }

    /// Products w_i = rho_i * delta_i; negative entries mark gain/scaling
    /// sign mismatches.
    pub fn products(&self) -> Vec<f64> {
        self.rho
            .iter()
            .zip(&self.delta)
            .map(|(r, d)| r * d)
            .collect()
    }

    pub fn mismatched(&self) -> Vec<usize> {
        self.products()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w < 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// G = diag(rho) * L1 * diag(delta).
pub fn gain_matrix(l1: &DMatrix<f64>, delta: &[f64], rho: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(l1.nrows(), l1.ncols(), |i, j| rho[i] * l1[(i, j)] * delta[j])
}

fn check_rooted_laplacian(l1: &DMatrix<f64>) -> Result<()> {
    let m = l1.nrows();
    if l1.ncols() != m {
        return Err(CoordError::NotSquare {
            rows: m,
            cols: l1.ncols(),
        });
    }
    let tau = 1e-12 * (1.0 + spectral::norm_scale(l1));
    for i in 0..m {
        if l1.row(i).sum().abs() > tau {
            return Err(CoordError::Hypothesis(format!(
                "rooted coupling block is not a Laplacian: row {i} sums to {}",
                l1.row(i).sum()
            )));
        }
        for j in 0..m {
            if i != j && l1[(i, j)] > tau {
                return Err(CoordError::Hypothesis(format!(
                    "rooted coupling block has positive off-diagonal entry ({i}, {j})"
                )));
            }
        }
    }
    // the rooted subgraph must be strongly connected for the minor-sum
    // criterion (and for the model itself: every rooted agent reaches all)
    let w = DMatrix::from_fn(m, m, |i, j| if i != j { (-l1[(i, j)]).max(0.0) } else { 0.0 });
    let g = Digraph::from_weights(w)?;
    if !g.is_strongly_connected() {
        return Err(CoordError::Hypothesis(
            "rooted subgraph is not strongly connected".into(),
        ));
    }
    Ok(())
}

/// Feasibility verdict for a gain/scaling assignment on the rooted block.
#[derive(Debug, Clone)]
pub struct GainVerdict {
    /// Indices with sign-mismatched gain/scaling products.
    pub mismatched: Vec<usize>,
    /// Spectrum of G, canonically sorted.
    pub eigenvalues: Vec<Complex64>,
    /// Exactly one eigenvalue of G in the zero cluster.
    pub simple_zero: bool,
    /// All remaining eigenvalues strictly in the open right half plane.
    pub rhp_rest: bool,
    /// Weighted principal-minor sums of L1 (the reduced characteristic
    /// polynomial coefficients), orders 1..=m-1. Empty for m = 1.
    pub minor_sums: Vec<f64>,
    /// Routh-Hurwitz verdict on the reduced polynomial; None for m = 1
    /// where the polynomial is empty and feasibility is trivial.
    pub routh: Option<RouthVerdict>,
    /// Whether the spectral and determinant routes reach the same verdict.
    /// Disagreement is possible only on the stability boundary.
    pub paths_agree: bool,
}

impl GainVerdict {
    /// The determinant route when available (it is exact in the grid
    /// arithmetic this crate uses for region sweeps), otherwise the
    /// spectral route.
    pub fn feasible(&self) -> bool {
        match &self.routh {
            Some(r) => r.stable,
            None => self.simple_zero && self.rhp_rest,
        }
    }
}

/// Decide whether gains/scalings make the rooted block coordinate:
/// G = diag(rho) * L1 * diag(delta) must have a simple zero eigenvalue and
/// all other eigenvalues in the open right half plane.
pub fn verify_gains(l1: &DMatrix<f64>, delta: &[f64], rho: &[f64]) -> Result<GainVerdict> {
    let m = l1.nrows();
    if delta.len() != m || rho.len() != m {
        return Err(CoordError::DimensionMismatch(format!(
            "{} scalings / {} gains for a {}x{} block",
            delta.len(),
            rho.len(),
            m,
            m
        )));
    }
    check_rooted_laplacian(l1)?;

    let w: Vec<f64> = rho.iter().zip(delta).map(|(r, d)| r * d).collect();
    let mismatched: Vec<usize> = w
        .iter()
        .enumerate()
        .filter(|(_, wi)| **wi < 0.0)
        .map(|(i, _)| i)
        .collect();

    let g = gain_matrix(l1, delta, rho);
    let eigenvalues = spectral::eigenvalues(&g)?;
    let tau = tol::zero_tol(spectral::norm_scale(&g));
    let zero_count = spectral::zero_multiplicity(&eigenvalues, tau);
    let simple_zero = zero_count == 1;
    let rhp_rest = eigenvalues
        .iter()
        .filter(|e| e.norm() > tau)
        .all(|e| e.re > tau);

    let (minor_sums, routh) = if m >= 2 {
        let mut h = Vec::with_capacity(m - 1);
        for r in 1..m {
            h.push(spectral::weighted_minor_sum(l1, Some(&w), r)?);
        }
        let verdict = spectral::routh_hurwitz(&h)?;
        (h, Some(verdict))
    } else {
        (Vec::new(), None)
    };

    let paths_agree = match &routh {
        Some(r) => r.stable == (simple_zero && rhp_rest),
        None => true,
    };

    Ok(GainVerdict {
        mismatched,
        eigenvalues,
        simple_zero,
        rhp_rest,
        minor_sums,
        routh,
        paths_agree,
    })
}

/// Largest step size keeping 1 - eps * mu inside the open unit disk for
/// every nonzero eigenvalue mu of the full coupling matrix:
/// eps_max = min over nonzero mu of 2 Re(mu) / |mu|^2.
pub fn epsilon_bound(coupling: &DMatrix<f64>) -> Result<f64> {
    let eigs = spectral::eigenvalues(coupling)?;
    let tau = tol::zero_tol(spectral::norm_scale(coupling));
    let nonzero: Vec<&Complex64> = eigs.iter().filter(|e| e.norm() > tau).collect();
    if nonzero.is_empty() {
        return Err(CoordError::Hypothesis(
            "coupling matrix has no nonzero eigenvalues; any step size is neutral".into(),
        ));
    }
    if eigs.len() - nonzero.len() != 1 {
        return Err(CoordError::Hypothesis(format!(
            "coupling matrix needs a simple zero eigenvalue, found {} in the zero cluster",
            eigs.len() - nonzero.len()
        )));
    }
    if let Some(bad) = nonzero.iter().find(|e| e.re <= tau) {
        return Err(CoordError::Hypothesis(format!(
            "nonzero eigenvalue {} +/- {}i is not in the open right half plane; \
             no positive step size works",
            bad.re, bad.im.abs()
        )));
    }
    Ok(nonzero
        .iter()
        .map(|e| 2.0 * e.re / (e.norm_sqr()))
        .fold(f64::INFINITY, f64::min))
}

/// Deterministic gain-search strategies.
#[derive(Debug, Clone)]
pub enum GainSearch {
    /// rho_i = sign(delta_i): always feasible for a strongly connected
    /// rooted block.
    SignMatch,
    /// Coarse-to-fine magnitude sweep over the listed coordinates, which
    /// are forced to the mismatched sign; all other gains stay
    /// sign-matched at unit magnitude. May genuinely fail: some mismatch
    /// patterns are infeasible for every magnitude choice.
    RegionSearch { mismatched: Vec<usize> },
}

/// Routh margin of a feasible point: the smallest of the polynomial
/// coefficients and Hurwitz determinants (all positive when feasible).
fn routh_margin(verdict: &GainVerdict) -> f64 {
    match &verdict.routh {
        Some(r) => r
            .coefficients
            .iter()
            .chain(&r.hurwitz_determinants)
            .fold(f64::INFINITY, |a, &b| a.min(b)),
        None => f64::INFINITY,
    }
}

pub fn search_gains(
    l1: &DMatrix<f64>,
    delta: &[f64],
    strategy: &GainSearch,
) -> Result<Option<Vec<f64>>> {
    let m = l1.nrows();
    if delta.len() != m {
        return Err(CoordError::DimensionMismatch(format!(
            "{} scalings for a {}x{} block",
            delta.len(),
            m,
            m
        )));
    }
    let base: Vec<f64> = delta.iter().map(|d| d.signum()).collect();
    match strategy {
        GainSearch::SignMatch => {
            let verdict = verify_gains(l1, delta, &base)?;
            if verdict.feasible() {
                Ok(Some(base))
            } else {
                // cannot happen for a valid strongly connected block; kept
                // as an honest fallthrough rather than an assert
                Ok(None)
            }
        }
        GainSearch::RegionSearch { mismatched } => {
            if mismatched.is_empty() {
                return Err(CoordError::InvalidConfig(
                    "region search needs at least one coordinate".into(),
                ));
            }
            if mismatched.len() > 3 {
                return Err(CoordError::InvalidConfig(format!(
                    "region search is capped at 3 coordinates, got {}",
                    mismatched.len()
                )));
            }
            for &i in mismatched {
                if i >= m {
                    return Err(CoordError::InvalidConfig(format!(
                        "coordinate {i} out of range for {m} rooted agents"
                    )));
                }
            }
            // coarse level: 8 magnitudes per decade band [1e-2, 1e1]
            let coarse: Vec<f64> = (0..8).map(|k| 10f64.powf(-2.0 + 3.0 * k as f64 / 7.0)).collect();
            let eval = |mags: &[f64]| -> Result<Option<(f64, Vec<f64>)>> {
                let mut rho = base.clone();
                for (slot, &i) in mismatched.iter().enumerate() {
                    rho[i] = -delta[i].signum() * mags[slot];
                }
                let v = verify_gains(l1, delta, &rho)?;
                Ok(if v.feasible() {
                    Some((routh_margin(&v), rho))
                } else {
                    None
                })
            };

            let k = mismatched.len();
            let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None; // margin, mags, rho
            let mut idx = vec![0usize; k];
            loop {
                let mags: Vec<f64> = idx.iter().map(|&i| coarse[i]).collect();
                if let Some((margin, rho)) = eval(&mags)? {
                    if best.as_ref().map_or(true, |(bm, _, _)| margin > *bm) {
                        best = Some((margin, mags.clone(), rho));
                    }
                }
                // odometer increment
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < coarse.len() {
                        break;
                    }
                    idx[pos] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
            }

            let Some((_, mut center, mut rho_best)) = best else {
                return Ok(None);
            };

            // two geometric refinement rounds around the best coarse hit;
            // the coarse spacing is 3/7 of a decade, halved each round
            let mut margin_best = f64::NEG_INFINITY;
            for level in 1..=2 {
                let half = 10f64.powf(3.0 / 7.0 / 2f64.powi(level));
                let factors = [1.0 / half, 1.0, half];
                let mut idx = vec![0usize; k];
                loop {
                    let mags: Vec<f64> = idx
                        .iter()
                        .zip(&center)
                        .map(|(&i, &c)| c * factors[i])
                        .collect();
                    if let Some((margin, rho)) = eval(&mags)? {
                        if margin > margin_best {
                            margin_best = margin;
                            center = mags.clone();
                            rho_best = rho;
                        }
                    }
                    let mut pos = k;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < factors.len() {
                            break;
                        }
                        idx[pos] = 0;
                    }
                    if idx.iter().all(|&i| i == 0) {
                        break;
                    }
                }
            }
            Ok(Some(rho_best))
        }
    }
}

/// Feasibility flags over a rectangular gain grid.
#[derive(Debug, Clone)]
pub struct RegionSample {
    /// Coordinates of `rho` that vary.
    pub free: Vec<usize>,
    /// Grid values per free coordinate.
    pub axes: Vec<Vec<f64>>,
    /// (gain point restricted to the free coordinates, feasible) in
    /// row-major order over `axes`.
    pub points: Vec<(Vec<f64>, bool)>,
}

/// Sweep the gain coordinates listed in `free` over a rectangular grid
/// (start at `lo`, step by `step` while within `hi`), holding all other
/// gains sign-matched at unit magnitude. Feasibility uses the determinant
/// route only: with grid values exactly representable in binary floating
/// point, every test is a sign of an exactly computed small determinant.
pub fn sample_feasible_region(
    l1: &DMatrix<f64>,
    delta: &[f64],
    free: &[usize],
    ranges: &[(f64, f64)],
    steps: &[f64],
) -> Result<RegionSample> {
    let m = l1.nrows();
    check_rooted_laplacian(l1)?;
    if delta.len() != m {
        return Err(CoordError::DimensionMismatch(format!(
            "{} scalings for a {}x{} block",
            delta.len(),
            m,
            m
        )));
    }
    if free.is_empty() || free.len() > 3 {
        return Err(CoordError::InvalidConfig(format!(
            "region sampling supports 1 to 3 free coordinates, got {}",
            free.len()
        )));
    }
    if ranges.len() != free.len() || steps.len() != free.len() {
        return Err(CoordError::InvalidConfig(
            "one (lo, hi) range and one step per free coordinate".into(),
        ));
    }
    for &i in free {
        if i >= m {
            return Err(CoordError::InvalidConfig(format!(
                "free coordinate {i} out of range for {m} rooted agents"
            )));
        }
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(free.len());
    for (&(lo, hi), &step) in ranges.iter().zip(steps) {
        if !(step > 0.0) || lo > hi {
            return Err(CoordError::InvalidConfig(format!(
                "bad grid range [{lo}, {hi}] with step {step}"
            )));
        }
        let mut axis = Vec::new();
        let mut k = 0usize;
        loop {
            let v = lo + k as f64 * step;
            if v > hi + step * 1e-9 {
                break;
            }
            axis.push(v);
            k += 1;
        }
        axes.push(axis);
    }

    // minors of L1 cached once: per order r, the subsets and their dets in
    // enumeration order
    let mut minors: Vec<Vec<(Vec<usize>, f64)>> = Vec::new();
    for r in 1..m {
        let mut level = Vec::new();
        collect_minors(l1, r, &mut level);
        minors.push(level);
    }

    let base: Vec<f64> = delta.iter().map(|d| d.signum()).collect();
    let mut points = Vec::new();
    let mut idx = vec![0usize; free.len()];
    loop {
        let mut rho = base.clone();
        for (slot, &i) in free.iter().enumerate() {
            rho[i] = axes[slot][idx[slot]];
        }
        let w: Vec<f64> = rho.iter().zip(delta).map(|(r, d)| r * d).collect();
        let feasible = if m == 1 {
            true
        } else {
            let mut coeffs = Vec::with_capacity(m - 1);
            for level in &minors {
                let mut total = 0.0;
                for (subset, det) in level {
                    let mut term = *det;
                    for &i in subset {
                        term *= w[i];
                    }
                    total += term;
                }
                coeffs.push(total);
            }
            spectral::routh_hurwitz(&coeffs)?.stable
        };
        points.push((free.iter().map(|&i| rho[i]).collect(), feasible));

        let mut pos = free.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < axes[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
    Ok(RegionSample {
        free: free.to_vec(),
        axes,
        points,
    })
}

fn collect_minors(m: &DMatrix<f64>, r: usize, out: &mut Vec<(Vec<usize>, f64)>) {
    fn rec(
        start: usize,
        n: usize,
        left: usize,
        buf: &mut Vec<usize>,
        m: &DMatrix<f64>,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if left == 0 {
            let k = buf.len();
            let sub = DMatrix::from_fn(k, k, |i, j| m[(buf[i], buf[j])]);
            out.push((buf.clone(), sub.determinant()));
            return;
        }
        for i in start..=n - left {
            buf.push(i);
            rec(i + 1, n, left - 1, buf, m, out);
            buf.pop();
        }
    }
    rec(0, m.nrows(), r, &mut Vec::with_capacity(r), m, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cycle_laplacian() -> DMatrix<f64> {
        // 3-cycle 0 -> 1 -> 2 -> 0 with unit weights
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0])
    }

    #[test]
    fn sign_matched_gains_are_feasible() {
        let l1 = cycle_laplacian();
        let delta = [1.0, -2.0, 0.5];
        let rho = [3.0, -1.0, 2.0];
        let v = verify_gains(&l1, &delta, &rho).unwrap();
        assert!(v.mismatched.is_empty());
        assert!(v.feasible());
        assert!(v.simple_zero && v.rhp_rest);
        assert!(v.paths_agree);
    }

    #[test]
    fn strong_mismatch_can_break_feasibility() {
        // single mismatched agent with a large-magnitude product flips the
        // trace of G negative, forcing spectrum out of the right half plane
        let l1 = cycle_laplacian();
        let delta = [1.0, 1.0, 1.0];
        let rho = [-10.0, 1.0, 1.0];
        let v = verify_gains(&l1, &delta, &rho).unwrap();
        assert_eq!(v.mismatched, vec![0]);
        assert!(!v.feasible());
        assert!(v.paths_agree);
    }

    #[test]
    fn non_laplacian_rooted_block_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -1.0, 1.0]);
        assert!(matches!(
            verify_gains(&m, &[1.0, 1.0], &[1.0, 1.0]),
            Err(CoordError::Hypothesis(_))
        ));
    }

    #[test]
    fn disconnected_rooted_block_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]);
        assert!(matches!(
            verify_gains(&m, &[1.0, 1.0], &[1.0, 1.0]),
            Err(CoordError::Hypothesis(_))
        ));
    }

    #[test]
    fn single_rooted_agent_is_trivially_feasible() {
        let l1 = DMatrix::from_row_slice(1, 1, &[0.0]);
        let v = verify_gains(&l1, &[-1.0], &[1.0]).unwrap();
        assert!(v.feasible());
        assert!(v.routh.is_none());
    }

    #[test]
    fn epsilon_bound_of_symmetric_laplacian() {
        // path graph 0 <-> 1, Laplacian eigenvalues {0, 2}: bound = 2*2/4 = 1
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_abs_diff_eq!(epsilon_bound(&l).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_bound_rejects_left_half_plane() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.5, 1.5, 1.5, -1.5]);
        assert!(epsilon_bound(&m).is_err());
    }

    #[test]
    fn sign_match_search_returns_signs() {
        let l1 = cycle_laplacian();
        let rho = search_gains(&l1, &[0.3, -2.0, 1.0], &GainSearch::SignMatch)
            .unwrap()
            .unwrap();
        assert_eq!(rho, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn region_search_finds_single_mismatch() {
        // one antagonistic-feasible coordinate: small-magnitude opposite
        // gain keeps the minor sums positive
        let l1 = cycle_laplacian();
        let delta = [1.0, 1.0, 1.0];
        let found = search_gains(
            &l1,
            &delta,
            &GainSearch::RegionSearch {
                mismatched: vec![0],
            },
        )
        .unwrap()
        .expect("feasible mismatched gain exists");
        assert!(found[0] < 0.0);
        assert!(verify_gains(&l1, &delta, &found).unwrap().feasible());
    }

    #[test]
    fn region_sample_grid_shape_and_flags() {
        let l1 = cycle_laplacian();
        let s = sample_feasible_region(
            &l1,
            &[1.0, 1.0, 1.0],
            &[0],
            &[(-2.0, 2.0)],
            &[1.0],
        )
        .unwrap();
        assert_eq!(s.points.len(), 5);
        // minor sums are h1 = rho_0 + 2, h2 = 2 rho_0 + 1: feasible iff
        // rho_0 > -1/2, so the grid splits exactly at the third point
        let found: Vec<bool> = s.points.iter().map(|(_, f)| *f).collect();
        assert_eq!(found, vec![false, false, true, true, true]);
    }
}
