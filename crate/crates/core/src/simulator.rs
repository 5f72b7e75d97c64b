//! Forward simulation of the switched coordination recursion, with
//! coordination verdicts checked directly against the definition rather
//! than against any certificate.

use crate::error::{CoordError, Result};
use crate::error_transform::ErrorSystem;
use crate::gains::SystemConfig;
use crate::spectral;
use crate::tol;
use nalgebra::{Complex, DMatrix, DVector};

/// One simulated run: agent states, transformed error coordinates, and the
/// switching signal that was actually consumed.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// xi(0), xi(1), ...; one vector per instant.
    pub states: Vec<DVector<f64>>,
    /// zeta(k) = P xi(k), parallel to `states`.
    pub errors: Vec<DVector<f64>>,
    /// Topology active at each simulated step (len = states.len() - 1).
    pub schedule: Vec<usize>,
    /// Step at which the state magnitude crossed the divergence cap, if any.
    pub truncated_at: Option<usize>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds at least xi(0)")
    }
}

/// Run the switched recursion xi(k+1) = T_{sigma(k)} xi(k).
///
/// Every step is cross-checked against the transformed recursion
/// zeta(k+1) = A_{sigma(k)} zeta(k); disagreement beyond rounding is a hard
/// numerical error, because the two routes are algebraically identical.
/// A state that crosses the divergence cap truncates the run (recorded,
/// not an error: divergence is a legitimate finding about bad parameters).
pub fn simulate(
    systems: &[ErrorSystem],
    sigma: &[usize],
    xi0: &DVector<f64>,
) -> Result<Trajectory> {
    if systems.is_empty() {
        return Err(CoordError::InvalidConfig("no topologies to simulate".into()));
    }
    let n = systems[0].transition.nrows();
    for (i, s) in systems.iter().enumerate() {
        if s.transition.nrows() != n || s.p.nrows() != systems[0].p.nrows() {
            return Err(CoordError::DimensionMismatch(format!(
                "topology {i} has a different agent count"
            )));
        }
        if (&s.p - &systems[0].p).amax() > 0.0 {
            return Err(CoordError::InvalidConfig(
                "topologies disagree on the error transform; scalings must be \
                 shared across the switching family"
                    .into(),
            ));
        }
    }
    if sigma.is_empty() {
        return Err(CoordError::InvalidConfig("empty switching signal".into()));
    }
    if let Some(&bad) = sigma.iter().find(|&&s| s >= systems.len()) {
        return Err(CoordError::InvalidConfig(format!(
            "switching signal uses topology {bad} but only {} are defined",
            systems.len()
        )));
    }
    if xi0.len() != n {
        return Err(CoordError::DimensionMismatch(format!(
            "initial state has {} entries for {} agents",
            xi0.len(),
            n
        )));
    }
    if xi0.iter().any(|x| !x.is_finite()) {
        return Err(CoordError::InvalidConfig(
            "initial state must be finite".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut flagged = vec![false; systems.len()];
    for &s in sigma {
        if !flagged[s] {
            flagged[s] = true;
            let radius = spectral::eigenvalues(&systems[s].transition)?
                .iter()
                .fold(0.0f64, |acc, e| acc.max(e.norm()));
            if radius > 1.0 + tol::zero_tol(1.0) {
                warnings.push(format!(
                    "topology {s} has spectral radius {radius:.6} > 1; the step \
                     size likely exceeds its stability bound"
                ));
            }
        }
    }

    let p = &systems[0].p;
    let mut states = Vec::with_capacity(sigma.len() + 1);
    let mut errors = Vec::with_capacity(sigma.len() + 1);
    let mut schedule = Vec::with_capacity(sigma.len());
    states.push(xi0.clone());
    errors.push(p * xi0);
    let mut truncated_at = None;

    for (k, &s) in sigma.iter().enumerate() {
        let sys = &systems[s];
        let next = &sys.transition * states.last().unwrap();
        let zeta_next = p * &next;
        let predicted = &sys.a * errors.last().unwrap();
        let prev_scale = errors.last().unwrap().amax();
        if (&zeta_next - predicted).amax() > tol::STEP_CONSISTENCY_TOL * (1.0 + prev_scale) {
            return Err(CoordError::Numerical(format!(
                "state and error recursions disagree at step {k}; the error \
                 transform does not intertwine this transition matrix"
            )));
        }
        schedule.push(s);
        states.push(next);
        errors.push(zeta_next);
        if states.last().unwrap().amax() > tol::DIVERGENCE_CAP {
            truncated_at = Some(k + 1);
            warnings.push(format!(
                "state magnitude crossed {:.0e} at step {}; run truncated",
                tol::DIVERGENCE_CAP,
                k + 1
            ));
            break;
        }
    }

    Ok(Trajectory {
        states,
        errors,
        schedule,
        truncated_at,
        warnings,
    })
}

/// Coordination verdict for one trajectory, following the three clauses of
/// the coordination definition plus a settledness requirement that the
/// limits actually exist.
#[derive(Debug, Clone)]
pub struct CoordinationVerdict {
    pub achieved: bool,
    /// max |xi_j - delta_i xi_i| over follower j, rooted i, trailing window.
    pub cross_residual: f64,
    /// max |delta_i xi_i - delta_j xi_j| over rooted pairs, trailing window.
    pub rooted_residual: f64,
    /// max |xi_i - xi_j| over follower pairs, trailing window.
    pub follower_residual: f64,
    /// max |xi_i(k) - xi_i(end)| over all agents, trailing window.
    pub settle_residual: f64,
    /// Final state, one entry per agent.
    pub limits: Vec<f64>,
    /// Common scaled limit (mean of delta_i xi_i and follower xi_j) when
    /// coordination was achieved.
    pub coordination_value: Option<f64>,
    /// Empirical decay exponent of the error norm over the trailing window.
    pub rate: Option<f64>,
}

/// Judge a trajectory against the coordination definition over a trailing
/// window, with a trend check so that slow divergence is not mistaken for
/// convergence.
pub fn check_coordination(
    traj: &Trajectory,
    cfg: &SystemConfig,
    tolerance: f64,
    window: usize,
) -> Result<CoordinationVerdict> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(CoordError::InvalidConfig(format!(
            "coordination tolerance must be positive, got {tolerance}"
        )));
    }
    if window < 2 {
        return Err(CoordError::InvalidConfig(
            "coordination window must cover at least two instants".into(),
        ));
    }
    let len = traj.states.len();
    if window > len {
        return Err(CoordError::InvalidConfig(format!(
            "coordination window {window} exceeds trajectory length {len}"
        )));
    }
    let n = cfg.n;
    let m = cfg.m();
    if traj.states[0].len() != n {
        return Err(CoordError::DimensionMismatch(format!(
            "trajectory is over {} agents, configuration over {n}",
            traj.states[0].len()
        )));
    }

    let last = &traj.states[len - 1];
    let mut cross = 0.0f64;
    let mut rooted = 0.0f64;
    let mut follower = 0.0f64;
    let mut settle = 0.0f64;
    for k in len - window..len {
        let x = &traj.states[k];
        for i in 0..n {
            settle = settle.max((x[i] - last[i]).abs());
        }
        for i in 0..m {
            let si = cfg.delta[i] * x[i];
            for j in i + 1..m {
                rooted = rooted.max((si - cfg.delta[j] * x[j]).abs());
            }
            for j in m..n {
                cross = cross.max((x[j] - si).abs());
            }
        }
        for i in m..n {
            for j in i + 1..n {
                follower = follower.max((x[i] - x[j]).abs());
            }
        }
    }

    // errors over the previous window must not have been smaller: a tail
    // that still shrinks is fine, a tail that grows is not settled
    let window_max =
        |from: usize, to: usize| (from..to).fold(0.0f64, |acc, k| acc.max(traj.errors[k].amax()));
    let trend_ok = if len >= 2 * window {
        let prev = window_max(len - 2 * window, len - window);
        let tail = window_max(len - window, len);
        tail <= prev + tolerance
    } else {
        true
    };

    let achieved = traj.truncated_at.is_none()
        && trend_ok
        && cross <= tolerance
        && rooted <= tolerance
        && follower <= tolerance
        && settle <= tolerance;

    let coordination_value = achieved.then(|| {
        let scaled: f64 = (0..m).map(|i| cfg.delta[i] * last[i]).sum::<f64>()
            + (m..n).map(|j| last[j]).sum::<f64>();
        scaled / n as f64
    });

    let rate = if traj.truncated_at.is_none() {
        let head = traj.errors[len - window].amax();
        let tail = traj.errors[len - 1].amax();
        (head > 0.0 && tail > 0.0)
            .then(|| -(tail.ln() - head.ln()) / (window - 1) as f64)
    } else {
        None
    };

    Ok(CoordinationVerdict {
        achieved,
        cross_residual: cross,
        rooted_residual: rooted,
        follower_residual: follower,
        settle_residual: settle,
        limits: last.iter().cloned().collect(),
        coordination_value,
        rate,
    })
}

/// Closed-form follower limit when the rooted agents are mutually
/// uninfluenced (their Laplacian block vanishes and their states stay at
/// the initial values): followers settle at -L3^{-1} L2 D xi_rooted(0).
pub fn containment_limit(
    l2: &DMatrix<f64>,
    l3: &DMatrix<f64>,
    delta: &[f64],
    xi_rooted: &[f64],
) -> Result<DVector<f64>> {
    let q = l3.nrows();
    if l3.ncols() != q {
        return Err(CoordError::NotSquare {
            rows: q,
            cols: l3.ncols(),
        });
    }
    let m = delta.len();
    if l2.nrows() != q || l2.ncols() != m || xi_rooted.len() != m {
        return Err(CoordError::DimensionMismatch(format!(
            "coupling {}x{}, follower block {}x{}, {} scalings, {} rooted states",
            l2.nrows(),
            l2.ncols(),
            q,
            q,
            m,
            xi_rooted.len()
        )));
    }
    let scaled = DVector::from_iterator(m, (0..m).map(|i| delta[i] * xi_rooted[i]));
    let rhs = -(l2 * scaled);
    let solved = l3.clone().full_piv_lu().solve(&rhs).ok_or_else(|| {
        CoordError::Numerical("follower block is singular; no unique follower limit".into())
    })?;
    let residual = (l3 * &solved - &rhs).amax();
    if residual > tol::PENROSE_TOL * (1.0 + rhs.amax()) {
        return Err(CoordError::Numerical(format!(
            "follower block is numerically singular (solve residual {residual:.3e})"
        )));
    }
    Ok(solved)
}

/// Spectral summary of a single fixed topology: how fast the error decays
/// and what limit the states reach.
#[derive(Debug, Clone)]
pub struct FixedTopologyReport {
    pub error_spectrum: Vec<Complex<f64>>,
    /// Largest error-eigenvalue modulus; below 1 means coordination.
    pub dominant_modulus: f64,
    /// -ln(dominant modulus) when it lies strictly inside the unit circle.
    pub decay_rate: Option<f64>,
    /// Positive left weights of the rooted block (influence shares).
    pub left_weights: DVector<f64>,
    /// Influence functional: left weights over gains on rooted agents,
    /// zero on followers.
    pub influence: DVector<f64>,
    /// Consensus direction: reciprocal scalings on rooted agents, ones on
    /// followers.
    pub direction: DVector<f64>,
}

impl FixedTopologyReport {
    /// Predicted limit of xi(k): the projection of xi(0) along the
    /// consensus direction.
    pub fn predict_limit(&self, xi0: &DVector<f64>) -> Result<DVector<f64>> {
        if xi0.len() != self.direction.len() {
            return Err(CoordError::DimensionMismatch(format!(
                "initial state has {} entries for {} agents",
                xi0.len(),
                self.direction.len()
            )));
        }
        let normalizer = self.influence.dot(&self.direction);
        if normalizer.abs() < 1e-12 {
            return Err(CoordError::Numerical(
                "influence functional is orthogonal to the consensus \
                 direction; the limit projection is undefined"
                    .into(),
            ));
        }
        Ok(&self.direction * (self.influence.dot(xi0) / normalizer))
    }
}

pub fn fixed_topology_report(
    blocks: &crate::graph::LaplacianBlocks,
    cfg: &SystemConfig,
) -> Result<FixedTopologyReport> {
    let system = crate::error_transform::build_error_system(blocks, cfg)?;
    let error_spectrum = spectral::eigenvalues(&system.a)?;
    let dominant_modulus = error_spectrum
        .iter()
        .fold(0.0f64, |acc, e| acc.max(e.norm()));
    let decay_rate =
        (dominant_modulus > 0.0 && dominant_modulus < 1.0).then(|| -dominant_modulus.ln());

    let m = cfg.m();
    let left_weights = if m == 1 {
        DVector::from_element(1, 1.0)
    } else {
        spectral::left_null_positive(&blocks.l1)?
    };
    let n = cfg.n;
    let mut influence = DVector::zeros(n);
    let mut direction = DVector::from_element(n, 1.0);
    for i in 0..m {
        influence[i] = left_weights[i] / cfg.rho[i];
        direction[i] = 1.0 / cfg.delta[i];
    }
    Ok(FixedTopologyReport {
        error_spectrum,
        dominant_modulus,
        decay_rate,
        left_weights,
        influence,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_transform::build_error_system;
    use crate::graph::LaplacianBlocks;
    use approx::assert_abs_diff_eq;

    /// Two mutually connected rooted agents driving one follower.
    fn two_rooted_one_follower() -> LaplacianBlocks {
        let l1 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let l2 = DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]);
        let l3 = DMatrix::from_row_slice(1, 1, &[2.0]);
        let full = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, -1.0, -1.0, 2.0],
        );
        LaplacianBlocks {
            m: 2,
            n: 3,
            permutation: vec![0, 1, 2],
            full,
            l1,
            l2,
            l3,
        }
    }

    #[test]
    fn antagonistic_pair_coordinates_with_balancing_gains() {
        let blocks = two_rooted_one_follower();
        let cfg = SystemConfig::new(vec![-1.0, -1.0], vec![1.0, -2.5], 0.2, 3).unwrap();
        let sys = build_error_system(&blocks, &cfg).unwrap();
        let xi0 = DVector::from_row_slice(&[1.5, -0.5, 0.25]);
        let traj = simulate(&[sys], &vec![0; 2000], &xi0).unwrap();
        assert!(traj.truncated_at.is_none());
        assert!(traj.warnings.is_empty(), "{:?}", traj.warnings);
        let verdict =
            check_coordination(&traj, &cfg, tol::COORDINATION_TOL, tol::COORDINATION_WINDOW)
                .unwrap();
        assert!(verdict.achieved, "verdict: {verdict:?}");
        // scaled agreement at the limit: delta_i xi_i equal across rooted
        // agents and equal to the follower state
        let x = traj.final_state();
        assert_abs_diff_eq!(-x[0], -x[1], epsilon = 1e-6);
        assert_abs_diff_eq!(-x[0], x[2], epsilon = 1e-6);

        // rate is estimable while the error is still decaying (it underflows
        // to exactly zero long before step 2000)
        let sys = build_error_system(&blocks, &cfg).unwrap();
        let short = simulate(&[sys], &vec![0; 60], &xi0).unwrap();
        let early = check_coordination(&short, &cfg, tol::COORDINATION_TOL, 20).unwrap();
        let rate = early.rate.unwrap();
        // dominant error eigenvalue is 0.7, so the asymptotic rate is -ln 0.7
        assert_abs_diff_eq!(rate, -(0.7f64.ln()), epsilon = 1e-2);
    }

    #[test]
    fn same_sign_gains_on_antagonistic_pair_diverge() {
        let blocks = two_rooted_one_follower();
        let cfg = SystemConfig::new(vec![-1.0, -1.0], vec![1.5, 1.5], 1.0 / 3.0, 3).unwrap();
        let sys = build_error_system(&blocks, &cfg).unwrap();
        let xi0 = DVector::from_row_slice(&[1.0, -1.0, 0.5]);
        let traj = simulate(&[sys], &vec![0; 2000], &xi0).unwrap();
        assert!(traj.truncated_at.is_some());
        assert!(!traj.warnings.is_empty());
        let verdict =
            check_coordination(&traj, &cfg, tol::COORDINATION_TOL, 10).unwrap();
        assert!(!verdict.achieved);
        assert!(verdict.rate.is_none());
    }

    #[test]
    fn fixed_report_predicts_the_limit() {
        let blocks = two_rooted_one_follower();
        let cfg = SystemConfig::new(vec![-1.0, -1.0], vec![1.0, -2.5], 0.2, 3).unwrap();
        let report = fixed_topology_report(&blocks, &cfg).unwrap();
        assert_abs_diff_eq!(report.dominant_modulus, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(report.decay_rate.unwrap(), -(0.7f64.ln()), epsilon = 1e-12);

        let sys = build_error_system(&blocks, &cfg).unwrap();
        let xi0 = DVector::from_row_slice(&[1.5, -0.5, 0.25]);
        let predicted = report.predict_limit(&xi0).unwrap();
        let traj = simulate(&[sys], &vec![0; 3000], &xi0).unwrap();
        let x = traj.final_state();
        for i in 0..3 {
            assert_abs_diff_eq!(predicted[i], x[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn containment_limit_matches_simulation() {
        // two isolated leaders, two followers listening to both
        let l2 = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]);
        let l3 = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let delta = [1.0, -1.0];
        let xi_rooted = [1.0, 2.0];
        let limit = containment_limit(&l2, &l3, &delta, &xi_rooted).unwrap();
        assert_abs_diff_eq!(limit[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(limit[1], -0.5, epsilon = 1e-12);

        let blocks = LaplacianBlocks {
            m: 2,
            n: 4,
            permutation: vec![0, 1, 2, 3],
            full: DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    -1.0, -1.0, 2.0, 0.0, //
                    -1.0, -1.0, 0.0, 2.0,
                ],
            ),
            l1: DMatrix::zeros(2, 2),
            l2: l2.clone(),
            l3: l3.clone(),
        };
        let cfg = SystemConfig::new(delta.to_vec(), vec![1.0, -1.0], 0.5, 4).unwrap();
        let sys = build_error_system(&blocks, &cfg).unwrap();
        let xi0 = DVector::from_row_slice(&[1.0, 2.0, 0.3, -0.7]);
        let traj = simulate(&[sys], &vec![0; 400], &xi0).unwrap();
        let x = traj.final_state();
        assert_abs_diff_eq!(x[2], limit[0], epsilon = 1e-9);
        assert_abs_diff_eq!(x[3], limit[1], epsilon = 1e-9);
        // leaders never move
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 0.0);
    }

    #[test]
    fn singular_follower_block_is_reported() {
        let l2 = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let l3 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(
            containment_limit(&l2, &l3, &[1.0], &[1.0]),
            Err(CoordError::Numerical(_))
        ));
    }

    #[test]
    fn window_longer_than_trajectory_is_rejected() {
        let blocks = two_rooted_one_follower();
        let cfg = SystemConfig::new(vec![-1.0, -1.0], vec![1.0, -2.5], 0.2, 3).unwrap();
        let sys = build_error_system(&blocks, &cfg).unwrap();
        let xi0 = DVector::from_row_slice(&[1.0, 1.0, 1.0]);
        let traj = simulate(&[sys], &[0, 0, 0], &xi0).unwrap();
        assert!(check_coordination(&traj, &cfg, 1e-6, 10).is_err());
    }
}
