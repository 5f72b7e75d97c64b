//! Certification machinery for switched error dynamics.
//!
//! Each topology's error matrix A is split into a fixed subspace (kernel of
//! A - I, where A acts as the identity) and a decaying subspace (range of
//! A - I, A-invariant), with two scalars per topology: the restricted
//! spectral radius `lambda` and a transient-growth constant `rho` bounding
//! ||A^k v|| <= rho * lambda^k ||v|| on the decaying subspace for all k >= 1.
//! A mode-dependent dwell-time audit plus four scalar inequalities then
//! certify geometric decay of the switched error recursion.

use crate::error::{CoordError, Result};
use crate::spectral::{self, RankCutoff};
use crate::tol;
use nalgebra::DMatrix;

/// Orthonormal bases of the fixed / decaying invariant pair of one error
/// matrix, with its contraction constants.
#[derive(Debug, Clone)]
pub struct ContractionSplit {
    /// Basis of ker(A - I): directions A leaves untouched.
    pub fixed: DMatrix<f64>,
    /// Basis of range(A - I): the complementary A-invariant subspace.
    pub decaying: DMatrix<f64>,
    /// Spectral radius of A restricted to the decaying subspace.
    pub lambda: f64,
    /// Transient-growth constant: max(1, sup_k ||B^k|| / lambda^k) for the
    /// restricted block B, supremum over k = 1..=POWER_SUP_CAP.
    pub rho: f64,
}

impl ContractionSplit {
    pub fn fixed_dim(&self) -> usize {
        self.fixed.ncols()
    }
}

/// Split an error matrix into fixed and decaying invariant subspaces.
///
/// Refuses (`NotCertifiable`) when the structure the certificates rely on
/// is absent: an eigenvalue on or outside the unit circle away from 1, a
/// defective unit eigenvalue (fixed and decaying subspaces not
/// complementary), or a transient-growth supremum that has not stabilized
/// within the power cap.
pub fn invariant_split(a: &DMatrix<f64>) -> Result<ContractionSplit> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoordError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    let scale = spectral::norm_scale(a);
    let tau = tol::zero_tol(scale);
    let eigs = spectral::eigenvalues(a)?;

    let mut lambda = 0.0f64;
    let mut unit_count = 0usize;
    for e in &eigs {
        if (e - nalgebra::Complex::new(1.0, 0.0)).norm() <= tau {
            unit_count += 1;
        } else if e.norm() >= 1.0 - tau {
            return Err(CoordError::NotCertifiable(format!(
                "eigenvalue {:.6} + {:.6}i lies on or outside the unit circle \
                 away from 1; the error dynamics admit no geometric certificate",
                e.re, e.im
            )));
        } else {
            lambda = lambda.max(e.norm());
        }
    }

    let d = unit_count;
    let shifted = a - DMatrix::identity(n, n);
    // null and range bases from one SVD; dimensions must agree with the
    // unit-eigenvalue count for the pair to be complementary
    let fixed = spectral::null_space(&shifted);
    let decaying = spectral::range_space(&shifted);
    if fixed.ncols() != d || decaying.ncols() != n - d {
        return Err(CoordError::NotCertifiable(format!(
            "unit eigenvalue of multiplicity {d} is defective: kernel of A - I \
             has dimension {}",
            fixed.ncols()
        )));
    }
    if d > 0 && d < n {
        let mut stacked = DMatrix::zeros(n, n);
        stacked.view_mut((0, 0), (n, d)).copy_from(&fixed);
        stacked.view_mut((0, d), (n, n - d)).copy_from(&decaying);
        let smin = stacked
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s));
        if smin < tol::SUBSPACE_TOL {
            return Err(CoordError::NotCertifiable(
                "fixed and decaying subspaces are not complementary \
                 (defective unit eigenvalue)"
                    .into(),
            ));
        }
    }
    // invariance residuals; the fixed space must be genuinely fixed
    if d > 0 {
        let residual = a * &fixed - &fixed;
        if spectral::opnorm(&residual) > tol::SUBSPACE_TOL * (1.0 + scale) {
            return Err(CoordError::Numerical(
                "kernel basis of A - I is not fixed by A".into(),
            ));
        }
    }
    if n - d > 0 {
        let proj_out = a * &decaying - &decaying * (decaying.transpose() * a * &decaying);
        if spectral::opnorm(&proj_out) > tol::SUBSPACE_TOL * (1.0 + scale) {
            return Err(CoordError::Numerical(
                "range of A - I is not invariant under A".into(),
            ));
        }
    }

    let rho = if n == d {
        1.0
    } else {
        if lambda <= 1e-12 {
            return Err(CoordError::NotCertifiable(
                "restricted spectral radius is numerically zero; nilpotent \
                 transients are outside the geometric certificate"
                    .into(),
            ));
        }
        let b = decaying.transpose() * a * &decaying;
        let mut power = b.clone();
        let mut ratios = Vec::with_capacity(tol::POWER_SUP_CAP);
        let mut gain = 1.0f64;
        for k in 1..=tol::POWER_SUP_CAP {
            gain *= lambda;
            ratios.push(spectral::opnorm(&power) / gain);
            if k < tol::POWER_SUP_CAP {
                power = &b * power;
            }
        }
        // A defective dominant eigenvalue makes ||B^k|| / lambda^k grow
        // polynomially forever; a stabilizing sequence approaches its limit
        // and is flat over the tail. Material growth across the last
        // quarter of the window means no finite constant exists.
        let tail = ratios[tol::POWER_SUP_CAP - 1] / ratios[3 * tol::POWER_SUP_CAP / 4 - 1];
        if tail > 1.0 + 1e-3 {
            return Err(CoordError::NotCertifiable(format!(
                "transient-growth constant still rising after {} powers \
                 (defective dominant eigenvalue?)",
                tol::POWER_SUP_CAP
            )));
        }
        ratios.iter().fold(1.0f64, |acc, &r| acc.max(r))
    };

    Ok(ContractionSplit {
        fixed,
        decaying,
        lambda,
        rho,
    })
}

/// Result of combining per-topology splits into one common pair of
/// subspaces for the whole switching family.
#[derive(Debug, Clone)]
pub struct DecompositionCheck {
    pub holds: bool,
    /// Sum of the fixed subspaces over the first class.
    pub joint_fixed: DMatrix<f64>,
    /// Intersection of the decaying subspaces over the first class.
    pub joint_decaying: DMatrix<f64>,
    /// Human-readable reasons when `holds` is false.
    pub failures: Vec<String>,
}

/// Build the common decomposition for a family split into two classes.
///
/// Class-1 topologies contribute their fixed subspaces (summed) and
/// decaying subspaces (intersected); both joint spaces must be invariant
/// under every class-1 matrix. Class-2 topologies must strictly contract
/// the joint fixed space (it must sit inside their decaying subspace). The
/// two joint spaces must span everything. Class-2 membership is what makes
/// a fixed direction recoverable, so an empty class 2 forces the joint
/// fixed space to be trivial.
pub fn check_common_decomposition(
    mats: &[DMatrix<f64>],
    splits: &[ContractionSplit],
    class1: &[usize],
    class2: &[usize],
) -> Result<DecompositionCheck> {
    let count = mats.len();
    if count == 0 || splits.len() != count {
        return Err(CoordError::InvalidConfig(
            "one error matrix and one split per topology".into(),
        ));
    }
    let dim = mats[0].nrows();
    for m in mats {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(CoordError::DimensionMismatch(
                "error matrices of mixed dimensions".into(),
            ));
        }
    }
    let mut seen = vec![false; count];
    for &i in class1.iter().chain(class2) {
        if i >= count {
            return Err(CoordError::InvalidConfig(format!(
                "topology index {i} out of range for {count} topologies"
            )));
        }
        if seen[i] {
            return Err(CoordError::InvalidConfig(format!(
                "topology {i} assigned to both classes"
            )));
        }
        seen[i] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(CoordError::InvalidConfig(
            "every topology must belong to exactly one class".into(),
        ));
    }

    let mut failures = Vec::new();

    // joint fixed = orthonormalized sum of class-1 fixed subspaces
    let joint_fixed = if class1.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        let cols: usize = class1.iter().map(|&i| splits[i].fixed.ncols()).sum();
        let mut stacked = DMatrix::zeros(dim, cols);
        let mut at = 0;
        for &i in class1 {
            let f = &splits[i].fixed;
            stacked.view_mut((0, at), (dim, f.ncols())).copy_from(f);
            at += f.ncols();
        }
        if cols == 0 {
            DMatrix::zeros(dim, 0)
        } else {
            // the stacked columns are computed bases, not raw data, so rank
            // noise sits well above machine precision
            spectral::range_space_with(&stacked, RankCutoff::Absolute(tol::SUBSPACE_TOL))
        }
    };

    // joint decaying = intersection of class-1 decaying subspaces: kernel
    // of the stacked complement projectors
    let joint_decaying = if class1.is_empty() {
        DMatrix::identity(dim, dim)
    } else {
        let mut stacked = DMatrix::zeros(dim * class1.len(), dim);
        for (slot, &i) in class1.iter().enumerate() {
            let d = &splits[i].decaying;
            let proj = DMatrix::identity(dim, dim) - d * d.transpose();
            stacked.view_mut((slot * dim, 0), (dim, dim)).copy_from(&proj);
        }
        // projector singular values split cleanly into ~1 and ~0; anything
        // under the subspace tolerance belongs to the intersection
        spectral::null_space_with(&stacked, RankCutoff::Absolute(tol::SUBSPACE_TOL))
    };

    // invariance under class-1 matrices only
    for &i in class1 {
        for (name, basis) in [("fixed", &joint_fixed), ("decaying", &joint_decaying)] {
            if basis.ncols() == 0 {
                continue;
            }
            let image = &mats[i] * basis;
            let residual = &image - basis * (basis.transpose() * &image);
            if spectral::opnorm(&residual) > tol::SUBSPACE_TOL * (1.0 + spectral::norm_scale(&mats[i])) {
                failures.push(format!(
                    "joint {name} subspace is not invariant under topology {}", i + 1
                ));
            }
        }
    }

    // class-2 matrices must contract the joint fixed space
    for &i in class2 {
        if joint_fixed.ncols() == 0 {
            continue;
        }
        let d = &splits[i].decaying;
        let residual = &joint_fixed - d * (d.transpose() * &joint_fixed);
        if spectral::opnorm(&residual) > tol::SUBSPACE_TOL {
            failures.push(format!(
                "joint fixed subspace is not inside the decaying subspace of \
                 topology {}",
                i + 1
            ));
        }
    }

    if class2.is_empty() && joint_fixed.ncols() > 0 {
        failures.push(
            "no contracting class to recover the joint fixed directions".into(),
        );
    }

    if joint_fixed.ncols() + joint_decaying.ncols() != dim {
        failures.push(format!(
            "joint subspaces of dimensions {} + {} do not fill dimension {}",
            joint_fixed.ncols(),
            joint_decaying.ncols(),
            dim
        ));
    } else if joint_fixed.ncols() > 0 && joint_decaying.ncols() > 0 {
        let mut stacked = DMatrix::zeros(dim, dim);
        stacked
            .view_mut((0, 0), (dim, joint_fixed.ncols()))
            .copy_from(&joint_fixed);
        stacked
            .view_mut((0, joint_fixed.ncols()), (dim, joint_decaying.ncols()))
            .copy_from(&joint_decaying);
        let smin = stacked
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s));
        if smin < tol::SUBSPACE_TOL {
            failures.push("joint subspaces overlap".into());
        }
    }

    Ok(DecompositionCheck {
        holds: failures.is_empty(),
        joint_fixed,
        joint_decaying,
        failures,
    })
}

/// Mode-dependent dwell-time budget: topology i may activate at most
/// chatter[i] + (its active instants) / min_dwell[i] times in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellTimeSpec {
    pub min_dwell: Vec<usize>,
    pub chatter: Vec<f64>,
}

impl DwellTimeSpec {
    pub fn new(min_dwell: Vec<usize>, chatter: Vec<f64>) -> Result<Self> {
        if min_dwell.is_empty() || min_dwell.len() != chatter.len() {
            return Err(CoordError::InvalidConfig(
                "one dwell bound and one chatter bound per topology".into(),
            ));
        }
        if min_dwell.iter().any(|&d| d == 0) {
            return Err(CoordError::InvalidConfig(
                "minimum dwell times must be at least 1".into(),
            ));
        }
        if chatter.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(CoordError::InvalidConfig(
                "chatter bounds must be finite and nonnegative".into(),
            ));
        }
        Ok(DwellTimeSpec { min_dwell, chatter })
    }

    pub fn topologies(&self) -> usize {
        self.min_dwell.len()
    }
}

/// Per-topology switching-signal statistics over one audited window.
#[derive(Debug, Clone)]
pub struct TopologyAudit {
    pub topology: usize,
    /// Number of maximal runs of this topology.
    pub activations: usize,
    /// Total instants this topology was active.
    pub active_instants: usize,
    /// chatter + instants / min_dwell.
    pub bound: f64,
    pub pass: bool,
}

/// Count activations and active instants of each topology over the whole
/// window and compare against the dwell-time budget.
pub fn audit_schedule(sigma: &[usize], spec: &DwellTimeSpec) -> Result<Vec<TopologyAudit>> {
    if sigma.is_empty() {
        return Err(CoordError::InvalidConfig("empty switching signal".into()));
    }
    let k = spec.topologies();
    if let Some(&bad) = sigma.iter().find(|&&s| s >= k) {
        return Err(CoordError::InvalidConfig(format!(
            "switching signal uses topology {bad} but only {k} are specified"
        )));
    }
    let mut audits = Vec::with_capacity(k);
    for topo in 0..k {
        let active_instants = sigma.iter().filter(|&&s| s == topo).count();
        let activations = sigma
            .iter()
            .enumerate()
            .filter(|(i, &s)| s == topo && (*i == 0 || sigma[i - 1] != topo))
            .count();
        let bound = spec.chatter[topo] + active_instants as f64 / spec.min_dwell[topo] as f64;
        audits.push(TopologyAudit {
            topology: topo,
            activations,
            active_instants,
            bound,
            pass: activations as f64 <= bound + 1e-12,
        });
    }
    Ok(audits)
}

/// Scalar design parameters of a switching certificate.
#[derive(Debug, Clone)]
pub struct CertificateParams {
    /// Per-topology growth allowances (>= rho^(1/min_dwell)).
    pub omega: Vec<f64>,
    /// Per-topology contraction margins (> 1).
    pub gamma: Vec<f64>,
    /// Per-topology certified decay rates (in (0, 1)).
    pub decay: Vec<f64>,
    /// Topologies whose fixed subspaces form the joint fixed space.
    pub class1: Vec<usize>,
    /// Topologies that contract the joint fixed space.
    pub class2: Vec<usize>,
}

/// One certified inequality with its two sides.
#[derive(Debug, Clone)]
pub struct CertCondition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Full certificate evaluation.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub certified: bool,
    pub conditions: Vec<CertCondition>,
    /// max over topologies of the certified decay rate.
    pub decay: f64,
    /// prod over topologies of rho^chatter: the envelope coefficient.
    pub envelope_coefficient: f64,
    /// First violated condition, if any.
    pub first_violation: Option<String>,
}

/// Evaluate the four certificate inequalities for a switched family with
/// audited dwell-time statistics.
///
/// Growth allowances must dominate the amortized transient growth, margins
/// must fit inside the per-dwell contraction, and the two products over
/// the realized window (one per joint subspace) must fall below the
/// uniform decay budget. Products are compared in log space.
pub fn certify_switched_contraction(
    splits: &[ContractionSplit],
    params: &CertificateParams,
    dwell: &DwellTimeSpec,
    audits: &[TopologyAudit],
) -> Result<CertificateReport> {
    let k = splits.len();
    if k == 0 {
        return Err(CoordError::InvalidConfig("no topologies".into()));
    }
    if params.omega.len() != k
        || params.gamma.len() != k
        || params.decay.len() != k
        || dwell.topologies() != k
        || audits.len() != k
    {
        return Err(CoordError::InvalidConfig(format!(
            "parameter lists disagree on the number of topologies (expected {k})"
        )));
    }
    for i in 0..k {
        if !(params.gamma[i] > 1.0) {
            return Err(CoordError::InvalidConfig(format!(
                "contraction margin of topology {i} must exceed 1, got {}",
                params.gamma[i]
            )));
        }
        if !(params.decay[i] > 0.0 && params.decay[i] < 1.0) {
            return Err(CoordError::InvalidConfig(format!(
                "decay rate of topology {i} must lie in (0, 1), got {}",
                params.decay[i]
            )));
        }
        if !(params.omega[i] > 0.0) {
            return Err(CoordError::InvalidConfig(format!(
                "growth allowance of topology {i} must be positive",
            )));
        }
    }
    let mut in_class = vec![None::<bool>; k];
    for &i in &params.class1 {
        in_class[i] = Some(true);
    }
    for &i in &params.class2 {
        if in_class[i].is_some() {
            return Err(CoordError::InvalidConfig(format!(
                "topology {i} in both classes"
            )));
        }
        in_class[i] = Some(false);
    }
    if in_class.iter().any(|c| c.is_none()) {
        return Err(CoordError::InvalidConfig(
            "every topology needs a class".into(),
        ));
    }

    let mut conditions = Vec::new();
    for i in 0..k {
        let amortized = splits[i].rho.powf(1.0 / dwell.min_dwell[i] as f64);
        conditions.push(CertCondition {
            name: format!("growth allowance covers transients (topology {})", i + 1),
            lhs: params.omega[i],
            rhs: amortized,
            holds: params.omega[i] >= amortized,
        });
    }
    for i in 0..k {
        let budget = splits[i].rho.powf(-1.0 / dwell.min_dwell[i] as f64);
        let margin = splits[i].lambda * params.gamma[i];
        conditions.push(CertCondition {
            name: format!("contraction margin fits the dwell budget (topology {})", i + 1),
            lhs: margin,
            rhs: budget,
            holds: margin <= budget,
        });
    }

    // realized-window products, log space; audits supply the instants
    let total_log_decay: f64 = audits
        .iter()
        .map(|a| a.active_instants as f64 * params.decay[a.topology].ln())
        .sum();
    let mut fixed_product = 0.0f64;
    let mut decaying_product = 0.0f64;
    for a in audits {
        let t = a.active_instants as f64;
        if in_class[a.topology] == Some(true) {
            fixed_product += t * params.omega[a.topology].ln();
            decaying_product += t * (1.0 / params.gamma[a.topology]).ln();
        } else {
            fixed_product += t * (1.0 / params.gamma[a.topology]).ln();
            decaying_product += t * params.omega[a.topology].ln();
        }
    }
    conditions.push(CertCondition {
        name: "fixed-component product under the decay budget (log)".into(),
        lhs: fixed_product,
        rhs: total_log_decay,
        holds: fixed_product <= total_log_decay,
    });
    conditions.push(CertCondition {
        name: "decaying-component product under the decay budget (log)".into(),
        lhs: decaying_product,
        rhs: total_log_decay,
        holds: decaying_product <= total_log_decay,
    });

    for a in audits {
        conditions.push(CertCondition {
            name: format!("dwell-time audit (topology {})", a.topology + 1),
            lhs: a.activations as f64,
            rhs: a.bound,
            holds: a.pass,
        });
    }

    let decay = params.decay.iter().cloned().fold(0.0, f64::max);
    let envelope_coefficient = (0..k)
        .map(|i| splits[i].rho.powf(dwell.chatter[i]))
        .product();
    let first_violation = conditions
        .iter()
        .find(|c| !c.holds)
        .map(|c| format!("{}: {} vs {}", c.name, c.lhs, c.rhs));
    Ok(CertificateReport {
        certified: first_violation.is_none(),
        conditions,
        decay,
        envelope_coefficient,
        first_violation,
    })
}

/// Relaxed per-topology check: transients recovered within one minimum
/// dwell, rho * (lambda * gamma)^min_dwell <= 1 for each topology.
pub fn certify_per_topology(
    splits: &[ContractionSplit],
    gamma: &[f64],
    dwell: &DwellTimeSpec,
) -> Result<Vec<CertCondition>> {
    let k = splits.len();
    if gamma.len() != k || dwell.topologies() != k {
        return Err(CoordError::InvalidConfig(
            "one margin and one dwell bound per topology".into(),
        ));
    }
    Ok((0..k)
        .map(|i| {
            let value =
                splits[i].rho * (splits[i].lambda * gamma[i]).powi(dwell.min_dwell[i] as i32);
            CertCondition {
                name: format!("per-topology recovery (topology {})", i + 1),
                lhs: value,
                rhs: 1.0,
                holds: value <= 1.0,
            }
        })
        .collect())
}

/// Transition matrix of a leaderless follower subnetwork.
pub fn leaderless_transition(l3: &DMatrix<f64>, epsilon: f64) -> Result<DMatrix<f64>> {
    if l3.nrows() != l3.ncols() {
        return Err(CoordError::NotSquare {
            rows: l3.nrows(),
            cols: l3.ncols(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(CoordError::InvalidConfig(format!(
            "step size must be positive, got {epsilon}"
        )));
    }
    Ok(DMatrix::identity(l3.nrows(), l3.nrows()) - epsilon * l3)
}

/// Everything the leaderless certification produces: per-topology splits,
/// the common decomposition, the audited schedule, and the certificate.
#[derive(Debug, Clone)]
pub struct FollowerCertification {
    pub splits: Vec<ContractionSplit>,
    pub decomposition: DecompositionCheck,
    pub audits: Vec<TopologyAudit>,
    pub report: CertificateReport,
}

/// Certify a leaderless switched network directly on its state transition
/// matrices I - eps L. The unit eigenvalue carries the agreement direction
/// instead of an error-space fixed point, but the split/decay machinery is
/// identical.
pub fn certify_follower_subsystem(
    laplacians: &[DMatrix<f64>],
    epsilon: f64,
    params: &CertificateParams,
    dwell: &DwellTimeSpec,
    sigma: &[usize],
) -> Result<FollowerCertification> {
    if laplacians.is_empty() {
        return Err(CoordError::InvalidConfig("no topologies".into()));
    }
    let transitions: Vec<DMatrix<f64>> = laplacians
        .iter()
        .map(|l| leaderless_transition(l, epsilon))
        .collect::<Result<_>>()?;
    let splits: Vec<ContractionSplit> = transitions
        .iter()
        .map(invariant_split)
        .collect::<Result<_>>()?;
    let decomposition =
        check_common_decomposition(&transitions, &splits, &params.class1, &params.class2)?;
    let audits = audit_schedule(sigma, dwell)?;
    let report = certify_switched_contraction(&splits, params, dwell, &audits)?;
    Ok(FollowerCertification {
        splits,
        decomposition,
        audits,
        report,
    })
}

/// Range projector of the follower block: theta = L3 pinv(L3), together
/// with the facts the follower-limit analysis needs.
#[derive(Debug, Clone)]
pub struct RangeProjector {
    /// L3 * pinv(L3): orthogonal projector onto range(L3).
    pub theta: DMatrix<f64>,
    /// pinv(L3) * L3: orthogonal projector onto range(L3^T).
    pub theta_right: DMatrix<f64>,
    /// Whether theta * input = input, i.e. the scaled rooted-to-follower
    /// coupling lands inside range(L3). This is what the limit formula
    /// requires.
    pub covers_coupling: bool,
    /// Whether the two projectors coincide (the block is EP); only then is
    /// theta symmetric under transposition of L3's roles.
    pub equal_projectors: bool,
    /// Whether theta is (numerically) a 0/1 diagonal matrix in the given
    /// follower ordering.
    pub diagonal_01: bool,
}

pub fn follower_range_projector(
    l3: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
) -> Result<RangeProjector> {
    let q = l3.nrows();
    if l3.ncols() != q {
        return Err(CoordError::NotSquare {
            rows: q,
            cols: l3.ncols(),
        });
    }
    if coupling.nrows() != q {
        return Err(CoordError::DimensionMismatch(format!(
            "coupling has {} rows for a {}x{} follower block",
            coupling.nrows(),
            q,
            q
        )));
    }
    let pinv = spectral::pinv(l3)?;
    let theta = l3 * &pinv;
    let theta_right = &pinv * l3;
    let scale = 1.0 + spectral::norm_scale(coupling);
    let covers_coupling =
        spectral::opnorm(&(&theta * coupling - coupling)) <= tol::PENROSE_TOL * scale;
    let equal_projectors =
        spectral::opnorm(&(&theta - &theta_right)) <= tol::PENROSE_TOL;
    let diagonal_01 = (0..q).all(|i| {
        (0..q).all(|j| {
            let v = theta[(i, j)];
            if i == j {
                v.abs() < tol::PENROSE_TOL || (v - 1.0).abs() < tol::PENROSE_TOL
            } else {
                v.abs() < tol::PENROSE_TOL
            }
        })
    });
    Ok(RangeProjector {
        theta,
        theta_right,
        covers_coupling,
        equal_projectors,
        diagonal_01,
    })
}

/// Expand a cyclic (topology, run-length) pattern into a switching signal
/// of exactly `horizon` instants.
pub fn schedule_from_pattern(pattern: &[(usize, usize)], horizon: usize) -> Result<Vec<usize>> {
    if pattern.is_empty() || pattern.iter().all(|&(_, len)| len == 0) {
        return Err(CoordError::InvalidConfig(
            "schedule pattern must contain at least one positive run".into(),
        ));
    }
    if horizon == 0 {
        return Err(CoordError::InvalidConfig("zero-length schedule".into()));
    }
    let mut sigma = Vec::with_capacity(horizon);
    'outer: loop {
        for &(topo, len) in pattern {
            for _ in 0..len {
                sigma.push(topo);
                if sigma.len() == horizon {
                    break 'outer;
                }
            }
        }
    }
    Ok(sigma)
}
