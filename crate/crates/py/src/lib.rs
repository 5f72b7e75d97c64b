//! Python bindings: graphs, gain configurations, error dynamics,
//! switching certificates, and simulation, with matrices passed as plain
//! nested lists and eigenvalues as Python complex numbers.
//!
//! Indices are 0-based on both sides. Initial states and reported limits
//! use the caller's agent numbering; the block reordering the analysis
//! needs internally is applied and undone at the boundary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use coord_core::error_transform::build_error_system;
use coord_core::gains;
use coord_core::graph::{self, LaplacianBlocks};
use coord_core::scenario::random_state as core_random_state;
use coord_core::simulator::{self, Trajectory as CoreTrajectory};
use coord_core::switching;
use coord_core::CoordError;

fn err(e: CoordError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dmatrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let nr = rows.len();
    if nr == 0 {
        return Err(PyValueError::new_err("matrix must not be empty"));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err("matrix rows differ in length"));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Weighted directed graph on agents 0..n; an edge (from, to) means agent
/// `to` listens to agent `from`.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Digraph {
    inner: graph::Digraph,
}

#[pymethods]
impl Digraph {
    #[new]
    fn new(n: usize) -> PyResult<Self> {
        Ok(Digraph {
            inner: graph::Digraph::new(n).map_err(err)?,
        })
    }

    #[pyo3(signature = (from_node, to_node, weight = 1.0))]
    fn add_edge(&mut self, from_node: usize, to_node: usize, weight: f64) -> PyResult<()> {
        self.inner.add_edge(from_node, to_node, weight).map_err(err)
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        from_dmatrix(&self.inner.laplacian())
    }

    /// Agents from which every other agent is reachable.
    fn find_roots(&self) -> Vec<usize> {
        self.inner.find_roots()
    }

    fn has_spanning_tree(&self) -> bool {
        self.inner.has_spanning_tree()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Edge-wise sum of several graphs on the same agent set.
    #[staticmethod]
    fn union(graphs: Vec<Digraph>) -> PyResult<Digraph> {
        let inners: Vec<graph::Digraph> = graphs.into_iter().map(|g| g.inner).collect();
        Ok(Digraph {
            inner: graph::Digraph::union(&inners).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        let edges = self.inner.weights().iter().filter(|w| **w > 0.0).count();
        format!("Digraph(n={}, edges={})", self.inner.n(), edges)
    }
}

/// Scalings, gains, and step size for a network of `n` agents whose first
/// entries (in rooted order) carry the scalings in `delta`; negative
/// entries mark antagonistic agents.
#[pyclass]
struct SystemConfig {
    inner: gains::SystemConfig,
}

#[pymethods]
impl SystemConfig {
    #[new]
    fn new(delta: Vec<f64>, rho: Vec<f64>, epsilon: f64, n: usize) -> PyResult<Self> {
        Ok(SystemConfig {
            inner: gains::SystemConfig::new(delta, rho, epsilon, n).map_err(err)?,
        })
    }

    #[getter]
    fn delta(&self) -> Vec<f64> {
        self.inner.delta.clone()
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho.clone()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(delta={:?}, rho={:?}, epsilon={}, n={})",
            self.inner.delta, self.inner.rho, self.inner.epsilon, self.inner.n
        )
    }
}

/// Feasibility verdict for a gain assignment on the rooted block.
#[pyclass]
struct GainVerdict {
    #[pyo3(get)]
    feasible: bool,
    #[pyo3(get)]
    mismatched: Vec<usize>,
    #[pyo3(get)]
    eigenvalues: Vec<Complex64>,
}

/// Simulated run, stated in the caller's agent numbering.
#[pyclass]
struct Trajectory {
    core: CoreTrajectory,
    permutation: Vec<usize>,
}

#[pymethods]
impl Trajectory {
    /// states()[k][i] is agent i at instant k.
    fn states(&self) -> Vec<Vec<f64>> {
        let n = self.permutation.len();
        self.core
            .states
            .iter()
            .map(|x| {
                let mut row = vec![0.0; n];
                for (p, &agent) in self.permutation.iter().enumerate() {
                    row[agent] = x[p];
                }
                row
            })
            .collect()
    }

    /// Error coordinates per instant (one fewer than the agent count).
    fn errors(&self) -> Vec<Vec<f64>> {
        self.core
            .errors
            .iter()
            .map(|z| z.iter().copied().collect())
            .collect()
    }

    #[getter]
    fn schedule(&self) -> Vec<usize> {
        self.core.schedule.clone()
    }

    #[getter]
    fn truncated_at(&self) -> Option<usize> {
        self.core.truncated_at
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.core.warnings.clone()
    }

    fn __len__(&self) -> usize {
        self.core.states.len()
    }
}

/// Coordination verdict over a trajectory's trailing window.
#[pyclass]
struct CoordinationVerdict {
    #[pyo3(get)]
    achieved: bool,
    #[pyo3(get)]
    cross_residual: f64,
    #[pyo3(get)]
    rooted_residual: f64,
    #[pyo3(get)]
    follower_residual: f64,
    #[pyo3(get)]
    settle_residual: f64,
    /// Final state per agent, caller numbering.
    #[pyo3(get)]
    limits: Vec<f64>,
    #[pyo3(get)]
    coordination_value: Option<f64>,
    #[pyo3(get)]
    rate: Option<f64>,
}

/// Decay certificate for a switching schedule.
#[pyclass]
struct Certificate {
    #[pyo3(get)]
    certified: bool,
    #[pyo3(get)]
    decay: f64,
    #[pyo3(get)]
    envelope_coefficient: f64,
    /// (name, lhs, rhs, holds) per condition checked.
    #[pyo3(get)]
    conditions: Vec<(String, f64, f64, bool)>,
    #[pyo3(get)]
    first_violation: Option<String>,
}

fn decompose(graph: &Digraph, leaders: Option<&[usize]>) -> PyResult<LaplacianBlocks> {
    match leaders {
        Some(ls) => graph.inner.decompose_with_leaders(ls),
        None => graph.inner.decompose(),
    }
    .map_err(err)
}

/// The reduced matrix driving the pairwise-error recursion for one
/// topology; its spectrum inside the unit circle is what coordination
/// rests on.
#[pyfunction]
#[pyo3(signature = (graph, config, leaders = None))]
fn error_matrix(
    graph: &Digraph,
    config: &SystemConfig,
    leaders: Option<Vec<usize>>,
) -> PyResult<Vec<Vec<f64>>> {
    let blocks = decompose(graph, leaders.as_deref())?;
    let sys = build_error_system(&blocks, &config.inner).map_err(err)?;
    Ok(from_dmatrix(&sys.a))
}

/// The one-step state map (agents in rooted-first order).
#[pyfunction]
#[pyo3(signature = (graph, config, leaders = None))]
fn transition_matrix(
    graph: &Digraph,
    config: &SystemConfig,
    leaders: Option<Vec<usize>>,
) -> PyResult<Vec<Vec<f64>>> {
    let blocks = decompose(graph, leaders.as_deref())?;
    let t = coord_core::error_transform::transition_matrix(&blocks, &config.inner).map_err(err)?;
    Ok(from_dmatrix(&t))
}

/// Whether the configured gains place the scaled rooted block's spectrum
/// where a small enough step size can contract it.
#[pyfunction]
#[pyo3(signature = (graph, config, leaders = None))]
fn verify_gains(
    graph: &Digraph,
    config: &SystemConfig,
    leaders: Option<Vec<usize>>,
) -> PyResult<GainVerdict> {
    let blocks = decompose(graph, leaders.as_deref())?;
    let v = gains::verify_gains(&blocks.l1, &config.inner.delta, &config.inner.rho).map_err(err)?;
    Ok(GainVerdict {
        feasible: v.feasible(),
        mismatched: v.mismatched.clone(),
        eigenvalues: v.eigenvalues.clone(),
    })
}

/// Largest step size below which every non-identity mode of the one-step
/// map stays inside the unit circle.
#[pyfunction]
#[pyo3(signature = (graph, config, leaders = None))]
fn epsilon_bound(
    graph: &Digraph,
    config: &SystemConfig,
    leaders: Option<Vec<usize>>,
) -> PyResult<f64> {
    let blocks = decompose(graph, leaders.as_deref())?;
    let coupling =
        coord_core::error_transform::coupling_matrix(&blocks, &config.inner).map_err(err)?;
    gains::epsilon_bound(&coupling).map_err(err)
}

/// Split a matrix into its persistent and decaying parts and return
/// (persistent_dimension, contraction_rate, transient_constant).
#[pyfunction]
fn contraction_constants(matrix: Vec<Vec<f64>>) -> PyResult<(usize, f64, f64)> {
    let m = to_dmatrix(&matrix)?;
    let split = switching::invariant_split(&m).map_err(err)?;
    Ok((split.fixed_dim(), split.lambda, split.rho))
}

/// Run the switched dynamics: `sigma[k]` names the topology active at
/// step k, `x0` is the initial state in caller numbering.
#[pyfunction]
#[pyo3(signature = (graphs, config, sigma, x0, leaders = None))]
fn simulate(
    graphs: Vec<Digraph>,
    config: &SystemConfig,
    sigma: Vec<usize>,
    x0: Vec<f64>,
    leaders: Option<Vec<usize>>,
) -> PyResult<Trajectory> {
    if graphs.is_empty() {
        return Err(PyValueError::new_err("at least one topology is required"));
    }
    let mut blocks = Vec::with_capacity(graphs.len());
    for g in &graphs {
        blocks.push(decompose(g, leaders.as_deref())?);
    }
    if blocks.iter().any(|b| b.permutation != blocks[0].permutation) {
        return Err(PyValueError::new_err(
            "topologies detect different rooted sets; pass explicit leaders",
        ));
    }
    let systems = blocks
        .iter()
        .map(|b| build_error_system(b, &config.inner))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let n = blocks[0].n;
    if x0.len() != n {
        return Err(PyValueError::new_err(format!(
            "initial state has {} entries for {} agents",
            x0.len(),
            n
        )));
    }
    let perm = blocks[0].permutation.clone();
    let xi0 = DVector::from_fn(n, |p, _| x0[perm[p]]);
    let core = simulator::simulate(&systems, &sigma, &xi0).map_err(err)?;
    Ok(Trajectory {
        core,
        permutation: perm,
    })
}

/// Judge a finished run against the coordination definition.
#[pyfunction]
#[pyo3(signature = (trajectory, config, tolerance = 1e-6, window = 50))]
fn check_coordination(
    trajectory: &Trajectory,
    config: &SystemConfig,
    tolerance: f64,
    window: usize,
) -> PyResult<CoordinationVerdict> {
    let window = window.min(trajectory.core.len()).max(2);
    let v = simulator::check_coordination(&trajectory.core, &config.inner, tolerance, window)
        .map_err(err)?;
    let mut limits = vec![0.0; trajectory.permutation.len()];
    for (p, &agent) in trajectory.permutation.iter().enumerate() {
        limits[agent] = v.limits[p];
    }
    Ok(CoordinationVerdict {
        achieved: v.achieved,
        cross_residual: v.cross_residual,
        rooted_residual: v.rooted_residual,
        follower_residual: v.follower_residual,
        settle_residual: v.settle_residual,
        limits,
        coordination_value: v.coordination_value,
        rate: v.rate,
    })
}

/// Decay certificate for a family of error matrices under a switching
/// schedule with dwell-time budgets. `class1` lists the topologies whose
/// persistent subspace survives switching, `class2` the fully contracting
/// ones; `omega` defaults to the tightest amortized transient growth the
/// dwell times admit.
#[pyfunction]
#[pyo3(signature = (matrices, sigma, gamma, decay, class1, class2, min_dwell, chatter = None, omega = None))]
#[allow(clippy::too_many_arguments)]
fn certify(
    matrices: Vec<Vec<Vec<f64>>>,
    sigma: Vec<usize>,
    gamma: Vec<f64>,
    decay: Vec<f64>,
    class1: Vec<usize>,
    class2: Vec<usize>,
    min_dwell: Vec<usize>,
    chatter: Option<Vec<f64>>,
    omega: Option<Vec<f64>>,
) -> PyResult<Certificate> {
    let mats = matrices
        .iter()
        .map(|m| to_dmatrix(m))
        .collect::<PyResult<Vec<_>>>()?;
    let splits = mats
        .iter()
        .map(switching::invariant_split)
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let dwell = switching::DwellTimeSpec {
        min_dwell: min_dwell.clone(),
        chatter: chatter.unwrap_or_else(|| vec![0.0; mats.len()]),
    };
    let params = switching::CertificateParams {
        omega: omega.unwrap_or_else(|| {
            splits
                .iter()
                .zip(&min_dwell)
                .map(|(s, &nd)| s.rho.powf(1.0 / nd.max(1) as f64))
                .collect()
        }),
        gamma,
        decay,
        class1,
        class2,
    };
    let decomposition =
        switching::check_common_decomposition(&mats, &splits, &params.class1, &params.class2)
            .map_err(err)?;
    let audits = switching::audit_schedule(&sigma, &dwell).map_err(err)?;
    let report =
        switching::certify_switched_contraction(&splits, &params, &dwell, &audits).map_err(err)?;
    Ok(Certificate {
        certified: decomposition.holds && report.certified,
        decay: report.decay,
        envelope_coefficient: report.envelope_coefficient,
        conditions: report
            .conditions
            .iter()
            .map(|c| (c.name.clone(), c.lhs, c.rhs, c.holds))
            .collect(),
        first_violation: report.first_violation.clone(),
    })
}

/// Deterministic uniform draw on [-1, 1], the same stream the CLI uses
/// for seeded initial states.
#[pyfunction]
fn random_state(seed: u64, n: usize) -> Vec<f64> {
    core_random_state(seed, n).iter().copied().collect()
}

#[pymodule]
fn coord_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Digraph>()?;
    m.add_class::<SystemConfig>()?;
    m.add_class::<GainVerdict>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<CoordinationVerdict>()?;
    m.add_class::<Certificate>()?;
    m.add_function(wrap_pyfunction!(error_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(transition_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(verify_gains, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_bound, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_constants, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(check_coordination, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(random_state, m)?)?;
    Ok(())
}
