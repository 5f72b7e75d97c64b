//! Scenario files: a TOML description of one coordination problem (agents,
//! gains, topologies, switching schedule, certificate parameters), plus the
//! CSV and text reports the command-line tool writes.
//!
//! Node and topology indices in scenario files are 1-based, matching how
//! such examples are usually written down; everything in the library API is
//! 0-based. The conversion happens exactly once, here.

use crate::error::{CoordError, Result};
use crate::gains::{RegionSample, SystemConfig};
use crate::graph::Digraph;
use crate::signed::SignedGraph;
use crate::simulator::Trajectory;
use crate::switching::{CertificateReport, DwellTimeSpec, TopologyAudit};
use crate::tol;
use nalgebra::DVector;
use rand_core::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// An edge in a scenario file: [from, to] with unit weight, or
/// [from, to, weight]. Node numbers are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EdgeSpec {
    Pair(usize, usize),
    Weighted(usize, usize, f64),
}

impl EdgeSpec {
    fn parts(&self) -> (usize, usize, f64) {
        match *self {
            EdgeSpec::Pair(from, to) => (from, to, 1.0),
            EdgeSpec::Weighted(from, to, w) => (from, to, w),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemSection {
    pub agents: usize,
    pub delta: Vec<f64>,
    pub rho: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TopologySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub edges: Vec<EdgeSpec>,
}

/// Cyclic switching pattern: [[topology, run_length], ...], 1-based
/// topology numbers, repeated until `horizon` instants are scheduled.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleSection {
    pub pattern: Vec<(usize, usize)>,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DwellSection {
    pub min_dwell: Vec<usize>,
    pub chatter: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertificateSection {
    pub gamma: Vec<f64>,
    /// Defaults to the amortized transient growth rho^(1/min_dwell).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    pub decay: Vec<f64>,
    /// 1-based topology numbers whose fixed subspaces persist.
    pub class1: Vec<usize>,
    /// 1-based topology numbers that contract the joint fixed space.
    pub class2: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

/// Signed-graph scenarios: either replay signed consensus through the
/// gauge equivalence, or steer agents to targets via a virtual leader.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SignedSection {
    pub agents: usize,
    pub edges: Vec<EdgeSpec>,
    /// "bipartite" or "embed".
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(default, rename = "topology", skip_serializing_if = "Vec::is_empty")]
    pub topologies: Vec<TopologySection>,
    /// Explicit rooted agents (1-based); topology order is preserved.
    /// Without this the rooted set is discovered structurally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaders: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<DwellSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed: Option<SignedSection>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let scenario: Scenario = toml::from_str(text)
            .map_err(|e| CoordError::Scenario(format!("scenario parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml(&text).map_err(|e| match e {
            CoordError::Scenario(msg) => {
                CoordError::Scenario(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CoordError::Scenario(format!("scenario serialize error: {e}")))
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(CoordError::Scenario("scenario needs a name".into()));
        }
        if self.system.is_none() && self.signed.is_none() {
            return Err(CoordError::Scenario(
                "scenario needs a [system] or a [signed] section".into(),
            ));
        }
        if let Some(sys) = &self.system {
            if self.topologies.is_empty() {
                return Err(CoordError::Scenario(
                    "a [system] scenario needs at least one [[topology]]".into(),
                ));
            }
            // constructing the config runs all gain/scaling validation
            self.config_from(sys)?;
            for (t, topo) in self.topologies.iter().enumerate() {
                edges_to_digraph(sys.agents, &topo.edges).map_err(|e| {
                    CoordError::Scenario(format!("topology {}: {e}", t + 1))
                })?;
            }
            if let Some(leaders) = &self.leaders {
                check_one_based(leaders, sys.agents, "leader")?;
                if leaders.len() != sys.delta.len() {
                    return Err(CoordError::Scenario(format!(
                        "{} leaders listed but {} scalings given",
                        leaders.len(),
                        sys.delta.len()
                    )));
                }
            }
        }
        let k = self.topologies.len();
        if let Some(schedule) = &self.schedule {
            if schedule.horizon == 0 {
                return Err(CoordError::Scenario("schedule horizon is zero".into()));
            }
            let topos: Vec<usize> = schedule.pattern.iter().map(|&(t, _)| t).collect();
            check_one_based(&topos, k, "schedule topology")?;
        }
        if let Some(dwell) = &self.dwell {
            if dwell.min_dwell.len() != k || dwell.chatter.len() != k {
                return Err(CoordError::Scenario(format!(
                    "[dwell] lists must cover all {k} topologies"
                )));
            }
        }
        if let Some(cert) = &self.certificate {
            if cert.gamma.len() != k || cert.decay.len() != k {
                return Err(CoordError::Scenario(format!(
                    "[certificate] lists must cover all {k} topologies"
                )));
            }
            if let Some(omega) = &cert.omega {
                if omega.len() != k {
                    return Err(CoordError::Scenario(format!(
                        "[certificate] omega must cover all {k} topologies"
                    )));
                }
            }
            check_one_based(&cert.class1, k, "certificate class-1 topology")?;
            check_one_based(&cert.class2, k, "certificate class-2 topology")?;
        }
        if let Some(signed) = &self.signed {
            match signed.model.as_str() {
                "bipartite" => {}
                "embed" => {
                    let targets = signed.targets.as_ref().ok_or_else(|| {
                        CoordError::Scenario("embed model needs targets".into())
                    })?;
                    if targets.len() != signed.agents {
                        return Err(CoordError::Scenario(format!(
                            "{} targets for {} agents",
                            targets.len(),
                            signed.agents
                        )));
                    }
                }
                other => {
                    return Err(CoordError::Scenario(format!(
                        "unknown signed model '{other}' (expected 'bipartite' or 'embed')"
                    )));
                }
            }
            self.signed_graph()?;
        }
        if let Some(initial) = &self.initial {
            if initial.seed.is_some() && initial.values.is_some() {
                return Err(CoordError::Scenario(
                    "[initial] takes a seed or explicit values, not both".into(),
                ));
            }
        }
        Ok(())
    }

    fn config_from(&self, sys: &SystemSection) -> Result<SystemConfig> {
        SystemConfig::new(sys.delta.clone(), sys.rho.clone(), sys.epsilon, sys.agents)
            .map_err(|e| CoordError::Scenario(format!("[system]: {e}")))
    }

    pub fn config(&self) -> Result<SystemConfig> {
        let sys = self.system.as_ref().ok_or_else(|| {
            CoordError::Scenario("scenario has no [system] section".into())
        })?;
        self.config_from(sys)
    }

    pub fn graphs(&self) -> Result<Vec<Digraph>> {
        let sys = self.system.as_ref().ok_or_else(|| {
            CoordError::Scenario("scenario has no [system] section".into())
        })?;
        self.topologies
            .iter()
            .map(|t| edges_to_digraph(sys.agents, &t.edges))
            .collect()
    }

    /// Explicit rooted set, 0-based, if the scenario pins one down.
    pub fn leader_indices(&self) -> Option<Vec<usize>> {
        self.leaders
            .as_ref()
            .map(|ls| ls.iter().map(|&l| l - 1).collect())
    }

    pub fn signed_graph(&self) -> Result<SignedGraph> {
        let signed = self.signed.as_ref().ok_or_else(|| {
            CoordError::Scenario("scenario has no [signed] section".into())
        })?;
        let mut g = SignedGraph::new(signed.agents)
            .map_err(|e| CoordError::Scenario(format!("[signed]: {e}")))?;
        for spec in &signed.edges {
            let (from, to, w) = spec.parts();
            if from == 0 || to == 0 || from > signed.agents || to > signed.agents {
                return Err(CoordError::Scenario(format!(
                    "signed edge ({from}, {to}) out of range; node numbers are 1-based"
                )));
            }
            g.add_edge(from - 1, to - 1, w)
                .map_err(|e| CoordError::Scenario(format!("[signed]: {e}")))?;
        }
        Ok(g)
    }

    /// 0-based switching signal over the scenario horizon. A single
    /// topology without a [schedule] section runs constantly.
    pub fn switching_signal(&self) -> Result<Vec<usize>> {
        match &self.schedule {
            Some(schedule) => {
                let pattern: Vec<(usize, usize)> = schedule
                    .pattern
                    .iter()
                    .map(|&(t, len)| (t - 1, len))
                    .collect();
                crate::switching::schedule_from_pattern(&pattern, schedule.horizon)
            }
            None if self.topologies.len() <= 1 => Ok(vec![0; self.horizon()]),
            None => Err(CoordError::Scenario(
                "several topologies but no [schedule] section".into(),
            )),
        }
    }

    pub fn dwell_spec(&self) -> Result<Option<DwellTimeSpec>> {
        match &self.dwell {
            Some(d) => Ok(Some(DwellTimeSpec::new(
                d.min_dwell.clone(),
                d.chatter.clone(),
            )?)),
            None => Ok(None),
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.analysis
            .as_ref()
            .and_then(|a| a.tolerance)
            .unwrap_or(tol::COORDINATION_TOL)
    }

    pub fn window(&self) -> usize {
        self.analysis
            .as_ref()
            .and_then(|a| a.window)
            .unwrap_or(tol::COORDINATION_WINDOW)
    }

    pub fn horizon(&self) -> usize {
        if let Some(schedule) = &self.schedule {
            return schedule.horizon;
        }
        self.analysis
            .as_ref()
            .and_then(|a| a.horizon)
            .unwrap_or(1000)
    }

    /// Initial state: explicit values, or a seeded uniform draw on [-1, 1].
    pub fn initial_state(&self, n: usize, seed_override: Option<u64>) -> Result<DVector<f64>> {
        if let Some(initial) = &self.initial {
            if let Some(values) = &initial.values {
                if seed_override.is_none() {
                    if values.len() != n {
                        return Err(CoordError::Scenario(format!(
                            "{} initial values for {n} agents",
                            values.len()
                        )));
                    }
                    return Ok(DVector::from_row_slice(values));
                }
            }
        }
        let seed = seed_override
            .or_else(|| self.initial.as_ref().and_then(|i| i.seed))
            .unwrap_or(tol::DEFAULT_SEED);
        Ok(random_state(seed, n))
    }
}

fn check_one_based(indices: &[usize], count: usize, what: &str) -> Result<()> {
    for &i in indices {
        if i == 0 || i > count {
            return Err(CoordError::Scenario(format!(
                "{what} {i} out of range 1..={count} (numbers are 1-based)"
            )));
        }
    }
    Ok(())
}

/// Convert 1-based scenario edges into a digraph.
pub fn edges_to_digraph(n: usize, edges: &[EdgeSpec]) -> Result<Digraph> {
    let mut g = Digraph::new(n)?;
    for spec in edges {
        let (from, to, w) = spec.parts();
        if from == 0 || to == 0 || from > n || to > n {
            return Err(CoordError::Scenario(format!(
                "edge ({from}, {to}) out of range; node numbers are 1-based"
            )));
        }
        g.add_edge(from - 1, to - 1, w)?;
    }
    Ok(g)
}

/// Uniform draw on [-1, 1]^n, reproducible across platforms.
pub fn random_state(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(
        n,
        (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0),
    )
}

/// k, active topology (1-based, blank on the final row), states, then
/// error coordinates. `agents[p]` is the 0-based original number of the
/// agent stored at position p, so columns are labeled by the numbering the
/// scenario file used even when the rooted agents were permuted to the
/// front.
pub fn trajectory_csv(traj: &Trajectory, agents: &[usize]) -> String {
    let n = traj.states[0].len();
    let e = traj.errors[0].len();
    let mut out = String::from("k,topology");
    for p in 0..n {
        let _ = write!(out, ",xi_{}", agents[p] + 1);
    }
    for i in 1..=e {
        let _ = write!(out, ",zeta_{i}");
    }
    out.push('\n');
    for (k, (x, z)) in traj.states.iter().zip(&traj.errors).enumerate() {
        match traj.schedule.get(k) {
            Some(&s) => {
                let _ = write!(out, "{k},{}", s + 1);
            }
            None => {
                let _ = write!(out, "{k},");
            }
        }
        for v in x.iter() {
            let _ = write!(out, ",{v}");
        }
        for v in z.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// k, topology, raw states, then the scaled series delta_i xi_i (rooted)
/// and xi_j (followers) whose agreement is what coordination means.
pub fn scaled_csv(traj: &Trajectory, cfg: &SystemConfig, agents: &[usize]) -> String {
    let n = cfg.n;
    let m = cfg.m();
    let mut out = String::from("k,topology");
    for p in 0..n {
        let _ = write!(out, ",xi_{}", agents[p] + 1);
    }
    for p in 0..n {
        let _ = write!(out, ",scaled_{}", agents[p] + 1);
    }
    out.push('\n');
    for (k, x) in traj.states.iter().enumerate() {
        match traj.schedule.get(k) {
            Some(&s) => {
                let _ = write!(out, "{k},{}", s + 1);
            }
            None => {
                let _ = write!(out, "{k},");
            }
        }
        for v in x.iter() {
            let _ = write!(out, ",{v}");
        }
        for i in 0..n {
            let v = if i < m { cfg.delta[i] * x[i] } else { x[i] };
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Free gain coordinates and a 0/1 feasibility flag per grid point.
pub fn region_csv(sample: &RegionSample) -> String {
    let mut out = String::new();
    for &i in &sample.free {
        let _ = write!(out, "rho_{},", i + 1);
    }
    out.push_str("feasible\n");
    for (point, feasible) in &sample.points {
        for v in point {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", u8::from(*feasible));
    }
    out
}

/// Activation counts against dwell-time budgets, one row per topology.
pub fn audit_csv(audits: &[TopologyAudit]) -> String {
    let mut out = String::from("topology,activations,active_instants,bound,pass\n");
    for a in audits {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            a.topology + 1,
            a.activations,
            a.active_instants,
            a.bound,
            u8::from(a.pass)
        );
    }
    out
}

/// Human-readable certificate summary.
pub fn certificate_text(report: &CertificateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "certified: {}",
        if report.certified { "yes" } else { "no" }
    );
    let _ = writeln!(out, "uniform decay rate: {}", report.decay);
    let _ = writeln!(
        out,
        "envelope coefficient: {}",
        report.envelope_coefficient
    );
    out.push('\n');
    for c in &report.conditions {
        let _ = writeln!(
            out,
            "[{}] {}: {} vs {}",
            if c.holds { "ok" } else { "VIOLATED" },
            c.name,
            c.lhs,
            c.rhs
        );
    }
    out
}
