//! Scenario driver: structural analysis, switching certificates, and
//! trajectory simulation for scaled-coordination networks, from TOML
//! scenario files to reports and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use coord_core::error_transform::{build_error_system, coupling_matrix, ErrorSystem};
use coord_core::gains::{epsilon_bound, gain_matrix, verify_gains, SystemConfig};
use coord_core::graph::{jointly_connected, Digraph, LaplacianBlocks};
use coord_core::scenario::{
    audit_csv, certificate_text, scaled_csv, trajectory_csv, Scenario,
};
use coord_core::signed::{bipartite_system, embed_targets, gauge, signed_step};
use coord_core::simulator::{
    check_coordination, containment_limit, fixed_topology_report, simulate,
};
use coord_core::switching::{
    audit_schedule, certify_follower_subsystem, certify_per_topology,
    certify_switched_contraction, check_common_decomposition, invariant_split,
    leaderless_transition, schedule_from_pattern, CertificateParams, ContractionSplit,
};
use coord_core::{spectral, tol, CoordError, Result};

#[derive(Parser)]
#[command(
    name = "coordctl",
    version,
    about = "Analyze, certify, and simulate scaled-coordination networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural and spectral analysis: rooted agents, gain feasibility,
    /// step-size ceilings, error-system spectra
    Analyze(RunArgs),
    /// Decay certificate for a switching schedule under dwell-time budgets
    Certify(RunArgs),
    /// Run the dynamics and judge coordination against the tolerance
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML)
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    scenario: Option<PathBuf>,

    /// Directory for CSV and report files (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Replace the scenario's initial state with a fresh draw from this seed
    #[arg(long)]
    seed: Option<u64>,

    /// Coordination tolerance override
    #[arg(long)]
    tol: Option<f64>,

    /// Simulation horizon override
    #[arg(long)]
    horizon: Option<usize>,

    /// File listing one scenario path per line (# comments allowed);
    /// all entries run concurrently, each into its own output subdirectory
    #[arg(long)]
    batch: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let (args, mode) = match &cli.command {
        Command::Analyze(a) => (a, Mode::Analyze),
        Command::Certify(a) => (a, Mode::Certify),
        Command::Simulate(a) => (a, Mode::Simulate),
    };
    let code = match &args.batch {
        Some(list) => run_batch(mode, args, list),
        None => {
            let path = args.scenario.as_ref().expect("clap enforces the argument");
            report_one(mode, args, path, args.out.as_deref())
        }
    };
    std::process::exit(code);
}

#[derive(Clone, Copy)]
enum Mode {
    Analyze,
    Certify,
    Simulate,
}

/// Run one scenario, print its report or error, and return the exit code:
/// 0 for a completed run (whatever the verdict), 2 for input problems,
/// 3 for numerical failures.
fn report_one(mode: Mode, args: &RunArgs, path: &Path, out: Option<&Path>) -> i32 {
    match run_one(mode, args, path, out) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            e.exit_code()
        }
    }
}

fn run_batch(mode: Mode, args: &RunArgs, list: &Path) -> i32 {
    let text = match fs::read_to_string(list) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", list.display());
            return 2;
        }
    };
    let base = list.parent().unwrap_or(Path::new("."));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect();
    if entries.is_empty() {
        eprintln!("{}: no scenarios listed", list.display());
        return 2;
    }

    let mut codes = vec![0i32; entries.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    // each entry gets an isolated subdirectory named after
                    // its file stem so concurrent writes cannot collide
                    let sub = args.out.as_ref().map(|dir| {
                        dir.join(path.file_stem().map_or_else(
                            || "scenario".into(),
                            |s| s.to_string_lossy().into_owned(),
                        ))
                    });
                    let outcome = run_one(mode, args, path, sub.as_deref());
                    (path, outcome)
                })
            })
            .collect();
        for (slot, handle) in handles.into_iter().enumerate() {
            let (path, outcome) = handle.join().expect("scenario thread panicked");
            println!("=== {} ===", path.display());
            match outcome {
                Ok(report) => println!("{report}"),
                Err(e) => {
                    codes[slot] = e.exit_code();
                    eprintln!("{}: {e}", path.display());
                    println!("failed with exit code {}", codes[slot]);
                }
            }
        }
    });
    codes.into_iter().max().unwrap_or(0)
}

fn run_one(mode: Mode, args: &RunArgs, path: &Path, out: Option<&Path>) -> Result<String> {
    let scenario = Scenario::load(path)?;
    match mode {
        Mode::Analyze => cmd_analyze(&scenario),
        Mode::Certify => cmd_certify(&scenario, out),
        Mode::Simulate => cmd_simulate(&scenario, args, out),
    }
}

/// Everything a [system] scenario needs before dynamics can run. The block
/// decomposition must agree across topologies: the error coordinates are
/// only comparable when every topology puts the same agents first.
struct Prepared {
    cfg: SystemConfig,
    blocks: Vec<LaplacianBlocks>,
    systems: Vec<ErrorSystem>,
}

fn prepare(scenario: &Scenario) -> Result<Prepared> {
    let cfg = scenario.config()?;
    let graphs = scenario.graphs()?;
    let leaders = scenario.leader_indices();
    let mut blocks = Vec::with_capacity(graphs.len());
    for (t, g) in graphs.iter().enumerate() {
        let b = match &leaders {
            Some(ls) => g.decompose_with_leaders(ls),
            None => g.decompose(),
        }
        .map_err(|e| CoordError::Scenario(format!("topology {}: {e}", t + 1)))?;
        blocks.push(b);
    }
    for (t, b) in blocks.iter().enumerate().skip(1) {
        if b.permutation != blocks[0].permutation {
            return Err(CoordError::Scenario(format!(
                "topologies 1 and {} detect different rooted sets; \
                 pin a common ordering with `leaders`",
                t + 1
            )));
        }
    }
    if blocks[0].m != cfg.m() {
        return Err(CoordError::Scenario(format!(
            "{} scalings configured but {} rooted agents found",
            cfg.m(),
            blocks[0].m
        )));
    }
    let systems = blocks
        .iter()
        .map(|b| build_error_system(b, &cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        cfg,
        blocks,
        systems,
    })
}

fn cmd_analyze(scenario: &Scenario) -> Result<String> {
    let mut report = String::new();
    writeln!(report, "scenario: {}", scenario.name).ok();
    if !scenario.description.is_empty() {
        writeln!(report, "{}", scenario.description).ok();
    }
    if scenario.system.is_some() {
        analyze_system(scenario, &mut report)?;
    }
    if scenario.signed.is_some() {
        analyze_signed(scenario, &mut report)?;
    }
    Ok(report)
}

fn analyze_system(scenario: &Scenario, report: &mut String) -> Result<()> {
    let cfg = scenario.config()?;
    let graphs = scenario.graphs()?;
    let leaders = scenario.leader_indices();

    writeln!(
        report,
        "\nagents: {}  topologies: {}  step size: {}",
        cfg.n,
        graphs.len(),
        cfg.epsilon
    )
    .ok();
    writeln!(report, "scalings: {}", join_f64(&cfg.delta)).ok();
    writeln!(report, "gains: {}", join_f64(&cfg.rho)).ok();
    let mismatched = cfg.mismatched();
    if mismatched.is_empty() {
        writeln!(report, "gain/scaling products: all sign-matched").ok();
    } else {
        // which original agents carry negative products depends on the
        // rooted ordering, resolved per topology below
        writeln!(
            report,
            "gain/scaling products: {} sign-mismatched",
            mismatched.len()
        )
        .ok();
    }
    if let Some(ls) = &leaders {
        writeln!(report, "designated rooted agents: {}", join_1based(ls)).ok();
    }

    for (t, g) in graphs.iter().enumerate() {
        write!(report, "\ntopology {}", t + 1).ok();
        if let Some(name) = scenario.topologies.get(t).and_then(|s| s.name.as_deref()) {
            write!(report, " ({name})").ok();
        }
        writeln!(report).ok();

        let roots = g.find_roots();
        if roots.is_empty() {
            writeln!(report, "  rooted agents: none (no directed spanning tree)").ok();
        } else {
            writeln!(report, "  rooted agents: {}", join_1based(&roots)).ok();
        }
        writeln!(
            report,
            "  directed spanning tree: {}",
            yes_no(g.has_spanning_tree())
        )
        .ok();
        if let Some(ls) = &leaders {
            writeln!(
                report,
                "  spanning forest from designated leaders: {}",
                yes_no(g.has_spanning_forest(ls)?)
            )
            .ok();
        }

        let blocks = match &leaders {
            Some(ls) => g.decompose_with_leaders(ls),
            None => g.decompose(),
        };
        let blocks = match blocks {
            Ok(b) => b,
            Err(CoordError::Hypothesis(msg)) => {
                writeln!(report, "  block decomposition unavailable: {msg}").ok();
                continue;
            }
            Err(e) => return Err(e),
        };
        if blocks.m != cfg.m() {
            writeln!(
                report,
                "  gain lists cover {} rooted agents but this topology has {}; \
                 skipping gain analysis",
                cfg.m(),
                blocks.m
            )
            .ok();
            continue;
        }
        analyze_rooted_block(&blocks, &cfg, report)?;
    }

    if graphs.len() > 1 {
        let joint = jointly_connected(&graphs)?;
        writeln!(
            report,
            "\njoint connectivity across topologies: {}",
            yes_no(joint.holds)
        )
        .ok();
        if !joint.missing.is_empty() {
            writeln!(
                report,
                "  uncovered eigenvalue positions: {:?}",
                joint.missing
            )
            .ok();
        }
        let union = Digraph::union(&graphs)?;
        match &leaders {
            Some(ls) => {
                writeln!(
                    report,
                    "  union spanning forest from leaders: {}",
                    yes_no(union.has_spanning_forest(ls)?)
                )
                .ok();
            }
            None => {
                writeln!(
                    report,
                    "  union spanning tree: {}",
                    yes_no(union.has_spanning_tree())
                )
                .ok();
            }
        }
    }
    Ok(())
}

fn analyze_rooted_block(
    blocks: &LaplacianBlocks,
    cfg: &SystemConfig,
    report: &mut String,
) -> Result<()> {
    match verify_gains(&blocks.l1, &cfg.delta, &cfg.rho) {
        Ok(verdict) => report_gain_verdict(blocks, cfg, &verdict, report),
        Err(CoordError::Hypothesis(msg)) => {
            writeln!(report, "  gain analysis unavailable: {msg}").ok();
        }
        Err(e) => return Err(e),
    }

    let coupling = coupling_matrix(blocks, cfg)?;
    match epsilon_bound(&coupling) {
        Ok(bound) => {
            writeln!(
                report,
                "  step-size ceiling: {bound:.6} (configured {}: {})",
                cfg.epsilon,
                if cfg.epsilon < bound {
                    "within bound"
                } else {
                    "EXCEEDS bound"
                }
            )
            .ok();
        }
        Err(CoordError::Hypothesis(msg)) => {
            writeln!(report, "  step-size ceiling unavailable: {msg}").ok();
        }
        Err(e) => return Err(e),
    }

    match build_error_system(blocks, cfg) {
        Ok(system) => {
            let eigs = spectral::eigenvalues(&system.a)?;
            let dominant = eigs.iter().fold(0.0f64, |acc, e| acc.max(e.norm()));
            writeln!(
                report,
                "  error-system eigenvalues: {}",
                join_complex(&eigs)
            )
            .ok();
            if dominant < 1.0 {
                writeln!(
                    report,
                    "  dominant modulus {dominant:.6}: errors decay at rate {:.6}",
                    -dominant.ln()
                )
                .ok();
            } else {
                writeln!(
                    report,
                    "  dominant modulus {dominant:.6}: errors do not decay under \
                     this topology alone"
                )
                .ok();
            }
        }
        Err(CoordError::Hypothesis(msg)) => {
            writeln!(report, "  error system unavailable: {msg}").ok();
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn report_gain_verdict(
    blocks: &LaplacianBlocks,
    cfg: &SystemConfig,
    verdict: &coord_core::gains::GainVerdict,
    report: &mut String,
) {
    writeln!(
        report,
        "  gained rooted block eigenvalues: {}",
        join_complex(&verdict.eigenvalues)
    )
    .ok();

    let g = gain_matrix(&blocks.l1, &cfg.delta, &cfg.rho);
    let tau = tol::zero_tol(spectral::norm_scale(&g));
    let zeros = spectral::zero_multiplicity(&verdict.eigenvalues, tau);
    if zeros != 1 {
        writeln!(
            report,
            "  zero eigenvalue multiplicity: {zeros} (a single zero is required \
             for the rooted agents to agree on one scaled value)"
        )
        .ok();
    }
    let offenders: Vec<&Complex64> = verdict
        .eigenvalues
        .iter()
        .filter(|e| e.norm() > tau && e.re <= 0.0)
        .collect();
    if !offenders.is_empty() {
        let list: Vec<String> = offenders.iter().map(|e| fmt_complex(e)).collect();
        writeln!(
            report,
            "  eigenvalues outside the open right half plane: {}",
            list.join(", ")
        )
        .ok();
    }
    if !verdict.minor_sums.is_empty() {
        writeln!(
            report,
            "  weighted minor sums: {} (all positive: {})",
            join_f64(&verdict.minor_sums),
            yes_no(verdict.minor_sums.iter().all(|&h| h > 0.0))
        )
        .ok();
    }
    if let Some(routh) = &verdict.routh {
        writeln!(
            report,
            "  determinant route: {}",
            if routh.stable { "stable" } else { "not stable" }
        )
        .ok();
        if !verdict.paths_agree {
            writeln!(
                report,
                "  WARNING: spectral and determinant routes disagree \
                 (the point sits on the stability boundary)"
            )
            .ok();
        }
    }
    writeln!(
        report,
        "  gain verdict: {}",
        if verdict.feasible() {
            "feasible"
        } else {
            "infeasible"
        }
    )
    .ok();
}

fn analyze_signed(scenario: &Scenario, report: &mut String) -> Result<()> {
    let sg = scenario.signed_graph()?;
    let section = scenario.signed.as_ref().expect("checked by caller");
    writeln!(report, "\nsigned network: {} agents", sg.n()).ok();

    let digons = sg.digon_violations();
    if digons.is_empty() {
        writeln!(report, "  opposite-direction sign conflicts: none").ok();
    } else {
        let list: Vec<String> = digons
            .iter()
            .map(|&(i, j)| format!("({}, {})", i + 1, j + 1))
            .collect();
        writeln!(
            report,
            "  opposite-direction sign conflicts: {}",
            list.join(", ")
        )
        .ok();
    }

    let gr = gauge(&sg);
    writeln!(report, "  structurally balanced: {}", yes_no(gr.balanced)).ok();
    if gr.balanced {
        let plus: Vec<usize> = (0..sg.n()).filter(|&i| gr.gauge[i] > 0.0).collect();
        let minus: Vec<usize> = (0..sg.n()).filter(|&i| gr.gauge[i] < 0.0).collect();
        writeln!(report, "  camp +1: {}", join_1based(&plus)).ok();
        writeln!(report, "  camp -1: {}", join_1based(&minus)).ok();
    } else {
        let list: Vec<String> = gr
            .violations
            .iter()
            .map(|&(i, j)| format!("({}, {})", i + 1, j + 1))
            .collect();
        writeln!(report, "  frustrated edges: {}", list.join(", ")).ok();
    }

    match section.model.as_str() {
        "bipartite" => {
            let mirror = sg.unsigned_mirror()?;
            writeln!(
                report,
                "  mirror strongly connected: {}",
                yes_no(mirror.is_strongly_connected())
            )
            .ok();
            if gr.balanced {
                let coupling = gain_matrix(&mirror.laplacian(), &gr.gauge, &gr.gauge);
                match epsilon_bound(&coupling) {
                    Ok(bound) => {
                        writeln!(report, "  step-size ceiling: {bound:.6}").ok();
                    }
                    Err(CoordError::Hypothesis(msg)) => {
                        writeln!(report, "  step-size ceiling unavailable: {msg}").ok();
                    }
                    Err(e) => return Err(e),
                }
            } else {
                writeln!(
                    report,
                    "  no diagonally scaled equivalent exists for an unbalanced network"
                )
                .ok();
            }
        }
        "embed" => {
            let targets = section.targets.as_deref().expect("validated on load");
            writeln!(report, "  targets: {}", join_f64(targets)).ok();
            match embed_targets(&sg, targets, tol::ZERO_SCALE) {
                Ok(design) => {
                    writeln!(report, "  steered agents: {}", join_1based(&design.kept)).ok();
                    if !design.dropped.is_empty() {
                        writeln!(
                            report,
                            "  dropped (target below resolution): {}",
                            join_1based(&design.dropped)
                        )
                        .ok();
                    }
                    writeln!(report, "  scalings: {}", join_f64(&design.delta)).ok();
                    writeln!(report, "  step-size ceiling: {:.6}", design.epsilon_max).ok();
                }
                Err(CoordError::Hypothesis(msg)) => {
                    writeln!(report, "  steering design unavailable: {msg}").ok();
                }
                Err(e) => return Err(e),
            }
        }
        other => {
            return Err(CoordError::Scenario(format!("unknown signed model '{other}'")));
        }
    }
    Ok(())
}

fn cmd_certify(scenario: &Scenario, out: Option<&Path>) -> Result<String> {
    if scenario.system.is_none() {
        return Err(CoordError::Scenario(
            "certification needs a [system] scenario".into(),
        ));
    }
    let dwell = scenario.dwell_spec()?.ok_or_else(|| {
        CoordError::Scenario("certification needs a [dwell] section".into())
    })?;
    let cert = scenario.certificate.as_ref().ok_or_else(|| {
        CoordError::Scenario("certification needs a [certificate] section".into())
    })?;
    let prepared = prepare(scenario)?;
    let sigma = scenario.switching_signal()?;
    let class1: Vec<usize> = cert.class1.iter().map(|&t| t - 1).collect();
    let class2: Vec<usize> = cert.class2.iter().map(|&t| t - 1).collect();

    let mut report = String::new();
    writeln!(report, "scenario: {}", scenario.name).ok();

    // Containment setups (designated leaders that ignore each other) are
    // certified on the follower subsystem: the leaders hold still, so the
    // contraction question lives entirely in the follower blocks.
    let containment = scenario.leaders.is_some()
        && prepared.blocks[0].n > prepared.blocks[0].m
        && prepared.blocks.iter().all(|b| b.l1.amax() == 0.0);

    let (splits, decomposition, audits, cert_report) = if containment {
        writeln!(report, "route: follower subsystem (containment)").ok();
        let l3s: Vec<DMatrix<f64>> =
            prepared.blocks.iter().map(|b| b.l3.clone()).collect();
        let splits = match follower_splits(&l3s, prepared.cfg.epsilon) {
            Ok(s) => s,
            Err(CoordError::NotCertifiable(msg)) => return Ok(refusal(report, &msg)),
            Err(e) => return Err(e),
        };
        let params = resolve_params(cert, &dwell.min_dwell, &splits, class1, class2);
        match certify_follower_subsystem(&l3s, prepared.cfg.epsilon, &params, &dwell, &sigma)
        {
            Ok(fc) => (fc.splits, fc.decomposition, fc.audits, fc.report),
            Err(CoordError::NotCertifiable(msg)) => return Ok(refusal(report, &msg)),
            Err(e) => return Err(e),
        }
    } else {
        writeln!(report, "route: error-system contraction").ok();
        let mats: Vec<DMatrix<f64>> =
            prepared.systems.iter().map(|s| s.a.clone()).collect();
        let splits = match mats
            .iter()
            .map(invariant_split)
            .collect::<Result<Vec<_>>>()
        {
            Ok(s) => s,
            Err(CoordError::NotCertifiable(msg)) => return Ok(refusal(report, &msg)),
            Err(e) => return Err(e),
        };
        let params = resolve_params(cert, &dwell.min_dwell, &splits, class1, class2);
        let decomposition = check_common_decomposition(
            &mats,
            &splits,
            &params.class1,
            &params.class2,
        )?;
        let audits = audit_schedule(&sigma, &dwell)?;
        let cert_report = certify_switched_contraction(&splits, &params, &dwell, &audits)?;
        (splits, decomposition, audits, cert_report)
    };

    for (t, s) in splits.iter().enumerate() {
        writeln!(
            report,
            "topology {}: persistent dim {}, contraction {:.6}, transient constant {:.6}",
            t + 1,
            s.fixed_dim(),
            s.lambda,
            s.rho
        )
        .ok();
    }
    writeln!(
        report,
        "common decomposition: {}",
        yes_no(decomposition.holds)
    )
    .ok();
    for f in &decomposition.failures {
        writeln!(report, "  {f}").ok();
    }
    for a in &audits {
        writeln!(
            report,
            "dwell audit topology {}: {} activations over {} instants, budget {:.2}: {}",
            a.topology + 1,
            a.activations,
            a.active_instants,
            a.bound,
            pass_fail(a.pass)
        )
        .ok();
    }
    for c in &cert_report.conditions {
        writeln!(
            report,
            "{}: {:.12} vs {:.12}: {}",
            c.name,
            c.lhs,
            c.rhs,
            pass_fail(c.holds)
        )
        .ok();
    }
    // per-topology recovery margins only make sense in the standard route,
    // where gamma budgets the same matrices the splits came from
    if !containment {
        let gamma: Vec<f64> = cert.gamma.clone();
        for c in certify_per_topology(&splits, &gamma, &dwell)? {
            writeln!(
                report,
                "{}: {:.12} vs {:.12}: {}",
                c.name,
                c.lhs,
                c.rhs,
                pass_fail(c.holds)
            )
            .ok();
        }
    }

    let certified = decomposition.holds && cert_report.certified;
    writeln!(report, "certified: {}", yes_no(certified)).ok();
    if certified {
        writeln!(report, "uniform decay rate: {}", cert_report.decay).ok();
        writeln!(
            report,
            "envelope coefficient: {}",
            cert_report.envelope_coefficient
        )
        .ok();
    } else if let Some(v) = &cert_report.first_violation {
        writeln!(report, "first violated condition: {v}").ok();
    }

    write_files(
        out,
        &[
            ("certificate.txt", certificate_text(&cert_report)),
            ("audit.csv", audit_csv(&audits)),
        ],
        &mut report,
    )?;
    Ok(report)
}

/// A refused certificate is still a completed run: the tool reports why no
/// certificate exists and exits cleanly.
fn refusal(mut report: String, msg: &str) -> String {
    writeln!(report, "certificate unavailable: {msg}").ok();
    writeln!(report, "certified: no").ok();
    report
}

fn follower_splits(l3s: &[DMatrix<f64>], epsilon: f64) -> Result<Vec<ContractionSplit>> {
    l3s.iter()
        .map(|l3| invariant_split(&leaderless_transition(l3, epsilon)?))
        .collect()
}

/// Certificate parameters with the omega default filled in: the amortized
/// transient growth rho^(1/min_dwell), the tightest value the per-topology
/// conditions admit.
fn resolve_params(
    cert: &coord_core::scenario::CertificateSection,
    min_dwell: &[usize],
    splits: &[ContractionSplit],
    class1: Vec<usize>,
    class2: Vec<usize>,
) -> CertificateParams {
    let omega = cert.omega.clone().unwrap_or_else(|| {
        splits
            .iter()
            .zip(min_dwell)
            .map(|(s, &nd)| s.rho.powf(1.0 / nd.max(1) as f64))
            .collect()
    });
    CertificateParams {
        omega,
        gamma: cert.gamma.clone(),
        decay: cert.decay.clone(),
        class1,
        class2,
    }
}

fn cmd_simulate(scenario: &Scenario, args: &RunArgs, out: Option<&Path>) -> Result<String> {
    if scenario.signed.is_some() {
        return simulate_signed(scenario, args, out);
    }
    let prepared = prepare(scenario)?;
    let n = prepared.cfg.n;
    let sigma = build_signal(scenario, args.horizon)?;
    let xi0_original = scenario.initial_state(n, args.seed)?;
    let perm = &prepared.blocks[0].permutation;
    let xi0 = DVector::from_fn(n, |p, _| xi0_original[perm[p]]);

    let traj = simulate(&prepared.systems, &sigma, &xi0)?;
    let tolerance = args.tol.unwrap_or_else(|| scenario.tolerance());
    let window = scenario.window().min(traj.len()).max(2);
    let verdict = check_coordination(&traj, &prepared.cfg, tolerance, window)?;

    let mut report = String::new();
    writeln!(report, "scenario: {}", scenario.name).ok();
    writeln!(
        report,
        "steps: {}  topologies used: {}",
        traj.len() - 1,
        prepared.systems.len()
    )
    .ok();
    for w in &traj.warnings {
        writeln!(report, "warning: {w}").ok();
    }
    if let Some(k) = traj.truncated_at {
        writeln!(
            report,
            "state norm passed the divergence cap at step {k}; run truncated"
        )
        .ok();
    }

    writeln!(
        report,
        "coordination achieved: {} (tolerance {tolerance}, window {window})",
        yes_no(verdict.achieved)
    )
    .ok();
    writeln!(
        report,
        "residuals: cross {:.3e}, rooted {:.3e}, follower {:.3e}, settle {:.3e}",
        verdict.cross_residual,
        verdict.rooted_residual,
        verdict.follower_residual,
        verdict.settle_residual
    )
    .ok();
    if let Some(v) = verdict.coordination_value {
        writeln!(report, "common scaled value: {v:.9}").ok();
    }
    if let Some(r) = verdict.rate {
        let r = if r == 0.0 { 0.0 } else { r };
        writeln!(report, "empirical decay rate over the window: {r:.6}").ok();
    }
    for (p, lim) in verdict.limits.iter().enumerate() {
        writeln!(report, "  agent {} final state: {lim:.9}", perm[p] + 1).ok();
    }

    if prepared.systems.len() == 1 {
        fixed_extras(&prepared, &xi0, &mut report)?;
    }

    write_files(
        out,
        &[
            ("trajectory.csv", trajectory_csv(&traj, perm)),
            ("scaled.csv", scaled_csv(&traj, &prepared.cfg, perm)),
        ],
        &mut report,
    )?;
    Ok(report)
}

/// Closed-form predictions available for a constant topology: the decay
/// rate from the error spectrum, the limit from the left eigenvector, and
/// the follower limit when the rooted agents never move.
fn fixed_extras(prepared: &Prepared, xi0: &DVector<f64>, report: &mut String) -> Result<()> {
    let blocks = &prepared.blocks[0];
    let perm = &blocks.permutation;
    match fixed_topology_report(blocks, &prepared.cfg) {
        Ok(fixed) => {
            writeln!(
                report,
                "error spectrum dominant modulus: {:.9}",
                fixed.dominant_modulus
            )
            .ok();
            if let Some(rate) = fixed.decay_rate {
                writeln!(report, "predicted decay rate: {rate:.6}").ok();
            }
            if let Ok(limit) = fixed.predict_limit(xi0) {
                for p in 0..blocks.n {
                    writeln!(
                        report,
                        "  agent {} predicted limit: {:.9}",
                        perm[p] + 1,
                        limit[p]
                    )
                    .ok();
                }
            }
        }
        Err(CoordError::Hypothesis(msg)) => {
            writeln!(report, "spectral prediction unavailable: {msg}").ok();
        }
        Err(e) => return Err(e),
    }

    if blocks.l1.amax() == 0.0 && blocks.n > blocks.m {
        let xi_rooted: Vec<f64> = (0..blocks.m).map(|i| xi0[i]).collect();
        match containment_limit(&blocks.l2, &blocks.l3, &prepared.cfg.delta, &xi_rooted) {
            Ok(limits) => {
                for (j, lim) in limits.iter().enumerate() {
                    writeln!(
                        report,
                        "  follower {} containment limit: {lim:.9}",
                        perm[blocks.m + j] + 1
                    )
                    .ok();
                }
            }
            Err(CoordError::Hypothesis(msg)) => {
                writeln!(report, "containment limit unavailable: {msg}").ok();
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn simulate_signed(scenario: &Scenario, args: &RunArgs, out: Option<&Path>) -> Result<String> {
    let section = scenario.signed.as_ref().expect("checked by caller");
    let sg = scenario.signed_graph()?;
    let mut report = String::new();
    writeln!(report, "scenario: {}", scenario.name).ok();

    match section.model.as_str() {
        "bipartite" => {
            // step size: explicit, or 80% of the ceiling of the equivalent
            // scaled network
            let gr = gauge(&sg);
            if !gr.balanced {
                return Err(CoordError::Hypothesis(
                    "signed network is not structurally balanced; no bipartite \
                     agreement to simulate"
                        .into(),
                ));
            }
            let mirror = sg.unsigned_mirror()?;
            let coupling = gain_matrix(&mirror.laplacian(), &gr.gauge, &gr.gauge);
            let epsilon = match section.epsilon {
                Some(e) => e,
                None => 0.8 * epsilon_bound(&coupling)?,
            };
            let system = bipartite_system(&sg, epsilon)?;
            writeln!(report, "model: bipartite  step size: {epsilon:.6}").ok();

            // all agents are rooted in the equivalent network, so the block
            // ordering is the original ordering
            let n = sg.n();
            let all: Vec<usize> = (0..n).collect();
            let blocks = system.graph.decompose_with_leaders(&all)?;
            let err_system = build_error_system(&blocks, &system.config)?;
            let sigma = build_signal_plain(scenario, args.horizon);
            let xi0 = scenario.initial_state(n, args.seed)?;
            let traj = simulate(&[err_system], &sigma, &xi0)?;

            // replay the signed dynamics directly; the two runs use the
            // same matrix up to the diagonal sign conjugation, so any
            // deviation is a bug, not roundoff to wave away
            let laplacian = sg.laplacian();
            let mut x = xi0.clone();
            let mut replay_dev = 0.0f64;
            for state in &traj.states {
                replay_dev = replay_dev.max((&x - state).amax());
                x = signed_step(&laplacian, epsilon, &x);
            }
            writeln!(report, "signed replay max deviation: {replay_dev:.3e}").ok();

            let tolerance = args.tol.unwrap_or_else(|| scenario.tolerance());
            let window = scenario.window().min(traj.len()).max(2);
            let verdict = check_coordination(&traj, &system.config, tolerance, window)?;
            writeln!(
                report,
                "bipartite agreement reached: {} (tolerance {tolerance})",
                yes_no(verdict.achieved)
            )
            .ok();
            if let Some(v) = verdict.coordination_value {
                writeln!(report, "agreement value (camp +1): {v:.9}").ok();
            }
            for (i, lim) in verdict.limits.iter().enumerate() {
                writeln!(report, "  agent {} final state: {lim:.9}", i + 1).ok();
            }
            write_files(
                out,
                &[
                    ("trajectory.csv", trajectory_csv(&traj, &all)),
                    ("scaled.csv", scaled_csv(&traj, &system.config, &all)),
                ],
                &mut report,
            )?;
        }
        "embed" => {
            let targets = section.targets.as_deref().expect("validated on load");
            let design = embed_targets(&sg, targets, tol::ZERO_SCALE)?;
            let epsilon = match section.epsilon {
                Some(e) => e,
                None => 0.8 * design.epsilon_max,
            };
            let cfg = design.system_config(epsilon)?;
            writeln!(report, "model: embed  step size: {epsilon:.6}").ok();
            writeln!(report, "steered agents: {}", join_1based(&design.kept)).ok();
            if !design.dropped.is_empty() {
                writeln!(report, "dropped agents: {}", join_1based(&design.dropped)).ok();
            }

            // augmented network: position 0 is the steering node pinned at
            // 1, positions 1.. are the kept agents in listed order
            let n_aug = design.kept.len() + 1;
            let all: Vec<usize> = (0..n_aug).collect();
            let blocks = design.graph.decompose_with_leaders(&all)?;
            let err_system = build_error_system(&blocks, &cfg)?;
            let sigma = build_signal_plain(scenario, args.horizon);
            let xi0_original = scenario.initial_state(sg.n(), args.seed)?;
            let xi0 = DVector::from_fn(n_aug, |p, _| {
                if p == 0 {
                    1.0
                } else {
                    xi0_original[design.kept[p - 1]]
                }
            });
            let traj = simulate(&[err_system], &sigma, &xi0)?;

            let tolerance = args.tol.unwrap_or_else(|| scenario.tolerance());
            let finals = traj.final_state();
            let mut worst = 0.0f64;
            for (j, &agent) in design.kept.iter().enumerate() {
                let err = (finals[j + 1] - targets[agent]).abs();
                worst = worst.max(err);
                writeln!(
                    report,
                    "  agent {} final {:.9} target {} (error {err:.3e})",
                    agent + 1,
                    finals[j + 1],
                    targets[agent]
                )
                .ok();
            }
            writeln!(
                report,
                "targets reached: {} (worst error {worst:.3e}, tolerance {tolerance})",
                yes_no(worst <= tolerance)
            )
            .ok();
            // column xi_1 is the steering node; xi_{p+1} is the p-th kept
            // agent, mapped back to original numbers in the report above
            write_files(
                out,
                &[("trajectory.csv", trajectory_csv(&traj, &all))],
                &mut report,
            )?;
        }
        other => {
            return Err(CoordError::Scenario(format!("unknown signed model '{other}'")));
        }
    }
    Ok(report)
}

/// Switching signal with the horizon override applied: a schedule pattern
/// is re-rolled to the new length, a single constant topology just runs
/// longer.
fn build_signal(scenario: &Scenario, horizon_override: Option<usize>) -> Result<Vec<usize>> {
    match horizon_override {
        None => scenario.switching_signal(),
        Some(h) => match &scenario.schedule {
            Some(schedule) => {
                let pattern: Vec<(usize, usize)> = schedule
                    .pattern
                    .iter()
                    .map(|&(t, len)| (t - 1, len))
                    .collect();
                schedule_from_pattern(&pattern, h)
            }
            None => Ok(vec![0; h]),
        },
    }
}

/// Same, for signed scenarios where only one (implicit) topology exists.
fn build_signal_plain(scenario: &Scenario, horizon_override: Option<usize>) -> Vec<usize> {
    vec![0; horizon_override.unwrap_or_else(|| scenario.horizon())]
}

fn write_files(
    out: Option<&Path>,
    files: &[(&str, String)],
    report: &mut String,
) -> Result<()> {
    let Some(dir) = out else { return Ok(()) };
    fs::create_dir_all(dir)?;
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content)?;
        writeln!(report, "wrote {}", path.display()).ok();
    }
    Ok(())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn pass_fail(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_1based(v: &[usize]) -> String {
    if v.is_empty() {
        return "none".into();
    }
    v.iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_complex(e: &Complex64) -> String {
    if e.im.abs() < 1e-12 {
        format!("{:.6}", e.re)
    } else {
        format!("{:.6}{:+.6}i", e.re, e.im)
    }
}

fn join_complex(eigs: &[Complex64]) -> String {
    eigs.iter()
        .map(fmt_complex)
        .collect::<Vec<_>>()
        .join(", ")
}
