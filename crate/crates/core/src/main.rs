use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use epochmix::bounds::{self, BoundInputs, Cor2Variant, CurveKind};
use epochmix::chain::{self, AssumptionReport, ChainStats};
use epochmix::environment::{ProblemInstance, SamplingMode};
use epochmix::harness::{self, AuditGrid, Horizon, PolicySpec, RunConfig, RunTrace, POLICY_IDS};
use epochmix::instances::{self, GeneratorSpec, MatrixDistribution, SpectrumSummary};
use epochmix::io::{self, Builtin, InstanceRef, PlotSpec, RunFile, Series};
use epochmix::policies::EpochSchedule;

type BoxError = Box<dyn std::error::Error>;

/// `println!` that treats a closed stdout as success.
macro_rules! emit {
    ($($arg:tt)*) => {
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Ok(ExitCode::SUCCESS);
            }
            return Err(e.into());
        }
    };
}

/// Epoch-mixing bandits on Markovian environments: chain statistics, regret bounds,
/// simulations and exact inequality audits.
#[derive(Parser)]
#[command(name = "epochmix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-arm chain statistics: π, λ₂(M), λ, C, μ, gap and the assumption report.
    Stats(StatsArgs),
    /// Regret and play-count bound curves as CSV.
    Bounds(BoundsArgs),
    /// Seeded policy simulations; writes trace and aggregate CSVs and an optional SVG.
    Simulate(SimulateArgs),
    /// Writes a random anti-correlated instance file.
    Generate(GenerateArgs),
    /// Samples λ₂(M(P)) over random transition matrices.
    Spectrum(SpectrumArgs),
    /// Exact audit of the expected-reward, schedule-mean and mixing inequalities.
    Audit(AuditArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "builtin")]
    instance: Option<PathBuf>,
    /// Canned instance.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    /// Parameter of the canned instance.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Override the instance discount factor.
    #[arg(long)]
    gamma: Option<f64>,
}

impl InstanceArgs {
    fn load(&self) -> Result<(String, ProblemInstance), BoxError> {
        let (id, inst) = match (&self.instance, self.builtin) {
            (Some(path), _) => InstanceRef::Path(path.clone()).load(Path::new("."))?,
            (None, Some(b)) => InstanceRef::Builtin(io::BuiltinRef { builtin: b, epsilon: self.epsilon }).load(Path::new("."))?,
            (None, None) => return Err("one of --instance or --builtin is required".into()),
        };
        match self.gamma {
            Some(g) => Ok((id, inst.with_gamma(g)?)),
            None => Ok((id, inst)),
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    source: InstanceArgs,
    #[arg(long, default_value_t = 1)]
    tau0: u64,
    #[arg(long, default_value_t = 1)]
    zeta: u64,
    /// Number of epochs n.
    #[arg(long, default_value_t = 2000)]
    horizon: u64,
    /// Policies whose bounds to include (epoch_ucb, epoch_greedy); repeatable.
    #[arg(long = "policy", default_values_t = ["epoch_ucb".to_string()])]
    policies: Vec<String>,
    /// Sweep the discount factor; adds a leading gamma column.
    #[arg(long, value_delimiter = ',')]
    grid_gamma: Vec<f64>,
    /// Use the +3 constant in the second corollary's leading term.
    #[arg(long)]
    cor2_derivation: bool,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also plot the regret bounds next to --out.
    #[arg(long, requires = "out")]
    svg: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run file; other flags then only override outputs.
    #[arg(long, conflicts_with_all = ["instance", "builtin", "policies", "horizon", "iters"])]
    config: Option<PathBuf>,
    #[command(flatten)]
    source: InstanceArgs,
    /// Policy id; repeatable. All policies when omitted.
    #[arg(long = "policy", value_parser = clap::builder::PossibleValuesParser::new(POLICY_IDS))]
    policies: Vec<String>,
    /// Number of decisions (epochs for epoch policies, iterations for baselines).
    #[arg(long, conflicts_with = "iters")]
    horizon: Option<u64>,
    /// Shared iteration budget.
    #[arg(long)]
    iters: Option<u64>,
    /// Epoch schedule for epoch policies.
    #[arg(long)]
    tau0: Option<u64>,
    #[arg(long)]
    zeta: Option<u64>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Advance a single state trajectory instead of the state distribution.
    #[arg(long)]
    trajectory: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write regret.svg.
    #[arg(long)]
    svg: bool,
    /// Keep every n-th decision in trace CSVs.
    #[arg(long)]
    trace_stride: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 4)]
    arms: usize,
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Mass the optimal arm puts on the favored states.
    #[arg(long, default_value_t = 0.9)]
    anti_mass: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value = "uniform")]
    dist: MatrixDistribution,
    #[arg(long, default_value_t = 10)]
    states: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of samples.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// Epoch lengths, as `a..b` or a comma list.
    #[arg(long, default_value = "1..50")]
    grid_tau: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.9, 1.0])]
    grid_gamma: Vec<f64>,
    /// Pulls per schedule audit.
    #[arg(long, default_value_t = 200)]
    pulls: u64,
    /// Count violations of the literal ℓ1 mixing inequality as failures.
    #[arg(long)]
    strict_fill: bool,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the full JSON report instead of a summary.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stats(a) => stats(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct ArmReport {
    arm: usize,
    #[serde(flatten)]
    stats: ChainStats,
    mu: f64,
    gap: f64,
    assumptions: AssumptionReport,
}

#[derive(Serialize)]
struct StatsReport {
    instance_id: String,
    m: usize,
    states: usize,
    gamma: f64,
    optimal_arm: usize,
    optimal_tied: bool,
    arms: Vec<ArmReport>,
}

fn stats(a: StatsArgs) -> Result<ExitCode, BoxError> {
    let (id, inst) = a.source.load()?;
    let gaps = inst.gaps();
    let arms = (0..inst.m())
        .map(|j| {
            Ok(ArmReport {
                arm: j,
                stats: inst.stats(j).clone(),
                mu: inst.mu(j),
                gap: gaps[j],
                assumptions: chain::check_assumptions(inst.transition(j))?,
            })
        })
        .collect::<Result<Vec<_>, chain::ChainError>>()?;
    let report = StatsReport {
        instance_id: id,
        m: inst.m(),
        states: inst.states(),
        gamma: inst.gamma(),
        optimal_arm: inst.optimal_arm(),
        optimal_tied: inst.optimal_is_tied(),
        arms,
    };
    if a.json {
        emit!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(ExitCode::SUCCESS);
    }
    emit!(
        "{}: m={} states={} gamma={} optimal arm {}{}",
        report.instance_id,
        report.m,
        report.states,
        report.gamma,
        report.optimal_arm,
        if report.optimal_tied { " (tied)" } else { "" }
    );
    for r in &report.arms {
        emit!(
            "arm {}: mu={:.6} gap={:.6} lambda2(M)={:.6} lambda={:.6} C={:.6} pi={:?} ergodic={} M irreducible={}",
            r.arm,
            r.mu,
            r.gap,
            r.stats.lambda2_m,
            r.stats.lambda,
            r.stats.c,
            r.stats.pi.probs(),
            r.assumptions.ergodic(),
            r.assumptions.m_irreducible
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn bound_curves(inst: &ProblemInstance, a: &BoundsArgs) -> Result<Vec<bounds::BoundCurve>, BoxError> {
    let schedule = if a.zeta == 0 { EpochSchedule::constant(a.tau0.max(1)) } else { EpochSchedule::new(a.tau0, a.zeta)? };
    let inputs = BoundInputs::from_instance(inst, schedule)?;
    let mut greedy = None;
    for id in &a.policies {
        match id.as_str() {
            "epoch_ucb" => {}
            "epoch_greedy" => {
                let spec = PolicySpec::from_id(id, &serde_json::Value::Null)?.with_schedule(a.tau0, a.zeta);
                greedy = spec.greedy_config(inst, Horizon::Epochs(a.horizon))?;
            }
            other => return Err(format!("no bounds for policy '{other}' (expected epoch_ucb or epoch_greedy)").into()),
        }
    }
    let variant = if a.cor2_derivation { Cor2Variant::Derivation } else { Cor2Variant::Statement };
    Ok(bounds::curves(&inputs, greedy.as_ref(), a.horizon.max(1), variant))
}

fn bounds_cmd(a: BoundsArgs) -> Result<ExitCode, BoxError> {
    let (_, inst) = a.source.load()?;
    let mut buf = Vec::new();
    let plotted = bound_curves(&inst, &a)?;
    if a.grid_gamma.is_empty() {
        io::write_bound_curves(&mut buf, &plotted)?;
    } else {
        writeln!(buf, "gamma,{}", io::BOUND_HEADER)?;
        for &g in &a.grid_gamma {
            let curves = bound_curves(&inst.with_gamma(g)?, &a)?;
            let mut rows = Vec::new();
            for c in &curves {
                c.write_csv_rows(&mut rows)?;
            }
            for line in String::from_utf8(rows)?.lines() {
                writeln!(buf, "{g},{line}")?;
            }
        }
    }
    match &a.out {
        Some(path) => {
            io::write_file(path, &buf)?;
            if a.svg {
                let series: Vec<Series> = plotted
                    .iter()
                    .filter(|c| matches!(c.kind, CurveKind::RegretCor1 | CurveKind::RegretCor2 | CurveKind::RegretCor3))
                    .map(|c| Series {
                        label: c.kind.as_str().to_string(),
                        x: c.points.iter().map(|p| p.0 as f64).collect(),
                        y: c.points.iter().map(|p| p.1).collect(),
                        err: None,
                    })
                    .collect();
                let spec = PlotSpec {
                    title: "Regret bounds".into(),
                    x_label: "epochs n".into(),
                    y_label: "regret bound".into(),
                    log_x: true,
                };
                io::write_file(&path.with_extension("svg"), io::render_svg(&spec, &series).as_bytes())?;
            }
        }
        None => {
            if let Err(e) = std::io::stdout().write_all(&buf) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct SimPlan {
    instance_id: String,
    instance: ProblemInstance,
    policies: Vec<PolicySpec>,
    horizon: Horizon,
    replications: usize,
    master_seed: u64,
    mode: SamplingMode,
    out: PathBuf,
    svg: bool,
    stride: Option<u64>,
}

fn sim_plan(a: &SimulateArgs) -> Result<SimPlan, BoxError> {
    if let Some(path) = &a.config {
        let run = RunFile::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let (instance_id, instance) = run.instance.load(base)?;
        let instance = match a.source.gamma {
            Some(g) => instance.with_gamma(g)?,
            None => instance,
        };
        let out = a
            .out
            .clone()
            .or_else(|| run.outputs.csv_dir.as_ref().map(|d| if d.is_absolute() { d.clone() } else { base.join(d) }))
            .unwrap_or_else(|| PathBuf::from("out"));
        return Ok(SimPlan {
            instance_id,
            instance,
            policies: run.policy_specs()?,
            horizon: run.horizon,
            replications: run.replications,
            master_seed: run.master_seed,
            mode: run.mode,
            out,
            svg: a.svg || run.outputs.svg,
            stride: a.trace_stride.or(run.outputs.trace_stride),
        });
    }
    let (instance_id, instance) = a.source.load()?;
    let horizon = match (a.horizon, a.iters) {
        (Some(n), None) => Horizon::Epochs(n),
        (None, Some(n)) => Horizon::Iterations(n),
        _ => return Err("one of --horizon or --iters is required".into()),
    };
    let ids: Vec<&str> = if a.policies.is_empty() { POLICY_IDS.to_vec() } else { a.policies.iter().map(String::as_str).collect() };
    let policies = ids
        .into_iter()
        .map(|id| {
            let spec = PolicySpec::from_id(id, &serde_json::Value::Null)?;
            Ok(match (a.tau0, a.zeta) {
                (None, None) => spec,
                (t, z) => spec.with_schedule(t.unwrap_or(1), z.unwrap_or(1)),
            })
        })
        .collect::<Result<Vec<_>, harness::HarnessError>>()?;
    Ok(SimPlan {
        instance_id,
        instance,
        policies,
        horizon,
        replications: a.reps,
        master_seed: a.seed,
        mode: if a.trajectory { SamplingMode::Trajectory } else { SamplingMode::Distribution },
        out: a.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        svg: a.svg,
        stride: a.trace_stride,
    })
}

/// 200-point curve: iteration-projected under a budget, per decision otherwise.
fn aggregate(traces: &[RunTrace], horizon: Horizon) -> harness::AggregateCurve {
    match horizon {
        Horizon::Iterations(budget) => harness::iteration_regret_projection(traces, &harness::iteration_grid(budget, 200)),
        Horizon::Epochs(n) => {
            let step = n.div_ceil(200).max(1);
            let mut ks: Vec<u64> = (1..=n).filter(|k| k % step == 0).collect();
            if ks.last() != Some(&n) && n > 0 {
                ks.push(n);
            }
            harness::epoch_regret_curve(traces, &ks)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<ExitCode, BoxError> {
    let plan = sim_plan(&a)?;
    if plan.replications == 0 {
        return Err("replications must be positive".into());
    }
    let stride = plan.stride.unwrap_or_else(|| plan.horizon.decisions().div_ceil(1000).max(1));
    let mut labels: Vec<String> = Vec::new();
    let mut series = Vec::new();
    for spec in &plan.policies {
        let mut label = spec.id().to_string();
        let dup = labels.iter().filter(|l| l.split('#').next() == Some(spec.id())).count();
        if dup > 0 {
            label = format!("{label}#{dup}");
        }
        let mut cfg = RunConfig::new(&plan.instance_id, spec.clone(), plan.horizon, plan.replications, plan.master_seed);
        cfg.mode = plan.mode;
        let traces = harness::run_replications(&plan.instance, &cfg)?;
        let file_label = label.replace('#', "_");
        let mut buf = Vec::new();
        io::write_traces(&mut buf, &traces, stride)?;
        io::write_file(&plan.out.join(format!("traces_{file_label}.csv")), &buf)?;
        let curve = aggregate(&traces, plan.horizon);
        let mut buf = Vec::new();
        io::write_aggregate(&mut buf, &curve)?;
        io::write_file(&plan.out.join(format!("aggregate_{file_label}.csv")), &buf)?;
        let final_regret = curve.mean.last().copied().unwrap_or(0.0);
        let final_err = curve.stderr.last().copied().unwrap_or(0.0);
        emit!("{label}: final regret {final_regret:.4} ± {final_err:.4}, late-window slope {:.5}", curve.late_window_slope());
        series.push(Series::from_curve(&label, &curve));
        labels.push(label);
    }
    if plan.svg {
        let x_label = match plan.horizon {
            Horizon::Iterations(_) => "iterations",
            Horizon::Epochs(_) => "decisions",
        };
        let spec = PlotSpec {
            title: format!("Regret on {}", plan.instance_id),
            x_label: x_label.into(),
            y_label: "cumulative regret".into(),
            log_x: false,
        };
        io::write_file(&plan.out.join("regret.svg"), io::render_svg(&spec, &series).as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(a: GenerateArgs) -> Result<ExitCode, BoxError> {
    let spec = GeneratorSpec {
        anti_correlation_mass: a.anti_mass,
        gamma: a.gamma,
        ..GeneratorSpec::new(a.arms, a.states, a.seed)
    };
    let g = instances::generate_detailed(&spec)?;
    io::save_instance(&a.out, &g.instance)?;
    emit!(
        "wrote {} (optimal arm {}, min gap {:.4}, {} attempt(s))",
        a.out.display(),
        g.instance.optimal_arm(),
        g.instance.min_gap().unwrap_or(0.0),
        g.attempts
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SpectrumReport {
    dist: MatrixDistribution,
    states: usize,
    seed: u64,
    lambda2_m: SpectrumSummary,
    lambda: SpectrumSummary,
}

fn spectrum(a: SpectrumArgs) -> Result<ExitCode, BoxError> {
    let samples = instances::spectrum_samples(a.dist, a.states, a.samples, a.seed)?;
    let roots: Vec<f64> = samples.iter().map(|x| x.sqrt()).collect();
    let (Some(l2), Some(l)) = (SpectrumSummary::from_samples(&samples), SpectrumSummary::from_samples(&roots)) else {
        return Err("need at least one sample".into());
    };
    if let Some(path) = &a.out {
        let mut buf = Vec::new();
        writeln!(buf, "sample,lambda2_m,lambda")?;
        for (i, (x, r)) in samples.iter().zip(&roots).enumerate() {
            writeln!(buf, "{i},{x},{r}")?;
        }
        io::write_file(path, &buf)?;
    }
    let report = SpectrumReport { dist: a.dist, states: a.states, seed: a.seed, lambda2_m: l2, lambda: l };
    if a.json {
        emit!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for (name, s) in [("lambda2(M)", l2), ("lambda", l)] {
            emit!("{name}: n={} mean={:.4} p95={:.4} min={:.4} max={:.4}", s.samples, s.mean, s.p95, s.min, s.max);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_taus(s: &str) -> Result<Vec<u64>, BoxError> {
    let taus: Vec<u64> = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        (lo.trim().parse::<u64>()?..=hi.trim().parse::<u64>()?).collect()
    } else {
        s.split(',').map(|t| t.trim().parse::<u64>()).collect::<Result<_, _>>()?
    };
    if taus.is_empty() || taus.contains(&0) {
        return Err(format!("--grid-tau '{s}' must list positive epoch lengths").into());
    }
    Ok(taus)
}

fn audit(a: AuditArgs) -> Result<ExitCode, BoxError> {
    let (id, inst) = a.source.load()?;
    let grid = AuditGrid {
        taus: parse_taus(&a.grid_tau)?,
        gammas: a.grid_gamma.clone(),
        pulls: a.pulls,
        strict_fill: a.strict_fill,
        ..AuditGrid::default()
    };
    let report = harness::audit_inequalities(&inst, &id, &grid)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &a.out {
        io::write_file(path, json.as_bytes())?;
    }
    if a.json {
        emit!("{}", json.trim_end());
    } else {
        for s in &report.suites {
            emit!(
                "{}{}: {} checks, {} violations, min slack {:.3e}",
                s.name,
                if s.gating { "" } else { " (informational)" },
                s.checks,
                s.violations,
                s.min_slack
            );
        }
        emit!("{}", if report.passed() { "audit passed" } else { "audit FAILED" });
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
