//! Seeded Monte-Carlo runs, regret curves, and the exact inequality audits.
//!
//! Replication `r` of a run draws every random number (policy and
//! environment alike) from one ChaCha8 stream seeded with
//! `mix64(master_seed, r)`. Replications run in parallel and are collected
//! in index order, so results do not depend on scheduling.

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundError, Branch};
use crate::chain::{self, StateDistribution};
use crate::environment::{self, EnvError, ProblemInstance, SamplingMode};
use crate::policies::{
    EpochGreedy, EpochSchedule, EpochUcb, EpsGreedy, Exp3, Granularity, GreedyConfig, LinQ, LinQConfig, PenaltyBound,
    Policy, PolicyError, SimRng, Ucb1, UcbTuned,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("unknown policy id '{0}'")]
    UnknownPolicy(String),
    #[error("bad parameters for policy '{id}': {msg}")]
    BadParams { id: String, msg: String },
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// SplitMix64-style hash of `(seed, index)`; distinct indices give unrelated streams.
pub fn mix64(seed: u64, index: u64) -> u64 {
    fn finalize(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    finalize(finalize(seed.wrapping_add(0x9E37_79B9_7F4A_7C15)) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn replication_rng(master_seed: u64, rep: u64) -> SimRng {
    SimRng::seed_from_u64(mix64(master_seed, rep))
}

/// Run length: a number of decisions, or a total iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Epochs(u64),
    Iterations(u64),
}

impl Horizon {
    /// Upper bound on the number of decisions.
    pub fn decisions(self) -> u64 {
        match self {
            Horizon::Epochs(n) | Horizon::Iterations(n) => n,
        }
    }
}

fn d_tau0() -> u64 {
    1
}
fn d_zeta() -> u64 {
    1
}
fn d_true() -> bool {
    true
}
fn d_cprime() -> f64 {
    9.0
}
fn d_one() -> f64 {
    1.0
}
fn d_gamma_rl() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochUcbParams {
    #[serde(default = "d_tau0")]
    pub tau0: u64,
    /// Growth per pull; zero gives constant epochs (a non-conforming demonstration setting).
    #[serde(default = "d_zeta")]
    pub zeta: u64,
    /// Include the mixing penalty `L/T` in the confidence window.
    #[serde(default = "d_true")]
    pub penalty: bool,
}

impl Default for EpochUcbParams {
    fn default() -> Self {
        Self { tau0: 1, zeta: 1, penalty: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochGreedyParams {
    #[serde(default = "d_tau0")]
    pub tau0: u64,
    #[serde(default = "d_zeta")]
    pub zeta: u64,
    #[serde(default = "d_cprime")]
    pub c_prime: f64,
    /// Multiplier on the smallest admissible `c`; values below one are non-conforming.
    #[serde(default = "d_one")]
    pub c_scale: f64,
    /// Explicit `c`, overriding `c_scale`.
    #[serde(default)]
    pub c: Option<f64>,
    /// Gap lower bound; defaults to the instance's smallest gap.
    #[serde(default)]
    pub d: Option<f64>,
}

impl Default for EpochGreedyParams {
    fn default() -> Self {
        Self { tau0: 1, zeta: 1, c_prime: 9.0, c_scale: 1.0, c: None, d: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsGreedyParams {
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3Params {
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinQParams {
    #[serde(default = "d_gamma_rl")]
    pub gamma_rl: f64,
    #[serde(default)]
    pub eps_rate: Option<f64>,
}

impl Default for LinQParams {
    fn default() -> Self {
        Self { gamma_rl: 0.9, eps_rate: None }
    }
}

/// A policy and its hyperparameters. Serialized as `{"id": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", content = "params", rename_all = "snake_case")]
pub enum PolicySpec {
    EpochUcb(EpochUcbParams),
    EpochGreedy(EpochGreedyParams),
    Ucb1,
    UcbTuned,
    EpsGreedy(EpsGreedyParams),
    Exp3(Exp3Params),
    Linq(LinQParams),
}

/// Policy ids in the order used for plots and reports.
pub const POLICY_IDS: [&str; 7] = ["epoch_ucb", "epoch_greedy", "ucb1", "ucb_tuned", "eps_greedy", "exp3", "linq"];

/// Exhaustive scan length for `κ`; `L(i)/√i` peaks early for every branch.
const KAPPA_SCAN: u64 = 100_000;

impl PolicySpec {
    /// Parses an id with a JSON parameter object (`null` means defaults).
    pub fn from_id(id: &str, params: &serde_json::Value) -> Result<Self> {
        let params = if params.is_null() { serde_json::json!({}) } else { params.clone() };
        let bad = |e: serde_json::Error| HarnessError::BadParams { id: id.to_string(), msg: e.to_string() };
        Ok(match id {
            "epoch_ucb" => PolicySpec::EpochUcb(serde_json::from_value(params).map_err(bad)?),
            "epoch_greedy" => PolicySpec::EpochGreedy(serde_json::from_value(params).map_err(bad)?),
            "ucb1" => PolicySpec::Ucb1,
            "ucb_tuned" => PolicySpec::UcbTuned,
            "eps_greedy" => PolicySpec::EpsGreedy(serde_json::from_value(params).map_err(bad)?),
            "exp3" => PolicySpec::Exp3(serde_json::from_value(params).map_err(bad)?),
            "linq" => PolicySpec::Linq(serde_json::from_value(params).map_err(bad)?),
            other => return Err(HarnessError::UnknownPolicy(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            PolicySpec::EpochUcb(_) => "epoch_ucb",
            PolicySpec::EpochGreedy(_) => "epoch_greedy",
            PolicySpec::Ucb1 => "ucb1",
            PolicySpec::UcbTuned => "ucb_tuned",
            PolicySpec::EpsGreedy(_) => "eps_greedy",
            PolicySpec::Exp3(_) => "exp3",
            PolicySpec::Linq(_) => "linq",
        }
    }

    pub fn granularity(&self) -> Granularity {
        match self {
            PolicySpec::EpochUcb(_) | PolicySpec::EpochGreedy(_) => Granularity::Epoch,
            _ => Granularity::Iteration,
        }
    }

    /// Replaces the epoch schedule of an epoch policy; no-op for baselines.
    pub fn with_schedule(mut self, tau0: u64, zeta: u64) -> Self {
        match &mut self {
            PolicySpec::EpochUcb(p) => {
                p.tau0 = tau0;
                p.zeta = zeta;
            }
            PolicySpec::EpochGreedy(p) => {
                p.tau0 = tau0;
                p.zeta = zeta;
            }
            _ => {}
        }
        self
    }

    /// The EpochGreedy constants this spec resolves to on `instance`.
    pub fn greedy_config(&self, instance: &ProblemInstance, horizon: Horizon) -> Result<Option<GreedyConfig>> {
        let PolicySpec::EpochGreedy(p) = self else { return Ok(None) };
        let schedule = schedule_of(p.tau0, p.zeta)?;
        let d = match p.d {
            Some(d) => d,
            None => instance.min_gap().filter(|&g| g > 0.0).unwrap_or(1.0),
        };
        let penalty = PenaltyBound::new(instance.all_stats().to_vec(), schedule, instance.gamma());
        let kappa = penalty.kappa(horizon.decisions().clamp(1, KAPPA_SCAN));
        let base = GreedyConfig::theory(d, p.c_prime, kappa)?;
        Ok(Some(match p.c {
            Some(c) => GreedyConfig::with_c(c, d, p.c_prime, kappa),
            None => base.scaled(p.c_scale),
        }))
    }

    pub fn build(&self, instance: &ProblemInstance, horizon: Horizon) -> Result<Box<dyn Policy>> {
        let m = instance.m();
        Ok(match self {
            PolicySpec::EpochUcb(p) => {
                let schedule = schedule_of(p.tau0, p.zeta)?;
                let penalty = if p.penalty {
                    PenaltyBound::new(instance.all_stats().to_vec(), schedule, instance.gamma())
                } else {
                    PenaltyBound::zero(m, schedule)
                };
                Box::new(EpochUcb::new(schedule, penalty))
            }
            PolicySpec::EpochGreedy(p) => {
                let schedule = schedule_of(p.tau0, p.zeta)?;
                let config = self.greedy_config(instance, horizon)?.expect("epoch greedy");
                Box::new(EpochGreedy::new(m, schedule, config))
            }
            PolicySpec::Ucb1 => Box::new(Ucb1::new(m)),
            PolicySpec::UcbTuned => Box::new(UcbTuned::new(m)),
            PolicySpec::EpsGreedy(p) => {
                let d = p.d.unwrap_or_else(|| instance.min_gap().filter(|&g| g > 0.0).unwrap_or(1.0));
                Box::new(EpsGreedy::new(m, p.c.unwrap_or(1.0), d))
            }
            PolicySpec::Exp3(p) => match p.gamma {
                Some(g) => Box::new(Exp3::with_gamma(m, g)),
                None => Box::new(Exp3::new(m, horizon.decisions())),
            },
            PolicySpec::Linq(p) => {
                let mut config = LinQConfig::for_horizon(horizon.decisions());
                config.gamma_rl = p.gamma_rl;
                if let Some(r) = p.eps_rate {
                    config.eps_rate = r;
                }
                Box::new(LinQ::new(m, instance.states(), config))
            }
        })
    }
}

fn schedule_of(tau0: u64, zeta: u64) -> Result<EpochSchedule> {
    if zeta == 0 {
        if tau0 == 0 {
            return Err(HarnessError::Config("tau0 must be positive".into()));
        }
        Ok(EpochSchedule::constant(tau0))
    } else {
        Ok(EpochSchedule::new(tau0, zeta)?)
    }
}

/// One simulation setup; replication `r` uses stream `mix64(master_seed, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance_id: String,
    pub policy: PolicySpec,
    pub horizon: Horizon,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl RunConfig {
    pub fn new(instance_id: impl Into<String>, policy: PolicySpec, horizon: Horizon, replications: usize, master_seed: u64) -> Self {
        Self {
            instance_id: instance_id.into(),
            policy,
            horizon,
            replications,
            master_seed,
            mode: SamplingMode::Distribution,
        }
    }
}

/// One decision: an epoch for epoch policies, a single iteration for baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub k: u64,
    pub arm: usize,
    pub tau: u64,
    pub smoothed_reward: f64,
    pub cumulative_iterations: u64,
    /// `μ* − r̄_k`.
    pub regret_increment: f64,
}

/// Everything recorded by one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub policy: String,
    pub instance_id: String,
    pub replication: u64,
    /// Seed of this replication's stream.
    pub seed: u64,
    pub granularity: Granularity,
    pub mu_star: f64,
    pub gamma: f64,
    pub records: Vec<EpochRecord>,
    /// `T_j`: decisions that selected each arm.
    pub plays: Vec<u64>,
    /// `Σ_k (μ* − r̄_k)`.
    pub cumulative_regret: f64,
}

impl RunTrace {
    pub fn decisions(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn total_iterations(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cumulative_iterations)
    }

    /// Cumulative regret after each decision.
    pub fn cumulative(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.regret_increment;
                Some(*acc)
            })
            .collect()
    }

    /// `(end iteration, cumulative iteration regret)` after each decision, with
    /// decision `k` contributing `τ_k (μ* − r̄_k)` at the end of its epoch.
    ///
    /// Exact for time-averaged feedback; an approximation under discounting.
    pub fn projected(&self) -> Vec<(u64, f64)> {
        let mut acc = 0.0;
        self.records
            .iter()
            .map(|r| {
                acc += r.tau as f64 * r.regret_increment;
                (r.cumulative_iterations, acc)
            })
            .collect()
    }

    /// Projected cumulative regret at each iteration count in `grid` (step interpolation).
    pub fn projected_at(&self, grid: &[u64]) -> Vec<f64> {
        let pts = self.projected();
        let mut out = Vec::with_capacity(grid.len());
        let mut i = 0;
        let mut last = 0.0;
        for &x in grid {
            while i < pts.len() && pts[i].0 <= x {
                last = pts[i].1;
                i += 1;
            }
            out.push(last);
        }
        out
    }

    /// Cumulative regret after decision `k` for each `k` in `ks` (0 before the first).
    pub fn cumulative_at(&self, ks: &[u64]) -> Vec<f64> {
        let cum = self.cumulative();
        ks.iter()
            .map(|&k| if k == 0 { 0.0 } else { cum[(k.min(cum.len() as u64) - 1) as usize] })
            .collect()
    }
}

/// Runs one replication of `config` on `instance`.
///
/// Epoch policies play whole epochs; under an iteration budget the last
/// epoch is cut short at the budget. Baselines play one iteration per decision.
pub fn run_once(instance: &ProblemInstance, config: &RunConfig, rep: u64) -> Result<RunTrace> {
    let mut policy = config.policy.build(instance, config.horizon)?;
    let seed = mix64(config.master_seed, rep);
    let mut rng = SimRng::seed_from_u64(seed);
    let mu_star = instance.mu_star();
    let mut beta = instance.beta1().clone();
    let mut records = Vec::with_capacity(config.horizon.decisions().min(1 << 20) as usize);
    let mut plays = vec![0u64; instance.m()];
    let mut iters = 0u64;
    let mut regret = 0.0;
    for k in 1.. {
        let remaining = match config.horizon {
            Horizon::Epochs(n) if k > n => break,
            Horizon::Iterations(t) if iters >= t => break,
            Horizon::Epochs(_) => u64::MAX,
            Horizon::Iterations(t) => t - iters,
        };
        let arm = policy.select(k, &beta, &mut rng);
        let tau = policy.epoch_length(arm).min(remaining);
        let out = environment::pull_arm_with(instance, arm, &beta, tau, config.mode, false, &mut rng)?;
        policy.update(arm, out.smoothed_reward, &out.final_beta);
        beta = out.final_beta;
        iters += tau;
        plays[arm] += 1;
        let inc = mu_star - out.smoothed_reward;
        regret += inc;
        records.push(EpochRecord {
            k,
            arm,
            tau,
            smoothed_reward: out.smoothed_reward,
            cumulative_iterations: iters,
            regret_increment: inc,
        });
    }
    Ok(RunTrace {
        policy: policy.name().to_string(),
        instance_id: config.instance_id.clone(),
        replication: rep,
        seed,
        granularity: policy.granularity(),
        mu_star,
        gamma: instance.gamma(),
        records,
        plays,
        cumulative_regret: regret,
    })
}

fn check_granularity(config: &RunConfig, want: Granularity) -> Result<()> {
    if config.policy.granularity() != want {
        return Err(HarnessError::Config(format!(
            "policy '{}' is not {}-granular",
            config.policy.id(),
            match want {
                Granularity::Epoch => "epoch",
                Granularity::Iteration => "iteration",
            }
        )));
    }
    Ok(())
}

/// [`run_once`] restricted to the epoch policies.
pub fn run_epoch_policy(instance: &ProblemInstance, config: &RunConfig, rep: u64) -> Result<RunTrace> {
    check_granularity(config, Granularity::Epoch)?;
    run_once(instance, config, rep)
}

/// [`run_once`] restricted to the per-iteration baselines.
pub fn run_iteration_policy(instance: &ProblemInstance, config: &RunConfig, rep: u64) -> Result<RunTrace> {
    check_granularity(config, Granularity::Iteration)?;
    run_once(instance, config, rep)
}

/// All replications of `config`, in replication order.
pub fn run_replications(instance: &ProblemInstance, config: &RunConfig) -> Result<Vec<RunTrace>> {
    if config.replications == 0 {
        return Err(HarnessError::Config("replications must be at least 1".into()));
    }
    (0..config.replications as u64)
        .into_par_iter()
        .map(|r| run_once(instance, config, r))
        .collect()
}

/// Mean and standard error of a sample; the error is zero for a single value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pointwise mean and standard error over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replications: usize,
    /// Set when the curve uses the discounted-epoch projection.
    pub approximate: bool,
}

impl AggregateCurve {
    /// `series[r][i]` is replication `r` at `x[i]`.
    pub fn from_series(x: Vec<f64>, series: &[Vec<f64>], approximate: bool) -> Self {
        let (mut mean, mut stderr) = (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
        let mut col = Vec::with_capacity(series.len());
        for i in 0..x.len() {
            col.clear();
            col.extend(series.iter().map(|s| s[i]));
            let (m, e) = mean_stderr(&col);
            mean.push(m);
            stderr.push(e);
        }
        Self { x, mean, stderr, replications: series.len(), approximate }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Linear interpolation of the mean curve at `x`.
    pub fn mean_at(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.mean, x)
    }

    /// `(R(X) − R(0.9X)) / (0.1X)` with `X` the last abscissa.
    pub fn late_window_slope(&self) -> f64 {
        let end = *self.x.last().expect("non-empty curve");
        (self.mean_at(end) - self.mean_at(0.9 * end)) / (0.1 * end)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&v| v >= x) {
        None => *ys.last().expect("non-empty"),
        Some(0) => ys[0],
        Some(i) => {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

/// `points` evenly spaced iteration counts ending at `budget`.
pub fn iteration_grid(budget: u64, points: usize) -> Vec<u64> {
    let points = points.max(1) as u64;
    (1..=points).map(|i| budget * i / points).collect()
}

/// Shared iteration-axis regret of a set of traces, evaluated at `grid`.
pub fn iteration_regret_projection(traces: &[RunTrace], grid: &[u64]) -> AggregateCurve {
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.projected_at(grid)).collect();
    let approximate = traces
        .iter()
        .any(|t| t.granularity == Granularity::Epoch && t.gamma < 1.0);
    AggregateCurve::from_series(grid.iter().map(|&g| g as f64).collect(), &series, approximate)
}

/// Decision-axis regret (`n μ* − Σ r̄_k`) at each `k` in `ks`.
pub fn epoch_regret_curve(traces: &[RunTrace], ks: &[u64]) -> AggregateCurve {
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.cumulative_at(ks)).collect();
    AggregateCurve::from_series(ks.iter().map(|&k| k as f64).collect(), &series, false)
}

/// Mean and standard error of one per-arm statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        Self { mean, stderr }
    }

    /// `mean + z · stderr`.
    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.stderr
    }
}

/// `T_j(n)` per arm, from the traces of an epoch-horizon run.
pub fn suboptimal_plays(traces: &[RunTrace], m: usize) -> Vec<Estimate> {
    (0..m)
        .map(|j| Estimate::from_samples(&traces.iter().map(|t| t.plays[j] as f64).collect::<Vec<_>>()))
        .collect()
}

/// Runs `config` and estimates `E[T_j(n)]` for every arm.
pub fn estimate_suboptimal_plays(instance: &ProblemInstance, config: &RunConfig) -> Result<Vec<Estimate>> {
    let traces = run_replications(instance, config)?;
    Ok(suboptimal_plays(&traces, instance.m()))
}

/// Per-decision frequency of selecting `arm` across replications (index `k − 1`).
pub fn selection_frequency(traces: &[RunTrace], arm: usize) -> Vec<Estimate> {
    let n = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let xs: Vec<f64> = traces.iter().map(|t| f64::from(u8::from(t.records[i].arm == arm))).collect();
            Estimate::from_samples(&xs)
        })
        .collect()
}

/// Per-epoch comparison of empirical suboptimal-play frequency with the
/// EpochGreedy probability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyAudit {
    pub config: GreedyConfig,
    pub threshold: u64,
    /// Epochs past the validity threshold within the horizon.
    pub checked: u64,
    pub violations: Vec<(u64, usize, f64, f64)>,
    /// Smallest value of `min(1, bound)` over the checked epochs.
    pub min_bound: f64,
}

/// Checks, for each suboptimal arm and each epoch `k ≥ ⌈cm/d²⌉`, that the
/// selection frequency is at most `min(1, bound(k)) + z·stderr`.
pub fn audit_greedy_frequency(instance: &ProblemInstance, traces: &[RunTrace], config: &GreedyConfig, z: f64) -> GreedyAudit {
    let m = instance.m();
    let threshold = config.validity_threshold(m).max(2);
    let best = instance.optimal_arm();
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut min_bound = f64::INFINITY;
    for arm in (0..m).filter(|&j| j != best) {
        let freq = selection_frequency(traces, arm);
        for (i, est) in freq.iter().enumerate() {
            let k = i as u64 + 1;
            if k < threshold {
                continue;
            }
            let bound = bounds::thm2_prob_bound(config, m, k).map_or(1.0, |b| b.min(1.0));
            min_bound = min_bound.min(bound);
            checked += 1;
            if est.mean > bound + z * est.stderr {
                violations.push((k, arm, est.mean, bound));
            }
        }
    }
    GreedyAudit { config: *config, threshold, checked, violations, min_bound }
}

/// Picks EpochGreedy's `(c′, c-scale)` by mean final regret over pilot replications.
///
/// Pilot streams come from `pilot_seed`, which should differ from the
/// evaluation seed.
pub fn tune_epoch_greedy(
    instance: &ProblemInstance,
    base: &EpochGreedyParams,
    horizon: Horizon,
    c_primes: &[f64],
    scales: &[f64],
    pilot_reps: usize,
    pilot_seed: u64,
) -> Result<EpochGreedyParams> {
    let mut best: Option<(f64, EpochGreedyParams)> = None;
    for &c_prime in c_primes {
        for &c_scale in scales {
            let params = EpochGreedyParams { c_prime, c_scale, c: None, ..base.clone() };
            let cfg = RunConfig::new("pilot", PolicySpec::EpochGreedy(params.clone()), horizon, pilot_reps, pilot_seed);
            let traces = run_replications(instance, &cfg)?;
            let r = traces.iter().map(final_iteration_regret).sum::<f64>() / traces.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, params));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| HarnessError::Config("empty tuning grid".into()))
}

fn final_iteration_regret(t: &RunTrace) -> f64 {
    t.projected().last().map_or(0.0, |p| p.1)
}

// ---------------------------------------------------------------------------
// Exact audits

/// Points of the deterministic audit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub taus: Vec<u64>,
    pub gammas: Vec<f64>,
    /// `(τ₀, ζ)` pairs for the schedule audit.
    pub schedules: Vec<(u64, u64)>,
    /// Pulls per schedule audit.
    pub pulls: u64,
    /// Steps per Fill audit.
    pub fill_steps: u64,
    /// Count literal ℓ1 Fill violations as audit failures.
    #[serde(default)]
    pub strict_fill: bool,
}

impl Default for AuditGrid {
    fn default() -> Self {
        Self {
            taus: (1..=50).collect(),
            gammas: vec![0.5, 0.9, 1.0],
            schedules: vec![(1, 1), (2, 1), (5, 2), (40, 1)],
            pulls: 200,
            fill_steps: 50,
            strict_fill: false,
        }
    }
}

/// Absolute slack granted to every comparison for floating-point roundoff.
pub const AUDIT_SLACK: f64 = 1e-12;

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCase {
    pub arm: usize,
    pub beta: Vec<f64>,
    /// `τ`, the pull count `T`, or the step count `n`, depending on the suite.
    pub t: u64,
    pub gamma: f64,
    pub schedule: Option<(u64, u64)>,
    pub lhs: f64,
    pub rhs: f64,
}

impl AuditCase {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    /// Whether a violation here fails the audit.
    pub gating: bool,
    pub checks: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub max_slack: f64,
    pub tightest: Option<AuditCase>,
    /// Up to [`SuiteReport::KEEP`] violating cases with full inputs.
    pub violating: Vec<AuditCase>,
}

impl SuiteReport {
    pub const KEEP: usize = 20;

    fn new(name: &str, gating: bool) -> Self {
        Self {
            name: name.to_string(),
            gating,
            checks: 0,
            violations: 0,
            min_slack: f64::INFINITY,
            max_slack: f64::NEG_INFINITY,
            tightest: None,
            violating: Vec::new(),
        }
    }

    fn record(&mut self, case: AuditCase) {
        self.checks += 1;
        let s = case.slack();
        self.max_slack = self.max_slack.max(s);
        if case.lhs > case.rhs + AUDIT_SLACK {
            self.violations += 1;
            if self.violating.len() < Self::KEEP {
                self.violating.push(case.clone());
            }
        }
        if s < self.min_slack {
            self.min_slack = s;
            self.tightest = Some(case);
        }
    }

    fn merge(&mut self, other: SuiteReport) {
        self.gating |= other.gating;
        self.checks += other.checks;
        self.violations += other.violations;
        self.max_slack = self.max_slack.max(other.max_slack);
        if other.min_slack < self.min_slack {
            self.min_slack = other.min_slack;
            self.tightest = other.tightest;
        }
        let room = Self::KEEP.saturating_sub(self.violating.len());
        self.violating.extend(other.violating.into_iter().take(room));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub instance_id: String,
    pub suites: Vec<SuiteReport>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| !s.gating || s.violations == 0)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }

    /// Folds another report's suites into this one by name.
    pub fn merge(&mut self, other: AuditReport) {
        for s in other.suites {
            match self.suites.iter_mut().find(|x| x.name == s.name) {
                Some(x) => x.merge(s),
                None => self.suites.push(s),
            }
        }
    }
}

/// Point masses, the uniform distribution, `β₁` and `π`.
pub fn audit_betas(instance: &ProblemInstance, arm: usize) -> Vec<StateDistribution> {
    let s = instance.states();
    let mut out: Vec<StateDistribution> = (0..s).map(|i| StateDistribution::point_mass(s, i)).collect();
    out.push(StateDistribution::uniform(s));
    out.push(instance.beta1().clone());
    out.push(instance.stats(arm).pi.clone());
    out
}

pub const SUITE_LEMMA1: &str = "expected_reward";
pub const SUITE_LEMMA2: &str = "schedule_mean";
pub const SUITE_FILL: &str = "fill_l1";
pub const SUITE_FILL_TV: &str = "fill_tv";

/// Exact checks, no sampling:
///
/// * `expected_reward`: `|μ_j − E[r̄ | β, τ]| ≤ C_j Υ_j(τ)/S(τ)`;
/// * `schedule_mean`: `|μ_j − (1/T) Σ_i E[r̄_i]| ≤ L_j(T)/T` along the
///   epochs `τ₀ + ζ(i−1)` with the state distribution carried over;
/// * `fill_l1`: `4‖βPⁿ − π‖₁² ≤ χ₀² λ₂(M)ⁿ`, gating only with `strict_fill`
///   since this form fails on simple two-state chains;
/// * `fill_tv`: `‖βPⁿ − π‖₁² ≤ χ₀² λ₂(M)ⁿ`, the total-variation form.
pub fn audit_inequalities(instance: &ProblemInstance, instance_id: &str, grid: &AuditGrid) -> Result<AuditReport> {
    let mut lemma1 = SuiteReport::new(SUITE_LEMMA1, true);
    let mut lemma2 = SuiteReport::new(SUITE_LEMMA2, true);
    let mut fill = SuiteReport::new(SUITE_FILL, grid.strict_fill);
    let mut fill_tv = SuiteReport::new(SUITE_FILL_TV, true);

    for &gamma in &grid.gammas {
        let inst = instance.with_gamma(gamma)?;
        let branch = Branch::for_stats(gamma, inst.all_stats());
        for arm in 0..inst.m() {
            let stats = inst.stats(arm);
            let mu = inst.mu(arm);
            for beta in audit_betas(&inst, arm) {
                for &tau in &grid.taus {
                    let r = environment::expected_smoothed_reward(&inst, arm, &beta, tau, gamma)?;
                    let rhs = stats.c * bounds::upsilon(stats, tau, branch) / environment::discount_mass(gamma, tau);
                    lemma1.record(AuditCase {
                        arm,
                        beta: beta.probs().to_vec(),
                        t: tau,
                        gamma,
                        schedule: None,
                        lhs: (mu - r).abs(),
                        rhs,
                    });
                }
                for &(tau0, zeta) in &grid.schedules {
                    let schedule = schedule_of(tau0, zeta)?;
                    let mut cur = beta.clone();
                    let mut sum = 0.0;
                    for t in 1..=grid.pulls {
                        let tau = schedule.epoch_length(t - 1);
                        let (r, next) = environment::expected_epoch(&inst, arm, &cur, tau, gamma)?;
                        sum += r;
                        cur = next;
                        let rhs = bounds::l_bound(stats, schedule, t, branch) / t as f64;
                        lemma2.record(AuditCase {
                            arm,
                            beta: beta.probs().to_vec(),
                            t,
                            gamma,
                            schedule: Some((tau0, zeta)),
                            lhs: (mu - sum / t as f64).abs(),
                            rhs,
                        });
                    }
                }
            }
        }
    }
    for arm in 0..instance.m() {
        let (l1, tv) = fill_suites(instance.transition(arm), &audit_betas(instance, arm), grid.fill_steps, arm)?;
        fill.merge(l1);
        fill_tv.merge(tv);
    }
    Ok(AuditReport { instance_id: instance_id.to_string(), suites: vec![lemma1, lemma2, fill, fill_tv] })
}

/// Fill-bound checks for one chain over the given starting distributions.
pub fn fill_suites(
    p: &chain::TransitionMatrix,
    betas: &[StateDistribution],
    steps: u64,
    arm: usize,
) -> Result<(SuiteReport, SuiteReport)> {
    let mut l1 = SuiteReport::new(SUITE_FILL, false);
    let mut tv = SuiteReport::new(SUITE_FILL_TV, true);
    let stats = chain::chain_stats(p, 1.0).map_err(|source| EnvError::Chain { arm, source })?;
    for beta in betas {
        let chi = beta.chi_squared(&stats.pi);
        let mut cur = beta.clone();
        for n in 1..=steps {
            cur = cur.step(p);
            let d = cur.l1_distance(&stats.pi);
            let rhs = 4.0 * chain::fill_bound(chi, stats.lambda2_m, n);
            let case = |lhs: f64| AuditCase { arm, beta: beta.probs().to_vec(), t: n, gamma: 1.0, schedule: None, lhs, rhs };
            l1.record(case(4.0 * d * d));
            tv.record(case(d * d));
        }
    }
    Ok((l1, tv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn mix64_separates_streams() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| mix64(42, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(mix64(1, 0), mix64(0, 1));
    }

    #[test]
    fn policy_spec_json() {
        let spec = PolicySpec::from_id("epoch_greedy", &serde_json::json!({"c_prime": 16.0})).unwrap();
        let PolicySpec::EpochGreedy(p) = &spec else { panic!() };
        assert_eq!(p.c_prime, 16.0);
        assert_eq!(p.tau0, 1);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.starts_with("{\"id\":\"epoch_greedy\""));
        let back: PolicySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(PolicySpec::from_id("nope", &serde_json::Value::Null).is_err());
        assert!(PolicySpec::from_id("epoch_ucb", &serde_json::json!({"bogus": 1})).is_err());
        for id in POLICY_IDS {
            assert_eq!(PolicySpec::from_id(id, &serde_json::Value::Null).unwrap().id(), id);
        }
    }

    #[test]
    fn trace_invariants() {
        let inst = instances::example1(0.1).unwrap();
        let cfg = RunConfig::new("ex1", PolicySpec::EpochUcb(Default::default()), Horizon::Epochs(50), 1, 3);
        let t = run_once(&inst, &cfg, 0).unwrap();
        assert_eq!(t.decisions(), 50);
        assert_eq!(t.records.iter().map(|r| r.tau).sum::<u64>(), t.total_iterations());
        let sum: f64 = t.records.iter().map(|r| inst.mu_star() - r.smoothed_reward).sum();
        assert!((sum - t.cumulative_regret).abs() < 1e-9);
        assert_eq!(t.plays.iter().sum::<u64>(), 50);
        assert_eq!(run_once(&inst, &cfg, 0).unwrap(), t);
        assert_ne!(run_once(&inst, &cfg, 1).unwrap(), t);
    }

    #[test]
    fn iteration_budget_is_met_exactly() {
        let inst = instances::example1(0.1).unwrap();
        for spec in [PolicySpec::EpochUcb(Default::default()), PolicySpec::Ucb1] {
            let cfg = RunConfig::new("ex1", spec, Horizon::Iterations(1234), 1, 0);
            assert_eq!(run_once(&inst, &cfg, 0).unwrap().total_iterations(), 1234);
        }
    }

    #[test]
    fn granularity_is_enforced() {
        let inst = instances::example1(0.1).unwrap();
        let cfg = RunConfig::new("ex1", PolicySpec::Ucb1, Horizon::Epochs(5), 1, 0);
        assert!(run_epoch_policy(&inst, &cfg, 0).is_err());
        assert!(run_iteration_policy(&inst, &cfg, 0).is_ok());
    }

    #[test]
    fn time_averaged_projection_is_exact() {
        // τ(μ* − r̄) summed over epochs equals the per-iteration regret sum.
        let inst = instances::example1(0.1).unwrap();
        let cfg = RunConfig::new("ex1", PolicySpec::EpochUcb(Default::default()), Horizon::Epochs(30), 1, 9);
        let t = run_once(&inst, &cfg, 0).unwrap();
        let projected = t.projected().last().unwrap().1;
        let by_iteration: f64 = t.records.iter().map(|r| r.tau as f64 * inst.mu_star() - r.tau as f64 * r.smoothed_reward).sum();
        assert!((projected - by_iteration).abs() < 1e-9);
    }

    #[test]
    fn aggregate_stderr() {
        let c = AggregateCurve::from_series(vec![1.0, 2.0], &[vec![1.0, 2.0], vec![3.0, 2.0]], false);
        assert_eq!(c.mean, vec![2.0, 2.0]);
        assert!((c.stderr[0] - 1.0).abs() < 1e-15);
        assert_eq!(c.stderr[1], 0.0);
        let single = AggregateCurve::from_series(vec![1.0], &[vec![5.0]], false);
        assert_eq!(single.stderr, vec![0.0]);
    }

    #[test]
    fn late_window_slope_of_line() {
        let x: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v).collect();
        let c = AggregateCurve::from_series(x, &[y], false);
        assert!((c.late_window_slope() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_arm_plays_every_epoch() {
        let inst = instances::penalty_example(0.1).unwrap();
        let cfg = RunConfig::new("pen", PolicySpec::EpochUcb(Default::default()), Horizon::Epochs(40), 8, 1);
        let est = estimate_suboptimal_plays(&inst, &cfg).unwrap();
        assert_eq!(est[0].mean, 40.0);
        assert_eq!(est[0].stderr, 0.0);
    }

    #[test]
    fn audit_stationary_start_has_zero_lhs() {
        let inst = instances::example1(0.1).unwrap();
        let grid = AuditGrid { taus: vec![1, 5], gammas: vec![1.0], schedules: vec![(1, 1)], pulls: 5, fill_steps: 5, strict_fill: false };
        let report = audit_inequalities(&inst, "ex1", &grid).unwrap();
        assert!(report.passed(), "{report:?}");
        // The literal ℓ1 form fails here already at n = 1.
        assert!(report.suite(SUITE_FILL).unwrap().violations > 0);
        let strict = audit_inequalities(&inst, "ex1", &AuditGrid { strict_fill: true, ..grid }).unwrap();
        assert!(!strict.passed());
        let pi = inst.stats(0).pi.clone();
        let r = environment::expected_smoothed_reward(&inst, 0, &pi, 7, 1.0).unwrap();
        assert!((r - inst.mu(0)).abs() < 1e-12);
    }
}
