//! Per-iteration baselines. Each plays one arm per iteration and sees the
//! instantaneous reward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, epochgreedy_select, ArmStats, Granularity, GreedyConfig, Policy, SimRng};
use crate::chain::StateDistribution;

fn first_unpulled(stats: &[ArmStats]) -> Option<usize> {
    stats.iter().position(|s| s.pulls == 0)
}

/// UCB1: `r̄_j + √(2 ln t / T_j)`, trying every arm once first.
pub fn ucb1_select(t: u64, stats: &[ArmStats]) -> usize {
    if let Some(j) = first_unpulled(stats) {
        return j;
    }
    let lt = (t as f64).ln();
    argmax(stats.iter().map(|s| s.mean_reward + (2.0 * lt / s.pulls as f64).sqrt()))
}

/// UCB1-Tuned: `r̄_j + √((ln t / T_j) min(1/4, V_j))` with
/// `V_j = s_j² + √(2 ln t / T_j)`.
pub fn ucb_tuned_select(t: u64, stats: &[ArmStats]) -> usize {
    if let Some(j) = first_unpulled(stats) {
        return j;
    }
    let lt = (t as f64).ln();
    argmax(stats.iter().map(|s| {
        let n = s.pulls as f64;
        let v = s.variance() + (2.0 * lt / n).sqrt();
        s.mean_reward + (lt / n * v.min(0.25)).sqrt()
    }))
}

macro_rules! iteration_policy_common {
    () => {
        fn granularity(&self) -> Granularity {
            Granularity::Iteration
        }

        fn epoch_length(&self, _arm: usize) -> u64 {
            1
        }
    };
}

#[derive(Debug, Clone)]
pub struct Ucb1 {
    stats: Vec<ArmStats>,
}

impl Ucb1 {
    pub fn new(m: usize) -> Self {
        Self { stats: vec![ArmStats::default(); m] }
    }
}

impl Policy for Ucb1 {
    iteration_policy_common!();

    fn name(&self) -> &str {
        "ucb1"
    }

    fn select(&mut self, k: u64, _beta: &StateDistribution, _rng: &mut SimRng) -> usize {
        ucb1_select(k, &self.stats)
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.stats[arm].update_mean(reward);
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls).collect()
    }
}

#[derive(Debug, Clone)]
pub struct UcbTuned {
    stats: Vec<ArmStats>,
}

impl UcbTuned {
    pub fn new(m: usize) -> Self {
        Self { stats: vec![ArmStats::default(); m] }
    }
}

impl Policy for UcbTuned {
    iteration_policy_common!();

    fn name(&self) -> &str {
        "ucb_tuned"
    }

    fn select(&mut self, k: u64, _beta: &StateDistribution, _rng: &mut SimRng) -> usize {
        ucb_tuned_select(k, &self.stats)
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.stats[arm].update_mean(reward);
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls).collect()
    }
}

/// ε-greedy over single iterations with `ε_t = min(1, cm/(d²t))`.
#[derive(Debug, Clone)]
pub struct EpsGreedy {
    stats: Vec<ArmStats>,
    config: GreedyConfig,
}

impl EpsGreedy {
    pub fn new(m: usize, c: f64, d: f64) -> Self {
        Self { stats: vec![ArmStats::default(); m], config: GreedyConfig::with_c(c, d, 9.0, 0.0) }
    }
}

impl Policy for EpsGreedy {
    iteration_policy_common!();

    fn name(&self) -> &str {
        "eps_greedy"
    }

    fn select(&mut self, k: u64, _beta: &StateDistribution, rng: &mut SimRng) -> usize {
        epochgreedy_select(k, &self.stats, &self.config, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.stats[arm].update_mean(reward);
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls).collect()
    }
}

/// EXP3 selection probabilities `(1 − γ) w_j / Σw + γ/m` from log-weights.
pub fn exp3_probabilities(log_weights: &[f64], gamma: f64) -> Vec<f64> {
    let m = log_weights.len() as f64;
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| (1.0 - gamma) * x / total + gamma / m).collect()
}

/// One EXP3 update on log-weights: `log w_a += γ (r / p_a) / m`.
///
/// Weights are kept in log space and shifted so the largest is zero, which
/// keeps them finite over long horizons without changing the probabilities.
pub fn exp3_step(log_weights: &[f64], arm: usize, reward: f64, gamma: f64) -> Vec<f64> {
    let p = exp3_probabilities(log_weights, gamma);
    let m = log_weights.len() as f64;
    let mut out = log_weights.to_vec();
    out[arm] += gamma * (reward / p[arm]) / m;
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for l in &mut out {
        *l -= top;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    gamma: f64,
    pulls: Vec<u64>,
}

impl Exp3 {
    /// Mixing `γ = min(1, √(m ln m / ((e − 1) T)))` for a horizon of `T` iterations.
    pub fn new(m: usize, horizon: u64) -> Self {
        let mf = m as f64;
        let gamma = (mf * mf.ln() / ((std::f64::consts::E - 1.0) * horizon.max(1) as f64)).sqrt().min(1.0);
        Self::with_gamma(m, gamma)
    }

    pub fn with_gamma(m: usize, gamma: f64) -> Self {
        Self { log_weights: vec![0.0; m], gamma, pulls: vec![0; m] }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn probabilities(&self) -> Vec<f64> {
        exp3_probabilities(&self.log_weights, self.gamma)
    }
}

impl Policy for Exp3 {
    iteration_policy_common!();

    fn name(&self) -> &str {
        "exp3"
    }

    fn select(&mut self, _k: u64, _beta: &StateDistribution, rng: &mut SimRng) -> usize {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, q) in p.iter().enumerate() {
            acc += q;
            if u < acc {
                return j;
            }
        }
        p.len() - 1
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.log_weights = exp3_step(&self.log_weights, arm, reward, self.gamma);
        self.pulls[arm] += 1;
    }

    fn pulls(&self) -> Vec<u64> {
        self.pulls.clone()
    }
}

/// Feature vector `φ(β, a)`: `β` copied into block `a` of an `|Θ| m` vector.
pub fn linq_features(beta: &StateDistribution, action: usize, m: usize) -> Vec<f64> {
    let s = beta.len();
    let mut phi = vec![0.0; s * m];
    phi[action * s..(action + 1) * s].copy_from_slice(beta.probs());
    phi
}

fn q_value(w: &[f64], beta: &StateDistribution, action: usize) -> f64 {
    let s = beta.len();
    w[action * s..(action + 1) * s].iter().zip(beta.probs()).map(|(a, b)| a * b).sum()
}

/// Semi-gradient TD(0) update with step `1/√k`:
/// `w ← w + (r + γ_rl max_a′ Q(β′, a′) − Q(β, a)) φ(β, a) / √k`.
pub fn linq_step(
    w: &[f64],
    beta: &StateDistribution,
    action: usize,
    reward: f64,
    next_beta: &StateDistribution,
    k: u64,
    gamma_rl: f64,
) -> Vec<f64> {
    let s = beta.len();
    let m = w.len() / s;
    let next_max = (0..m).map(|a| q_value(w, next_beta, a)).fold(f64::NEG_INFINITY, f64::max);
    let td = reward + gamma_rl * next_max - q_value(w, beta, action);
    let step = 1.0 / (k as f64).sqrt();
    let mut out = w.to_vec();
    for (o, b) in out[action * s..(action + 1) * s].iter_mut().zip(beta.probs()) {
        *o += step * td * b;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinQConfig {
    pub gamma_rl: f64,
    /// Exploration `ε_k = exp(−rate k)`.
    pub eps_rate: f64,
}

impl LinQConfig {
    /// `γ_rl = 0.9`, with `ε` reaching 0.04 at half the horizon.
    pub fn for_horizon(horizon: u64) -> Self {
        Self { gamma_rl: 0.9, eps_rate: (1.0f64 / 0.04).ln() / (horizon.max(2) as f64 / 2.0) }
    }

    pub fn epsilon(&self, k: u64) -> f64 {
        (-self.eps_rate * k as f64).exp()
    }
}

/// Linear Q-learning on the (privileged) state distribution.
#[derive(Debug, Clone)]
pub struct LinQ {
    w: Vec<f64>,
    m: usize,
    config: LinQConfig,
    last_beta: Option<StateDistribution>,
    updates: u64,
    pulls: Vec<u64>,
}

impl LinQ {
    pub fn new(m: usize, states: usize, config: LinQConfig) -> Self {
        Self { w: vec![0.0; m * states], m, config, last_beta: None, updates: 0, pulls: vec![0; m] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

impl Policy for LinQ {
    iteration_policy_common!();

    fn name(&self) -> &str {
        "linq"
    }

    fn select(&mut self, k: u64, beta: &StateDistribution, rng: &mut SimRng) -> usize {
        self.last_beta = Some(beta.clone());
        if rng.random::<f64>() < self.config.epsilon(k) {
            rng.random_range(0..self.m)
        } else {
            argmax((0..self.m).map(|a| q_value(&self.w, beta, a)))
        }
    }

    fn update(&mut self, arm: usize, reward: f64, next_beta: &StateDistribution) {
        let beta = self.last_beta.take().expect("select precedes update");
        self.updates += 1;
        self.w = linq_step(&self.w, &beta, arm, reward, next_beta, self.updates, self.config.gamma_rl);
        self.pulls[arm] += 1;
    }

    fn pulls(&self) -> Vec<u64> {
        self.pulls.clone()
    }
}
