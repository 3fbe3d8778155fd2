use rand::Rng;

use super::{argmax, confidence_window, ArmStats, EpochSchedule, Granularity, GreedyConfig, Policy, PolicyError, SimRng};
use crate::bounds::{self, Branch};
use crate::chain::{ChainStats, StateDistribution};

/// Evaluates `L_j^γ(n)` for every arm of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBound {
    stats: Vec<ChainStats>,
    schedule: EpochSchedule,
    branch: Branch,
}

impl PenaltyBound {
    pub fn new(stats: Vec<ChainStats>, schedule: EpochSchedule, gamma: f64) -> Self {
        let branch = Branch::for_stats(gamma, &stats);
        Self { stats, schedule, branch }
    }

    /// `L ≡ 0`, reducing the confidence window to its martingale term.
    pub fn zero(m: usize, schedule: EpochSchedule) -> Self {
        let stats = (0..m)
            .map(|_| {
                let mut s = ChainStats::from_parts(StateDistribution::uniform(1), 0.0, 1.0).expect("valid constants");
                s.c = 0.0;
                s
            })
            .collect();
        Self { stats, schedule, branch: Branch::TimeAveraged }
    }

    pub fn m(&self) -> usize {
        self.stats.len()
    }

    pub fn l(&self, arm: usize, n: u64) -> f64 {
        bounds::l_bound(&self.stats[arm], self.schedule, n, self.branch)
    }

    pub fn kappa(&self, n: u64) -> f64 {
        bounds::kappa(|j, i| self.l(j, i), n, self.m())
    }
}

/// The arm maximizing `r̄_j + L_j(T_j)/T_j + √(6 ln k / T_j)`.
pub fn epochucb_select(k: u64, stats: &[ArmStats], l: &PenaltyBound) -> Result<usize, PolicyError> {
    if let Some(j) = stats.iter().position(|s| s.pulls == 0) {
        return Err(PolicyError::UninitializedArm(j));
    }
    Ok(argmax(
        stats
            .iter()
            .enumerate()
            .map(|(j, s)| s.mean_reward + confidence_window(k, s.pulls, l.l(j, s.pulls))),
    ))
}

/// Explore uniformly with probability `ε_k`, else exploit the best empirical mean.
///
/// One uniform draw decides exploration; exploring consumes a second draw
/// for the arm. Arms never pulled count as mean zero.
pub fn epochgreedy_select<R: Rng + ?Sized>(k: u64, stats: &[ArmStats], config: &GreedyConfig, rng: &mut R) -> usize {
    let eps = config.epsilon(stats.len(), k);
    if rng.random::<f64>() >= eps {
        argmax(stats.iter().map(|s| s.mean_reward))
    } else {
        rng.random_range(0..stats.len())
    }
}

/// Upper-confidence epoch policy. Each arm is played once for `τ₀` first.
#[derive(Debug, Clone)]
pub struct EpochUcb {
    stats: Vec<ArmStats>,
    schedule: EpochSchedule,
    penalty: PenaltyBound,
}

impl EpochUcb {
    pub fn new(schedule: EpochSchedule, penalty: PenaltyBound) -> Self {
        Self { stats: vec![ArmStats::default(); penalty.m()], schedule, penalty }
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }
}

impl Policy for EpochUcb {
    fn name(&self) -> &str {
        "epoch_ucb"
    }

    fn granularity(&self) -> Granularity {
        Granularity::Epoch
    }

    fn select(&mut self, k: u64, _beta: &StateDistribution, _rng: &mut SimRng) -> usize {
        match epochucb_select(k, &self.stats, &self.penalty) {
            Ok(j) => j,
            Err(PolicyError::UninitializedArm(j)) => j,
            Err(e) => unreachable!("{e}"),
        }
    }

    fn epoch_length(&self, arm: usize) -> u64 {
        self.schedule.epoch_length(self.stats[arm].pulls)
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.stats[arm].update_mean(reward);
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls).collect()
    }
}

/// ε-greedy epoch policy with `ε_k = min(1, cm/(d²k))`.
#[derive(Debug, Clone)]
pub struct EpochGreedy {
    stats: Vec<ArmStats>,
    schedule: EpochSchedule,
    config: GreedyConfig,
}

impl EpochGreedy {
    pub fn new(m: usize, schedule: EpochSchedule, config: GreedyConfig) -> Self {
        Self { stats: vec![ArmStats::default(); m], schedule, config }
    }

    pub fn config(&self) -> &GreedyConfig {
        &self.config
    }
}

impl Policy for EpochGreedy {
    fn name(&self) -> &str {
        "epoch_greedy"
    }

    fn granularity(&self) -> Granularity {
        Granularity::Epoch
    }

    fn select(&mut self, k: u64, _beta: &StateDistribution, rng: &mut SimRng) -> usize {
        epochgreedy_select(k, &self.stats, &self.config, rng)
    }

    fn epoch_length(&self, arm: usize) -> u64 {
        self.schedule.epoch_length(self.stats[arm].pulls)
    }

    fn update(&mut self, arm: usize, reward: f64, _next_beta: &StateDistribution) {
        self.stats[arm].update_mean(reward);
    }

    fn pulls(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.pulls).collect()
    }
}
