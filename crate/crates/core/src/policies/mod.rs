//! Decision rules: the epoch-mixing policies and the per-iteration baselines.
//!
//! Every policy implements [`Policy`]. The harness asks for an arm, asks how
//! long to play it, runs the epoch, and reports the smoothed reward back.
//! Iteration baselines always answer an epoch length of one.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::StateDistribution;

mod baselines;
mod epoch;

pub use baselines::{
    exp3_probabilities, exp3_step, linq_features, linq_step, ucb1_select, ucb_tuned_select, EpsGreedy, Exp3, LinQ,
    LinQConfig, Ucb1, UcbTuned,
};
pub use epoch::{epochgreedy_select, epochucb_select, EpochGreedy, EpochUcb, PenaltyBound};

/// Random stream type used by all simulations.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("arm {0} has not been pulled yet")]
    UninitializedArm(usize),
    #[error("invalid policy parameter: {0}")]
    Invalid(String),
}

/// Epoch lengths `τ = τ₀ + ζ T_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub tau0: u64,
    pub zeta: u64,
}

impl EpochSchedule {
    pub fn new(tau0: u64, zeta: u64) -> Result<Self, PolicyError> {
        if tau0 == 0 || zeta == 0 {
            return Err(PolicyError::Invalid(format!("schedule needs tau0 >= 1 and zeta >= 1, got ({tau0}, {zeta})")));
        }
        Ok(Self { tau0, zeta })
    }

    /// Constant epochs of length `tau0` (`ζ = 0`). Outside the analysed
    /// setting; kept for demonstrating why epochs must grow.
    pub fn constant(tau0: u64) -> Self {
        Self { tau0: tau0.max(1), zeta: 0 }
    }

    pub fn is_conforming(&self) -> bool {
        self.tau0 >= 1 && self.zeta >= 1
    }

    pub fn epoch_length(&self, pulls: u64) -> u64 {
        self.tau0 + self.zeta * pulls
    }
}

/// Per-arm running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pub pulls: u64,
    pub mean_reward: f64,
    /// Running mean of squared rewards, for variance-aware indices.
    pub mean_sq: f64,
}

impl ArmStats {
    /// Folds in one observation: `r̄ ← r̄ + (r − r̄)/(T + 1)`, then `T ← T + 1`.
    pub fn update_mean(&mut self, reward: f64) {
        let n = (self.pulls + 1) as f64;
        self.mean_reward += (reward - self.mean_reward) / n;
        self.mean_sq += (reward * reward - self.mean_sq) / n;
        self.pulls += 1;
    }

    /// Biased sample variance of the observations.
    pub fn variance(&self) -> f64 {
        (self.mean_sq - self.mean_reward * self.mean_reward).max(0.0)
    }
}

/// `L/T + √(6 ln k / T)`.
pub fn confidence_window(k: u64, pulls: u64, l_value: f64) -> f64 {
    let t = pulls as f64;
    l_value / t + (6.0 * (k as f64).ln() / t).sqrt()
}

/// Index of the largest value, lowest index on ties. NaNs never win.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Constants of the EpochGreedy exploration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub c: f64,
    pub d: f64,
    pub c_prime: f64,
    pub kappa: f64,
    pub nu: f64,
    pub c_dblprime: f64,
}

impl GreedyConfig {
    /// The smallest admissible `c = c′ν²`, with `ν = max(κ, d/√c′)`.
    pub fn theory(d: f64, c_prime: f64, kappa: f64) -> Result<Self, PolicyError> {
        if !(c_prime > 8.0) {
            return Err(PolicyError::Invalid(format!("c' must exceed 8, got {c_prime}")));
        }
        if !(d > 0.0) {
            return Err(PolicyError::Invalid(format!("d must be positive, got {d}")));
        }
        let nu = kappa.max(d / c_prime.sqrt());
        Ok(Self::with_c(c_prime * nu * nu, d, c_prime, kappa))
    }

    /// Explicit `c`; [`GreedyConfig::is_conforming`] reports whether it is admissible.
    pub fn with_c(c: f64, d: f64, c_prime: f64, kappa: f64) -> Self {
        let nu = kappa.max(d / c_prime.sqrt());
        let c_dblprime = 4.0 * c_prime / ((c_prime / 2.0).sqrt() - 2.0).powi(2);
        Self { c, d, c_prime, kappa, nu, c_dblprime }
    }

    /// Same constants with `c` multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self { c: self.c * scale, ..*self }
    }

    pub fn is_conforming(&self) -> bool {
        self.c_prime > 8.0 && self.c >= self.c_prime * self.nu * self.nu * (1.0 - 1e-12)
    }

    /// `ε_k = min(1, cm/(d²k))`.
    pub fn epsilon(&self, m: usize, k: u64) -> f64 {
        (self.c * m as f64 / (self.d * self.d * k as f64)).min(1.0)
    }

    /// `⌈cm/d²⌉`, the first epoch where the probability bound applies.
    pub fn validity_threshold(&self, m: usize) -> u64 {
        (self.c * m as f64 / (self.d * self.d)).ceil() as u64
    }
}

/// Whether a policy commits to epochs or plays single iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Epoch,
    Iteration,
}

/// A bandit policy driven by the harness.
///
/// `k` counts decisions from 1. `beta` is the state distribution before the
/// decision; only policies that model the hidden state look at it.
pub trait Policy: Send {
    fn name(&self) -> &str;
    fn granularity(&self) -> Granularity;
    fn select(&mut self, k: u64, beta: &StateDistribution, rng: &mut SimRng) -> usize;
    fn epoch_length(&self, arm: usize) -> u64;
    fn update(&mut self, arm: usize, reward: f64, next_beta: &StateDistribution);
    fn pulls(&self) -> Vec<u64>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epoch_length_examples() {
        assert_eq!(EpochSchedule::new(40, 1).unwrap().epoch_length(0), 40);
        assert_eq!(EpochSchedule::new(1, 1).unwrap().epoch_length(5), 6);
        assert_eq!(EpochSchedule::new(3, 2).unwrap().epoch_length(10), 23);
        assert!(EpochSchedule::new(3, 0).is_err());
        assert!(!EpochSchedule::constant(3).is_conforming());
    }

    #[test]
    fn confidence_window_examples() {
        assert!((confidence_window(1, 7, 0.7) - 0.1).abs() < 1e-15);
        // The window is one exactly when T = 6 ln k (L = 0): check w²T = 6 ln k.
        for (k, t) in [(403u64, 36u64), (20, 18), (1000, 41)] {
            let w = confidence_window(k, t, 0.0);
            assert!((w * w * t as f64 - 6.0 * (k as f64).ln()).abs() < 1e-12);
        }
        let w = confidence_window(403, 36, 0.0);
        assert!((w - 1.0).abs() < 1e-3);
        // k = e², T = 1, L = 0.5: 0.5 + √12.
        assert!((0.5 + (6.0 * 2.0f64).sqrt() - 3.9641).abs() < 1e-4);
        let w7 = confidence_window(7, 1, 0.5);
        assert!((w7 - (0.5 + (6.0 * 7f64.ln()).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn epsilon_examples() {
        let cfg = GreedyConfig::with_c(1.0, 1.0, 9.0, 0.0);
        assert_eq!(cfg.epsilon(2, 8), 0.25);
        assert_eq!(cfg.epsilon(2, 1), 1.0);
        assert_eq!(cfg.epsilon(2, 2), 1.0);
        let mut prev = 1.0;
        for k in 1..10_000 {
            let e = cfg.epsilon(2, k);
            assert!(e <= prev);
            prev = e;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn greedy_config_constants() {
        let cfg = GreedyConfig::theory(0.5, 9.0, 2.0).unwrap();
        assert_eq!(cfg.nu, 2.0);
        assert_eq!(cfg.c, 36.0);
        assert!(cfg.is_conforming());
        assert!(!cfg.scaled(0.1).is_conforming());
        let small = GreedyConfig::theory(0.9, 9.0, 0.0).unwrap();
        assert!((small.nu - 0.3).abs() < 1e-15);
        assert!((small.c - 0.81).abs() < 1e-12);
        assert!(GreedyConfig::theory(0.5, 8.0, 1.0).is_err());
    }

    #[test]
    fn update_mean_examples() {
        let mut s = ArmStats::default();
        s.update_mean(0.7);
        assert_eq!(s.mean_reward, 0.7);
        let mut s = ArmStats::default();
        s.update_mean(0.2);
        s.update_mean(0.4);
        assert!((s.mean_reward - 0.3).abs() < 1e-15);
        assert_eq!(s.pulls, 2);
        assert!((s.variance() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax([0.5, 0.5, 0.2]), 0);
        assert_eq!(argmax([0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax([f64::NAN, 0.2]), 1);
    }

    proptest! {
        #[test]
        fn running_mean_matches_batch(xs in prop::collection::vec(0.0f64..=1.0, 1..1000)) {
            let mut s = ArmStats::default();
            for &x in &xs {
                s.update_mean(x);
            }
            let batch = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!((s.mean_reward - batch).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&s.mean_reward));
            prop_assert_eq!(s.pulls, xs.len() as u64);
        }

        #[test]
        fn epoch_length_nondecreasing(t0 in 1u64..100, z in 0u64..10, t in 0u64..1000) {
            let s = EpochSchedule { tau0: t0, zeta: z };
            prop_assert!(s.epoch_length(t + 1) >= s.epoch_length(t));
        }
    }
}
