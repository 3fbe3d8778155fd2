//! The simulated environment: reward kernels, problem instances, and epoch
//! execution.
//!
//! Every arm shares one state distribution `β`. Pulling arm `j` for an epoch of
//! `τ` iterations advances `β` through `P_j` once per iteration and returns a
//! single smoothed reward: the discount-weighted average of the `τ`
//! instantaneous rewards (or their plain average when `γ = 1`).

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{self, AssumptionReport, ChainError, ChainStats, StateDistribution, TransitionMatrix};

/// Discount factors at or below this are rejected as ill-conditioned.
pub const MIN_GAMMA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("arm {arm}: {source}")]
    Chain { arm: usize, source: ChainError },
    #[error("arm {arm} violates the chain assumptions ({report:?})")]
    AssumptionViolated { arm: usize, report: AssumptionReport },
    #[error("invalid reward kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid arm {arm} (instance has {m} arms)")]
    InvalidArm { arm: usize, m: usize },
    #[error("epoch length must be at least 1")]
    InvalidTau,
    #[error("discount factor {0} must lie in ({MIN_GAMMA}, 1]")]
    InvalidGamma(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Distribution(#[from] ChainError),
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// State-conditional reward distribution supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum RewardKernel {
    Bernoulli { p: f64 },
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Always pays `value`.
    Deterministic { value: f64 },
}

impl RewardKernel {
    /// Point mass at `r`.
    pub fn deterministic(r: f64) -> Self {
        RewardKernel::Deterministic { value: r }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RewardKernel::Bernoulli { p } => (0.0..=1.0).contains(&p),
            RewardKernel::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            RewardKernel::Uniform { lo, hi } => 0.0 <= lo && lo < hi && hi <= 1.0,
            RewardKernel::Deterministic { value } => (0.0..=1.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(EnvError::InvalidKernel(format!("{self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RewardKernel::Bernoulli { p } => p,
            RewardKernel::Beta { a, b } => a / (a + b),
            RewardKernel::Uniform { lo, hi } => 0.5 * (lo + hi),
            RewardKernel::Deterministic { value } => value,
        }
    }

    /// Draws one reward.
    ///
    /// Beta variates use the gamma ratio `X / (X + Y)` with `X ~ Γ(a, 1)`,
    /// `Y ~ Γ(b, 1)` drawn in that order from `rand_distr::Gamma`. Bernoulli
    /// and uniform draws consume one `f64` each; deterministic kernels none.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardKernel::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKernel::Beta { a, b } => {
                let x = Gamma::new(a, 1.0).expect("validated shape").sample(rng);
                let y = Gamma::new(b, 1.0).expect("validated shape").sample(rng);
                if x + y > 0.0 { x / (x + y) } else { a / (a + b) }
            }
            RewardKernel::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            RewardKernel::Deterministic { value } => value,
        }
    }
}

/// How the hidden state moves inside an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Each iteration draws `θ_t ~ β_t` and then sets `β_{t+1} = β_t P`.
    #[default]
    Distribution,
    /// A single trajectory: `θ_{t+1} ~ P(θ_t, ·)`; the epoch ends with `β` a point mass.
    Trajectory,
}

/// An `m`-arm bandit over a shared `|Θ|`-state chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    transitions: Vec<TransitionMatrix>,
    kernels: Vec<Vec<RewardKernel>>,
    beta1: StateDistribution,
    gamma: f64,
    stats: Vec<ChainStats>,
    mu: Vec<f64>,
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > MIN_GAMMA && gamma <= 1.0 {
        Ok(())
    } else {
        Err(EnvError::InvalidGamma(gamma))
    }
}

impl ProblemInstance {
    /// Validates every chain and kernel and precomputes the per-arm constants.
    pub fn new(
        transitions: Vec<TransitionMatrix>,
        kernels: Vec<Vec<RewardKernel>>,
        beta1: StateDistribution,
        gamma: f64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let m = transitions.len();
        if m == 0 {
            return Err(EnvError::Shape("no arms".into()));
        }
        if kernels.len() != m {
            return Err(EnvError::Shape(format!("{} kernel rows for {m} arms", kernels.len())));
        }
        let states = transitions[0].size();
        if beta1.len() != states {
            return Err(EnvError::Shape(format!("beta1 has {} entries, expected {states}", beta1.len())));
        }
        let mut stats = Vec::with_capacity(m);
        let mut mu = Vec::with_capacity(m);
        for (arm, (p, ks)) in transitions.iter().zip(&kernels).enumerate() {
            if p.size() != states {
                return Err(EnvError::Shape(format!("arm {arm} has {} states, expected {states}", p.size())));
            }
            if ks.len() != states {
                return Err(EnvError::Shape(format!("arm {arm} has {} kernels, expected {states}", ks.len())));
            }
            for k in ks {
                k.validate()?;
            }
            let report = chain::check_assumptions(p).map_err(|source| EnvError::Chain { arm, source })?;
            if !report.all_hold() {
                return Err(EnvError::AssumptionViolated { arm, report });
            }
            let s = chain::chain_stats(p, gamma).map_err(|source| EnvError::Chain { arm, source })?;
            mu.push(s.pi.probs().iter().zip(ks).map(|(w, k)| w * k.mean()).sum());
            stats.push(s);
        }
        Ok(Self { transitions, kernels, beta1, gamma, stats, mu })
    }

    /// Same chains and kernels under a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let stats = self
            .stats
            .iter()
            .map(|s| s.with_gamma(gamma))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { gamma, stats, ..self.clone() })
    }

    pub fn with_beta1(&self, beta1: StateDistribution) -> Result<Self> {
        if beta1.len() != self.states() {
            return Err(EnvError::Shape(format!("beta1 has {} entries, expected {}", beta1.len(), self.states())));
        }
        Ok(Self { beta1, ..self.clone() })
    }

    pub fn m(&self) -> usize {
        self.transitions.len()
    }

    pub fn states(&self) -> usize {
        self.beta1.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta1(&self) -> &StateDistribution {
        &self.beta1
    }

    pub fn transition(&self, arm: usize) -> &TransitionMatrix {
        &self.transitions[arm]
    }

    pub fn transitions(&self) -> &[TransitionMatrix] {
        &self.transitions
    }

    pub fn kernels(&self, arm: usize) -> &[RewardKernel] {
        &self.kernels[arm]
    }

    pub fn stats(&self, arm: usize) -> &ChainStats {
        &self.stats[arm]
    }

    pub fn all_stats(&self) -> &[ChainStats] {
        &self.stats
    }

    /// Expected stationary reward `μ_j = Σ_θ π_j(θ) E[r | θ, j]`.
    pub fn mu(&self, arm: usize) -> f64 {
        self.mu[arm]
    }

    pub fn mus(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_star(&self) -> f64 {
        self.mu[self.optimal_arm()]
    }

    /// Lowest-index arm attaining `max μ_j`.
    pub fn optimal_arm(&self) -> usize {
        self.mu
            .iter()
            .enumerate()
            .fold(0, |best, (j, &v)| if v > self.mu[best] { j } else { best })
    }

    /// Whether more than one arm attains the maximum stationary reward.
    pub fn optimal_is_tied(&self) -> bool {
        let star = self.mu_star();
        self.mu.iter().filter(|&&v| v == star).count() > 1
    }

    /// Reward gaps `Δ_j = μ* − μ_j`.
    pub fn gaps(&self) -> Vec<f64> {
        let star = self.mu_star();
        self.mu.iter().map(|v| star - v).collect()
    }

    /// Smallest gap over suboptimal arms; `None` when every arm is optimal.
    pub fn min_gap(&self) -> Option<f64> {
        let star = self.optimal_arm();
        self.gaps()
            .into_iter()
            .enumerate()
            .filter(|&(j, g)| j != star && g > 0.0)
            .map(|(_, g)| g)
            .reduce(f64::min)
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.m() {
            Ok(())
        } else {
            Err(EnvError::InvalidArm { arm, m: self.m() })
        }
    }
}

/// Result of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub smoothed_reward: f64,
    /// `S = Σ_t γ^{τ−1−t}`.
    pub discount_mass: f64,
    pub final_beta: StateDistribution,
    pub iterations: u64,
    /// Instantaneous rewards, kept only when requested.
    pub rewards: Option<Vec<f64>>,
}

/// `S(τ, γ)`: `τ` when `γ = 1`, else `(1 − γ^τ)/(1 − γ)`.
pub fn discount_mass(gamma: f64, tau: u64) -> f64 {
    if gamma == 1.0 {
        tau as f64
    } else {
        (1.0 - gamma.powf(tau as f64)) / (1.0 - gamma)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Roundoff left u above the final partial sum; take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Runs one epoch of `tau` iterations on `arm` starting from `beta`.
pub fn pull_arm<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    arm: usize,
    beta: &StateDistribution,
    tau: u64,
    rng: &mut R,
) -> Result<EpochOutcome> {
    pull_arm_with(instance, arm, beta, tau, SamplingMode::Distribution, false, rng)
}

/// [`pull_arm`] with an explicit sampling mode and optional reward log.
pub fn pull_arm_with<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    arm: usize,
    beta: &StateDistribution,
    tau: u64,
    mode: SamplingMode,
    keep_rewards: bool,
    rng: &mut R,
) -> Result<EpochOutcome> {
    instance.check_arm(arm)?;
    if tau == 0 {
        return Err(EnvError::InvalidTau);
    }
    if beta.len() != instance.states() {
        return Err(EnvError::Shape(format!("beta has {} entries, expected {}", beta.len(), instance.states())));
    }
    let gamma = instance.gamma();
    let p = instance.transition(arm);
    let kernels = instance.kernels(arm);
    let mut rewards = keep_rewards.then(|| Vec::with_capacity(tau as usize));

    let mut num = 0.0;
    let mut mass = 0.0;
    let mut cur = beta.clone();
    let mut state = match mode {
        SamplingMode::Distribution => 0,
        SamplingMode::Trajectory => sample_index(cur.probs(), rng),
    };
    for t in 0..tau {
        let theta = match mode {
            SamplingMode::Distribution => sample_index(cur.probs(), rng),
            SamplingMode::Trajectory => state,
        };
        let r = kernels[theta].sample(rng);
        let weight = if gamma == 1.0 { 1.0 } else { gamma.powf((tau - 1 - t) as f64) };
        if let Some(log) = rewards.as_mut() {
            log.push(r);
        }
        num += weight * r;
        mass += weight;
        match mode {
            SamplingMode::Distribution => cur = cur.step(p),
            SamplingMode::Trajectory => state = sample_index(p.row(state), rng),
        }
    }
    let closed = discount_mass(gamma, tau);
    debug_assert!(
        (mass - closed).abs() <= 1e-9 * closed.max(1.0),
        "accumulated S = {mass} drifted from closed form {closed}"
    );
    let final_beta = match mode {
        SamplingMode::Distribution => cur,
        SamplingMode::Trajectory => StateDistribution::point_mass(instance.states(), state),
    };
    Ok(EpochOutcome {
        smoothed_reward: (num / closed).clamp(0.0, 1.0),
        discount_mass: closed,
        final_beta,
        iterations: tau,
        rewards,
    })
}

/// Exact `E[r̄ | β]` for an epoch of `tau` iterations under discount `gamma`,
/// together with the state distribution at the end of the epoch.
pub fn expected_epoch(
    instance: &ProblemInstance,
    arm: usize,
    beta: &StateDistribution,
    tau: u64,
    gamma: f64,
) -> Result<(f64, StateDistribution)> {
    instance.check_arm(arm)?;
    check_gamma(gamma)?;
    if tau == 0 {
        return Err(EnvError::InvalidTau);
    }
    let p = instance.transition(arm);
    let means: Vec<f64> = instance.kernels(arm).iter().map(RewardKernel::mean).collect();
    let mut cur = beta.clone();
    let mut num = 0.0;
    for t in 0..tau {
        let w = if gamma == 1.0 { 1.0 } else { gamma.powf((tau - 1 - t) as f64) };
        let e: f64 = cur.probs().iter().zip(&means).map(|(b, r)| b * r).sum();
        num += w * e;
        cur = cur.step(p);
    }
    Ok((num / discount_mass(gamma, tau), cur))
}

/// Exact `E[r̄ | β]`: `(1/S) Σ_t γ^{τ−1−t} Σ_θ (βP^t)(θ) E[r | θ]`.
pub fn expected_smoothed_reward(
    instance: &ProblemInstance,
    arm: usize,
    beta: &StateDistribution,
    tau: u64,
    gamma: f64,
) -> Result<f64> {
    expected_epoch(instance, arm, beta, tau, gamma).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tm(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn example1(eps: f64) -> ProblemInstance {
        ProblemInstance::new(
            vec![tm(&[&[0.0, 1.0], &[eps, 1.0 - eps]]), tm(&[&[1.0 - eps, eps], &[1.0, 0.0]])],
            vec![
                vec![RewardKernel::deterministic(0.0), RewardKernel::deterministic(1.0)],
                vec![RewardKernel::deterministic(0.5), RewardKernel::deterministic(0.5)],
            ],
            StateDistribution::point_mass(2, 0),
            1.0,
        )
        .unwrap()
    }

    // example1 arm 1 with ε = 0 is reducible, so the ε = 0 oracle runs on a
    // bare chain rather than through ProblemInstance.
    fn propagate_oracle(p: &[[f64; 2]; 2], r: [f64; 2], beta: [f64; 2], tau: usize, gamma: f64) -> f64 {
        let mut b = beta;
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..tau {
            let w = gamma.powi((tau - 1 - t) as i32);
            num += w * (b[0] * r[0] + b[1] * r[1]);
            den += w;
            b = [b[0] * p[0][0] + b[1] * p[1][0], b[0] * p[0][1] + b[1] * p[1][1]];
        }
        num / den
    }

    #[test]
    fn kernel_means_and_validation() {
        assert_eq!(RewardKernel::Bernoulli { p: 0.3 }.mean(), 0.3);
        assert_eq!(RewardKernel::Beta { a: 2.0, b: 6.0 }.mean(), 0.25);
        assert_eq!(RewardKernel::Uniform { lo: 0.2, hi: 0.6 }.mean(), 0.4);
        assert!(RewardKernel::Beta { a: 0.0, b: 1.0 }.validate().is_err());
        assert!(RewardKernel::Uniform { lo: 0.5, hi: 0.5 }.validate().is_err());
        assert!(RewardKernel::Bernoulli { p: 1.1 }.validate().is_err());
    }

    #[test]
    fn kernel_sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [
            RewardKernel::Bernoulli { p: 0.3 },
            RewardKernel::Beta { a: 2.0, b: 3.0 },
            RewardKernel::Beta { a: 0.3, b: 0.4 },
            RewardKernel::Uniform { lo: 0.1, hi: 0.9 },
        ] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| k.sample(&mut rng)).collect();
            assert!(draws.iter().all(|r| (0.0..=1.0).contains(r)));
            let mean = draws.iter().sum::<f64>() / n as f64;
            // Variance of a [0,1] variable is at most 1/4.
            assert!((mean - k.mean()).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "{k:?}: {mean}");
        }
    }

    #[test]
    fn kernel_serde_shape() {
        let k = RewardKernel::Beta { a: 2.0, b: 3.0 };
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"type":"beta","params":{"a":2.0,"b":3.0}}"#);
        assert_eq!(serde_json::from_str::<RewardKernel>(&s).unwrap(), k);
    }

    #[test]
    fn constant_rewards_average_to_themselves() {
        let inst = ProblemInstance::new(
            vec![tm(&[&[0.3, 0.7], &[0.6, 0.4]])],
            vec![vec![RewardKernel::deterministic(1.0); 2]],
            StateDistribution::uniform(2),
            0.7,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for tau in [1, 2, 17] {
            let out = pull_arm(&inst, 0, inst.beta1(), tau, &mut rng).unwrap();
            assert!((out.smoothed_reward - 1.0).abs() < 1e-12);
            assert!((out.discount_mass - discount_mass(0.7, tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn example1_first_pull_pays_zero() {
        let inst = example1(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = pull_arm(&inst, 0, inst.beta1(), 1, &mut rng).unwrap();
        assert_eq!(out.smoothed_reward, 0.0);
        assert_eq!(out.final_beta.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn example1_eps_zero_propagation() {
        let r = propagate_oracle(&[[0.0, 1.0], [0.0, 1.0]], [0.0, 1.0], [1.0, 0.0], 3, 1.0);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        // The same quantity through the library with a tiny ε converges to 2/3.
        let inst = example1(1e-9);
        let e = expected_smoothed_reward(&inst, 0, inst.beta1(), 3, 1.0).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn expected_reward_matches_two_term_evaluation() {
        let inst = example1(0.1);
        let beta = StateDistribution::new(vec![0.3, 0.7]).unwrap();
        for arm in 0..2 {
            let means: Vec<f64> = inst.kernels(arm).iter().map(RewardKernel::mean).collect();
            let b1 = beta.step(inst.transition(arm));
            let term0: f64 = beta.probs().iter().zip(&means).map(|(b, r)| b * r).sum();
            let term1: f64 = b1.probs().iter().zip(&means).map(|(b, r)| b * r).sum();
            let want = (0.5 * term0 + term1) / 1.5;
            let got = expected_smoothed_reward(&inst, arm, &beta, 2, 0.5).unwrap();
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn expected_reward_from_pi_is_mu() {
        let inst = example1(0.1);
        for arm in 0..2 {
            let pi = inst.stats(arm).pi.clone();
            for (tau, g) in [(1, 1.0), (9, 0.5), (30, 0.9)] {
                let e = expected_smoothed_reward(&inst, arm, &pi, tau, g).unwrap();
                assert!((e - inst.mu(arm)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mu_and_gaps() {
        let inst = example1(0.1);
        assert!((inst.mu(0) - 1.0 / 1.1).abs() < 1e-12);
        assert!((inst.mu(1) - 0.5).abs() < 1e-12);
        assert_eq!(inst.optimal_arm(), 0);
        assert!(!inst.optimal_is_tied());
        let g = inst.gaps();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - (1.0 / 1.1 - 0.5)).abs() < 1e-12);

        let single = ProblemInstance::new(
            vec![tm(&[&[1.0]])],
            vec![vec![RewardKernel::Bernoulli { p: 0.3 }]],
            StateDistribution::point_mass(1, 0),
            1.0,
        )
        .unwrap();
        assert!((single.mu(0) - 0.3).abs() < 1e-15);
        assert_eq!(single.min_gap(), None);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let k = vec![RewardKernel::Bernoulli { p: 0.4 }];
        let inst = ProblemInstance::new(
            vec![tm(&[&[1.0]]), tm(&[&[1.0]])],
            vec![k.clone(), k],
            StateDistribution::point_mass(1, 0),
            1.0,
        )
        .unwrap();
        assert_eq!(inst.optimal_arm(), 0);
        assert!(inst.optimal_is_tied());
    }

    #[test]
    fn rejects_bad_inputs() {
        let inst = example1(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(pull_arm(&inst, 2, inst.beta1(), 1, &mut rng).unwrap_err(), EnvError::InvalidArm { arm: 2, m: 2 });
        assert_eq!(pull_arm(&inst, 0, inst.beta1(), 0, &mut rng).unwrap_err(), EnvError::InvalidTau);
        assert!(inst.with_gamma(1e-10).is_err());
        assert!(inst.with_gamma(0.0).is_err());
        assert!(inst.with_gamma(2e-9).is_ok());
        let periodic = ProblemInstance::new(
            vec![tm(&[&[0.0, 1.0], &[1.0, 0.0]])],
            vec![vec![RewardKernel::deterministic(0.0); 2]],
            StateDistribution::uniform(2),
            1.0,
        );
        assert!(matches!(periodic, Err(EnvError::AssumptionViolated { arm: 0, .. })));
    }

    #[test]
    fn trajectory_mode_ends_at_point_mass() {
        let inst = example1(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = pull_arm_with(&inst, 0, inst.beta1(), 5, SamplingMode::Trajectory, true, &mut rng).unwrap();
        assert_eq!(out.rewards.as_ref().unwrap().len(), 5);
        assert_eq!(out.final_beta.probs().iter().filter(|&&p| p == 1.0).count(), 1);
        // θ₁ pays 0 and moves to θ₂ surely.
        assert_eq!(out.rewards.unwrap()[..2], [0.0, 1.0]);
    }

    #[test]
    fn monte_carlo_matches_expected_reward() {
        let inst = ProblemInstance::new(
            vec![tm(&[&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3], &[0.1, 0.1, 0.8]])],
            vec![vec![
                RewardKernel::Beta { a: 1.0, b: 3.0 },
                RewardKernel::Uniform { lo: 0.4, hi: 1.0 },
                RewardKernel::Bernoulli { p: 0.9 },
            ]],
            StateDistribution::point_mass(3, 0),
            0.8,
        )
        .unwrap();
        let tau = 6;
        let want = expected_smoothed_reward(&inst, 0, inst.beta1(), tau, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| pull_arm(&inst, 0, inst.beta1(), tau, &mut rng).unwrap().smoothed_reward)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "mean {mean} vs {want} (se {se})");
    }
}
