//! Canned instances, the random instance generator, and random transition
//! matrices for spectrum statistics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{self, ChainError, StateDistribution, TransitionMatrix};
use crate::environment::{EnvError, ProblemInstance, RewardKernel};
use crate::harness::mix64;

/// Largest number of candidate instances [`generate`] draws before giving up.
pub const MAX_RETRIES: u32 = 100;
/// Smallest acceptable gap between the best and second-best arm.
pub const MIN_GAP: f64 = 0.01;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("no valid instance after {0} attempts")]
    GenerationExhausted(u32),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

pub type Result<T> = std::result::Result<T, InstanceError>;

fn tm(rows: [[f64; 2]; 2]) -> TransitionMatrix {
    TransitionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).expect("stochastic by construction")
}

/// Two arms that look alike on their first pulls but mix to very different rewards.
///
/// Arm 0 moves θ₁→θ₂ surely and returns with probability `ε`; it pays `(0, 1)`.
/// Arm 1 is the mirror image and pays `0.5` in both states. Play starts in θ₁.
pub fn example1(epsilon: f64) -> Result<ProblemInstance> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(InstanceError::Invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let e = epsilon;
    let inst = ProblemInstance::new(
        vec![tm([[0.0, 1.0], [e, 1.0 - e]]), tm([[1.0 - e, e], [1.0, 0.0]])],
        vec![
            vec![RewardKernel::deterministic(0.0), RewardKernel::deterministic(1.0)],
            vec![RewardKernel::deterministic(0.5), RewardKernel::deterministic(0.5)],
        ],
        StateDistribution::point_mass(2, 0),
        1.0,
    )?;
    debug_assert_eq!(inst.optimal_arm(), 0);
    Ok(inst)
}

/// `μ₀ − μ₁` for [`example1`]; positive on the whole admissible range.
pub fn example1_gap(epsilon: f64) -> Result<f64> {
    let inst = example1(epsilon)?;
    Ok(inst.mu(0) - inst.mu(1))
}

/// One arm with `π = (ε, 1 − ε)` and rewards `(0, 1)`, started in the bad state.
pub fn penalty_example(epsilon: f64) -> Result<ProblemInstance> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(InstanceError::Invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let q = epsilon / (1.0 - epsilon);
    Ok(ProblemInstance::new(
        vec![tm([[0.0, 1.0], [q, 1.0 - q]])],
        vec![vec![RewardKernel::deterministic(0.0), RewardKernel::deterministic(1.0)]],
        StateDistribution::point_mass(2, 0),
        1.0,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Bernoulli,
    Beta,
    Uniform,
}

fn default_mass() -> f64 {
    0.9
}

fn default_palette() -> Vec<KernelFamily> {
    vec![KernelFamily::Bernoulli, KernelFamily::Beta, KernelFamily::Uniform]
}

fn default_gamma() -> f64 {
    1.0
}

/// Parameters of the anti-correlated random instance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub m: usize,
    pub states: usize,
    pub seed: u64,
    /// Mass each row of the optimal arm puts on the favored states; other arms put `1 − a` there.
    #[serde(default = "default_mass")]
    pub anti_correlation_mass: f64,
    #[serde(default = "default_palette")]
    pub kernel_palette: Vec<KernelFamily>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl GeneratorSpec {
    pub fn new(m: usize, states: usize, seed: u64) -> Self {
        Self {
            m,
            states,
            seed,
            anti_correlation_mass: default_mass(),
            kernel_palette: default_palette(),
            gamma: default_gamma(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 || self.states < 2 {
            return Err(InstanceError::Invalid(format!(
                "need m >= 2 and states >= 2, got m={} states={}",
                self.m, self.states
            )));
        }
        let a = self.anti_correlation_mass;
        if !(a > 0.0 && a < 1.0) {
            return Err(InstanceError::Invalid(format!("anti_correlation_mass must lie in (0, 1), got {a}")));
        }
        if self.kernel_palette.is_empty() {
            return Err(InstanceError::Invalid("empty kernel palette".into()));
        }
        crate::environment::check_gamma(self.gamma)?;
        Ok(())
    }
}

/// Number of favored states for a state space of the given size.
pub fn favored_count(states: usize) -> usize {
    states.div_ceil(2)
}

/// Row with `inside` total mass spread over `favored` and the rest elsewhere.
fn split_row<R: Rng>(rng: &mut R, favored: &[bool], inside: f64) -> Vec<f64> {
    let w: Vec<f64> = favored.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let sum_in: f64 = w.iter().zip(favored).filter(|(_, &f)| f).map(|(x, _)| x).sum();
    let sum_out: f64 = w.iter().zip(favored).filter(|(_, &f)| !f).map(|(x, _)| x).sum();
    let mut row: Vec<f64> = w
        .iter()
        .zip(favored)
        .map(|(&x, &f)| if f { inside * x / sum_in } else { (1.0 - inside) * x / sum_out })
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= total);
    row
}

fn draw_kernel<R: Rng>(rng: &mut R, family: KernelFamily, mean: f64) -> RewardKernel {
    match family {
        KernelFamily::Bernoulli => RewardKernel::Bernoulli { p: mean },
        KernelFamily::Beta => {
            let kappa = rng.random_range(2.0..20.0);
            RewardKernel::Beta { a: mean * kappa, b: (1.0 - mean) * kappa }
        }
        KernelFamily::Uniform => {
            let half = mean.min(1.0 - mean) * rng.random_range(0.1..1.0);
            RewardKernel::Uniform { lo: mean - half, hi: mean + half }
        }
    }
}

/// A generated instance with the subset its optimal arm favors.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub instance: ProblemInstance,
    pub favored: Vec<usize>,
    /// Number of candidates drawn, including the accepted one.
    pub attempts: u32,
}

impl Generated {
    /// Stationary mass the optimal arm puts on the favored subset.
    pub fn favored_mass(&self) -> f64 {
        let pi = self.instance.stats(self.instance.optimal_arm()).pi.probs();
        self.favored.iter().map(|&i| pi[i]).sum()
    }
}

/// One candidate draw; `None` when it fails validation.
fn attempt(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<Option<(ProblemInstance, Vec<usize>)>> {
    let s = spec.states;
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(rng);
    let mut favored = vec![false; s];
    for &i in &order[..favored_count(s)] {
        favored[i] = true;
    }
    let best = rng.random_range(0..spec.m);
    let a = spec.anti_correlation_mass;

    let mut transitions = Vec::with_capacity(spec.m);
    let mut kernels = Vec::with_capacity(spec.m);
    for arm in 0..spec.m {
        let inside = if arm == best { a } else { 1.0 - a };
        let rows: Vec<Vec<f64>> = (0..s).map(|_| split_row(rng, &favored, inside)).collect();
        let p = TransitionMatrix::new(rows)?;
        let pi = match chain::stationary_distribution(&p) {
            Ok(pi) => pi,
            Err(_) => return Ok(None),
        };
        // Means sorted so that likelier states pay more.
        let mut means: Vec<f64> = (0..s).map(|_| rng.random_range(0.01..0.99)).collect();
        means.sort_by(f64::total_cmp);
        let mut by_mass: Vec<usize> = (0..s).collect();
        by_mass.sort_by(|&i, &j| pi.probs()[i].total_cmp(&pi.probs()[j]));
        let mut ks = vec![RewardKernel::deterministic(0.0); s];
        for (rank, &state) in by_mass.iter().enumerate() {
            let family = spec.kernel_palette[rng.random_range(0..spec.kernel_palette.len())];
            ks[state] = draw_kernel(rng, family, means[rank]);
        }
        transitions.push(p);
        kernels.push(ks);
    }
    let inst = match ProblemInstance::new(transitions, kernels, StateDistribution::uniform(s), spec.gamma) {
        Ok(inst) => inst,
        Err(EnvError::AssumptionViolated { .. } | EnvError::Chain { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let gap_ok = inst.min_gap().is_some_and(|g| g >= MIN_GAP);
    let mut subset = order[..favored_count(s)].to_vec();
    subset.sort_unstable();
    Ok((gap_ok && !inst.optimal_is_tied() && inst.optimal_arm() == best).then_some((inst, subset)))
}

/// Draws an instance whose optimal arm keeps the state in a favored subset
/// that the other arms avoid.
///
/// Each retry reseeds from `(seed, attempt)`, so the result depends only on the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    generate_detailed(spec).map(|g| g.instance)
}

/// [`generate`], also reporting the favored subset and the attempt count.
pub fn generate_detailed(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    for k in 0..MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(spec.seed, k as u64));
        if let Some((instance, favored)) = attempt(spec, &mut rng)? {
            return Ok(Generated { instance, favored, attempts: k + 1 });
        }
    }
    Err(InstanceError::GenerationExhausted(MAX_RETRIES))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixDistribution {
    /// i.i.d. `U(0, 1)` entries, rows normalized.
    Uniform,
    /// i.i.d. `|N(0, 1)|` entries, rows normalized.
    Absnormal,
}

impl std::str::FromStr for MatrixDistribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "absnormal" => Ok(Self::Absnormal),
            other => Err(format!("unknown distribution '{other}' (expected uniform or absnormal)")),
        }
    }
}

pub fn sample_random_transition(dist: MatrixDistribution, states: usize, seed: u64) -> Result<TransitionMatrix> {
    if states == 0 {
        return Err(InstanceError::Invalid("states must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(states);
    for _ in 0..states {
        let mut row: Vec<f64> = (0..states)
            .map(|_| match dist {
                MatrixDistribution::Uniform => rng.random::<f64>(),
                MatrixDistribution::Absnormal => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.abs()
                }
            })
            .collect();
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            row = vec![1.0 / states as f64; states];
        } else {
            row.iter_mut().for_each(|x| *x /= total);
        }
        rows.push(row);
    }
    Ok(TransitionMatrix::new(rows)?)
}

/// `λ₂(M(P))` for `samples` independent matrices; sample `i` uses seed `mix64(seed, i)`.
pub fn spectrum_samples(dist: MatrixDistribution, states: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_random_transition(dist, states, mix64(seed, i))?;
            Ok(chain::lambda2_m(&p)?)
        })
        .collect()
}

/// Location summary of a sample of `λ₂(M)` values; `p95` is the nearest-rank percentile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub samples: usize,
    pub mean: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl SpectrumSummary {
    /// `None` for an empty sample.
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            samples: n,
            mean: sorted.iter().sum::<f64>() / n as f64,
            p95: sorted[rank - 1],
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}
