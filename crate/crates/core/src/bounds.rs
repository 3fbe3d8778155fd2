//! Closed-form regret bounds and the series they are built from.
//!
//! Each discount regime has its own formula family, selected by [`Branch`]:
//!
//! * [`Branch::Distinct`]: `γ ∈ (0, 1)` and `γ` is away from every `λ_j`;
//! * [`Branch::Equal`]: `γ ∈ (0, 1)` and `γ ≈ λ_j` for some arm. These
//!   formulas stay valid for every arm, only looser;
//! * [`Branch::TimeAveraged`]: `γ = 1`.
//!
//! ```
//! use epochmix::bounds::{harmonic_bound, harmonic_sum_exact};
//!
//! let exact = harmonic_sum_exact(1, 1, 3);
//! assert!((exact - 11.0 / 6.0).abs() < 1e-15);
//! assert!(exact <= harmonic_bound(1, 1, 3));
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::ChainStats;
use crate::policies::{EpochSchedule, GreedyConfig};

/// `min_j |γ − λ_j|` must exceed this for the distinct-rate formulas.
pub const BRANCH_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("reward gap is zero; the bound is undefined for an optimal arm")]
    ZeroGap,
    #[error("epoch {k} is below the validity threshold {threshold}")]
    OutOfValidityRange { k: u64, threshold: u64 },
    #[error("invalid bound input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, BoundError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Distinct,
    Equal,
    TimeAveraged,
}

impl Branch {
    /// Picks the branch for discount `gamma` given every arm's `λ_j`.
    pub fn select(gamma: f64, lambdas: impl IntoIterator<Item = f64>) -> Branch {
        if gamma == 1.0 {
            return Branch::TimeAveraged;
        }
        let gap = lambdas.into_iter().map(|l| (gamma - l).abs()).fold(f64::INFINITY, f64::min);
        if gap > BRANCH_TOL { Branch::Distinct } else { Branch::Equal }
    }

    pub fn for_stats(gamma: f64, stats: &[ChainStats]) -> Branch {
        Branch::select(gamma, stats.iter().map(|s| s.lambda))
    }
}

/// `x^e` for `x ≥ 0`, evaluated in log space and flushed to zero below `e^{−700}`.
fn pow_guarded(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        return if e == 0.0 { 1.0 } else { 0.0 };
    }
    let l = e * x.ln();
    if l < -700.0 { 0.0 } else { l.exp() }
}

/// `Υ_j(τ)`, the numerator of the per-epoch deviation bound `C_j Υ_j(τ) / S`.
///
/// The discount factor enters through `stats` (`φ`, `ψ`), so `stats` must be
/// built for the same `γ` that selected `branch`.
pub fn upsilon(stats: &ChainStats, tau: u64, branch: Branch) -> f64 {
    let t = tau as f64;
    match branch {
        Branch::TimeAveraged => {
            let l = stats.lambda;
            (1.0 - pow_guarded(l, t)) / (1.0 - l)
        }
        Branch::Distinct => {
            let (phi, psi) = (stats.phi, stats.psi);
            pow_guarded(phi, t - 1.0) * (1.0 - pow_guarded(psi, t)) / (1.0 - psi)
        }
        Branch::Equal => pow_guarded(stats.phi, t - 1.0) * t,
    }
}

/// The Markovian-penalty bound `L_j^γ(n)`.
///
/// With the non-conforming `ζ = 0` every epoch has length `τ₀` and the sum
/// is `n` copies of the first term.
pub fn l_bound(stats: &ChainStats, schedule: EpochSchedule, n: u64, branch: Branch) -> f64 {
    let (t0, z, nf) = (schedule.tau0 as f64, schedule.zeta as f64, n as f64);
    let c = stats.c;
    if schedule.zeta == 0 {
        return nf * per_epoch_term(stats, schedule.tau0, branch);
    }
    match branch {
        Branch::TimeAveraged => c / (1.0 - stats.lambda) * harmonic_bound(schedule.tau0, schedule.zeta, n),
        Branch::Distinct => {
            let (phi, eta) = (stats.phi, stats.eta);
            let pz = pow_guarded(phi, z);
            c * (pow_guarded(phi, t0) / (phi - eta)) * (1.0 - pow_guarded(phi, z * nf)) / (1.0 - pz)
        }
        Branch::Equal => {
            let phi = stats.phi;
            c * pow_guarded(phi, t0 - 1.0) * arith_geo_sum(t0, z, pow_guarded(phi, z), n)
        }
    }
}

/// One summand of `L`: `C Υ(τ)/τ` when `γ = 1`, else `C φ^{τ−1}/(1−ψ)` or
/// `C φ^{τ−1} τ`, the per-epoch terms after dropping `1/S ≤ 1`.
fn per_epoch_term(stats: &ChainStats, tau: u64, branch: Branch) -> f64 {
    let t = tau as f64;
    match branch {
        Branch::TimeAveraged => stats.c / (t * (1.0 - stats.lambda)),
        Branch::Distinct => stats.c * pow_guarded(stats.phi, t - 1.0) / (1.0 - stats.psi),
        Branch::Equal => stats.c * pow_guarded(stats.phi, t - 1.0) * t,
    }
}

/// The time-invariant constant `ρ_j` of the suboptimal-play bound.
pub fn rho(stats: &ChainStats, schedule: EpochSchedule, branch: Branch) -> f64 {
    let (t0, z) = (schedule.tau0 as f64, schedule.zeta as f64);
    let c = stats.c;
    match branch {
        Branch::TimeAveraged => c / ((z * t0).sqrt() * (1.0 - stats.lambda)) * (1.0 + z / t0),
        Branch::Distinct => {
            let (phi, eta) = (stats.phi, stats.eta);
            c * (pow_guarded(phi, t0) / (phi - eta)) / (1.0 - pow_guarded(phi, z))
        }
        Branch::Equal => {
            let phi = stats.phi;
            let pz = pow_guarded(phi, z);
            c * pow_guarded(phi, t0 - 1.0) * (t0 / (1.0 - pz) + z * pz / (1.0 - pz).powi(2))
        }
    }
}

fn ln_u(n: u64) -> f64 {
    (n as f64).ln()
}

/// Upper bound on `E[T_j(n)]` for a suboptimal arm under EpochUCB.
pub fn thm1_plays_bound(delta: f64, rho: f64, n: u64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(BoundError::ZeroGap);
    }
    if n == 0 {
        return Err(BoundError::Invalid("n must be at least 1".into()));
    }
    let lead = 4.0 / (delta * delta) * (rho + (6.0 * ln_u(n)).sqrt()).powi(2);
    Ok(lead + 3.0 + 2.0 * ln_u(n))
}

/// Pulls needed to separate arm `j` from the optimum: the ceiling of the
/// leading term of [`thm1_plays_bound`], floored at one.
pub fn distinguishing_threshold(delta: f64, rho: f64, n: u64) -> Result<u64> {
    if delta <= 0.0 {
        return Err(BoundError::ZeroGap);
    }
    if n == 0 {
        return Err(BoundError::Invalid("n must be at least 1".into()));
    }
    let raw = 4.0 / (delta * delta) * (rho + (6.0 * ln_u(n)).sqrt()).powi(2);
    Ok((raw.ceil() as u64).max(1))
}

/// Trailing constant of the gap-independent bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cor2Variant {
    /// `+2`, as stated with the corollary.
    #[default]
    Statement,
    /// `+3`, where the longer derivation ends.
    Derivation,
}

/// `1/τ₀ + (1/ζ) ln(1 + ζn/τ₀)`.
pub fn harmonic_bound(tau0: u64, zeta: u64, n: u64) -> f64 {
    let (t0, z) = (tau0 as f64, zeta as f64);
    1.0 / t0 + (1.0 / z) * (z * n as f64 / t0).ln_1p()
}

/// `Σ_{i=1}^{n} 1/(τ₀ + ζ(i−1))`.
pub fn harmonic_sum_exact(tau0: u64, zeta: u64, n: u64) -> f64 {
    (0..n).map(|i| 1.0 / (tau0 + zeta * i) as f64).sum()
}

/// `Σ_{i=1}^{n} r^{i−1}(a + d(i−1))` in closed form.
pub fn arith_geo_sum(a: f64, d: f64, r: f64, n: u64) -> f64 {
    let rn = pow_guarded(r, n as f64);
    let nf = n as f64;
    (a - rn * (a + d * nf)) / (1.0 - r) + d * r * (1.0 - rn) / (1.0 - r).powi(2)
}

/// Limit of [`arith_geo_sum`] as `n → ∞`.
pub fn arith_geo_limit(a: f64, d: f64, r: f64) -> f64 {
    a / (1.0 - r) + d * r / (1.0 - r).powi(2)
}

/// Everything the regret bounds need about one instance and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub stats: Vec<ChainStats>,
    pub schedule: EpochSchedule,
    pub gamma: f64,
    pub gaps: Vec<f64>,
    pub optimal: usize,
    pub branch: Branch,
}

impl BoundInputs {
    pub fn new(stats: Vec<ChainStats>, schedule: EpochSchedule, gamma: f64, gaps: Vec<f64>) -> Result<Self> {
        if stats.len() != gaps.len() || stats.is_empty() {
            return Err(BoundError::Invalid(format!("{} arms but {} gaps", stats.len(), gaps.len())));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(BoundError::Invalid(format!("gamma {gamma} outside (0, 1]")));
        }
        if schedule.tau0 == 0 || schedule.zeta == 0 {
            return Err(BoundError::Invalid("bounds need tau0 >= 1 and zeta >= 1".into()));
        }
        let optimal = gaps.iter().position(|&g| g == 0.0).unwrap_or(0);
        let branch = Branch::for_stats(gamma, &stats);
        Ok(Self { stats, schedule, gamma, gaps, optimal, branch })
    }

    /// Builds the inputs from an instance (its `γ`, constants and gaps).
    pub fn from_instance(instance: &crate::environment::ProblemInstance, schedule: EpochSchedule) -> Result<Self> {
        Self::new(instance.all_stats().to_vec(), schedule, instance.gamma(), instance.gaps())
    }

    pub fn m(&self) -> usize {
        self.stats.len()
    }

    fn suboptimal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).filter(move |&j| j != self.optimal && self.gaps[j] > 0.0)
    }

    pub fn upsilon(&self, arm: usize, tau: u64) -> f64 {
        upsilon(&self.stats[arm], tau, self.branch)
    }

    pub fn l(&self, arm: usize, n: u64) -> f64 {
        l_bound(&self.stats[arm], self.schedule, n, self.branch)
    }

    pub fn l_sum(&self, n: u64) -> f64 {
        (0..self.m()).map(|j| self.l(j, n)).sum()
    }

    pub fn rho(&self, arm: usize) -> f64 {
        rho(&self.stats[arm], self.schedule, self.branch)
    }

    pub fn thm1(&self, arm: usize, n: u64) -> Result<f64> {
        thm1_plays_bound(self.gaps[arm], self.rho(arm), n)
    }

    /// Gap-dependent regret bound for EpochUCB.
    pub fn cor1(&self, n: u64) -> f64 {
        let ln = ln_u(n);
        let sub: f64 = self
            .suboptimal()
            .map(|j| {
                let d = self.gaps[j];
                4.0 / d * (self.rho(j) + (6.0 * ln).sqrt()).powi(2) + 3.0 * d + 2.0 * d * ln
            })
            .sum();
        sub + self.l_sum(n)
    }

    /// Gap-independent regret bound for EpochUCB.
    pub fn cor2(&self, n: u64, variant: Cor2Variant) -> f64 {
        let ln = ln_u(n);
        let tail = match variant {
            Cor2Variant::Statement => 2.0,
            Cor2Variant::Derivation => 3.0,
        };
        let inner: f64 = (0..self.m())
            .map(|j| {
                let r = self.rho(j);
                4.0 * r * r + 8.0 * r * (6.0 * ln).sqrt() + 26.0 * ln + tail
            })
            .sum();
        (n as f64 * inner).sqrt() + self.l_sum(n)
    }

    /// Gap-dependent regret bound for EpochGreedy, summed epoch by epoch.
    pub fn cor3(&self, config: &GreedyConfig, n: u64) -> f64 {
        let gap_sum: f64 = self.suboptimal().map(|j| self.gaps[j]).sum();
        let m = self.m();
        let threshold = config.validity_threshold(m);
        let probs: f64 = (1..=n)
            .map(|k| {
                if k < threshold || k < 2 {
                    1.0
                } else {
                    thm2_prob_bound(config, m, k).map_or(1.0, |p| p.min(1.0))
                }
            })
            .sum();
        gap_sum * probs + self.l_sum(n)
    }

    /// `κ = max_{j, i ≤ n} L_j(i)/√i`.
    pub fn kappa(&self, n: u64) -> f64 {
        kappa(|j, i| self.l(j, i), n, self.m())
    }
}

/// Exhaustive scan for `max_{j ∈ [m], i ∈ [1, n]} L(j, i)/√i`.
pub fn kappa(l: impl Fn(usize, u64) -> f64, n: u64, m: usize) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m {
        for i in 1..=n {
            best = best.max(l(j, i) / (i as f64).sqrt());
        }
    }
    best
}

/// Bound on the probability that EpochGreedy plays a given suboptimal arm at epoch `k`.
///
/// Valid for `k ≥ ⌈cm/d²⌉` and `k ≥ 2`. The logarithmic term is clamped at
/// zero where its argument drops below one near the validity boundary. The
/// value is not capped at one.
pub fn thm2_prob_bound(config: &GreedyConfig, m: usize, k: u64) -> Result<f64> {
    let threshold = config.validity_threshold(m);
    if k < threshold || k < 2 {
        return Err(BoundError::OutOfValidityRange { k, threshold: threshold.max(2) });
    }
    let (c, d2, cpp) = (config.c, config.d * config.d, config.c_dblprime);
    let mf = m as f64;
    let base = (k - 1) as f64 * d2 * 0.5f64.exp() / (c * mf);
    let ratio = 1.0 / base;
    let t1 = c / (d2 * k as f64);
    let t2 = (2.0 * c / d2) * base.ln().max(0.0) * pow_guarded(ratio, c / (5.0 * d2));
    let t3 = (2.0 * cpp * std::f64::consts::E / d2) * pow_guarded(ratio, c / cpp);
    Ok(t1 + t2 + t3)
}

/// Which quantity a [`BoundCurve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    L,
    RegretCor1,
    RegretCor2,
    RegretCor3,
    Thm1Plays,
    Thm2Prob,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::L => "L",
            CurveKind::RegretCor1 => "regret_cor1",
            CurveKind::RegretCor2 => "regret_cor2",
            CurveKind::RegretCor3 => "regret_cor3",
            CurveKind::Thm1Plays => "thm1_plays",
            CurveKind::Thm2Prob => "thm2_prob",
        }
    }
}

/// A sampled bound, one value per `k`. `arm` is set for per-arm kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: CurveKind,
    pub arm: Option<usize>,
    pub points: Vec<(u64, f64)>,
}

impl BoundCurve {
    pub fn sample(kind: CurveKind, arm: Option<usize>, ks: &[u64], f: impl Fn(u64) -> Option<f64>) -> Self {
        let points = ks.iter().filter_map(|&k| f(k).map(|v| (k, v))).collect();
        Self { kind, arm, points }
    }

    /// Writes `k,value,kind,arm` rows (no header).
    pub fn write_csv_rows<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let arm = self.arm.map(|a| a.to_string()).unwrap_or_default();
        for &(k, v) in &self.points {
            writeln!(w, "{k},{v},{},{arm}", self.kind.as_str())?;
        }
        Ok(())
    }
}

/// Evaluation grid: every `k` up to 100, then roughly 50 log-spaced points per decade.
pub fn log_grid(n: u64) -> Vec<u64> {
    let mut ks: Vec<u64> = (1..=n.min(100)).collect();
    let mut x = 100.0f64;
    while (x as u64) < n {
        x *= 10f64.powf(1.0 / 50.0);
        let k = (x.round() as u64).min(n);
        if k > *ks.last().unwrap() {
            ks.push(k);
        }
    }
    ks
}

/// All bound curves for an instance.
pub fn curves(inputs: &BoundInputs, greedy: Option<&GreedyConfig>, n: u64, variant: Cor2Variant) -> Vec<BoundCurve> {
    let ks = log_grid(n);
    let mut out = vec![
        BoundCurve::sample(CurveKind::RegretCor1, None, &ks, |k| Some(inputs.cor1(k))),
        BoundCurve::sample(CurveKind::RegretCor2, None, &ks, |k| Some(inputs.cor2(k, variant))),
    ];
    if let Some(cfg) = greedy {
        out.push(BoundCurve::sample(CurveKind::RegretCor3, None, &ks, |k| Some(inputs.cor3(cfg, k))));
        out.push(BoundCurve::sample(CurveKind::Thm2Prob, None, &ks, |k| thm2_prob_bound(cfg, inputs.m(), k).ok()));
    }
    for j in 0..inputs.m() {
        out.push(BoundCurve::sample(CurveKind::L, Some(j), &ks, |k| Some(inputs.l(j, k))));
        if inputs.gaps[j] > 0.0 {
            out.push(BoundCurve::sample(CurveKind::Thm1Plays, Some(j), &ks, |k| inputs.thm1(j, k).ok()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainStats, StateDistribution};
    use proptest::prelude::*;

    // Stats with a prescribed C and λ: solve C for min π on a two-state π.
    fn stats_with(c: f64, lambda: f64, gamma: f64) -> ChainStats {
        let mut s = ChainStats::from_parts(StateDistribution::uniform(2), lambda * lambda, gamma).unwrap();
        s.c = c;
        s
    }

    fn sched(tau0: u64, zeta: u64) -> EpochSchedule {
        EpochSchedule { tau0, zeta }
    }

    #[test]
    fn branch_selection() {
        assert_eq!(Branch::select(1.0, [0.3]), Branch::TimeAveraged);
        assert_eq!(Branch::select(0.5, [0.3, 0.9]), Branch::Distinct);
        assert_eq!(Branch::select(0.5, [0.3, 0.5 + 1e-7]), Branch::Equal);
    }

    #[test]
    fn upsilon_examples() {
        let s = stats_with(1.0, 0.5, 1.0);
        assert!((upsilon(&s, 2, Branch::TimeAveraged) - 1.5).abs() < 1e-15);
        let s0 = stats_with(1.0, 0.0, 1.0);
        for tau in 1..10 {
            assert_eq!(upsilon(&s0, tau, Branch::TimeAveraged), 1.0);
        }
        let eq = stats_with(1.0, 0.5, 0.5);
        assert!((upsilon(&eq, 3, Branch::Equal) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn l_examples() {
        let s = stats_with(1.0, 0.5, 1.0);
        let v = l_bound(&s, sched(1, 1), 1, Branch::TimeAveraged);
        assert!((v - 2.0 * (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!((v - 3.3863).abs() < 1e-4);
        let s0 = stats_with(1.0, 0.0, 1.0);
        for n in [1, 7, 100] {
            let want = harmonic_bound(3, 2, n);
            assert!((l_bound(&s0, sched(3, 2), n, Branch::TimeAveraged) - want).abs() < 1e-15);
        }
        let d = stats_with(1.3, 0.5, 0.9);
        let limit = rho(&d, sched(2, 1), Branch::Distinct);
        assert!((l_bound(&d, sched(2, 1), 100_000, Branch::Distinct) - limit).abs() < 1e-9);
    }

    #[test]
    fn rho_examples() {
        let s = stats_with(1.0, 0.5, 1.0);
        assert!((rho(&s, sched(1, 1), Branch::TimeAveraged) - 4.0).abs() < 1e-15);
        let v = rho(&s, sched(40, 1), Branch::TimeAveraged);
        assert!((v - (2.0 / 40f64.sqrt()) * (1.0 + 1.0 / 40.0)).abs() < 1e-15);
        assert!((v - 0.32411).abs() < 1e-4);
        let d = stats_with(1.0, 0.5, 0.9);
        assert!((rho(&d, sched(2, 1), Branch::Distinct) - 20.25).abs() < 1e-12);
    }

    #[test]
    fn thm1_examples() {
        assert!((thm1_plays_bound(0.5, 1.5, 1).unwrap() - (4.0 * 2.25 / 0.25 + 3.0)).abs() < 1e-12);
        let e = std::f64::consts::E;
        // n = e is not an integer; evaluate the expression with ln n = 1 directly.
        let at_e = 4.0 * (0.0 + (6.0f64 * e.ln()).sqrt()).powi(2) + 3.0 + 2.0 * e.ln();
        assert!((at_e - 29.0).abs() < 1e-12);
        assert_eq!(thm1_plays_bound(0.0, 1.0, 10), Err(BoundError::ZeroGap));
        let mut prev = 0.0;
        for n in 1..500 {
            let v = thm1_plays_bound(0.3, 0.7, n).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn distinguishing_threshold_examples() {
        assert_eq!(distinguishing_threshold(1.0, 0.0, 1).unwrap(), 1);
        // n = e: 16 (1 + √6)² = 190.19…
        let raw = 16.0 * (1.0 + 6f64.sqrt()).powi(2);
        assert_eq!(raw.ceil() as u64, 191);
        // Halving Δ quadruples the pre-ceiling value.
        let a = 4.0 / 0.25 * (1.0 + (6.0 * 50f64.ln()).sqrt()).powi(2);
        let b = 4.0 / 0.0625 * (1.0 + (6.0 * 50f64.ln()).sqrt()).powi(2);
        assert!((b / a - 4.0).abs() < 1e-12);
        assert_eq!(distinguishing_threshold(0.5, 1.0, 50).unwrap(), a.ceil() as u64);
    }

    fn two_arm_inputs(gamma: f64, lambdas: [f64; 2], cs: [f64; 2], gaps: [f64; 2], s: EpochSchedule) -> BoundInputs {
        let stats = (0..2).map(|j| stats_with(cs[j], lambdas[j], gamma)).collect();
        BoundInputs::new(stats, s, gamma, gaps.to_vec()).unwrap()
    }

    #[test]
    fn cor1_plug_in() {
        let b = two_arm_inputs(1.0, [0.0, 0.0], [1.0, 1.0], [0.0, 1.0], sched(1, 1));
        // Arm 1: ρ = 1·(1+1) = 2 with λ = 0: (4/1)(2 + 0)² + 3 + 0; L_j(1) = 1 + ln 2 per arm.
        let want = 16.0 + 3.0 + 2.0 * (1.0 + 2f64.ln());
        assert!((b.cor1(1) - want).abs() < 1e-12);

        let single = BoundInputs::new(vec![stats_with(1.0, 0.3, 1.0)], sched(2, 1), 1.0, vec![0.0]).unwrap();
        assert!((single.cor1(50) - single.l(0, 50)).abs() < 1e-15);
    }

    #[test]
    fn cor1_is_logarithmic() {
        let b = two_arm_inputs(1.0, [0.4, 0.6], [1.0, 2.0], [0.0, 0.2], sched(3, 1));
        let slope = |n: u64| (b.cor1(n) - b.cor1(n / 2)) / 2f64.ln();
        let (s1, s2) = (slope(1 << 20), slope(1 << 24));
        assert!((s1 - s2).abs() / s2 < 0.05, "{s1} vs {s2}");
    }

    #[test]
    fn cor2_plug_in() {
        let b = two_arm_inputs(1.0, [0.0, 0.0], [0.0, 0.0], [0.0, 0.5], sched(1, 1));
        assert!((b.cor2(1, Cor2Variant::Statement) - 4f64.sqrt()).abs() < 1e-15);

        let s = sched(1, 1);
        let b = two_arm_inputs(1.0, [0.2, 0.7], [0.6, 0.9], [0.0, 0.1], s);
        let (r0, r1) = (b.rho(0), b.rho(1));
        let ln = 100f64.ln();
        let term = |r: f64, tail: f64| 4.0 * r * r + 8.0 * r * (6.0 * ln).sqrt() + 26.0 * ln + tail;
        let l0 = 0.6 / 0.8 * (1.0 + 101f64.ln());
        let l1 = 0.9 / 0.3 * (1.0 + 101f64.ln());
        let want = (100.0 * (term(r0, 2.0) + term(r1, 2.0))).sqrt() + l0 + l1;
        assert!((b.cor2(100, Cor2Variant::Statement) - want).abs() < 1e-10);
        let want3 = (100.0 * (term(r0, 3.0) + term(r1, 3.0))).sqrt() + l0 + l1;
        assert!((b.cor2(100, Cor2Variant::Derivation) - want3).abs() < 1e-10);
    }

    #[test]
    fn cor2_grows_like_sqrt_n_log_n() {
        let b = two_arm_inputs(0.9, [0.3, 0.5], [1.0, 1.0], [0.0, 0.3], sched(2, 1));
        let lead = |n: u64| b.cor2(n, Cor2Variant::Statement) - b.l_sum(n);
        // lead(n)/√(n ln n) decreases toward √(26 m) as the ρ terms fade.
        let floor = (26.0f64 * 2.0).sqrt();
        let ratios: Vec<f64> = [100u64, 1000, 10_000, 1_000_000_000]
            .iter()
            .map(|&n| lead(n) / (n as f64 * (n as f64).ln()).sqrt())
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
        assert!(ratios.iter().all(|&r| r > floor));
        // The excess over 26 m ln n is of order √(ln n), tending to 8√6 Σρ.
        let excess = |n: u64| (lead(n).powi(2) / n as f64 - 52.0 * (n as f64).ln()) / (n as f64).ln().sqrt();
        let limit = 8.0 * 6f64.sqrt() * (b.rho(0) + b.rho(1));
        let (e1, e2) = (excess(1 << 20), excess(1 << 60));
        assert!(e1 > e2 && e2 > limit, "{e1} {e2} {limit}");
        let ln = 60.0 * 2f64.ln();
        let rest = (4.0 * (b.rho(0).powi(2) + b.rho(1).powi(2)) + 4.0) / ln.sqrt();
        assert!((e2 - limit - rest).abs() / e2 < 1e-6, "{e2} vs {}", limit + rest);
    }

    fn greedy_cfg(c: f64, d: f64, c_prime: f64) -> GreedyConfig {
        GreedyConfig::with_c(c, d, c_prime, 0.0)
    }

    #[test]
    fn thm2_plug_in() {
        let cfg = greedy_cfg(10.0, 0.5, 9.0);
        assert!((cfg.c_dblprime - 36.0 / (4.5f64.sqrt() - 2.0).powi(2)).abs() < 1e-9);
        assert!((cfg.c_dblprime - 2445.9).abs() < 0.1);
        let (c, d2, m, k) = (10.0f64, 0.25f64, 2.0f64, 200.0f64);
        let cpp = cfg.c_dblprime;
        let base = (k - 1.0) * d2 * 0.5f64.exp() / (c * m);
        let want = c / (d2 * k)
            + (2.0 * c / d2) * base.ln() * (1.0 / base).powf(c / (5.0 * d2))
            + (2.0 * cpp * 1f64.exp() / d2) * (1.0 / base).powf(c / cpp);
        let got = thm2_prob_bound(&cfg, 2, 200).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
        assert!(matches!(thm2_prob_bound(&cfg, 2, 79), Err(BoundError::OutOfValidityRange { .. })));
        assert!(thm2_prob_bound(&cfg, 2, 80).is_ok());
    }

    #[test]
    fn thm2_vanishes() {
        let cfg = greedy_cfg(200.0, 0.5, 32.0);
        let far = thm2_prob_bound(&cfg, 2, 1 << 50).unwrap();
        assert!(far < 1e-3, "{far}");
        let nearer = thm2_prob_bound(&cfg, 2, 1 << 30).unwrap();
        assert!(far < nearer);
    }

    #[test]
    fn thm2_unit_exponent() {
        // c = c″ makes the last exponent one.
        let mut cfg = greedy_cfg(10.0, 1.0, 9.0);
        cfg.c_dblprime = cfg.c;
        let (k, m) = (1000u64, 2usize);
        let r = (cfg.c * m as f64) / ((k - 1) as f64 * 0.5f64.exp());
        let t1 = cfg.c / k as f64;
        let t2 = 2.0 * cfg.c * (1.0 / r).ln() * r.powf(cfg.c / 5.0);
        let t3 = 2.0 * cfg.c * std::f64::consts::E * r;
        assert!((thm2_prob_bound(&cfg, m, k).unwrap() - (t1 + t2 + t3)).abs() < 1e-12);
    }

    #[test]
    fn cor3_examples() {
        let b = two_arm_inputs(1.0, [0.3, 0.4], [1.0, 1.0], [0.0, 0.25], sched(1, 1));
        let cfg = greedy_cfg(10.0, 0.25, 9.0);
        let thr = cfg.validity_threshold(2);
        assert_eq!(thr, 320);
        for n in [1u64, 50, 319] {
            assert!((b.cor3(&cfg, n) - (0.25 * n as f64 + b.l_sum(n))).abs() < 1e-9);
        }
        let single = BoundInputs::new(vec![stats_with(1.0, 0.3, 1.0)], sched(2, 1), 1.0, vec![0.0]).unwrap();
        assert!((single.cor3(&cfg, 1000) - single.l(0, 1000)).abs() < 1e-12);
    }

    #[test]
    fn cor3_growth_matches_summed_probabilities() {
        let b = two_arm_inputs(0.9, [0.3, 0.4], [1.0, 1.0], [0.0, 0.5], sched(1, 1));
        // c′ = 32 gives c″ = 32, so past the validity threshold the first
        // term c/(d²k) dominates and the increment tends to (c/d²)ΣΔ ln 2.
        let cfg = greedy_cfg(2000.0, 0.5, 32.0);
        assert!((cfg.c_dblprime - 32.0).abs() < 1e-9);
        let n = 40_000u64;
        let direct: f64 = (n + 1..=2 * n).map(|k| thm2_prob_bound(&cfg, 2, k).unwrap().min(1.0)).sum::<f64>() * 0.5;
        let diff = b.cor3(&cfg, 2 * n) - b.cor3(&cfg, n);
        let dl = b.l_sum(2 * n) - b.l_sum(n);
        assert!((diff - direct - dl).abs() < 1e-9);
        assert!(direct <= (cfg.c / 0.25) * 0.5 * (2f64.ln() + 0.1) + 1.0, "{direct}");
    }

    #[test]
    fn harmonic_examples() {
        assert!((harmonic_sum_exact(1, 1, 3) - 11.0 / 6.0).abs() < 1e-15);
        assert!((harmonic_bound(1, 1, 3) - (1.0 + 4f64.ln())).abs() < 1e-15);
        assert_eq!(harmonic_sum_exact(4, 3, 1), 0.25);
        assert!(harmonic_bound(4, 3, 1) >= 0.25);
    }

    #[test]
    fn arith_geo_examples() {
        assert!((arith_geo_limit(1.0, 1.0, 0.5) - 4.0).abs() < 1e-15);
        assert!((arith_geo_sum(1.0, 1.0, 0.5, 4) - 3.25).abs() < 1e-12);
        assert!((arith_geo_sum(2.0, 0.0, 0.3, 6) - 2.0 * (1.0 - 0.3f64.powi(6)) / 0.7).abs() < 1e-12);
        assert!((arith_geo_sum(1.0, 1.0, 0.5, 10_000) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn equal_branch_l_is_arith_geo_partial_sum() {
        let s = stats_with(1.7, 0.6, 0.6);
        for (t0, z, n) in [(1u64, 1u64, 1u64), (3, 2, 10), (40, 1, 300)] {
            let phi = s.phi;
            let brute: f64 = (1..=n)
                .map(|i| {
                    let tau = (t0 + z * (i - 1)) as f64;
                    phi.powf(tau - 1.0) * tau
                })
                .sum::<f64>()
                * s.c;
            let closed = l_bound(&s, sched(t0, z), n, Branch::Equal);
            assert!((closed - brute).abs() < 1e-10 * brute.max(1.0), "{closed} vs {brute}");
        }
    }

    #[test]
    fn distinct_l_can_exceed_equal_l() {
        // Υ(τ) ≤ φ^{τ−1}τ always, but the distinct-rate L replaces (1−ψ^τ)/(1−ψ)
        // by 1/(1−ψ), which exceeds τ for small τ when ψ is near one.
        let s = stats_with(1.0, 0.40383425196348965, 0.2915291861681232);
        let ld = l_bound(&s, sched(1, 1), 1, Branch::Distinct);
        let le = l_bound(&s, sched(1, 1), 1, Branch::Equal);
        assert!(ld > le, "{ld} vs {le}");
        assert!((le - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(|_, _| 0.0, 10, 3), 0.0);
        assert!((kappa(|_, i| (i as f64).sqrt(), 50, 1) - 1.0).abs() < 1e-15);
        let s = stats_with(1.0, 0.5, 1.0);
        let l = |_: usize, i: u64| l_bound(&s, sched(1, 1), i, Branch::TimeAveraged);
        // L(i)/√i = 2(1 + ln(1+i))/√i is largest at i = 1 on [1, 10].
        let by_hand = (1..=10u64).map(|i| 2.0 * (1.0 + (1.0 + i as f64).ln()) / (i as f64).sqrt()).fold(0.0, f64::max);
        assert!((kappa(l, 10, 1) - by_hand).abs() < 1e-12);
        assert!((by_hand - 2.0 * (1.0 + 2f64.ln())).abs() < 1e-12);
        let hundred = kappa(l, 100, 1);
        let scan = (1..=100u64).map(|i| l(0, i) / (i as f64).sqrt()).fold(0.0, f64::max);
        assert_eq!(hundred, scan);
    }

    #[test]
    fn overflow_guard() {
        let s = stats_with(1.0, 0.5, 0.9);
        let v = l_bound(&s, sched(1, 1), u64::MAX / 2, Branch::Distinct);
        assert!(v.is_finite());
        let e = l_bound(&s, sched(1, 1), u64::MAX / 2, Branch::Equal);
        assert!(e.is_finite());
    }

    #[test]
    fn curve_csv_rows() {
        let b = two_arm_inputs(1.0, [0.3, 0.4], [1.0, 1.0], [0.0, 0.25], sched(1, 1));
        let c = BoundCurve::sample(CurveKind::L, Some(1), &[1, 2], |k| Some(b.l(1, k)));
        let mut buf = Vec::new();
        c.write_csv_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("1,") && text.lines().all(|l| l.ends_with(",L,1")));
        let grid = log_grid(100_000);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*grid.last().unwrap(), 100_000);
    }

    proptest! {
        #[test]
        fn harmonic_exact_below_bound(t0 in 1u64..100, z in 1u64..20, n in 1u64..2000) {
            prop_assert!(harmonic_sum_exact(t0, z, n) <= harmonic_bound(t0, z, n) + 1e-12);
        }

        #[test]
        fn arith_geo_matches_terms(a in 0.0f64..50.0, d in 0.0f64..10.0, r in 0.0f64..0.99, n in 1u64..300) {
            let brute: f64 = (1..=n).map(|i| r.powi((i - 1) as i32) * (a + d * (i - 1) as f64)).sum();
            prop_assert!((arith_geo_sum(a, d, r, n) - brute).abs() <= 1e-10 * brute.max(1.0));
        }

        #[test]
        fn equal_branch_upsilon_dominates_distinct(gamma in 0.05f64..0.99, lambda in 0.0f64..0.99, tau in 1u64..200) {
            prop_assume!((gamma - lambda).abs() > 1e-3);
            let s = stats_with(1.0, lambda, gamma);
            let ud = upsilon(&s, tau, Branch::Distinct);
            let ue = upsilon(&s, tau, Branch::Equal);
            prop_assert!(ue >= ud * (1.0 - 1e-12));
        }

        #[test]
        fn branch_l_bounds_cover_exact_penalty_sum(gamma in 0.05f64..0.99, lambda in 0.0f64..0.99,
                                                   t0 in 1u64..50, z in 1u64..4, n in 1u64..300) {
            prop_assume!((gamma - lambda).abs() > 1e-3);
            let s = stats_with(1.0, lambda, gamma);
            let sc = sched(t0, z);
            // Σ_i C Υ(τ_i)/S(τ_i): what both L forms bound from above.
            let exact: f64 = (1..=n)
                .map(|i| {
                    let tau = t0 + z * (i - 1);
                    s.c * upsilon(&s, tau, Branch::Distinct) / crate::environment::discount_mass(gamma, tau)
                })
                .sum();
            prop_assert!(l_bound(&s, sc, n, Branch::Distinct) >= exact * (1.0 - 1e-9));
            prop_assert!(l_bound(&s, sc, n, Branch::Equal) >= exact * (1.0 - 1e-9));
        }

        #[test]
        fn time_averaged_l_is_scaled_harmonic(c in 0.5f64..5.0, lambda in 0.0f64..0.95,
                                              t0 in 1u64..60, z in 1u64..5, n in 1u64..5000) {
            let s = stats_with(c, lambda, 1.0);
            let want = c / (1.0 - lambda) * harmonic_bound(t0, z, n);
            prop_assert_eq!(l_bound(&s, sched(t0, z), n, Branch::TimeAveraged), want);
        }

        #[test]
        fn cumulative_bounds_nondecreasing(n in 1u64..5000) {
            let b = two_arm_inputs(0.8, [0.3, 0.5], [1.0, 1.5], [0.0, 0.2], sched(2, 1));
            prop_assert!(b.cor1(n + 1) >= b.cor1(n));
            prop_assert!(b.cor2(n + 1, Cor2Variant::Statement) >= b.cor2(n, Cor2Variant::Statement));
            prop_assert!(b.l(1, n + 1) >= b.l(1, n));
        }
    }
}
