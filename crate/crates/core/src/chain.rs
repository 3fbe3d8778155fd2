//! Finite Markov-chain analysis.
//!
//! A [`TransitionMatrix`] is a validated row-stochastic matrix over a finite
//! state space. The functions in this module compute what the regret bounds
//! need from each arm's chain: the stationary distribution `π`, the time
//! reversal `P̃`, the multiplicative reversiblization `M(P) = P P̃`, its second
//! largest eigenvalue `λ₂(M(P))`, and the derived constants bundled in
//! [`ChainStats`].
//!
//! All functions are pure; the types are plain values and `Send + Sync`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Numerical tolerances used throughout chain analysis.
pub mod tol {
    /// Allowed deviation of a row sum (or distribution total) from one.
    pub const STOCHASTIC: f64 = 1e-12;
    /// Residual `‖πᵀP − πᵀ‖₁` accepted for a stationary distribution.
    pub const STATIONARY: f64 = 1e-10;
    /// Relative off-diagonal threshold for the Jacobi eigensolver.
    pub const JACOBI: f64 = 1e-12;
    /// An entry strictly above this counts as a graph edge.
    pub const EDGE: f64 = 1e-15;
    /// Largest eigenvalue of `M(P)` must equal one within this.
    pub const TOP_EIGENVALUE: f64 = 1e-9;
    /// Eigenvalues of `M(P)` may dip this far below zero from roundoff.
    pub const NEGATIVE_EIGENVALUE: f64 = 1e-9;
    /// `λ₂(M) ≥ 1 − SPECTRAL_GAP` is treated as a violated spectral assumption.
    pub const SPECTRAL_GAP: f64 = 1e-12;
    /// Pivot threshold below which the stationary solve is declared singular.
    pub const PIVOT: f64 = 1e-13;
    /// Power-iteration fallback: step budget and convergence tolerance.
    pub const POWER_MAX_STEPS: usize = 1_000_000;
    pub const POWER_TOL: f64 = 1e-13;
    /// Distribution drift that triggers renormalization in [`super::evolve`].
    pub const RENORMALIZE: f64 = 1e-12;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("transition matrix is empty")]
    Empty,
    #[error("transition matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("distribution is invalid: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain is not ergodic (irreducible: {irreducible}, aperiodic: {aperiodic})")]
    NonErgodicChain { irreducible: bool, aperiodic: bool },
    #[error("stationary distribution has non-positive entry {value} at state {state}")]
    NonPositiveStationary { state: usize, value: f64 },
    #[error("spectral assumption violated: λ₂(M(P)) = {lambda2} is not below 1")]
    SpectralAssumptionViolated { lambda2: f64 },
    #[error("eigenvalue sanity check failed: {0}")]
    EigenSanity(String),
    #[error("discount factor {0} must lie in (0, 1]")]
    InvalidDiscount(f64),
}

pub type Result<T> = std::result::Result<T, ChainError>;

/// Row-stochastic transition matrix over `size` states, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from rows, checking shape, entry range and row sums.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(ChainError::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::NotSquare { row: i, len: row.len(), expected: n });
            }
            data.extend(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(ChainError::Empty);
        }
        if data.len() != size * size {
            return Err(ChainError::DimensionMismatch { expected: size * size, got: data.len() });
        }
        for i in 0..size {
            let row = &data[i * size..(i + 1) * size];
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || v.is_nan() {
                    return Err(ChainError::EntryOutOfRange { row: i, col: j, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol::STOCHASTIC {
                return Err(ChainError::RowNotStochastic { row: i, sum });
            }
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.size..(from + 1) * self.size]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    /// `self * other`, re-validated as stochastic.
    pub fn compose(&self, other: &TransitionMatrix) -> Result<TransitionMatrix> {
        if self.size != other.size {
            return Err(ChainError::DimensionMismatch { expected: self.size, got: other.size });
        }
        let prod = linalg::matmul(&self.data, &other.data, self.size);
        Self::from_row_major(self.size, clamp_unit(prod))
    }

    pub fn transpose_data(&self) -> Vec<f64> {
        let n = self.size;
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = ChainError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(p: TransitionMatrix) -> Self {
        p.rows()
    }
}

// Products of stochastic matrices can overshoot [0, 1] by an ulp.
fn clamp_unit(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = x.clamp(0.0, 1.0);
    }
    v
}

/// Probability distribution over the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ChainError::InvalidDistribution("empty".into()));
        }
        if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(ChainError::InvalidDistribution(format!("entry {i} = {v}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::STOCHASTIC {
            return Err(ChainError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// All mass on `state`.
    pub fn point_mass(size: usize, state: usize) -> Self {
        let mut v = vec![0.0; size];
        v[state] = 1.0;
        Self(v)
    }

    pub fn uniform(size: usize) -> Self {
        Self(vec![1.0 / size as f64; size])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// One step of the chain: `βᵀ P`.
    pub fn step(&self, p: &TransitionMatrix) -> Self {
        renormalized(linalg::vecmat(&self.0, p.as_row_major(), p.size()))
    }

    /// `‖self − other‖₁`.
    pub fn l1_distance(&self, other: &StateDistribution) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Chi-squared distance `Σ (β(θ) − π(θ))² / π(θ)`.
    pub fn chi_squared(&self, pi: &StateDistribution) -> f64 {
        self.0.iter().zip(&pi.0).map(|(b, p)| (b - p) * (b - p) / p).sum()
    }
}

impl TryFrom<Vec<f64>> for StateDistribution {
    type Error = ChainError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StateDistribution> for Vec<f64> {
    fn from(d: StateDistribution) -> Self {
        d.0
    }
}

fn renormalized(mut v: Vec<f64>) -> StateDistribution {
    for x in &mut v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol::RENORMALIZE && s > 0.0 {
        for x in &mut v {
            *x /= s;
        }
    }
    StateDistribution(v)
}

/// Outcome of the structural checks behind ergodicity and the spectral assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Whether `M(P)` is irreducible; `false` whenever `P` itself is not ergodic.
    pub m_irreducible: bool,
}

impl AssumptionReport {
    pub fn ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }

    pub fn all_hold(&self) -> bool {
        self.ergodic() && self.m_irreducible
    }
}

/// Adjacency of entries above [`tol::EDGE`], as one bitset per row.
fn adjacency(data: &[f64], n: usize) -> Vec<Vec<u64>> {
    let words = n.div_ceil(64);
    (0..n)
        .map(|i| {
            let mut row = vec![0u64; words];
            for j in 0..n {
                if data[i * n + j] > tol::EDGE {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect()
}

fn bool_matmul(a: &[Vec<u64>], b: &[Vec<u64>], n: usize) -> Vec<Vec<u64>> {
    let words = n.div_ceil(64);
    a.iter()
        .map(|arow| {
            let mut out = vec![0u64; words];
            for k in 0..n {
                if arow[k / 64] >> (k % 64) & 1 == 1 {
                    for (o, w) in out.iter_mut().zip(&b[k]) {
                        *o |= w;
                    }
                }
            }
            out
        })
        .collect()
}

fn all_set(rows: &[Vec<u64>], n: usize) -> bool {
    rows.iter().all(|row| (0..n).all(|j| row[j / 64] >> (j % 64) & 1 == 1))
}

fn reachable_from(adj: &[Vec<u64>], n: usize, start: usize, reverse: bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if reverse {
                adj[v][u / 64] >> (u % 64) & 1 == 1
            } else {
                adj[u][v / 64] >> (v % 64) & 1 == 1
            };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn strongly_connected(data: &[f64], n: usize) -> bool {
    let adj = adjacency(data, n);
    reachable_from(&adj, n, 0, false).into_iter().all(|b| b)
        && reachable_from(&adj, n, 0, true).into_iter().all(|b| b)
}

/// Primitivity via boolean powers: an irreducible matrix is aperiodic iff
/// `A^w > 0` for the Wielandt exponent `w = (n−1)² + 1`. Powers beyond a
/// positive one stay positive, so squaring up to the first power ≥ w suffices.
fn primitive(data: &[f64], n: usize) -> bool {
    let wielandt = (n - 1) * (n - 1) + 1;
    let mut power = adjacency(data, n);
    let mut exp = 1usize;
    while exp < wielandt {
        power = bool_matmul(&power, &power, n);
        exp *= 2;
    }
    all_set(&power, n)
}

/// gcd of all cycle lengths in the positive-entry graph, via BFS levels in
/// every strongly connected component. Zero when the graph has no cycle.
fn cycle_gcd(data: &[f64], n: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let adj = adjacency(data, n);
    let edge = |u: usize, v: usize| adj[u][v / 64] >> (v % 64) & 1 == 1;
    let mut comp = vec![usize::MAX; n];
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let fwd = reachable_from(&adj, n, s, false);
        let bwd = reachable_from(&adj, n, s, true);
        for v in 0..n {
            if fwd[v] && bwd[v] {
                comp[v] = s;
            }
        }
    }
    let mut g = 0usize;
    for root in 0..n {
        if comp[root] != root {
            continue;
        }
        let mut level = vec![usize::MAX; n];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if comp[v] == root && edge(u, v) {
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    } else {
                        let diff = (level[u] + 1).abs_diff(level[v]);
                        g = gcd(g, diff);
                    }
                }
            }
        }
    }
    g
}

fn validate_row_major(data: &[f64], n: usize) -> Result<()> {
    for i in 0..n {
        let sum: f64 = data[i * n..(i + 1) * n].iter().sum();
        if (sum - 1.0).abs() > tol::STOCHASTIC {
            return Err(ChainError::RowNotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Checks irreducibility, aperiodicity, and irreducibility of `M(P)`.
pub fn check_assumptions(p: &TransitionMatrix) -> Result<AssumptionReport> {
    let n = p.size();
    let data = p.as_row_major();
    validate_row_major(data, n)?;
    let irreducible = strongly_connected(data, n);
    let aperiodic = if irreducible { primitive(data, n) } else { cycle_gcd(data, n) == 1 };
    let m_irreducible = if irreducible && aperiodic {
        let m = multiplicative_reversiblization(p)?;
        strongly_connected(m.as_row_major(), n)
    } else {
        false
    };
    Ok(AssumptionReport { irreducible, aperiodic, m_irreducible })
}

fn require_ergodic(p: &TransitionMatrix) -> Result<()> {
    let n = p.size();
    let data = p.as_row_major();
    let irreducible = strongly_connected(data, n);
    let aperiodic = irreducible && primitive(data, n);
    if irreducible && aperiodic {
        Ok(())
    } else {
        let aperiodic = if irreducible { aperiodic } else { cycle_gcd(data, n) == 1 };
        Err(ChainError::NonErgodicChain { irreducible, aperiodic })
    }
}

fn stationary_residual(pi: &[f64], p: &TransitionMatrix) -> f64 {
    let next = linalg::vecmat(pi, p.as_row_major(), p.size());
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

fn power_iteration(p: &TransitionMatrix) -> Vec<f64> {
    let n = p.size();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..tol::POWER_MAX_STEPS {
        let next = linalg::vecmat(&x, p.as_row_major(), n);
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if diff < tol::POWER_TOL {
            break;
        }
    }
    x
}

/// Unique stationary distribution of an ergodic chain.
///
/// Solves `(Pᵀ − I) π = 0` with the last equation replaced by `Σ π = 1`,
/// falling back to power iteration if that system is numerically singular
/// or its solution misses the stationarity tolerance.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<StateDistribution> {
    require_ergodic(p)?;
    let n = p.size();
    let mut a = p.transpose_data();
    for i in 0..n {
        a[i * n + i] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;

    let direct = linalg::solve(a, b, n, tol::PIVOT)
        .filter(|pi| pi.iter().all(|v| v.is_finite()) && stationary_residual(pi, p) < tol::STATIONARY);
    let mut pi = match direct {
        Some(pi) => pi,
        None => power_iteration(p),
    };
    let s: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= s;
    }
    if let Some((state, &value)) = pi.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(ChainError::NonPositiveStationary { state, value });
    }
    Ok(StateDistribution(pi))
}

/// Time reversal `P̃(θ, θ′) = π(θ′) P(θ′, θ) / π(θ)`.
pub fn time_reversal(p: &TransitionMatrix, pi: &StateDistribution) -> Result<TransitionMatrix> {
    let n = p.size();
    if pi.len() != n {
        return Err(ChainError::DimensionMismatch { expected: n, got: pi.len() });
    }
    if let Some((state, &value)) = pi.probs().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(ChainError::NonPositiveStationary { state, value });
    }
    let pr = pi.probs();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = pr[j] * p.get(j, i) / pr[i];
        }
        // Roundoff in π can push the row sum off one by more than the
        // stochasticity tolerance; the exact reversal is stochastic.
        let s: f64 = data[i * n..(i + 1) * n].iter().sum();
        for v in &mut data[i * n..(i + 1) * n] {
            *v = (*v / s).clamp(0.0, 1.0);
        }
    }
    TransitionMatrix::from_row_major(n, data)
}

/// Multiplicative reversiblization `M(P) = P P̃`.
pub fn multiplicative_reversiblization(p: &TransitionMatrix) -> Result<TransitionMatrix> {
    let pi = stationary_distribution(p)?;
    reversiblization_with(p, &pi)
}

fn reversiblization_with(p: &TransitionMatrix, pi: &StateDistribution) -> Result<TransitionMatrix> {
    let rev = time_reversal(p, pi)?;
    let n = p.size();
    let mut m = linalg::matmul(p.as_row_major(), rev.as_row_major(), n);
    for i in 0..n {
        let s: f64 = m[i * n..(i + 1) * n].iter().sum();
        for v in &mut m[i * n..(i + 1) * n] {
            *v = (*v / s).clamp(0.0, 1.0);
        }
    }
    TransitionMatrix::from_row_major(n, m)
}

/// Full spectrum of `M(P)` in decreasing order, computed on the symmetric
/// similarity transform `D^{1/2} M D^{−1/2}` with `D = diag(π)`.
pub fn reversiblization_spectrum(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let pi = stationary_distribution(p)?;
    spectrum_with(p, &pi)
}

fn spectrum_with(p: &TransitionMatrix, pi: &StateDistribution) -> Result<Vec<f64>> {
    let m = reversiblization_with(p, pi)?;
    let n = p.size();
    let sq: Vec<f64> = pi.probs().iter().map(|v| v.sqrt()).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = sq[i] * m.get(i, j) / sq[j];
        }
    }
    let eig = linalg::symmetric_eigenvalues(&s, n, tol::JACOBI);
    if (eig[0] - 1.0).abs() > tol::TOP_EIGENVALUE {
        return Err(ChainError::EigenSanity(format!("largest eigenvalue {} is not 1", eig[0])));
    }
    if let Some(&low) = eig.last() {
        if low < -tol::NEGATIVE_EIGENVALUE {
            return Err(ChainError::EigenSanity(format!("negative eigenvalue {low}")));
        }
    }
    Ok(eig)
}

/// Second largest eigenvalue of `M(P)`, in `[0, 1)`.
pub fn lambda2_m(p: &TransitionMatrix) -> Result<f64> {
    let pi = stationary_distribution(p)?;
    lambda2_with(p, &pi)
}

fn lambda2_with(p: &TransitionMatrix, pi: &StateDistribution) -> Result<f64> {
    let eig = spectrum_with(p, pi)?;
    let lambda2 = eig.get(1).copied().unwrap_or(0.0).max(0.0);
    if lambda2 >= 1.0 - tol::SPECTRAL_GAP {
        return Err(ChainError::SpectralAssumptionViolated { lambda2 });
    }
    Ok(lambda2)
}

/// Per-arm spectral constants feeding every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub pi: StateDistribution,
    /// `λ₂(M(P))`.
    pub lambda2_m: f64,
    /// `λ = sqrt(λ₂(M(P)))`, the geometric mixing rate.
    pub lambda: f64,
    /// Distribution-free constant `½ (1 + (1 − min π)² / min π)^{1/2}`.
    pub c: f64,
    /// `min(γ, λ)`.
    pub eta: f64,
    /// `max(γ, λ)`.
    pub phi: f64,
    /// `η / φ`, zero when `φ = 0`.
    pub psi: f64,
}

/// `C = ½ (1 + (1 − p)² / p)^{1/2}` for `p = min π`.
pub fn distribution_free_constant(min_pi: f64) -> f64 {
    0.5 * (1.0 + (1.0 - min_pi).powi(2) / min_pi).sqrt()
}

impl ChainStats {
    /// Assembles the constants from `π`, `λ₂(M)` and the discount factor.
    pub fn from_parts(pi: StateDistribution, lambda2_m: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(ChainError::InvalidDiscount(gamma));
        }
        let lambda = lambda2_m.sqrt();
        let c = distribution_free_constant(pi.min());
        let eta = gamma.min(lambda);
        let phi = gamma.max(lambda);
        let psi = if phi > 0.0 { eta / phi } else { 0.0 };
        Ok(Self { pi, lambda2_m, lambda, c, eta, phi, psi })
    }

    /// Same chain, different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::from_parts(self.pi.clone(), self.lambda2_m, gamma)
    }
}

/// Computes [`ChainStats`] for `P` under discount factor `gamma ∈ (0, 1]`.
pub fn chain_stats(p: &TransitionMatrix, gamma: f64) -> Result<ChainStats> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ChainError::InvalidDiscount(gamma));
    }
    let pi = stationary_distribution(p)?;
    let lambda2 = lambda2_with(p, &pi)?;
    ChainStats::from_parts(pi, lambda2, gamma)
}

/// `βᵀ P^τ`.
pub fn evolve(beta: &StateDistribution, p: &TransitionMatrix, tau: u64) -> StateDistribution {
    let mut cur = beta.clone();
    for _ in 0..tau {
        cur = cur.step(p);
    }
    cur
}

/// Right-hand side of the Fill convergence bound: `¼ χ₀² λ₂(M)ⁿ`.
pub fn fill_bound(chi0sq: f64, lambda2_m: f64, n: u64) -> f64 {
    0.25 * chi0sq * pow_u64(lambda2_m, n)
}

/// Distribution-free Fill bound, with `χ₀²` replaced by `1 + (1 − min π)²/min π`.
pub fn fill_bound_uniform(min_pi: f64, lambda2_m: f64, n: u64) -> f64 {
    fill_bound(1.0 + (1.0 - min_pi).powi(2) / min_pi, lambda2_m, n)
}

fn pow_u64(x: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 { x.powi(n as i32) } else { x.powf(n as f64) }
}
