//! Finite discrete-time Markov chains.
//!
//! Distribution evolution `π ← πP`, n-step transition matrices,
//! stationary distributions by power iteration, ergodicity
//! classification (communicating classes and periods), chain
//! realization, and Monte Carlo estimation of path events.

use crate::error::{Result, SimError};
use crate::montecarlo::EstimateReport;
use crate::rng::UniformSource;

use serde::Deserialize;
use std::collections::VecDeque;

/// Row-stochastic transition matrix with state labels.
///
/// Immutable after construction and safe to share between workers.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    labels: Vec<String>,
    p: Vec<Vec<f64>>,
    repair_notes: Vec<String>,
}

impl TransitionMatrix {
    /// Validate and build. Rows whose sums are off by less than 1e−9
    /// are renormalized (with a note retrievable via
    /// [`TransitionMatrix::warnings`]); larger deviations are errors.
    pub fn new(labels: Vec<String>, p: Vec<Vec<f64>>) -> Result<Self> {
        let m = labels.len();
        if m == 0 || p.len() != m || p.iter().any(|row| row.len() != m) {
            return Err(SimError::InvalidModel(format!(
                "transition matrix must be {m}x{m} to match {m} labels"
            )));
        }
        let mut repair_notes = Vec::new();
        let mut p = p;
        for (i, row) in p.iter_mut().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(SimError::InvalidModel(format!(
                    "row {i} has an entry outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            let off = (sum - 1.0).abs();
            if off <= 1e-12 {
                continue;
            }
            if off < 1e-9 {
                for x in row.iter_mut() {
                    *x /= sum;
                }
                repair_notes.push(format!(
                    "row {i} sum {sum} off by {off:e}; renormalized"
                ));
            } else {
                return Err(SimError::InvalidModel(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self { labels, p, repair_notes })
    }

    /// Convenience constructor with labels "0", "1", ….
    pub fn from_rows(p: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..p.len()).map(|i| i.to_string()).collect();
        Self::new(labels, p)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    /// Repair notes generated during validation.
    pub fn warnings(&self) -> &[String] {
        &self.repair_notes
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Distribution over the states of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SimError::InvalidModel("probability vector is empty".into()));
        }
        if entries.iter().any(|&x| !(x >= 0.0)) {
            return Err(SimError::InvalidModel(
                "probability vector has a negative entry".into(),
            ));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidModel(format!(
                "probability vector sums to {sum}, not 1"
            )));
        }
        Ok(Self { entries })
    }

    /// Point mass at state `k`.
    pub fn point_mass(m: usize, k: usize) -> Result<Self> {
        if k >= m {
            return Err(SimError::InvalidParameter(format!(
                "point mass index {k} out of range for {m} states"
            )));
        }
        let mut entries = vec![0.0; m];
        entries[k] = 1.0;
        Ok(Self { entries })
    }

    /// Uniform distribution over `m` states.
    pub fn uniform(m: usize) -> Self {
        Self { entries: vec![1.0 / m as f64; m] }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sample a state index from this distribution.
    pub fn sample(&self, stream: &mut dyn UniformSource) -> usize {
        sample_row(&self.entries, stream)
    }
}

fn sample_row(probs: &[f64], stream: &mut dyn UniformSource) -> usize {
    let u = stream.next_uniform();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u <= acc {
            return k;
        }
    }
    // Rounding pushed the cumulative sum fractionally below u.
    probs.len() - 1
}

/// Structural classification of a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainClassification {
    /// Communicating classes, each a sorted list of state indices.
    pub classes: Vec<Vec<usize>>,
    /// Period of each class; 0 when the class contains no cycle.
    pub periods: Vec<u64>,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub ergodic: bool,
}

/// One evolution step `π⁽ᵗ⁺¹⁾ = π⁽ᵗ⁾P` (row vector times matrix).
pub fn step_distribution(
    pi: &ProbabilityVector,
    tm: &TransitionMatrix,
) -> Result<ProbabilityVector> {
    let m = tm.dim();
    if pi.entries.len() != m {
        return Err(SimError::InvalidParameter(format!(
            "distribution has {} entries but the chain has {m} states",
            pi.entries.len()
        )));
    }
    let mut out = vec![0.0; m];
    for (i, &pi_i) in pi.entries.iter().enumerate() {
        if pi_i == 0.0 {
            continue;
        }
        for (j, out_j) in out.iter_mut().enumerate() {
            *out_j += pi_i * tm.p[i][j];
        }
    }
    Ok(ProbabilityVector { entries: out })
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `Pᵗ` with `P⁰ = I`; the result's rows stay stochastic.
pub fn n_step_matrix(tm: &TransitionMatrix, t: u32) -> TransitionMatrix {
    let m = tm.dim();
    let mut acc: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| f64::from(i == j)).collect())
        .collect();
    for _ in 0..t {
        acc = mat_mul(&acc, &tm.p);
    }
    TransitionMatrix {
        labels: tm.labels.clone(),
        p: acc,
        repair_notes: Vec::new(),
    }
}

/// Stationary distribution of an ergodic chain by power iteration.
///
/// Refuses non-ergodic chains (use
/// [`stationary_distribution_unchecked`] to skip the classification
/// guard). Stops when `‖πP − π‖∞ < tol`.
pub fn stationary_distribution(
    tm: &TransitionMatrix,
    tol: f64,
    max_iter: u64,
) -> Result<ProbabilityVector> {
    let class = classify(tm);
    if !class.ergodic {
        return Err(SimError::InvalidModel(format!(
            "chain is not ergodic (irreducible: {}, aperiodic: {}); stationary distribution is not unique",
            class.irreducible, class.aperiodic
        )));
    }
    stationary_distribution_unchecked(tm, tol, max_iter)
}

/// Power iteration without the ergodicity guard.
pub fn stationary_distribution_unchecked(
    tm: &TransitionMatrix,
    tol: f64,
    max_iter: u64,
) -> Result<ProbabilityVector> {
    let mut pi = ProbabilityVector::uniform(tm.dim());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = step_distribution(&pi, tm)?;
        residual = pi
            .entries
            .iter()
            .zip(&next.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if residual < tol {
            return Ok(pi);
        }
    }
    Err(SimError::NoConvergence(
        format!("power iteration exceeded {max_iter} iterations"),
        residual,
    ))
}

/// Communicating classes, per-class periods, and the ergodicity flags.
pub fn classify(tm: &TransitionMatrix) -> ChainClassification {
    let m = tm.dim();
    let reach = reachability(tm);
    // i and j communicate when each reaches the other.
    let mut class_of = vec![usize::MAX; m];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..m {
        if class_of[i] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = Vec::new();
        for j in 0..m {
            if class_of[j] == usize::MAX && reach[i][j] && reach[j][i] {
                class_of[j] = id;
                members.push(j);
            }
        }
        classes.push(members);
    }
    let periods: Vec<u64> = classes.iter().map(|c| class_period(tm, c)).collect();
    let irreducible = classes.len() == 1;
    let aperiodic = periods.iter().all(|&d| d == 1);
    ChainClassification {
        irreducible,
        aperiodic,
        ergodic: irreducible && aperiodic,
        classes,
        periods,
    }
}

/// `reach[i][j]`: j is reachable from i in zero or more steps.
fn reachability(tm: &TransitionMatrix) -> Vec<Vec<bool>> {
    let m = tm.dim();
    let mut reach = vec![vec![false; m]; m];
    for start in 0..m {
        let mut queue = VecDeque::from([start]);
        reach[start][start] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..m {
                if tm.p[u][v] > 0.0 && !reach[start][v] {
                    reach[start][v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    reach
}

/// Period of a communicating class: gcd of cycle lengths through the
/// class, computed from BFS levels (for every in-class edge `u→v`,
/// accumulate gcd of `level(u) + 1 − level(v)`). Returns 0 for a class
/// with no cycle.
fn class_period(tm: &TransitionMatrix, members: &[usize]) -> u64 {
    let in_class = |s: usize| members.contains(&s);
    let root = members[0];
    let m = tm.dim();
    let mut level = vec![i64::MIN; m];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut g: u64 = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if tm.p[u][v] <= 0.0 || !in_class(v) {
                continue;
            }
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] + 1 - level[v]).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    g
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Realize a chain of `n` states: `X₀ ~ π0`, then each `X_{t+1}` drawn
/// from row `X_t` of `P`.
pub fn generate_chain(
    pi0: &ProbabilityVector,
    tm: &TransitionMatrix,
    n: usize,
    stream: &mut dyn UniformSource,
) -> Result<Vec<usize>> {
    if pi0.entries.len() != tm.dim() {
        return Err(SimError::InvalidParameter(format!(
            "initial distribution has {} entries but the chain has {} states",
            pi0.entries.len(),
            tm.dim()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut path = Vec::with_capacity(n);
    let mut state = pi0.sample(stream);
    path.push(state);
    for _ in 1..n {
        state = sample_row(&tm.p[state], stream);
        path.push(state);
    }
    Ok(path)
}

/// Monte Carlo estimate of `P(predicate holds)` over realizations of
/// length `horizon + 1` (states `X₀ … X_horizon`).
pub fn estimate_chain_event(
    pi0: &ProbabilityVector,
    tm: &TransitionMatrix,
    horizon: usize,
    predicate: impl Fn(&[usize]) -> bool,
    n_sims: u64,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<EstimateReport> {
    if horizon < 1 {
        return Err(SimError::InvalidParameter("horizon must be >= 1".into()));
    }
    if n_sims < 2 {
        return Err(SimError::InvalidParameter("n_sims must be >= 2".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n_sims {
        let path = generate_chain(pi0, tm, horizon + 1, stream)?;
        let y = f64::from(predicate(&path));
        let d = y - mean;
        mean += d / k as f64;
        m2 += d * (y - mean);
    }
    let sample_std = (m2 / (n_sims - 1) as f64).sqrt();
    EstimateReport::new(mean, sample_std, n_sims, level)
}

/// On-disk chain description:
/// `{ "labels": [...], "P": [[...]], "pi0": [...] }`.
#[derive(Debug, Deserialize)]
pub struct ChainSpec {
    pub labels: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub pi0: Option<Vec<f64>>,
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| SimError::InvalidModel(format!("chain spec parse error: {e}")))
    }

    pub fn build(self) -> Result<(TransitionMatrix, Option<ProbabilityVector>)> {
        let tm = TransitionMatrix::new(self.labels, self.p)?;
        let pi0 = match self.pi0 {
            Some(v) => Some(ProbabilityVector::new(v)?),
            None => None,
        };
        Ok((tm, pi0))
    }
}
