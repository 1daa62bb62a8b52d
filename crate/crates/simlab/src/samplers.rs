//! Random variate generation.
//!
//! Univariate sampling by inverse transform (exponential, discrete,
//! Bernoulli, arbitrary quantile functions, ordered statistics),
//! acceptance-rejection against a user-supplied envelope, standard
//! normals via Box–Muller or an exponential-envelope rejection scheme,
//! and multivariate normals via the Cholesky factor of the covariance.
//!
//! All samplers draw from a caller-provided [`UniformSource`] and are
//! otherwise pure, so they can run on independent substreams
//! concurrently.

use crate::error::{Result, SimError};
use crate::rng::UniformSource;

use std::f64::consts::PI;

/// A finite distribution over strictly increasing states `x₁ < … < x_m`
/// with probabilities `p₁ … p_m`.
///
/// The cumulative vector is precomputed so each draw is a binary search.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    states: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates the state/probability lists and precomputes the cdf.
    pub fn new(states: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if states.is_empty() || states.len() != probs.len() {
            return Err(SimError::InvalidModel(format!(
                "discrete distribution needs matching non-empty states/probs, got {} states and {} probs",
                states.len(),
                probs.len()
            )));
        }
        if states.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SimError::InvalidModel(
                "discrete states must be strictly increasing".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(SimError::InvalidModel(
                "discrete probabilities must be non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidModel(format!(
                "discrete probabilities must sum to 1, got {total}"
            )));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        // Pin the last entry so a draw of u close to 1 cannot fall off
        // the end through rounding.
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { states, probs, cumulative })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the smallest k with `u ≤ F(x_k)`, by binary search.
    pub fn index_for(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c < u)
    }
}

/// Which extreme an ordered-statistic sampler targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderedWhich {
    Min,
    Max,
}

/// Envelope for acceptance-rejection sampling: target density `f`,
/// proposal density `g`, constant `C ≥ 1` with `f ≤ C·g`, and a sampler
/// for the proposal.
pub struct EnvelopeSpec {
    pub target_pdf: Box<dyn Fn(f64) -> f64>,
    pub proposal_pdf: Box<dyn Fn(f64) -> f64>,
    pub constant: f64,
    pub proposal_sampler: Box<dyn Fn(&mut dyn UniformSource) -> f64>,
}

impl EnvelopeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.constant >= 1.0) {
            return Err(SimError::InvalidModel(format!(
                "envelope constant must satisfy C >= 1, got {}",
                self.constant
            )));
        }
        Ok(())
    }
}

/// An accepted draw together with how many proposals it consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accepted {
    pub value: f64,
    pub trials: u64,
}

/// Mean vector and covariance matrix of a multivariate normal.
#[derive(Debug, Clone)]
pub struct MultiNormalSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl MultiNormalSpec {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.len() != d || covariance.iter().any(|row| row.len() != d) {
            return Err(SimError::InvalidModel(format!(
                "covariance must be {d}x{d} to match the mean vector"
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (covariance[i][j] - covariance[j][i]).abs() > 1e-12 {
                    return Err(SimError::InvalidModel(format!(
                        "covariance not symmetric at ({i},{j}): {} vs {}",
                        covariance[i][j], covariance[j][i]
                    )));
                }
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower-triangular `B` with `B·Bᵀ = Σ`, or a diagnostic if Σ is not
    /// positive definite.
    pub fn cholesky(&self) -> Result<Vec<Vec<f64>>> {
        cholesky_lower(&self.covariance)
    }
}

/// Dense Cholesky factorization of a small symmetric matrix.
pub fn cholesky_lower(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(SimError::Numerical(format!(
                        "Cholesky failed: matrix not positive definite at pivot {i} (value {sum:e})"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Exponential variate with rate `λ`, by inversion: `X = −ln(1−U)/λ`.
///
/// The `1−U` form keeps the logarithm finite for `U = 0` and makes the
/// map increasing in `U`.
pub fn sample_exponential(lambda: f64, stream: &mut dyn UniformSource) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "exponential rate must be positive, got {lambda}"
        )));
    }
    let u = stream.next_uniform();
    Ok(-(1.0 - u).ln() / lambda)
}

/// Draw a state from a discrete distribution: the smallest `x_k` with
/// `U ≤ F(x_k)`.
pub fn sample_discrete(dist: &DiscreteDistribution, stream: &mut dyn UniformSource) -> f64 {
    dist.states[dist.index_for(stream.next_uniform())]
}

/// Bernoulli draw: 1 if `U ≤ p`, else 0.
pub fn sample_bernoulli(p: f64, stream: &mut dyn UniformSource) -> Result<u8> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidParameter(format!(
            "Bernoulli probability must lie in [0,1], got {p}"
        )));
    }
    Ok(u8::from(stream.next_uniform() <= p))
}

/// Inverse-transform draw for an arbitrary quantile function `F⁻¹`.
pub fn sample_inverse_transform(
    cdf_inverse: impl Fn(f64) -> f64,
    stream: &mut dyn UniformSource,
) -> f64 {
    cdf_inverse(stream.next_uniform())
}

/// Extreme of `n` iid draws from the distribution with quantile
/// function `F⁻¹`, using one uniform: the maximum is `F⁻¹(U^{1/n})`,
/// the minimum `F⁻¹(1 − U^{1/n})`.
pub fn sample_ordered_statistic(
    cdf_inverse: impl Fn(f64) -> f64,
    n: u64,
    which: OrderedWhich,
    stream: &mut dyn UniformSource,
) -> Result<f64> {
    if n < 1 {
        return Err(SimError::InvalidParameter(
            "ordered statistic needs n >= 1".into(),
        ));
    }
    let root = stream.next_uniform().powf(1.0 / n as f64);
    Ok(match which {
        OrderedWhich::Max => cdf_inverse(root),
        OrderedWhich::Min => cdf_inverse(1.0 - root),
    })
}

/// Acceptance-rejection draw: propose `X ~ g`, accept when
/// `U ≤ f(X)/(C·g(X))`. Reports the number of proposals consumed.
///
/// If a proposal ever shows `f(X) > C·g(X)` the envelope assumption is
/// broken and a diagnostic is returned rather than a biased sample.
pub fn sample_accept_reject(env: &EnvelopeSpec, stream: &mut dyn UniformSource) -> Result<Accepted> {
    env.validate()?;
    let mut trials = 0u64;
    loop {
        trials += 1;
        let x = (env.proposal_sampler)(stream);
        let fx = (env.target_pdf)(x);
        let bound = env.constant * (env.proposal_pdf)(x);
        if fx > bound * (1.0 + 1e-12) {
            return Err(SimError::Numerical(format!(
                "envelope violated at x={x}: f(x)={fx} exceeds C*g(x)={bound}"
            )));
        }
        let u = stream.next_uniform();
        if u * bound <= fx {
            return Ok(Accepted { value: x, trials });
        }
    }
}

/// Standard normal variate via Box–Muller, cosine branch:
/// `X = √(−2 ln(1−U₂)) · cos(2π U₁)`.
///
/// The sine twin is discarded; uniforms live in `[0,1)` so the `1−U`
/// argument of the logarithm never reaches zero.
pub fn sample_standard_normal(stream: &mut dyn UniformSource) -> f64 {
    let u1 = stream.next_uniform();
    let u2 = stream.next_uniform();
    (-2.0 * (1.0 - u2).ln()).sqrt() * (2.0 * PI * u1).cos()
}

/// Standard normal variate by acceptance-rejection with an `Exp(1)`
/// envelope (`C = √(2e/π)`) and a fair random sign.
///
/// Each round draws `V₁, V₂ ~ Exp(1)` and accepts `X = V₂` when
/// `V₁ ≥ (V₂−1)²/2`; `trials` counts proposal rounds.
pub fn sample_normal_ar(stream: &mut dyn UniformSource) -> Accepted {
    let mut trials = 0u64;
    let magnitude = loop {
        trials += 1;
        let v1 = -(1.0 - stream.next_uniform()).ln();
        let v2 = -(1.0 - stream.next_uniform()).ln();
        if v1 >= (v2 - 1.0) * (v2 - 1.0) / 2.0 {
            break v2;
        }
    };
    let sign = if stream.next_uniform() < 0.5 { -1.0 } else { 1.0 };
    Accepted { value: sign * magnitude, trials }
}

/// `n` draws from a multivariate normal: each sample is `μ + B·Z` with
/// `Z` iid standard normal and `B` the lower Cholesky factor of Σ.
pub fn sample_multivariate_normal(
    spec: &MultiNormalSpec,
    n: usize,
    stream: &mut dyn UniformSource,
) -> Result<Vec<Vec<f64>>> {
    let b = spec.cholesky()?;
    let d = spec.dim();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| sample_standard_normal(stream)).collect();
        let mut x = spec.mean.clone();
        for i in 0..d {
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                x[i] += b[i][k] * zk;
            }
        }
        out.push(x);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Named quantile functions used by the scenario library.
// ---------------------------------------------------------------------

/// Weibull(α, λ) quantile: `λ(−ln(1−u))^{1/α}`. With α=1 this is the
/// exponential with mean λ.
pub fn inverse_weibull(alpha: f64, lambda: f64) -> impl Fn(f64) -> f64 {
    move |u| lambda * (-(1.0 - u).ln()).powf(1.0 / alpha)
}

/// Beta(α, 1) quantile: `u^{1/α}`.
pub fn inverse_beta_alpha_one(alpha: f64) -> impl Fn(f64) -> f64 {
    move |u| u.powf(1.0 / alpha)
}

/// Beta(1, β) quantile: `1 − (1−u)^{1/β}`.
pub fn inverse_beta_one_beta(beta: f64) -> impl Fn(f64) -> f64 {
    move |u| 1.0 - (1.0 - u).powf(1.0 / beta)
}

/// Quantile of the density `½ sin x` on `[0, π]`: `arccos(1 − 2u)`.
pub fn inverse_sine_pdf(u: f64) -> f64 {
    (1.0 - 2.0 * u).acos()
}

/// Quantile of the density `2x` on `[0, 1]`: `√u`.
pub fn inverse_linear_pdf(u: f64) -> f64 {
    u.sqrt()
}

/// Binomial(n, p) draw as a sum of Bernoulli indicators.
///
/// For large `n` a normal approximation `N(np, np(1−p))` is the usual
/// shortcut; we use the classical variance `np(1−p)` wherever that
/// approximation appears (one historical presentation of the rule uses
/// a different variance expression, which we do not follow).
pub fn sample_binomial(n: u64, p: f64, stream: &mut dyn UniformSource) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidParameter(format!(
            "binomial probability must lie in [0,1], got {p}"
        )));
    }
    let mut total = 0u64;
    for _ in 0..n {
        total += u64::from(stream.next_uniform() <= p);
    }
    Ok(total)
}
