//! Markov chain Monte Carlo.
//!
//! Metropolis–Hastings with random-walk, independence, and discrete
//! proposal kernels, burn-in bookkeeping, posterior sampling from a
//! log-likelihood plus log-prior, and a nested Bayesian value-at-risk
//! study. All densities are consumed in log space: the acceptance
//! probability is `exp(min(Δlog, 0))`, which survives targets (such as
//! 60-term likelihood products) that underflow in linear space.

use crate::error::{Result, SimError};
use crate::markov::{ProbabilityVector, TransitionMatrix};
use crate::montecarlo::EstimateReport;
use crate::processes::{em_terminal, DiffusionSpec};
use crate::rng::UniformSource;
use crate::samplers::{cholesky_lower, sample_standard_normal};

use std::f64::consts::PI;

/// An unnormalized target density, given as a log-density.
pub struct TargetDensity {
    pub log_density: Box<dyn Fn(&[f64]) -> f64>,
    pub dimension: usize,
}

impl TargetDensity {
    pub fn new(dimension: usize, log_density: impl Fn(&[f64]) -> f64 + 'static) -> Self {
        Self { log_density: Box::new(log_density), dimension }
    }
}

/// Proposal kernel q(x, ·) for Metropolis–Hastings.
pub enum ProposalKernel {
    /// Y = X + L·Z with L the Cholesky factor of the covariance;
    /// symmetric, so it contributes nothing to the acceptance ratio.
    RandomWalk { chol: Vec<Vec<f64>> },
    /// Y ~ g independent of X; the ratio picks up g(X)/g(Y).
    Independence {
        log_pdf: Box<dyn Fn(&[f64]) -> f64>,
        sampler: Box<dyn Fn(&mut dyn UniformSource) -> Vec<f64>>,
    },
    /// Discrete proposal over state indices from a row-stochastic Q;
    /// the state vector holds a single index.
    Discrete { q: TransitionMatrix },
}

impl ProposalKernel {
    /// Random-walk kernel from a symmetric positive-definite covariance.
    pub fn random_walk(covariance: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::RandomWalk { chol: cholesky_lower(covariance)? })
    }

    /// Isotropic random walk with step variance `sigma²` per coordinate.
    pub fn random_walk_isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "random-walk scale must be positive, got {sigma}"
            )));
        }
        let cov: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
            .collect();
        Self::random_walk(&cov)
    }

    fn propose(&self, x: &[f64], stream: &mut dyn UniformSource) -> Vec<f64> {
        match self {
            Self::RandomWalk { chol } => {
                let d = x.len();
                let z: Vec<f64> = (0..d).map(|_| sample_standard_normal(stream)).collect();
                (0..d)
                    .map(|i| x[i] + chol[i][..=i].iter().zip(&z).map(|(l, zj)| l * zj).sum::<f64>())
                    .collect()
            }
            Self::Independence { sampler, .. } => sampler(stream),
            Self::Discrete { q } => {
                let i = x[0] as usize;
                let u = stream.next_uniform();
                let row = &q.rows()[i];
                let mut acc = 0.0;
                let mut j = row.len() - 1;
                for (k, &p) in row.iter().enumerate() {
                    acc += p;
                    if u <= acc {
                        j = k;
                        break;
                    }
                }
                vec![j as f64]
            }
        }
    }

    /// log q(y→x) − log q(x→y), the proposal part of the log ratio.
    fn log_ratio(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::RandomWalk { .. } => 0.0,
            Self::Independence { log_pdf, .. } => log_pdf(x) - log_pdf(y),
            Self::Discrete { q } => {
                let (i, j) = (x[0] as usize, y[0] as usize);
                let (qij, qji) = (q.entry(i, j), q.entry(j, i));
                if qij > 0.0 && qji > 0.0 {
                    qji.ln() - qij.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// A finished chain: all samples (including the start), the accepted
/// count, and how many leading samples are considered burn-in.
pub struct McmcRun {
    samples: Vec<Vec<f64>>,
    accepted: u64,
    burn_in: usize,
}

impl McmcRun {
    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_ratio(&self) -> f64 {
        if self.samples.len() <= 1 {
            return 0.0;
        }
        self.accepted as f64 / (self.samples.len() - 1) as f64
    }

    /// Samples with the burn-in prefix dropped.
    pub fn post_burn_in(&self) -> &[Vec<f64>] {
        &self.samples[self.burn_in.min(self.samples.len())..]
    }

    /// Per-coordinate mean/std/CI over the post-burn-in samples. The
    /// half-width uses the iid formula; correlated chains understate it.
    pub fn summary(&self, level: f64) -> Result<Vec<EstimateReport>> {
        let kept = self.post_burn_in();
        if kept.len() < 2 {
            return Err(SimError::InvalidParameter(
                "summary needs at least two post-burn-in samples".into(),
            ));
        }
        let d = kept[0].len();
        let n = kept.len() as f64;
        (0..d)
            .map(|c| {
                let mean = kept.iter().map(|s| s[c]).sum::<f64>() / n;
                let ss = kept.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>();
                EstimateReport::new(mean, (ss / (n - 1.0)).sqrt(), kept.len() as u64, level)
            })
            .collect()
    }
}

/// Default burn-in: 10% of the chain length.
pub fn default_burn_in(n: usize) -> usize {
    n / 10
}

/// Metropolis–Hastings. Produces `n` samples starting from `x0`; each
/// transition consumes the proposal's draws followed by one uniform for
/// the accept/reject decision. A proposal where the target is −∞ is
/// rejected (α = 0); a start where the target is −∞ is an error.
pub fn mh_chain(
    target: &TargetDensity,
    proposal: &ProposalKernel,
    x0: &[f64],
    n: usize,
    burn_in: usize,
    stream: &mut dyn UniformSource,
) -> Result<McmcRun> {
    if n == 0 {
        return Err(SimError::InvalidParameter("chain length must be ≥ 1".into()));
    }
    if burn_in >= n {
        return Err(SimError::InvalidParameter(format!(
            "burn-in {burn_in} must be smaller than the chain length {n}"
        )));
    }
    if x0.len() != target.dimension {
        return Err(SimError::InvalidParameter(format!(
            "start has dimension {} but the target has {}",
            x0.len(),
            target.dimension
        )));
    }
    let mut log_fx = (target.log_density)(x0);
    if !log_fx.is_finite() {
        return Err(SimError::InvalidParameter(
            "target log-density is not finite at the initial state".into(),
        ));
    }
    let mut samples = Vec::with_capacity(n);
    samples.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut accepted = 0u64;
    for _ in 1..n {
        let y = proposal.propose(&x, stream);
        let log_fy = (target.log_density)(&y);
        let delta = log_fy - log_fx + proposal.log_ratio(&x, &y);
        let alpha = delta.min(0.0).exp();
        let u = stream.next_uniform();
        if u < alpha {
            x = y;
            log_fx = log_fy;
            accepted += 1;
        }
        samples.push(x.clone());
    }
    Ok(McmcRun { samples, accepted, burn_in })
}

/// The Metropolis–Hastings transition matrix for a discrete target π
/// and proposal Q: p_ij = q_ij·min{π_j q_ji / (π_i q_ij), 1} off the
/// diagonal, with the diagonal completing each row to 1. The result
/// satisfies detailed balance π_i p_ij = π_j p_ji exactly.
pub fn mh_discrete_transition_matrix(
    pi: &ProbabilityVector,
    q: &TransitionMatrix,
) -> Result<TransitionMatrix> {
    let m = q.dim();
    if pi.entries().len() != m {
        return Err(SimError::InvalidParameter(format!(
            "π has {} entries but Q is {m}×{m}",
            pi.entries().len()
        )));
    }
    if pi.entries().iter().any(|&p| p <= 0.0) {
        return Err(SimError::InvalidParameter(
            "discrete MH needs strictly positive target probabilities".into(),
        ));
    }
    let mut p = vec![vec![0.0; m]; m];
    for i in 0..m {
        let mut off_diagonal = 0.0;
        for j in 0..m {
            if i == j {
                continue;
            }
            let qij = q.entry(i, j);
            if qij > 0.0 {
                let ratio = pi.entries()[j] * q.entry(j, i) / (pi.entries()[i] * qij);
                p[i][j] = qij * ratio.min(1.0);
            }
            off_diagonal += p[i][j];
        }
        p[i][i] = 1.0 - off_diagonal;
    }
    TransitionMatrix::new(q.labels().to_vec(), p)
}

/// A posterior run: the chain plus per-coordinate summaries.
pub struct PosteriorRun {
    pub run: McmcRun,
    pub summary: Vec<EstimateReport>,
}

/// Sample from the posterior ∝ likelihood × prior by running MH on
/// `log_likelihood(θ) + log_prior(θ)`.
pub fn posterior_sample(
    log_likelihood: impl Fn(&[f64]) -> f64 + 'static,
    log_prior: impl Fn(&[f64]) -> f64 + 'static,
    proposal: &ProposalKernel,
    theta0: &[f64],
    n: usize,
    burn_in: usize,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<PosteriorRun> {
    let dim = theta0.len();
    let target = TargetDensity::new(dim, move |theta: &[f64]| {
        log_likelihood(theta) + log_prior(theta)
    });
    let run = mh_chain(&target, proposal, theta0, n, burn_in, stream)?;
    let summary = run.summary(level)?;
    Ok(PosteriorRun { run, summary })
}

/// ln Γ(x) by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2.
pub fn lgamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - lgamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// log of the N(mean, sd²) density.
pub fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    -0.5 * (2.0 * PI).ln() - sd.ln() - (x - mean).powi(2) / (2.0 * sd * sd)
}

/// log of the Gamma(shape, rate) density; −∞ off the support.
pub fn log_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - lgamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// log of the Inverse-Gamma(α, β) density; −∞ off the support.
pub fn log_inv_gamma_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    alpha * beta.ln() - lgamma(alpha) - (alpha + 1.0) * x.ln() - beta / x
}

/// Configuration of the Bayesian portfolio value-at-risk study:
/// normal likelihood on monthly returns, N(μ̃, σ̃²) prior on the drift,
/// Inverse-Gamma prior on the squared volatility, random-walk MH over
/// θ = (μ, σ), then geometric-Brownian-motion forward simulation for
/// each retained posterior draw.
pub struct VarConfig {
    pub s0: f64,
    pub threshold: f64,
    pub t_final: f64,
    pub dt: f64,
    pub mu_prior_mean: f64,
    pub mu_prior_sd: f64,
    pub alpha_prior: f64,
    pub beta_prior: f64,
    /// Proposal variances (diagonal of the random-walk covariance).
    pub tau_mu: f64,
    pub tau_sigma: f64,
    pub theta0: [f64; 2],
    pub n_mh: usize,
    pub burn_in: usize,
    /// Posterior draws retained (evenly thinned) for the inner loop.
    pub thin_to: usize,
    /// Forward Monte Carlo paths per retained draw.
    pub n_mc: usize,
    pub level: f64,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            s0: 1_000_000.0,
            threshold: 900_000.0,
            t_final: 0.5,
            dt: 0.01,
            mu_prior_mean: 0.05,
            mu_prior_sd: 0.1,
            alpha_prior: 2.0,
            beta_prior: 4e-4,
            tau_mu: 0.001,
            tau_sigma: 0.001,
            theta0: [0.05, 0.1],
            n_mh: 10_000,
            burn_in: 2_000,
            thin_to: 100,
            n_mc: 1_000,
            level: 0.95,
        }
    }
}

pub struct VarStudy {
    /// Mean loss probability over retained draws; spread is across draws.
    pub loss_probability: EstimateReport,
    pub posterior_mu: EstimateReport,
    pub posterior_sigma: EstimateReport,
    pub acceptance_ratio: f64,
}

/// Nested VaR estimate: sample (μ, σ) from the posterior given the
/// return history, then for each retained draw simulate GBM paths and
/// count the fraction ending below the loss threshold.
pub fn var_portfolio_study(
    returns: &[f64],
    config: &VarConfig,
    stream: &mut dyn UniformSource,
) -> Result<VarStudy> {
    if config.thin_to == 0 || config.n_mc == 0 {
        return Err(SimError::InvalidParameter(
            "VaR study needs thin_to ≥ 1 and n_mc ≥ 1".into(),
        ));
    }
    let data = returns.to_vec();
    let log_likelihood = move |theta: &[f64]| {
        let (mu, sigma) = (theta[0], theta[1]);
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        data.iter().map(|&r| log_normal_pdf(r, mu, sigma)).sum()
    };
    let (pm, ps, ap, bp) = (
        config.mu_prior_mean,
        config.mu_prior_sd,
        config.alpha_prior,
        config.beta_prior,
    );
    let log_prior = move |theta: &[f64]| {
        let (mu, sigma) = (theta[0], theta[1]);
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_normal_pdf(mu, pm, ps) + log_inv_gamma_pdf(sigma * sigma, ap, bp)
    };
    let cov = vec![vec![config.tau_mu, 0.0], vec![0.0, config.tau_sigma]];
    let proposal = ProposalKernel::random_walk(&cov)?;
    let posterior = posterior_sample(
        log_likelihood,
        log_prior,
        &proposal,
        &config.theta0,
        config.n_mh,
        config.burn_in,
        config.level,
        stream,
    )?;
    let kept = posterior.run.post_burn_in();
    let stride = (kept.len() / config.thin_to).max(1);
    let draws: Vec<&Vec<f64>> = kept.iter().step_by(stride).take(config.thin_to).collect();

    let mut loss_probs = Vec::with_capacity(draws.len());
    for theta in &draws {
        let (mu, sigma) = (theta[0], theta[1]);
        let spec = DiffusionSpec {
            drift: Box::new(move |_t, s| mu * s),
            diffusion: Some(Box::new(move |_t, s| sigma * s)),
            t0: 0.0,
            t_end: config.t_final,
            dt: config.dt,
            x0: config.s0,
        };
        let mut below = 0u64;
        for _ in 0..config.n_mc {
            if em_terminal(&spec, stream)? < config.threshold {
                below += 1;
            }
        }
        loss_probs.push(below as f64 / config.n_mc as f64);
    }
    let n = loss_probs.len() as f64;
    let mean = loss_probs.iter().sum::<f64>() / n;
    let sd = if loss_probs.len() > 1 {
        (loss_probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(VarStudy {
        loss_probability: EstimateReport::new(mean, sd, loss_probs.len() as u64, config.level)?,
        posterior_mu: posterior.summary[0].clone(),
        posterior_sigma: posterior.summary[1].clone(),
        acceptance_ratio: posterior.run.acceptance_ratio(),
    })
}

/// Sixty months of example portfolio return-rate data used by the
/// bundled VaR study.
pub fn example_portfolio_returns() -> Vec<f64> {
    vec![
        0.07, 0.13, 0.10, 0.17, 0.11, 0.03, 0.15, 0.09, 0.12, 0.12, -0.06, 0.07, 0.09,
        -0.01, 0.08, 0.08, 0.07, 0.19, 0.09, 0.12, 0.03, 0.16, -0.02, 0.2, 0.14, 0.05,
        0.08, 0.06, 0.10, -0.07, -0.01, -0.07, -0.05, 0.21, -0.05, 0.02, -0.02, 0.15,
        0.08, 0.02, -0.03, 0.01, 0.08, 0.13, 0.16, -0.03, -0.13, 0.14, 0.11, 0.12, -0.01,
        -0.07, 0.16, 0.27, -0.06, 0.01, 0.01, 0.01, 0.01, 0.16,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::stationary_distribution;
    use crate::rng::RandomStream;

    /// The bivariate density exp(−(x²y² + x² + y² − 8x − 8y)/2), up to
    /// normalization.
    fn bivariate_log_density(p: &[f64]) -> f64 {
        let (x, y) = (p[0], p[1]);
        -(x * x * y * y + x * x + y * y - 8.0 * x - 8.0 * y) / 2.0
    }

    fn weather_q() -> TransitionMatrix {
        TransitionMatrix::from_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.0, 0.75],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn flat_target_accepts_every_proposal() {
        let target = TargetDensity::new(1, |_| 0.0);
        let proposal = ProposalKernel::random_walk_isotropic(1, 1.0).unwrap();
        let mut s = RandomStream::new(701);
        let run = mh_chain(&target, &proposal, &[0.0], 1000, 100, &mut s).unwrap();
        assert_eq!(run.accepted(), 999);
        assert_eq!(run.acceptance_ratio(), 1.0);
        assert_eq!(run.post_burn_in().len(), 900);
    }

    #[test]
    fn bivariate_first_coordinate_mean() {
        let target = TargetDensity::new(2, bivariate_log_density);
        let proposal = ProposalKernel::random_walk(&[
            vec![4.0, 0.0],
            vec![0.0, 4.0],
        ])
        .unwrap();
        let mut s = RandomStream::new(703);
        let run = mh_chain(&target, &proposal, &[4.0, 4.0], 1_000_000, 1_000, &mut s).unwrap();
        let kept = run.post_burn_in();
        let mean_x = kept.iter().map(|p| p[0]).sum::<f64>() / kept.len() as f64;
        assert!((mean_x - 1.85997).abs() < 0.05, "E[X₁] estimate {mean_x}");
    }

    #[test]
    fn constant_scaling_leaves_chain_bit_identical() {
        let target = TargetDensity::new(2, bivariate_log_density);
        let scaled = TargetDensity::new(2, |p| bivariate_log_density(p) + 7.0f64.ln());
        let shifted = TargetDensity::new(2, |p| bivariate_log_density(p) + 1000.0);
        let proposal = ProposalKernel::random_walk_isotropic(2, 2.0).unwrap();
        let mut s1 = RandomStream::new(707);
        let mut s2 = RandomStream::new(707);
        let mut s3 = RandomStream::new(707);
        let a = mh_chain(&target, &proposal, &[4.0, 4.0], 5000, 0, &mut s1).unwrap();
        let b = mh_chain(&scaled, &proposal, &[4.0, 4.0], 5000, 0, &mut s2).unwrap();
        let c = mh_chain(&shifted, &proposal, &[4.0, 4.0], 5000, 0, &mut s3).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.samples(), c.samples());
    }

    #[test]
    fn infinite_start_is_an_error_and_infinite_proposals_reject() {
        let boxed = TargetDensity::new(1, |p| {
            if p[0].abs() <= 0.5 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        });
        let proposal = ProposalKernel::random_walk_isotropic(1, 3.0).unwrap();
        let mut s = RandomStream::new(709);
        assert!(mh_chain(&boxed, &proposal, &[2.0], 100, 0, &mut s).is_err());
        let run = mh_chain(&boxed, &proposal, &[0.0], 2000, 0, &mut s).unwrap();
        assert!(run.acceptance_ratio() < 1.0);
        for p in run.samples() {
            assert!(p[0].abs() <= 0.5, "chain escaped the support: {}", p[0]);
        }
    }

    #[test]
    fn independence_sampler_matches_target_when_proposal_is_target() {
        // Proposing exactly from the (uniform) target accepts always.
        let target = TargetDensity::new(1, |p| {
            if (0.0..1.0).contains(&p[0]) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        });
        let proposal = ProposalKernel::Independence {
            log_pdf: Box::new(|_| 0.0),
            sampler: Box::new(|s: &mut dyn UniformSource| vec![s.next_uniform()]),
        };
        let mut s = RandomStream::new(711);
        let run = mh_chain(&target, &proposal, &[0.5], 4000, 0, &mut s).unwrap();
        assert_eq!(run.acceptance_ratio(), 1.0);
        let kept = run.post_burn_in();
        let mean = kept.iter().map(|p| p[0]).sum::<f64>() / kept.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "uniform mean {mean}");
    }

    #[test]
    fn discrete_kernel_occupancy_approaches_target() {
        let pi = ProbabilityVector::new(vec![0.2, 0.4, 0.4]).unwrap();
        let target_pi = pi.entries().to_vec();
        let target = TargetDensity::new(1, move |p| target_pi[p[0] as usize].ln());
        let proposal = ProposalKernel::Discrete { q: weather_q() };
        let mut s = RandomStream::new(713);
        let run = mh_chain(&target, &proposal, &[0.0], 100_000, 1000, &mut s).unwrap();
        let mut counts = [0.0f64; 3];
        for p in run.post_burn_in() {
            counts[p[0] as usize] += 1.0;
        }
        let n: f64 = counts.iter().sum();
        for (c, want) in counts.iter().zip(pi.entries()) {
            assert!((c / n - want).abs() < 0.01, "occupancy {:?}", counts);
        }
    }

    #[test]
    fn discrete_mh_matrix_detailed_balance_and_stationarity() {
        let pi = ProbabilityVector::new(vec![0.2, 0.4, 0.4]).unwrap();
        let p = mh_discrete_transition_matrix(&pi, &weather_q()).unwrap();
        for i in 0..3 {
            let row_sum: f64 = p.rows()[i].iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-15);
            for j in 0..3 {
                let flow = pi.entries()[i] * p.entry(i, j) - pi.entries()[j] * p.entry(j, i);
                assert!(flow.abs() < 1e-14, "detailed balance broken at ({i},{j})");
            }
        }
        let stat = stationary_distribution(&p, 1e-12, 100_000).unwrap();
        for (got, want) in stat.entries().iter().zip(pi.entries()) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_target_symmetric_proposal_gives_p_equal_q() {
        let q = TransitionMatrix::from_rows(vec![
            vec![0.4, 0.3, 0.3],
            vec![0.3, 0.4, 0.3],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let pi = ProbabilityVector::uniform(3);
        let p = mh_discrete_transition_matrix(&pi, &q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.entry(i, j) - q.entry(i, j)).abs() < 1e-15);
            }
        }
        let zero = ProbabilityVector::new(vec![0.5, 0.5, 0.0]);
        assert!(zero.is_err() || mh_discrete_transition_matrix(&zero.unwrap(), &q).is_err());
    }

    #[test]
    fn acceptance_ratio_decreases_with_proposal_scale() {
        let target = TargetDensity::new(2, bivariate_log_density);
        let small = ProposalKernel::random_walk_isotropic(2, 0.5).unwrap();
        let large = ProposalKernel::random_walk_isotropic(2, 8.0).unwrap();
        let mut s1 = RandomStream::new(719);
        let mut s2 = RandomStream::new(719);
        let a = mh_chain(&target, &small, &[4.0, 4.0], 20_000, 0, &mut s1).unwrap();
        let b = mh_chain(&target, &large, &[4.0, 4.0], 20_000, 0, &mut s2).unwrap();
        assert!(
            a.acceptance_ratio() > b.acceptance_ratio(),
            "σ=0.5 ratio {} vs σ=8 ratio {}",
            a.acceptance_ratio(),
            b.acceptance_ratio()
        );
    }

    #[test]
    fn bivariate_marginal_moments_match_quadrature() {
        // Midpoint quadrature of the closed-form density over [−4,10]²,
        // which carries all the mass to well below the tolerances here.
        let m = 1400;
        let h = 14.0 / m as f64;
        let (mut z, mut ex, mut exx) = (0.0, 0.0, 0.0);
        for i in 0..m {
            let x = -4.0 + (i as f64 + 0.5) * h;
            for j in 0..m {
                let y = -4.0 + (j as f64 + 0.5) * h;
                let f = bivariate_log_density(&[x, y]).exp();
                z += f;
                ex += x * f;
                exx += x * x * f;
            }
        }
        let norm = z * h * h;
        assert!(
            (norm - 20216.335877).abs() / 20216.335877 < 1e-4,
            "normalization constant {norm}"
        );
        let mean = ex / z;
        let var = exx / z - mean * mean;
        assert!((mean - 1.85997).abs() < 1e-3, "quadrature mean {mean}");

        let target = TargetDensity::new(2, bivariate_log_density);
        let proposal = ProposalKernel::random_walk_isotropic(2, 2.0).unwrap();
        let mut s = RandomStream::new(727);
        let run = mh_chain(&target, &proposal, &[4.0, 4.0], 400_000, 1000, &mut s).unwrap();
        let kept = run.post_burn_in();
        let n = kept.len() as f64;
        let sm = kept.iter().map(|p| p[0]).sum::<f64>() / n;
        let sv = kept.iter().map(|p| (p[0] - sm).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            (sv - var).abs() / var < 0.1,
            "sample variance {sv} vs quadrature {var}"
        );
    }

    #[test]
    fn lgamma_known_values() {
        assert!((lgamma(1.0)).abs() < 1e-12);
        assert!((lgamma(2.0)).abs() < 1e-12);
        assert!((lgamma(5.0) - 24.0f64.ln()).abs() < 1e-11);
        assert!((lgamma(0.5) - PI.sqrt().ln()).abs() < 1e-12);
        // Recurrence Γ(x+1) = xΓ(x) at a non-integer point.
        let x = 3.7;
        assert!((lgamma(x + 1.0) - (lgamma(x) + x.ln())).abs() < 1e-11);
    }

    fn recovery_data() -> Vec<f64> {
        vec![5.0, 8.0, 12.0, 7.0, 9.0, 10.0, 3.0, 6.0, 8.0, 11.0]
    }

    #[test]
    fn recovery_rate_posterior_matches_conjugate_oracle() {
        // Exponential likelihood + Gamma(2,1) prior is conjugate:
        // posterior Gamma(2+10, 1+Σx) = Gamma(12, 80), mean 0.15.
        let data = recovery_data();
        assert_eq!(data.iter().sum::<f64>(), 79.0);
        let log_likelihood = move |theta: &[f64]| {
            let t = theta[0];
            if t <= 0.0 {
                return f64::NEG_INFINITY;
            }
            data.len() as f64 * t.ln() - t * data.iter().sum::<f64>()
        };
        let proposal = ProposalKernel::random_walk_isotropic(1, 0.5).unwrap();
        let mut s = RandomStream::new(733);
        let out = posterior_sample(
            log_likelihood,
            |theta| log_gamma_pdf(theta[0], 2.0, 1.0),
            &proposal,
            &[0.2],
            10_000,
            1_000,
            0.95,
            &mut s,
        )
        .unwrap();
        let mean = out.summary[0].mean;
        assert!((mean - 0.15).abs() < 0.01, "posterior mean {mean}");
        // Posterior sd should be near the conjugate √12/80 ≈ 0.0433.
        let sd = out.summary[0].sample_std;
        assert!((sd - 0.0433).abs() < 0.01, "posterior sd {sd}");
    }

    #[test]
    fn flat_likelihood_recovers_the_prior() {
        let proposal = ProposalKernel::random_walk_isotropic(1, 2.0).unwrap();
        let mut s = RandomStream::new(739);
        let out = posterior_sample(
            |_| 0.0,
            |theta| log_gamma_pdf(theta[0], 2.0, 1.0),
            &proposal,
            &[2.0],
            20_000,
            2_000,
            0.95,
            &mut s,
        )
        .unwrap();
        // Prior mean 2; the iid CI understates the error of a correlated
        // chain, so allow three half-widths.
        let report = &out.summary[0];
        assert!(
            (report.mean - 2.0).abs() < 3.0 * report.half_width,
            "prior-only mean {} ± {}",
            report.mean,
            report.half_width
        );
    }

    #[test]
    fn two_group_posterior_matches_conjugate_oracle() {
        // Independent groups: the second factorizes to Gamma(2+10, 1+113)
        // = Gamma(12, 114), mean 12/114.
        let data1 = recovery_data();
        let data2 = vec![10.0, 14.0, 7.0, 11.0, 13.0, 8.0, 15.0, 9.0, 10.0, 16.0];
        assert_eq!(data2.iter().sum::<f64>(), 113.0);
        let log_likelihood = move |theta: &[f64]| {
            let (t1, t2) = (theta[0], theta[1]);
            if t1 <= 0.0 || t2 <= 0.0 {
                return f64::NEG_INFINITY;
            }
            data1.len() as f64 * t1.ln() - t1 * data1.iter().sum::<f64>()
                + data2.len() as f64 * t2.ln()
                - t2 * data2.iter().sum::<f64>()
        };
        let proposal = ProposalKernel::random_walk(&[
            vec![0.25, 0.0],
            vec![0.0, 0.25],
        ])
        .unwrap();
        let mut s = RandomStream::new(743);
        let out = posterior_sample(
            log_likelihood,
            |theta| log_gamma_pdf(theta[0], 2.0, 1.0) + log_gamma_pdf(theta[1], 2.0, 1.0),
            &proposal,
            &[0.2, 0.2],
            30_000,
            3_000,
            0.95,
            &mut s,
        )
        .unwrap();
        let mean2 = out.summary[1].mean;
        assert!(
            (mean2 - 12.0 / 114.0).abs() < 0.01,
            "group-2 posterior mean {mean2}"
        );
    }

    #[test]
    fn var_study_matches_reference_band() {
        let returns = example_portfolio_returns();
        let mut s = RandomStream::new(751);
        let study = var_portfolio_study(&returns, &VarConfig::default(), &mut s).unwrap();
        let p = study.loss_probability.mean;
        assert!(
            (0.003..=0.03).contains(&p),
            "loss probability {p} (acceptance {})",
            study.acceptance_ratio
        );
        // Posterior drift should sit near the sample mean of the data.
        let sample_mean = returns.iter().sum::<f64>() / returns.len() as f64;
        assert!((study.posterior_mu.mean - sample_mean).abs() < 0.02);
    }

    #[test]
    fn var_study_degenerate_volatility_limits() {
        // Near-zero volatility and positive drift: deterministic growth,
        // no loss. Raising the threshold above the grown value flips the
        // probability to one.
        let mut config = VarConfig {
            mu_prior_sd: 1e-3,
            beta_prior: 1e-12,
            tau_mu: 1e-8,
            tau_sigma: 1e-14,
            theta0: [0.05, 1e-6],
            n_mh: 2_000,
            burn_in: 500,
            thin_to: 10,
            n_mc: 50,
            ..VarConfig::default()
        };
        let mut s = RandomStream::new(757);
        let study = var_portfolio_study(&[], &config, &mut s).unwrap();
        assert_eq!(study.loss_probability.mean, 0.0);
        config.threshold = 2_000_000.0;
        let mut s = RandomStream::new(757);
        let study = var_portfolio_study(&[], &config, &mut s).unwrap();
        assert_eq!(study.loss_probability.mean, 1.0);
    }
}
