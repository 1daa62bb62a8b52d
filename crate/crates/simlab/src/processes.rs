//! Stochastic processes.
//!
//! Random walks on ℤ and ℤ^d, gambler's ruin, Wiener (Brownian) paths,
//! Euler–Maruyama integration of scalar diffusions, first hitting times
//! out of a box, geometric-Brownian-motion option pricing, and a
//! ruin-style startup valuation with per-step cost accounting.

use crate::error::{Result, SimError};
use crate::montecarlo::{normal_cdf, EstimateReport};
use crate::rng::UniformSource;
use crate::samplers::{sample_bernoulli, sample_discrete, sample_standard_normal, DiscreteDistribution};

/// Time-indexed path: `states[k]` is the d-dimensional state at
/// `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(SimError::InvalidModel(format!(
                "trajectory has {} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SimError::InvalidModel(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Scalar view of a 1-dimensional trajectory.
    pub fn scalar_states(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|v| v[0])
    }
}

/// Simple random walk: `p` is the probability of a `+1` step.
#[derive(Debug, Clone, Copy)]
pub struct WalkSpec {
    pub p: f64,
    pub x0: i64,
    pub steps: u64,
}

/// Scalar Itô diffusion `dX = a(t,X) dt + b(t,X) dW` on `[t0, t_end]`.
///
/// `diffusion: None` marks a deterministic ODE: the integrator then
/// consumes no randomness and reduces to explicit Euler.
pub struct DiffusionSpec {
    pub drift: Box<dyn Fn(f64, f64) -> f64>,
    pub diffusion: Option<Box<dyn Fn(f64, f64) -> f64>>,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub x0: f64,
}

impl DiffusionSpec {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "diffusion step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t0 < self.t_end) {
            return Err(SimError::InvalidParameter(format!(
                "diffusion needs t0 < t_end, got [{}, {}]",
                self.t0, self.t_end
            )));
        }
        Ok(())
    }
}

/// Simple random walk from `x0`: cumulative sum of ±1 steps.
pub fn random_walk(spec: &WalkSpec, stream: &mut dyn UniformSource) -> Result<Trajectory> {
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(SimError::InvalidParameter(format!(
            "walk step probability must lie in (0,1), got {}",
            spec.p
        )));
    }
    let mut x = spec.x0;
    let mut times = Vec::with_capacity(spec.steps as usize + 1);
    let mut states = Vec::with_capacity(spec.steps as usize + 1);
    times.push(0.0);
    states.push(vec![x as f64]);
    for t in 1..=spec.steps {
        x += if sample_bernoulli(spec.p, stream)? == 1 { 1 } else { -1 };
        times.push(t as f64);
        states.push(vec![x as f64]);
    }
    Trajectory::new(times, states)
}

/// Random walk on ℤ^d: each step adds one of the `directions`, chosen
/// with the matching probability.
pub fn random_walk_dd(
    directions: &[Vec<f64>],
    probs: &[f64],
    x0: &[f64],
    steps: u64,
    stream: &mut dyn UniformSource,
) -> Result<Trajectory> {
    let d = x0.len();
    if directions.is_empty() || directions.iter().any(|v| v.len() != d) {
        return Err(SimError::InvalidModel(format!(
            "every direction must have dimension {d}"
        )));
    }
    // Index distribution over the direction set.
    let index_dist = DiscreteDistribution::new(
        (0..directions.len()).map(|i| i as f64).collect(),
        probs.to_vec(),
    )?;
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut states = Vec::with_capacity(steps as usize + 1);
    times.push(0.0);
    states.push(x.clone());
    for t in 1..=steps {
        let k = sample_discrete(&index_dist, stream) as usize;
        for (xi, di) in x.iter_mut().zip(&directions[k]) {
            *xi += di;
        }
        times.push(t as f64);
        states.push(x.clone());
    }
    Trajectory::new(times, states)
}

/// Outcome of one ruin-walk simulation.
struct RuinRun {
    ruined: bool,
    steps: u64,
}

fn ruin_walk(k: i64, t: i64, p: f64, stream: &mut dyn UniformSource) -> Result<RuinRun> {
    let mut x = k;
    let mut steps = 0u64;
    while x > 0 && x < t {
        x += if sample_bernoulli(p, stream)? == 1 { 1 } else { -1 };
        steps += 1;
    }
    Ok(RuinRun { ruined: x <= 0, steps })
}

/// Monte Carlo probability of hitting 0 before `t`, starting from `k`,
/// with up-step probability `p`.
pub fn gamblers_ruin(
    k: i64,
    t: i64,
    p: f64,
    n_sims: u64,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<EstimateReport> {
    if !(0 < k && k < t) {
        return Err(SimError::InvalidParameter(format!(
            "gambler's ruin needs 0 < K < T, got K={k}, T={t}"
        )));
    }
    if n_sims < 2 {
        return Err(SimError::InvalidParameter("n_sims must be >= 2".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=n_sims {
        let y = f64::from(ruin_walk(k, t, p, stream)?.ruined);
        let d = y - mean;
        mean += d / i as f64;
        m2 += d * (y - mean);
    }
    EstimateReport::new(mean, (m2 / (n_sims - 1) as f64).sqrt(), n_sims, level)
}

/// Exact ruin probability: `(T−K)/T` for `p = ½`, otherwise
/// `((q/p)^K − (q/p)^T) / (1 − (q/p)^T)`.
pub fn gamblers_ruin_exact(k: i64, t: i64, p: f64) -> f64 {
    if (p - 0.5).abs() < 1e-15 {
        (t - k) as f64 / t as f64
    } else {
        let r = (1.0 - p) / p;
        (r.powi(k as i32) - r.powi(t as i32)) / (1.0 - r.powi(t as i32))
    }
}

/// Standard Wiener path sampled at the given times: `W` starts at 0 at
/// time 0 and gains independent `N(0, Δt)` increments per coordinate.
pub fn wiener_path(
    times: &[f64],
    dim: usize,
    stream: &mut dyn UniformSource,
) -> Result<Trajectory> {
    if times.is_empty() || times[0] < 0.0 {
        return Err(SimError::InvalidParameter(
            "wiener path needs times starting at >= 0".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SimError::InvalidParameter(
            "wiener path times must be strictly increasing".into(),
        ));
    }
    if dim == 0 {
        return Err(SimError::InvalidParameter("wiener path needs dim >= 1".into()));
    }
    let mut w = vec![0.0; dim];
    let mut prev_t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let sqrt_dt = (t - prev_t).sqrt();
        if sqrt_dt > 0.0 {
            for wi in &mut w {
                *wi += sqrt_dt * sample_standard_normal(stream);
            }
        }
        states.push(w.clone());
        prev_t = t;
    }
    Trajectory::new(times.to_vec(), states)
}

/// Time grid for a fixed-step integration of `[t0, t_end]`, with a
/// shortened final step landing exactly on `t_end`.
fn step_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let mut times = vec![t0];
    let mut t = t0;
    loop {
        let next = t + dt;
        if next < t_end - 1e-12 * dt.max(1.0) {
            times.push(next);
            t = next;
        } else {
            times.push(t_end);
            break;
        }
    }
    times
}

/// Explicit Euler–Maruyama integration of a scalar diffusion:
/// `Y_{k+1} = Y_k + a(t_k,Y_k)Δt + b(t_k,Y_k)√Δt·Z_{k+1}`.
///
/// One normal draw per step, taken before the state update; a
/// shortened final step lands exactly on `t_end`. With
/// `diffusion: None` no randomness is consumed and the scheme is plain
/// explicit Euler.
pub fn euler_maruyama(spec: &DiffusionSpec, stream: &mut dyn UniformSource) -> Result<Trajectory> {
    spec.validate()?;
    let times = step_grid(spec.t0, spec.t_end, spec.dt);
    let mut states = Vec::with_capacity(times.len());
    let mut y = spec.x0;
    states.push(vec![y]);
    for (k, pair) in times.windows(2).enumerate() {
        let (t, h) = (pair[0], pair[1] - pair[0]);
        let z = match &spec.diffusion {
            Some(_) => sample_standard_normal(stream),
            None => 0.0,
        };
        let y_k = y;
        y += (spec.drift)(t, y_k) * h;
        if let Some(b) = &spec.diffusion {
            y += b(t, y_k) * h.sqrt() * z;
        }
        if !y.is_finite() {
            return Err(SimError::Numerical(format!(
                "Euler–Maruyama produced a non-finite state at step {} (t = {})",
                k + 1,
                pair[1]
            )));
        }
        states.push(vec![y]);
    }
    Trajectory::new(times, states)
}

/// Terminal value of an Euler–Maruyama run, without storing the path.
pub fn em_terminal(spec: &DiffusionSpec, stream: &mut dyn UniformSource) -> Result<f64> {
    spec.validate()?;
    let times = step_grid(spec.t0, spec.t_end, spec.dt);
    let mut y = spec.x0;
    for (k, pair) in times.windows(2).enumerate() {
        let (t, h) = (pair[0], pair[1] - pair[0]);
        let z = match &spec.diffusion {
            Some(_) => sample_standard_normal(stream),
            None => 0.0,
        };
        let y_k = y;
        y += (spec.drift)(t, y_k) * h;
        if let Some(b) = &spec.diffusion {
            y += b(t, y_k) * h.sqrt() * z;
        }
        if !y.is_finite() {
            return Err(SimError::Numerical(format!(
                "Euler–Maruyama produced a non-finite state at step {}",
                k + 1
            )));
        }
    }
    Ok(y)
}

/// Mean first time a `dim`-dimensional Brownian particle leaves the box
/// `[-half_width, half_width]^dim`, detected after each full step
/// (bias O(dt)).
pub fn hitting_time_box(
    dim: usize,
    half_width: f64,
    dt: f64,
    n_sims: u64,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<EstimateReport> {
    if !(half_width > 0.0) || !(dt > 0.0) || dim == 0 {
        return Err(SimError::InvalidParameter(
            "hitting time needs dim >= 1, half_width > 0 and dt > 0".into(),
        ));
    }
    if n_sims < 2 {
        return Err(SimError::InvalidParameter("n_sims must be >= 2".into()));
    }
    let sqrt_dt = dt.sqrt();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=n_sims {
        let mut w = vec![0.0; dim];
        let mut steps = 0u64;
        loop {
            steps += 1;
            for wi in &mut w {
                *wi += sqrt_dt * sample_standard_normal(stream);
            }
            if w.iter().any(|wi| wi.abs() >= half_width) {
                break;
            }
        }
        let y = steps as f64 * dt;
        let d = y - mean;
        mean += d / i as f64;
        m2 += d * (y - mean);
    }
    EstimateReport::new(mean, (m2 / (n_sims - 1) as f64).sqrt(), n_sims, level)
}

/// Monte Carlo price of a European call under risk-neutral GBM
/// (`dS = rS dt + σS dW` integrated by Euler–Maruyama): the discounted
/// payoff `e^{−rT}·max(S_T − K, 0)` averaged with its CI.
#[allow(clippy::too_many_arguments)]
pub fn price_european_call(
    s0: f64,
    strike: f64,
    r: f64,
    sigma: f64,
    t_final: f64,
    dt: f64,
    n_sims: u64,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<EstimateReport> {
    if !(s0 > 0.0 && strike > 0.0 && sigma > 0.0 && t_final > 0.0 && dt > 0.0) {
        return Err(SimError::InvalidParameter(
            "option pricing needs positive S0, K, sigma, T and dt".into(),
        ));
    }
    if n_sims < 2 {
        return Err(SimError::InvalidParameter("n_sims must be >= 2".into()));
    }
    let discount = (-r * t_final).exp();
    let spec = DiffusionSpec {
        drift: Box::new(move |_, x| r * x),
        diffusion: Some(Box::new(move |_, x| sigma * x)),
        t0: 0.0,
        t_end: t_final,
        dt,
        x0: s0,
    };
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=n_sims {
        let s_t = em_terminal(&spec, stream)?;
        let y = discount * (s_t - strike).max(0.0);
        let d = y - mean;
        mean += d / i as f64;
        m2 += d * (y - mean);
    }
    EstimateReport::new(mean, (m2 / (n_sims - 1) as f64).sqrt(), n_sims, level)
}

/// Black–Scholes closed-form call price (test oracle and CLI
/// reference value).
pub fn black_scholes_call(s0: f64, strike: f64, r: f64, sigma: f64, t_final: f64) -> f64 {
    let st = sigma * t_final.sqrt();
    let d1 = ((s0 / strike).ln() + (r + sigma * sigma / 2.0) * t_final) / st;
    let d2 = d1 - st;
    s0 * normal_cdf(d1) - strike * (-r * t_final).exp() * normal_cdf(d2)
}

/// Parameters of the startup-valuation study: company value moves in
/// units of `delta`, from `v0` toward `v_max` (success) or 0
/// (bankruptcy), paying operating and investment costs each step.
#[derive(Debug, Clone, Copy)]
pub struct StartupSpec {
    pub delta: f64,
    pub v0: f64,
    pub v_max: f64,
    pub c_operate: f64,
    pub c_invest: f64,
    pub p: f64,
}

/// Aggregated result of the startup valuation.
#[derive(Debug, Clone)]
pub struct StartupValuation {
    pub bankruptcy: EstimateReport,
    pub duration: EstimateReport,
    pub profit: EstimateReport,
}

/// Ruin-walk valuation: runs `n_sims` careers of the company and
/// reports bankruptcy probability, expected duration, and expected
/// profit `payout − v0 − steps·(c_operate + c_invest)` (payout `v_max`
/// on success, 0 on bankruptcy).
pub fn startup_valuation(
    spec: &StartupSpec,
    n_sims: u64,
    level: f64,
    stream: &mut dyn UniformSource,
) -> Result<StartupValuation> {
    let k = (spec.v0 / spec.delta).round() as i64;
    let t = (spec.v_max / spec.delta).round() as i64;
    if !(0 < k && k < t) {
        return Err(SimError::InvalidParameter(format!(
            "startup valuation needs 0 < v0 < v_max in units of delta, got K={k}, T={t}"
        )));
    }
    if n_sims < 2 {
        return Err(SimError::InvalidParameter("n_sims must be >= 2".into()));
    }
    let mut ruin = Accumulator::default();
    let mut dur = Accumulator::default();
    let mut profit = Accumulator::default();
    for _ in 0..n_sims {
        let run = ruin_walk(k, t, spec.p, stream)?;
        let payout = if run.ruined { 0.0 } else { spec.v_max };
        ruin.add(f64::from(run.ruined));
        dur.add(run.steps as f64);
        profit.add(payout - spec.v0 - run.steps as f64 * (spec.c_operate + spec.c_invest));
    }
    Ok(StartupValuation {
        bankruptcy: ruin.report(level)?,
        duration: dur.report(level)?,
        profit: profit.report(level)?,
    })
}

/// Running mean/variance accumulator (Welford).
#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn add(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
    }

    fn report(&self, level: f64) -> Result<EstimateReport> {
        EstimateReport::new(
            self.mean,
            (self.m2 / (self.n - 1) as f64).sqrt(),
            self.n,
            level,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{generate_chain, ProbabilityVector, TransitionMatrix};
    use crate::rng::RandomStream;

    #[test]
    fn near_certain_up_walk_is_essentially_monotone() {
        let spec = WalkSpec { p: 1.0 - 1e-12, x0: 0, steps: 100 };
        let mut s = RandomStream::new(301);
        let traj = random_walk(&spec, &mut s).unwrap();
        let ups = traj
            .states()
            .windows(2)
            .filter(|w| w[1][0] > w[0][0])
            .count();
        assert!(ups >= 99, "only {ups} up-steps");
        assert!(random_walk(&WalkSpec { p: 0.0, x0: 0, steps: 1 }, &mut s).is_err());
        assert!(random_walk(&WalkSpec { p: 1.0, x0: 0, steps: 1 }, &mut s).is_err());
    }

    #[test]
    fn symmetric_walk_mean_zero_variance_t() {
        let t = 10_000u64;
        let reps = 200;
        let root = RandomStream::new(307);
        let finals: Vec<f64> = (0..reps)
            .map(|r| {
                let mut s = root.spawn_substream(r);
                let traj = random_walk(&WalkSpec { p: 0.5, x0: 0, steps: t }, &mut s).unwrap();
                traj.last_state().unwrap()[0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / reps as f64;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64;
        // sd of one endpoint is √t; CI for the mean over 200 reps.
        let mean_bound = 5.0 * (t as f64).sqrt() / (reps as f64).sqrt();
        assert!(mean.abs() < mean_bound, "mean {mean}");
        // Sample variance of 200 normal-ish endpoints has relative sd
        // √(2/(reps−1)) ≈ 0.1.
        let var_bound = 5.0 * (2.0 / (reps as f64 - 1.0)).sqrt() * t as f64;
        assert!((var - t as f64).abs() < var_bound, "variance {var}");
    }

    #[test]
    fn biased_walk_mean_matches_drift_formula() {
        let t = 1000u64;
        let reps = 200;
        let root = RandomStream::new(311);
        let finals: Vec<f64> = (0..reps)
            .map(|r| {
                let mut s = root.spawn_substream(r);
                random_walk(&WalkSpec { p: 0.6, x0: 0, steps: t }, &mut s)
                    .unwrap()
                    .last_state()
                    .unwrap()[0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / reps as f64;
        // Per-step variance 1−(2p−1)² = 0.96.
        let sd = (t as f64 * 0.96).sqrt();
        let bound = 5.0 * sd / (reps as f64).sqrt();
        assert!((mean - 200.0).abs() < bound, "mean {mean}");
    }

    #[test]
    fn dd_walk_symmetric_2d_mean_zero() {
        let dirs = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let probs = vec![0.25; 4];
        let reps = 200;
        let t = 1000u64;
        let root = RandomStream::new(313);
        let mut sums = [0.0f64; 2];
        for r in 0..reps {
            let mut s = root.spawn_substream(r);
            let traj = random_walk_dd(&dirs, &probs, &[0.0, 0.0], t, &mut s).unwrap();
            let last = traj.last_state().unwrap();
            sums[0] += last[0];
            sums[1] += last[1];
        }
        // Each coordinate is a lazy walk with per-step variance 1/2.
        let bound = 5.0 * (t as f64 / 2.0).sqrt() / (reps as f64).sqrt();
        assert!((sums[0] / reps as f64).abs() < bound);
        assert!((sums[1] / reps as f64).abs() < bound);
    }

    #[test]
    fn dd_walk_single_direction_is_straight_line() {
        let mut s = RandomStream::new(317);
        let traj =
            random_walk_dd(&[vec![1.0, 0.0]], &[1.0], &[0.0, 0.0], 50, &mut s).unwrap();
        for (t, state) in traj.states().iter().enumerate() {
            assert_eq!(state, &vec![t as f64, 0.0]);
        }
        assert!(random_walk_dd(&[vec![1.0]], &[1.0], &[0.0, 0.0], 5, &mut s).is_err());
    }

    #[test]
    fn dd_walk_3d_mean_square_displacement() {
        let dirs = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ];
        let probs = vec![1.0 / 6.0; 6];
        let reps = 400;
        let t = 1000u64;
        let root = RandomStream::new(331);
        let msd: f64 = (0..reps)
            .map(|r| {
                let mut s = root.spawn_substream(r);
                let traj =
                    random_walk_dd(&dirs, &probs, &[0.0, 0.0, 0.0], t, &mut s).unwrap();
                traj.last_state().unwrap().iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            / reps as f64;
        // E‖X_t‖² = t (one unit step per move); sd of ‖X_t‖² ≈ √2·t/√3.
        let bound = 5.0 * (2.0f64 / 3.0).sqrt() * t as f64 / (reps as f64).sqrt();
        assert!((msd - t as f64).abs() < bound, "mean square displacement {msd}");
    }

    #[test]
    fn gamblers_ruin_fair_game() {
        let mut s = RandomStream::new(337);
        let r = gamblers_ruin(30, 100, 0.5, 10_000, 0.99, &mut s).unwrap();
        assert!((gamblers_ruin_exact(30, 100, 0.5) - 0.7).abs() < 1e-15);
        assert!(r.covers(0.7), "ruin estimate {}", r.mean);
    }

    #[test]
    fn gamblers_ruin_boundary_and_biased_cases() {
        let mut s = RandomStream::new(347);
        let r = gamblers_ruin(99, 100, 1.0 - 1e-12, 1000, 0.95, &mut s).unwrap();
        assert!(r.mean < 1e-6, "near-certain winner ruined with prob {}", r.mean);

        let exact = gamblers_ruin_exact(10, 20, 0.6);
        // Closed form with q/p = 2/3.
        let rr: f64 = 2.0 / 3.0;
        let by_hand = (rr.powi(10) - rr.powi(20)) / (1.0 - rr.powi(20));
        assert!((exact - by_hand).abs() < 1e-15);
        let r = gamblers_ruin(10, 20, 0.6, 20_000, 0.99, &mut s).unwrap();
        assert!(r.covers(exact), "estimate {} vs exact {exact}", r.mean);

        assert!(gamblers_ruin(0, 10, 0.5, 100, 0.95, &mut s).is_err());
        assert!(gamblers_ruin(10, 10, 0.5, 100, 0.95, &mut s).is_err());
    }

    #[test]
    fn wiener_path_starts_at_zero_and_validates() {
        let mut s = RandomStream::new(349);
        let traj = wiener_path(&[0.0, 0.5, 1.0], 2, &mut s).unwrap();
        assert_eq!(traj.states()[0], vec![0.0, 0.0]);
        assert!(wiener_path(&[0.5, 0.4], 1, &mut s).is_err());
        assert!(wiener_path(&[-1.0, 0.0], 1, &mut s).is_err());
        assert!(wiener_path(&[0.0, 1.0], 0, &mut s).is_err());
    }

    #[test]
    fn wiener_unit_time_variance() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let n = 10_000;
        let root = RandomStream::new(353);
        let finals: Vec<f64> = (0..n)
            .map(|r| {
                let mut s = root.spawn_substream(r);
                wiener_path(&times, 1, &mut s).unwrap().last_state().unwrap()[0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n as f64 - 1.0);
        let bound = 5.0 * (2.0 / n as f64).sqrt();
        assert!((var - 1.0).abs() < bound, "Var(W_1) = {var}");
    }

    #[test]
    fn wiener_disjoint_increments_are_uncorrelated() {
        let times = [0.0, 0.5, 1.0, 1.5];
        let n = 10_000;
        let root = RandomStream::new(359);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for r in 0..n {
            let mut s = root.spawn_substream(r as u64);
            let traj = wiener_path(&times, 1, &mut s).unwrap();
            let w: Vec<f64> = traj.scalar_states().collect();
            a.push(w[1] - w[0]);
            b.push(w[3] - w[2]);
        }
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (n as f64 - 1.0);
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum::<f64>() / (n as f64 - 1.0);
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "correlation {corr}");
    }

    #[test]
    fn wiener_scaling_on_interior_interval() {
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let n = 10_000;
        let root = RandomStream::new(367);
        let (s_idx, t_idx) = (1, 4); // s = 0.25, t = 1.0
        let dt = times[t_idx] - times[s_idx];
        let incs: Vec<f64> = (0..n)
            .map(|r| {
                let mut s = root.spawn_substream(r);
                let w: Vec<f64> = wiener_path(&times, 1, &mut s)
                    .unwrap()
                    .scalar_states()
                    .collect();
                w[t_idx] - w[s_idx]
            })
            .collect();
        let mean = incs.iter().sum::<f64>() / n as f64;
        let var = incs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n as f64 - 1.0);
        let bound = 5.0 * (2.0 / n as f64).sqrt() * dt;
        assert!((var - dt).abs() < bound, "Var(W_t − W_s) = {var} vs {dt}");
    }

    #[test]
    fn euler_maruyama_decay_matches_reference_value() {
        let spec = DiffusionSpec {
            drift: Box::new(|_, y| -0.5 * y),
            diffusion: None,
            t0: 0.0,
            t_end: 4.0,
            dt: 1e-4,
            x0: 1000.0,
        };
        let mut s = RandomStream::new(373);
        let before = s.draws();
        let traj = euler_maruyama(&spec, &mut s).unwrap();
        assert_eq!(s.draws(), before, "deterministic run consumed randomness");
        let y4 = traj.last_state().unwrap()[0];
        assert!((y4 - 135.3353).abs() < 0.5, "y(4) = {y4}");
    }

    #[test]
    fn euler_maruyama_deterministic_is_bit_identical_to_explicit_euler() {
        let spec = DiffusionSpec {
            drift: Box::new(|t, y| t - 0.3 * y),
            diffusion: None,
            t0: 0.0,
            t_end: 2.0,
            dt: 0.01,
            x0: 1.5,
        };
        let mut s = RandomStream::new(379);
        let traj = euler_maruyama(&spec, &mut s).unwrap();
        // Hand-rolled explicit Euler over the same grid.
        let mut y = 1.5f64;
        for pair in traj.times().windows(2) {
            y += (pair[0] - 0.3 * y) * (pair[1] - pair[0]);
        }
        assert_eq!(traj.last_state().unwrap()[0].to_bits(), y.to_bits());
    }

    #[test]
    fn euler_maruyama_pure_diffusion_matches_wiener_statistics() {
        let t_final = 1.0;
        let n = 10_000;
        let root = RandomStream::new(383);
        let finals: Vec<f64> = (0..n)
            .map(|r| {
                let spec = DiffusionSpec {
                    drift: Box::new(|_, _| 0.0),
                    diffusion: Some(Box::new(|_, _| 1.0)),
                    t0: 0.0,
                    t_end: t_final,
                    dt: 0.01,
                    x0: 0.0,
                };
                let mut s = root.spawn_substream(r);
                em_terminal(&spec, &mut s).unwrap()
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n as f64 - 1.0);
        assert!((var - t_final).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn gbm_terminal_mean_and_lognormality() {
        let (mu, sigma, s0, t_final) = (0.04, 0.3, 102.0, 0.5);
        let n = 10_000;
        let root = RandomStream::new(389);
        let finals: Vec<f64> = (0..n)
            .map(|r| {
                let spec = DiffusionSpec {
                    drift: Box::new(move |_, x| mu * x),
                    diffusion: Some(Box::new(move |_, x| sigma * x)),
                    t0: 0.0,
                    t_end: t_final,
                    dt: 1e-3,
                    x0: s0,
                };
                let mut s = root.spawn_substream(r);
                em_terminal(&spec, &mut s).unwrap()
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let expect = s0 * (mu * t_final).exp();
        // sd of S_T ≈ S0·e^{μT}·σ√T for small σ²T.
        let sd = expect * (sigma * sigma * t_final).exp_m1().sqrt();
        let bound = 5.0 * sd / (n as f64).sqrt();
        assert!((mean - expect).abs() < bound, "E[S_T] = {mean} vs {expect}");

        // ln(S_T) should be symmetric: skewness within CI of 0.
        let logs: Vec<f64> = finals.iter().map(|x| x.ln()).collect();
        let lm = logs.iter().sum::<f64>() / n as f64;
        let lv = logs.iter().map(|x| (x - lm) * (x - lm)).sum::<f64>() / n as f64;
        let skew = logs
            .iter()
            .map(|x| (x - lm).powi(3))
            .sum::<f64>()
            / (n as f64 * lv.powf(1.5));
        let skew_bound = 5.0 * (6.0 / n as f64).sqrt();
        assert!(skew.abs() < skew_bound, "skewness {skew}");
    }

    #[test]
    fn euler_maruyama_flags_divergence() {
        let spec = DiffusionSpec {
            drift: Box::new(|_, y| y * y * 1e6),
            diffusion: None,
            t0: 0.0,
            t_end: 10.0,
            dt: 0.1,
            x0: 10.0,
        };
        let mut s = RandomStream::new(397);
        assert!(matches!(
            euler_maruyama(&spec, &mut s),
            Err(SimError::Numerical(_))
        ));
    }

    #[test]
    fn hitting_time_reference_value() {
        let mut s = RandomStream::new(401);
        let r = hitting_time_box(3, 1.0, 0.005, 10_000, 0.95, &mut s).unwrap();
        assert!((r.mean - 0.4856).abs() < 0.03, "hitting time {}", r.mean);
    }

    #[test]
    fn hitting_time_tiny_box_exits_immediately() {
        let mut s = RandomStream::new(409);
        let dt = 0.01;
        let r = hitting_time_box(1, 1e-6, dt, 1000, 0.95, &mut s).unwrap();
        assert!(r.mean <= dt + 1e-12, "mean exit time {}", r.mean);
    }

    #[test]
    fn more_dimensions_exit_no_slower() {
        let root = RandomStream::new(419);
        let mut s1 = root.spawn_substream(1);
        let mut s3 = root.spawn_substream(3);
        let r1 = hitting_time_box(1, 1.0, 0.005, 2000, 0.95, &mut s1).unwrap();
        let r3 = hitting_time_box(3, 1.0, 0.005, 2000, 0.95, &mut s3).unwrap();
        assert!(
            r3.mean <= r1.mean,
            "3D mean {} should not exceed 1D mean {}",
            r3.mean,
            r1.mean
        );
    }

    #[test]
    fn european_call_near_reference_and_black_scholes() {
        let mut s = RandomStream::new(2);
        let r = price_european_call(102.0, 100.0, 0.04, 0.3, 0.5, 1e-3, 10_000, 0.95, &mut s)
            .unwrap();
        assert!((r.mean - 10.0314).abs() < 0.6, "call price {}", r.mean);
        let bs = black_scholes_call(102.0, 100.0, 0.04, 0.3, 0.5);
        assert!(r.covers(bs), "MC {} ± {} vs BS {bs}", r.mean, r.half_width);
    }

    #[test]
    fn vanishing_volatility_recovers_intrinsic_forward_value() {
        let mut s = RandomStream::new(431);
        let r = price_european_call(102.0, 100.0, 0.04, 1e-8, 0.5, 1e-3, 100, 0.95, &mut s)
            .unwrap();
        let expect = 102.0 - 100.0 * (-0.04f64 * 0.5).exp();
        assert!((r.mean - expect).abs() < 1e-3, "price {} vs {expect}", r.mean);
    }

    #[test]
    fn walk_and_chain_occupancy_histograms_agree() {
        // Reflecting (clamped) walk on {−5..5} with p = ½, compared
        // against the equivalent 11-state tridiagonal chain.
        let m = 11usize;
        let clamp_idx = |x: i64| -> usize { (x + 5).clamp(0, 10) as usize };
        let n = 100_000usize;

        let mut walk_counts = vec![0u64; m];
        let mut s = RandomStream::new(3);
        let mut x = 0i64;
        for _ in 0..n {
            let step = if sample_bernoulli(0.5, &mut s).unwrap() == 1 { 1 } else { -1 };
            x = (x + step).clamp(-5, 5);
            walk_counts[clamp_idx(x)] += 1;
        }

        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            if i == 0 {
                rows[0][0] = 0.5;
                rows[0][1] = 0.5;
            } else if i == m - 1 {
                rows[m - 1][m - 1] = 0.5;
                rows[m - 1][m - 2] = 0.5;
            } else {
                rows[i][i - 1] = 0.5;
                rows[i][i + 1] = 0.5;
            }
        }
        let tm = TransitionMatrix::from_rows(rows).unwrap();
        let pi0 = ProbabilityVector::point_mass(m, 5).unwrap();
        let mut s2 = RandomStream::new(1003);
        let path = generate_chain(&pi0, &tm, n + 1, &mut s2).unwrap();
        let mut chain_counts = vec![0u64; m];
        for &st in &path[1..] {
            chain_counts[st] += 1;
        }

        let l1: f64 = walk_counts
            .iter()
            .zip(&chain_counts)
            .map(|(&a, &b)| ((a as f64 - b as f64) / n as f64).abs())
            .sum();
        assert!(l1 < 0.02, "L1 distance {l1}");
    }

    #[test]
    fn startup_valuation_accounting_is_consistent() {
        let spec = StartupSpec {
            delta: 2e6,
            v0: 10e6,
            v_max: 100e6,
            c_operate: 10e3,
            c_invest: 200e3,
            p: 0.6,
        };
        let mut s = RandomStream::new(443);
        let v = startup_valuation(&spec, 5000, 0.95, &mut s).unwrap();
        // Ruin walk oracle: K=5, T=50, p=0.6.
        let exact_ruin = gamblers_ruin_exact(5, 50, 0.6);
        assert!(
            v.bankruptcy.covers(exact_ruin) || (v.bankruptcy.mean - exact_ruin).abs() < 0.02,
            "bankruptcy {} vs {exact_ruin}",
            v.bankruptcy.mean
        );
        assert!(v.duration.mean > 0.0);
        // Formula-level check: mean profit equals the accounting
        // identity applied to the mean payout/duration.
        let payout_mean = (1.0 - v.bankruptcy.mean) * spec.v_max;
        let implied =
            payout_mean - spec.v0 - v.duration.mean * (spec.c_operate + spec.c_invest);
        assert!(
            (v.profit.mean - implied).abs() < 1e-6 * spec.v_max,
            "profit {} vs implied {implied}",
            v.profit.mean
        );
    }
}
