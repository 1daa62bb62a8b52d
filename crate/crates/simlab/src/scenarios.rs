//! Named, reproducible studies wiring the library modules together.
//!
//! Every scenario takes a root seed and optional size overrides,
//! produces a primary estimate with an error bar where one applies, a
//! small named-number summary, and a plot-ready table. Replications
//! always draw from per-replication substreams, so results are
//! independent of scheduling and identical across runs with the same
//! seed.

use crate::error::{Result, SimError};
use crate::markov::{
    estimate_chain_event, n_step_matrix, stationary_distribution, step_distribution,
    ProbabilityVector, TransitionMatrix,
};
use crate::mcmc::{
    example_portfolio_returns, log_gamma_pdf, mh_chain, posterior_sample, var_portfolio_study,
    ProposalKernel, TargetDensity, VarConfig,
};
use crate::montecarlo::{
    estimate_mean, estimate_tail_naive, importance_estimate, integrate_interval, normal_pdf,
    EstimateReport, ImportanceSpec,
};
use crate::processes::{
    black_scholes_call, gamblers_ruin, gamblers_ruin_exact, hitting_time_box,
    price_european_call, random_walk, random_walk_dd, startup_valuation, StartupSpec, WalkSpec,
};
use crate::rng::{RandomStream, UniformSource};
use crate::samplers::{sample_exponential, sample_standard_normal};
use crate::ssa::{
    decay, lotka_volterra, michaelis_menten, run_deterministic, run_ssa, sir,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What to run and with which knobs; `None` fields fall back to each
/// scenario's documented default.
#[derive(Debug, Clone, Default)]
pub struct ScenarioRequest {
    pub name: String,
    pub seed: u64,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub level: Option<f64>,
    /// JSON text of a Snakes-and-Ladders board, for `snakes_ladders`.
    pub board: Option<String>,
}

/// A plot-ready table: column headers plus numeric rows.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Everything a scenario run produces. `summary` is a list of named
/// numbers (exact references, secondary estimates, diagnostics);
/// `estimate`/`half_width` are the headline numbers.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub n: u64,
    pub parameters: BTreeMap<String, f64>,
    pub estimate: f64,
    pub half_width: f64,
    pub summary: Vec<(String, f64)>,
    pub table: Table,
}

/// The full registry, in a stable order.
pub const SCENARIOS: &[&str] = &[
    "decay_deterministic",
    "decay_ssa",
    "mc_sin",
    "mc_pi",
    "mc_expquad",
    "normal_cdf_naive",
    "normal_cdf_importance",
    "normal_cauchy_delta",
    "weather_chain",
    "purchase_funnel",
    "four_state_chain",
    "random_walk_1d",
    "random_walk_2d",
    "random_walk_3d",
    "gamblers_ruin",
    "startup_valuation",
    "brownian_hitting",
    "european_call",
    "sir_ssa",
    "sir_ode",
    "michaelis_menten",
    "lotka_volterra",
    "mh_bivariate",
    "recovery_rate",
    "recovery_two_group",
    "portfolio_var",
    "monty_hall",
    "snakes_ladders",
];

struct Builder {
    outcome: ScenarioOutcome,
}

impl Builder {
    fn new(req: &ScenarioRequest, n: u64) -> Self {
        Self {
            outcome: ScenarioOutcome {
                scenario: req.name.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: req.seed,
                n,
                parameters: BTreeMap::new(),
                estimate: f64::NAN,
                half_width: 0.0,
                summary: Vec::new(),
                table: Table { headers: Vec::new(), rows: Vec::new() },
            },
        }
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.outcome.parameters.insert(key.to_string(), value);
        self
    }

    fn estimate(mut self, value: f64, half_width: f64) -> Self {
        self.outcome.estimate = value;
        self.outcome.half_width = half_width;
        self
    }

    fn report(self, r: &EstimateReport) -> Self {
        let hw = r.half_width;
        self.estimate(r.mean, hw)
    }

    fn note(mut self, key: &str, value: f64) -> Self {
        self.outcome.summary.push((key.to_string(), value));
        self
    }

    fn table(mut self, headers: &[&str], rows: Vec<Vec<f64>>) -> Self {
        self.outcome.table = Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        };
        self
    }

    fn done(self) -> ScenarioOutcome {
        self.outcome
    }
}

fn level_of(req: &ScenarioRequest) -> f64 {
    req.level.unwrap_or(0.95)
}

/// Run one named scenario. Unknown names are rejected with the list of
/// known scenarios.
pub fn run_scenario(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    match req.name.as_str() {
        "decay_deterministic" => decay_deterministic(req),
        "decay_ssa" => decay_ssa(req),
        "mc_sin" => mc_sin(req),
        "mc_pi" => mc_pi(req),
        "mc_expquad" => mc_expquad(req),
        "normal_cdf_naive" => normal_cdf_naive(req),
        "normal_cdf_importance" => normal_cdf_importance(req),
        "normal_cauchy_delta" => normal_cauchy_delta(req),
        "weather_chain" => weather_chain(req),
        "purchase_funnel" => purchase_funnel(req),
        "four_state_chain" => four_state_chain(req),
        "random_walk_1d" => random_walk_1d(req),
        "random_walk_2d" => random_walk_nd(req, 2),
        "random_walk_3d" => random_walk_nd(req, 3),
        "gamblers_ruin" => gamblers_ruin_scenario(req),
        "startup_valuation" => startup_scenario(req),
        "brownian_hitting" => brownian_hitting(req),
        "european_call" => european_call(req),
        "sir_ssa" => sir_ssa(req),
        "sir_ode" => sir_ode(req),
        "michaelis_menten" => michaelis_menten_scenario(req),
        "lotka_volterra" => lotka_volterra_scenario(req),
        "mh_bivariate" => mh_bivariate(req),
        "recovery_rate" => recovery_rate(req),
        "recovery_two_group" => recovery_two_group(req),
        "portfolio_var" => portfolio_var(req),
        "monty_hall" => monty_hall(req),
        "snakes_ladders" => snakes_ladders(req),
        other => Err(SimError::InvalidParameter(format!(
            "unknown scenario '{other}'; known scenarios: {}",
            SCENARIOS.join(", ")
        ))),
    }
}

fn decay_deterministic(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let (lambda, y0, t_final, dt) = (0.5, 1000.0, 4.0, 1e-3);
    let model = decay(lambda)?;
    let traj = run_deterministic(&model.ode, &[y0], 0.0, t_final, dt)?;
    let y_final = traj.last_state().unwrap()[0];
    let exact = y0 * (-lambda * t_final).exp();
    let rows = traj
        .times()
        .iter()
        .zip(traj.states())
        .step_by(10)
        .map(|(&t, s)| vec![t, s[0]])
        .collect();
    Ok(Builder::new(req, 1)
        .param("lambda", lambda)
        .param("y0", y0)
        .param("t_final", t_final)
        .param("dt", dt)
        .estimate(y_final, 0.0)
        .note("exact", exact)
        .note("abs_error", (y_final - exact).abs())
        .table(&["time", "y"], rows)
        .done())
}

fn decay_ssa(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let reps = req.reps.unwrap_or(500);
    let (lambda, y0, t_final) = (0.5, 1000i64, 4.0);
    let model = decay(lambda)?;
    let root = RandomStream::new(req.seed);
    let mut rows = Vec::with_capacity(reps as usize);
    let mut acc = Welford::default();
    for r in 0..reps {
        let mut s = root.spawn_substream(r);
        let y = run_ssa(&model.system, &[y0], t_final, &mut s)?.last_state()[0] as f64;
        acc.add(y);
        rows.push(vec![r as f64, y]);
    }
    let report = acc.report(level_of(req))?;
    Ok(Builder::new(req, reps)
        .param("lambda", lambda)
        .param("y0", y0 as f64)
        .param("t_final", t_final)
        .report(&report)
        .note("deterministic", 1000.0 * (-lambda * t_final).exp())
        .note("sample_std", report.sample_std)
        .table(&["replication", "y_final"], rows)
        .done())
}

fn mc_sin(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let mut s = RandomStream::new(req.seed);
    let r = integrate_interval(f64::sin, 0.0, 1.0, n, level_of(req), &mut s)?;
    let exact = 1.0 - 1.0f64.cos();
    Ok(Builder::new(req, n)
        .report(&r)
        .note("exact", exact)
        .note("abs_error", (r.mean - exact).abs())
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, exact,
        ]])
        .done())
}

fn mc_pi(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let mut s = RandomStream::new(req.seed);
    // π = 4·∫₀¹ √(1−x²) dx, the quarter-disc area.
    let r = estimate_mean(
        |x: f64| 4.0 * (1.0 - x * x).sqrt(),
        |s: &mut dyn UniformSource| s.next_uniform(),
        n,
        level_of(req),
        &mut s,
    )?;
    Ok(Builder::new(req, n)
        .report(&r)
        .note("exact", std::f64::consts::PI)
        .note("abs_error", (r.mean - std::f64::consts::PI).abs())
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, std::f64::consts::PI,
        ]])
        .done())
}

fn mc_expquad(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let mut s = RandomStream::new(req.seed);
    // ∫₀^∞ e^{−x/2}(x²−x) dx = 2·E[X²−X] with X ~ Exp(1/2); exact 12.
    let r = estimate_mean(
        |x: f64| 2.0 * (x * x - x),
        |s: &mut dyn UniformSource| sample_exponential(0.5, s).unwrap(),
        n,
        level_of(req),
        &mut s,
    )?;
    Ok(Builder::new(req, n)
        .report(&r)
        .note("exact", 12.0)
        .note("abs_error", (r.mean - 12.0).abs())
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, 12.0,
        ]])
        .done())
}

fn normal_cdf_naive(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(1_000_000);
    let t = 0.0;
    let mut s = RandomStream::new(req.seed);
    let r = estimate_tail_naive(t, n, level_of(req), &mut s)?;
    Ok(Builder::new(req, n)
        .param("t", t)
        .report(&r)
        .note("exact", 0.5)
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, 0.5,
        ]])
        .done())
}

/// Exponential-envelope importance-sampling spec for the Φ(−4.5) tail.
pub fn tail_importance_spec() -> ImportanceSpec {
    ImportanceSpec {
        target_pdf: Box::new(normal_pdf),
        envelope_pdf: Box::new(|x| if x <= -4.5 { (x + 4.5).exp() } else { 0.0 }),
        performance: Box::new(|x| f64::from(x <= -4.5)),
        envelope_sampler: Box::new(|s: &mut dyn UniformSource| {
            -4.5 - sample_exponential(1.0, s).unwrap()
        }),
        self_normalized: false,
    }
}

const PHI_MINUS_4_5: f64 = 3.39767e-6;

fn normal_cdf_importance(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let mut s = RandomStream::new(req.seed);
    let r = importance_estimate(&tail_importance_spec(), n, level_of(req), &mut s)?;
    Ok(Builder::new(req, n)
        .param("t", -4.5)
        .report(&r)
        .note("exact", PHI_MINUS_4_5)
        .note("relative_error", (r.mean - PHI_MINUS_4_5).abs() / PHI_MINUS_4_5)
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, PHI_MINUS_4_5,
        ]])
        .done())
}

/// The normal-Cauchy ratio estimator δ(t): both numerator and
/// denominator are averaged over the same N(t,1) draws.
pub fn cauchy_delta(t: f64, n: u64, stream: &mut dyn UniformSource) -> (f64, f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..n {
        let x = t + sample_standard_normal(stream);
        let w = 1.0 / (1.0 + x * x);
        num += x * w;
        den += w;
    }
    (num / den, num / n as f64, den / n as f64)
}

fn normal_cauchy_delta(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let root = RandomStream::new(req.seed);
    let mut rows = Vec::new();
    let mut b = Builder::new(req, n);
    let mut delta2 = f64::NAN;
    for (i, t) in [0.0, 2.0, 4.0].into_iter().enumerate() {
        let mut s = root.spawn_substream(i as u64);
        let (delta, num, den) = cauchy_delta(t, n, &mut s);
        if t == 2.0 {
            delta2 = delta;
        }
        b = b.note(&format!("delta_t{t}"), delta);
        rows.push(vec![t, delta, num, den]);
    }
    Ok(b
        .estimate(delta2, 0.0)
        .table(&["t", "delta", "numerator", "denominator"], rows)
        .done())
}

/// The two-step weather chain used throughout the Markov scenarios.
pub fn weather_matrix() -> TransitionMatrix {
    TransitionMatrix::new(
        vec!["sunny".into(), "cloudy".into(), "rainy".into()],
        vec![
            vec![0.0, 0.5, 0.5],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ],
    )
    .expect("static weather matrix is well-formed")
}

fn weather_chain(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let tm = weather_matrix();
    // Start from "cloudy", the reference evolution.
    let pi0 = ProbabilityVector::point_mass(3, 1)?;
    let pi1 = step_distribution(&pi0, &tm)?;
    let pi2 = step_distribution(&pi1, &tm)?;
    let stat = stationary_distribution(&tm, 1e-12, 1_000_000)?;
    let p7 = n_step_matrix(&tm, 7);
    let mut rows = Vec::new();
    for i in 0..3 {
        rows.push(vec![
            i as f64,
            pi1.entries()[i],
            pi2.entries()[i],
            stat.entries()[i],
            p7.entry(0, i),
        ]);
    }
    let mut b = Builder::new(req, 1);
    for (i, label) in ["sunny", "cloudy", "rainy"].iter().enumerate() {
        b = b.note(&format!("stationary_{label}"), stat.entries()[i]);
    }
    Ok(b
        .estimate(stat.entries()[2], 0.0)
        .table(&["state", "pi1", "pi2", "stationary", "p7_row0"], rows)
        .done())
}

/// Four-state purchase funnel with an absorbing "purchased" state.
pub fn funnel_matrix() -> TransitionMatrix {
    TransitionMatrix::new(
        vec![
            "browsing".into(),
            "cart".into(),
            "checkout".into(),
            "purchased".into(),
        ],
        vec![
            vec![0.6, 0.3, 0.1, 0.0],
            vec![0.2, 0.5, 0.2, 0.1],
            vec![0.0, 0.1, 0.6, 0.3],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
    )
    .expect("static funnel matrix is well-formed")
}

fn purchase_funnel(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let horizon = 6;
    let tm = funnel_matrix();
    let pi0 = ProbabilityVector::point_mass(4, 0)?;
    let mut s = RandomStream::new(req.seed);
    // "Purchased" is absorbing, so reaching it within the horizon is
    // the same as ending there.
    let r = estimate_chain_event(
        &pi0,
        &tm,
        horizon,
        |path| path.contains(&3),
        n,
        level_of(req),
        &mut s,
    )?;
    let exact = n_step_matrix(&tm, horizon as u32).entry(0, 3);
    Ok(Builder::new(req, n)
        .param("horizon", horizon as f64)
        .report(&r)
        .note("exact", exact)
        .note("covered", f64::from(r.covers(exact)))
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, exact,
        ]])
        .done())
}

fn four_state_chain(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let horizon = 3;
    let tm = TransitionMatrix::from_rows(vec![
        vec![0.25, 0.25, 0.0, 0.5],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.5, 0.0],
        vec![0.25, 0.25, 0.25, 0.25],
    ])?;
    let pi0 = ProbabilityVector::point_mass(4, 0)?;
    let mut s = RandomStream::new(req.seed);
    let r = estimate_chain_event(
        &pi0,
        &tm,
        horizon,
        |path| *path.last().unwrap() == 3,
        n,
        level_of(req),
        &mut s,
    )?;
    let exact = n_step_matrix(&tm, horizon as u32).entry(0, 3);
    Ok(Builder::new(req, n)
        .param("horizon", horizon as f64)
        .report(&r)
        .note("exact", exact)
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, exact,
        ]])
        .done())
}

fn random_walk_1d(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let reps = req.reps.unwrap_or(200);
    let steps = req.n.unwrap_or(10_000);
    let spec = WalkSpec { p: 0.5, x0: 0, steps };
    let root = RandomStream::new(req.seed);
    let mut rows = Vec::new();
    let mut acc = Welford::default();
    for r in 0..reps {
        let mut s = root.spawn_substream(r);
        let x = random_walk(&spec, &mut s)?.last_state().unwrap()[0];
        acc.add(x);
        rows.push(vec![r as f64, x]);
    }
    let report = acc.report(level_of(req))?;
    Ok(Builder::new(req, reps)
        .param("p", 0.5)
        .param("steps", steps as f64)
        .report(&report)
        .note("expected_mean", 0.0)
        .note("sample_variance", report.sample_std * report.sample_std)
        .note("expected_variance", steps as f64)
        .table(&["replication", "x_final"], rows)
        .done())
}

fn random_walk_nd(req: &ScenarioRequest, dim: usize) -> Result<ScenarioOutcome> {
    let reps = req.reps.unwrap_or(200);
    let steps = req.n.unwrap_or(10_000);
    // 2d axis directions, uniform: unit steps, so E|X_t|² = t.
    let mut directions = Vec::new();
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[axis] = sign;
            directions.push(d);
        }
    }
    let probs = vec![1.0 / (2.0 * dim as f64); 2 * dim];
    let root = RandomStream::new(req.seed);
    let mut rows = Vec::new();
    let mut acc = Welford::default();
    for r in 0..reps {
        let mut s = root.spawn_substream(r);
        let x = random_walk_dd(&directions, &probs, &vec![0.0; dim], steps, &mut s)?;
        let sq: f64 = x.last_state().unwrap().iter().map(|c| c * c).sum();
        acc.add(sq);
        rows.push(vec![r as f64, sq]);
    }
    let report = acc.report(level_of(req))?;
    Ok(Builder::new(req, reps)
        .param("dim", dim as f64)
        .param("steps", steps as f64)
        .report(&report)
        .note("expected_msd", steps as f64)
        .table(&["replication", "squared_displacement"], rows)
        .done())
}

fn gamblers_ruin_scenario(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let (k, t, p) = (30, 100, 0.5);
    let mut s = RandomStream::new(req.seed);
    let r = gamblers_ruin(k, t, p, n, level_of(req), &mut s)?;
    let exact = gamblers_ruin_exact(k, t, p);
    Ok(Builder::new(req, n)
        .param("k", k as f64)
        .param("t", t as f64)
        .param("p", p)
        .report(&r)
        .note("exact", exact)
        .note("covered", f64::from(r.covers(exact)))
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, exact,
        ]])
        .done())
}

fn startup_scenario(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(5_000);
    let spec = StartupSpec {
        delta: 2e6,
        v0: 10e6,
        v_max: 100e6,
        c_operate: 10e3,
        c_invest: 200e3,
        p: 0.6,
    };
    let mut s = RandomStream::new(req.seed);
    let v = startup_valuation(&spec, n, level_of(req), &mut s)?;
    Ok(Builder::new(req, n)
        .param("delta", spec.delta)
        .param("v0", spec.v0)
        .param("v_max", spec.v_max)
        .param("p", spec.p)
        .report(&v.bankruptcy)
        .note("exact_bankruptcy", gamblers_ruin_exact(5, 50, spec.p))
        .note("mean_duration", v.duration.mean)
        .note("mean_profit", v.profit.mean)
        .table(
            &["metric_bankruptcy", "metric_duration", "metric_profit"],
            vec![vec![v.bankruptcy.mean, v.duration.mean, v.profit.mean]],
        )
        .done())
}

fn brownian_hitting(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let (dim, half_width, dt) = (3, 1.0, 0.005);
    let mut s = RandomStream::new(req.seed);
    let r = hitting_time_box(dim, half_width, dt, n, level_of(req), &mut s)?;
    Ok(Builder::new(req, n)
        .param("dim", dim as f64)
        .param("half_width", half_width)
        .param("dt", dt)
        .report(&r)
        .note("reference", 0.4856)
        .table(&["n", "estimate", "half_width", "reference"], vec![vec![
            n as f64, r.mean, r.half_width, 0.4856,
        ]])
        .done())
}

fn european_call(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let (s0, strike, rate, sigma, t_final, dt) = (102.0, 100.0, 0.04, 0.3, 0.5, 1e-3);
    let mut s = RandomStream::new(req.seed);
    let r = price_european_call(s0, strike, rate, sigma, t_final, dt, n, level_of(req), &mut s)?;
    let bs = black_scholes_call(s0, strike, rate, sigma, t_final);
    Ok(Builder::new(req, n)
        .param("s0", s0)
        .param("strike", strike)
        .param("r", rate)
        .param("sigma", sigma)
        .param("t_final", t_final)
        .param("dt", dt)
        .report(&r)
        .note("black_scholes", bs)
        .note("covered", f64::from(r.covers(bs)))
        .table(&["n", "estimate", "half_width", "black_scholes"], vec![vec![
            n as f64, r.mean, r.half_width, bs,
        ]])
        .done())
}

fn sir_ssa(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let reps = req.reps.unwrap_or(200);
    let t_final = 120.0;
    let model = sir(1e-4, 0.25, 0.05)?;
    let grid: Vec<f64> = (0..=240).map(|k| k as f64 * 0.5).collect();
    let root = RandomStream::new(req.seed);
    let mut mean = vec![[0.0f64; 3]; grid.len()];
    let mut peak_sum = 0.0;
    let mut peak_time_sum = 0.0;
    for r in 0..reps {
        let mut s = root.spawn_substream(r);
        let traj = run_ssa(&model.system, &[198, 2, 0], t_final, &mut s)?;
        let (k, peak) = traj
            .states
            .iter()
            .enumerate()
            .max_by_key(|(_, st)| st[1])
            .expect("trajectory has at least the initial state");
        peak_sum += peak[1] as f64;
        peak_time_sum += traj.times[k];
        for (acc, st) in mean.iter_mut().zip(traj.resample(&grid)) {
            for (a, x) in acc.iter_mut().zip(st) {
                *a += x;
            }
        }
    }
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(&mean)
        .map(|(&t, acc)| {
            vec![
                t,
                acc[0] / reps as f64,
                acc[1] / reps as f64,
                acc[2] / reps as f64,
            ]
        })
        .collect();
    Ok(Builder::new(req, reps)
        .param("mu", 1e-4)
        .param("beta", 0.25)
        .param("gamma", 0.05)
        .param("t_final", t_final)
        .estimate(peak_sum / reps as f64, 0.0)
        .note("mean_peak_infected", peak_sum / reps as f64)
        .note("mean_peak_time", peak_time_sum / reps as f64)
        .table(&["time", "mean_s", "mean_i", "mean_r"], rows)
        .done())
}

fn sir_ode(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let model = sir(1e-4, 0.25, 0.05)?;
    let traj = run_deterministic(&model.ode, &[198.0, 2.0, 0.0], 0.0, 120.0, 0.01)?;
    let (k, peak) = traj
        .states()
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a[1].total_cmp(&b[1]))
        .expect("RK4 trajectory is non-empty");
    let rows: Vec<Vec<f64>> = traj
        .times()
        .iter()
        .zip(traj.states())
        .step_by(50)
        .map(|(&t, s)| vec![t, s[0], s[1], s[2]])
        .collect();
    Ok(Builder::new(req, 1)
        .param("mu", 1e-4)
        .param("beta", 0.25)
        .param("gamma", 0.05)
        .estimate(peak[1], 0.0)
        .note("peak_infected", peak[1])
        .note("peak_time", traj.times()[k])
        .table(&["time", "s", "i", "r"], rows)
        .done())
}

fn michaelis_menten_scenario(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let t_final = 10.0;
    let model = michaelis_menten(0.002, 0.1, 0.75)?;
    let initial = [312i64, 125, 0, 0];
    let mut s = RandomStream::new(req.seed);
    let traj = run_ssa(&model.system, &initial, t_final, &mut s)?;
    let conserved = traj.states.iter().all(|st| st[1] + st[2] == 125);
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(traj.resample(&grid))
        .map(|(&t, st)| {
            let mut row = vec![t];
            row.extend(st);
            row
        })
        .collect();
    let final_p = traj.last_state()[3] as f64;
    Ok(Builder::new(req, 1)
        .param("c1", 0.002)
        .param("c2", 0.1)
        .param("c3", 0.75)
        .param("t_final", t_final)
        .estimate(final_p, 0.0)
        .note("final_product", final_p)
        .note("enzyme_conserved", f64::from(conserved))
        .note("events", (traj.times.len() - 1) as f64)
        .table(&["time", "s", "e", "c", "p"], rows)
        .done())
}

fn lotka_volterra_scenario(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let t_final = 30.0;
    let model = lotka_volterra(1.0, 0.005, 0.6)?;
    let mut s = RandomStream::new(req.seed);
    let traj = run_ssa(&model.system, &[100, 50], t_final, &mut s)?;
    let grid: Vec<f64> = (0..=300).map(|k| k as f64 * 0.1).collect();
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(traj.resample(&grid))
        .map(|(&t, st)| vec![t, st[0], st[1]])
        .collect();
    let last = traj.last_state();
    Ok(Builder::new(req, 1)
        .param("alpha", 1.0)
        .param("beta", 0.005)
        .param("gamma", 0.6)
        .param("t_final", t_final)
        .estimate(last[0] as f64, 0.0)
        .note("final_prey", last[0] as f64)
        .note("final_predators", last[1] as f64)
        .note("events", (traj.times.len() - 1) as f64)
        .table(&["time", "prey", "predators"], rows)
        .done())
}

fn mh_bivariate(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(1_000_000) as usize;
    let burn_in = 1_000.min(n / 10);
    let target = TargetDensity::new(2, |p: &[f64]| {
        let (x, y) = (p[0], p[1]);
        -(x * x * y * y + x * x + y * y - 8.0 * x - 8.0 * y) / 2.0
    });
    let proposal = ProposalKernel::random_walk(&[vec![4.0, 0.0], vec![0.0, 4.0]])?;
    let mut s = RandomStream::new(req.seed);
    let run = mh_chain(&target, &proposal, &[4.0, 4.0], n, burn_in, &mut s)?;
    let summary = run.summary(level_of(req))?;
    Ok(Builder::new(req, n as u64)
        .param("burn_in", burn_in as f64)
        .report(&summary[0])
        .note("exact", 1.85997)
        .note("mean_x2", summary[1].mean)
        .note("acceptance_ratio", run.acceptance_ratio())
        .table(
            &["coordinate", "mean", "sample_std", "half_width"],
            summary
                .iter()
                .enumerate()
                .map(|(i, r)| vec![i as f64, r.mean, r.sample_std, r.half_width])
                .collect(),
        )
        .done())
}

fn recovery_rate(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000) as usize;
    let burn_in = n / 10;
    let data = vec![5.0, 8.0, 12.0, 7.0, 9.0, 10.0, 3.0, 6.0, 8.0, 11.0];
    let total: f64 = data.iter().sum();
    let count = data.len() as f64;
    let proposal = ProposalKernel::random_walk_isotropic(1, 0.5)?;
    let mut s = RandomStream::new(req.seed);
    let out = posterior_sample(
        move |theta: &[f64]| {
            if theta[0] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                count * theta[0].ln() - theta[0] * total
            }
        },
        |theta| log_gamma_pdf(theta[0], 2.0, 1.0),
        &proposal,
        &[0.2],
        n,
        burn_in,
        level_of(req),
        &mut s,
    )?;
    let r = &out.summary[0];
    Ok(Builder::new(req, n as u64)
        .param("burn_in", burn_in as f64)
        .report(r)
        .note("conjugate_mean", 12.0 / 80.0)
        .note("posterior_std", r.sample_std)
        .note("acceptance_ratio", out.run.acceptance_ratio())
        .table(&["n", "mean", "std", "half_width", "exact"], vec![vec![
            n as f64,
            r.mean,
            r.sample_std,
            r.half_width,
            12.0 / 80.0,
        ]])
        .done())
}

fn recovery_two_group(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(30_000) as usize;
    let burn_in = n / 10;
    let data1 = vec![5.0, 8.0, 12.0, 7.0, 9.0, 10.0, 3.0, 6.0, 8.0, 11.0];
    let data2 = vec![10.0, 14.0, 7.0, 11.0, 13.0, 8.0, 15.0, 9.0, 10.0, 16.0];
    let (c1, t1) = (data1.len() as f64, data1.iter().sum::<f64>());
    let (c2, t2) = (data2.len() as f64, data2.iter().sum::<f64>());
    let proposal = ProposalKernel::random_walk(&[vec![0.25, 0.0], vec![0.0, 0.25]])?;
    let mut s = RandomStream::new(req.seed);
    let out = posterior_sample(
        move |theta: &[f64]| {
            if theta[0] <= 0.0 || theta[1] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                c1 * theta[0].ln() - theta[0] * t1 + c2 * theta[1].ln() - theta[1] * t2
            }
        },
        |theta| log_gamma_pdf(theta[0], 2.0, 1.0) + log_gamma_pdf(theta[1], 2.0, 1.0),
        &proposal,
        &[0.2, 0.2],
        n,
        burn_in,
        level_of(req),
        &mut s,
    )?;
    Ok(Builder::new(req, n as u64)
        .param("burn_in", burn_in as f64)
        .report(&out.summary[0])
        .note("conjugate_mean_1", 12.0 / 80.0)
        .note("mean_2", out.summary[1].mean)
        .note("conjugate_mean_2", 12.0 / 114.0)
        .note("acceptance_ratio", out.run.acceptance_ratio())
        .table(
            &["group", "mean", "std", "half_width", "exact"],
            vec![
                vec![
                    1.0,
                    out.summary[0].mean,
                    out.summary[0].sample_std,
                    out.summary[0].half_width,
                    12.0 / 80.0,
                ],
                vec![
                    2.0,
                    out.summary[1].mean,
                    out.summary[1].sample_std,
                    out.summary[1].half_width,
                    12.0 / 114.0,
                ],
            ],
        )
        .done())
}

fn portfolio_var(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let config = VarConfig::default();
    let returns = example_portfolio_returns();
    let mut s = RandomStream::new(req.seed);
    let study = var_portfolio_study(&returns, &config, &mut s)?;
    Ok(Builder::new(req, (config.thin_to * config.n_mc) as u64)
        .param("s0", config.s0)
        .param("threshold", config.threshold)
        .param("t_final", config.t_final)
        .param("n_mh", config.n_mh as f64)
        .param("thin_to", config.thin_to as f64)
        .param("n_mc", config.n_mc as f64)
        .report(&study.loss_probability)
        .note("posterior_mu", study.posterior_mu.mean)
        .note("posterior_sigma", study.posterior_sigma.mean)
        .note("acceptance_ratio", study.acceptance_ratio)
        .table(
            &["loss_probability", "posterior_mu", "posterior_sigma"],
            vec![vec![
                study.loss_probability.mean,
                study.posterior_mu.mean,
                study.posterior_sigma.mean,
            ]],
        )
        .done())
}

fn monty_hall(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(100_000);
    let mut s = RandomStream::new(req.seed);
    // Switching wins exactly when the first pick missed the prize; the
    // host's door choice never changes that event.
    let r = estimate_mean(
        |x| x,
        |s: &mut dyn UniformSource| {
            let prize = (s.next_uniform() * 3.0) as usize;
            let pick = (s.next_uniform() * 3.0) as usize;
            f64::from(prize != pick)
        },
        n,
        level_of(req),
        &mut s,
    )?;
    let exact = 2.0 / 3.0;
    Ok(Builder::new(req, n)
        .report(&r)
        .note("exact", exact)
        .note("covered", f64::from(r.covers(exact)))
        .table(&["n", "estimate", "half_width", "exact"], vec![vec![
            n as f64, r.mean, r.half_width, exact,
        ]])
        .done())
}

/// Snakes-and-Ladders board: `size` squares plus a jump map
/// (ladder bottoms and snake heads to their destinations).
#[derive(Debug, Deserialize)]
pub struct BoardSpec {
    pub size: u64,
    #[serde(default)]
    pub jumps: BTreeMap<String, u64>,
}

impl BoardSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let board: BoardSpec = serde_json::from_str(text)
            .map_err(|e| SimError::InvalidModel(format!("board parse error: {e}")))?;
        board.validate()?;
        Ok(board)
    }

    fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(SimError::InvalidModel("board needs at least 2 squares".into()));
        }
        for (from, &to) in &self.jumps {
            let from: u64 = from.parse().map_err(|_| {
                SimError::InvalidModel(format!("jump key '{from}' is not a square number"))
            })?;
            if from == 0 || from >= self.size || to > self.size || to == from {
                return Err(SimError::InvalidModel(format!(
                    "jump {from}→{to} leaves the board or loops"
                )));
            }
        }
        Ok(())
    }

    fn destination(&self, square: u64) -> u64 {
        self.jumps.get(&square.to_string()).copied().unwrap_or(square)
    }

    /// Rolls needed to finish one game: a roll that would overshoot the
    /// final square does not move the token (exact-landing rule).
    pub fn play(&self, stream: &mut dyn UniformSource) -> u64 {
        let mut pos = 0u64;
        let mut rolls = 0u64;
        while pos != self.size {
            let die = (stream.next_uniform() * 6.0) as u64 + 1;
            rolls += 1;
            if pos + die <= self.size {
                pos = self.destination(pos + die);
            }
        }
        rolls
    }
}

/// A bundled example board (the classic layout is configurable, not
/// canonical): 30 squares, three ladders and three snakes.
pub const DEFAULT_BOARD: &str = r#"{
    "size": 30,
    "jumps": {
        "3": 14, "8": 20, "15": 25,
        "12": 5, "22": 9, "27": 16
    }
}"#;

fn snakes_ladders(req: &ScenarioRequest) -> Result<ScenarioOutcome> {
    let n = req.n.unwrap_or(10_000);
    let board = BoardSpec::from_json(req.board.as_deref().unwrap_or(DEFAULT_BOARD))?;
    let root = RandomStream::new(req.seed);
    let mut acc = Welford::default();
    let mut exactly_30 = 0u64;
    let mut within_30 = 0u64;
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for r in 0..n {
        let mut s = root.spawn_substream(r);
        let rolls = board.play(&mut s);
        acc.add(rolls as f64);
        if rolls == 30 {
            exactly_30 += 1;
        }
        if rolls <= 30 {
            within_30 += 1;
        }
        *histogram.entry(rolls).or_insert(0) += 1;
    }
    let report = acc.report(level_of(req))?;
    let rows = histogram
        .into_iter()
        .map(|(rolls, count)| vec![rolls as f64, count as f64])
        .collect();
    Ok(Builder::new(req, n)
        .param("board_size", board.size as f64)
        .report(&report)
        .note("p_exactly_30", exactly_30 as f64 / n as f64)
        .note("p_within_30", within_30 as f64 / n as f64)
        .table(&["rolls", "count"], rows)
        .done())
}

/// Running mean/variance accumulator (Welford).
#[derive(Debug, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn add(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
    }

    fn report(&self, level: f64) -> Result<EstimateReport> {
        if self.n < 2 {
            return Err(SimError::InvalidParameter(
                "summary needs at least two observations".into(),
            ));
        }
        EstimateReport::new(
            self.mean,
            (self.m2 / (self.n - 1) as f64).sqrt(),
            self.n,
            level,
        )
    }
}
