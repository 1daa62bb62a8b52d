//! Stochastic simulation of reaction networks.
//!
//! Exact event-by-event simulation (Gillespie's direct method),
//! approximate tau-leaping with Poisson reaction counts, a
//! deterministic fixed-step RK4 counterpart, and a small model library
//! (SIR epidemic, Michaelis–Menten enzyme kinetics, Lotka–Volterra
//! predator–prey, radioactive decay).

use crate::error::{Result, SimError};
use crate::processes::Trajectory;
use crate::rng::UniformSource;
use crate::samplers::{sample_exponential, sample_standard_normal};

use serde::Deserialize;
use std::collections::BTreeMap;

/// A reaction network: `m` reactions over `n` species, each reaction
/// `j` with a stoichiometry row `v_j` and a propensity `w_j(y) ≥ 0`.
pub struct ReactionSystem {
    species: Vec<String>,
    state_change: Vec<Vec<i64>>,
    propensity: Box<dyn Fn(&[i64]) -> Vec<f64>>,
    rates: Vec<(String, f64)>,
}

impl ReactionSystem {
    pub fn new(
        species: Vec<String>,
        state_change: Vec<Vec<i64>>,
        propensity: Box<dyn Fn(&[i64]) -> Vec<f64>>,
        rates: Vec<(String, f64)>,
    ) -> Result<Self> {
        let n = species.len();
        if n == 0 || state_change.is_empty() {
            return Err(SimError::InvalidModel(
                "reaction system needs at least one species and one reaction".into(),
            ));
        }
        if state_change.iter().any(|row| row.len() != n) {
            return Err(SimError::InvalidModel(format!(
                "every stoichiometry row must have {n} entries"
            )));
        }
        Ok(Self { species, state_change, propensity, rates })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.state_change.len()
    }

    pub fn state_change(&self) -> &[Vec<i64>] {
        &self.state_change
    }

    pub fn rates(&self) -> &[(String, f64)] {
        &self.rates
    }

    /// Propensity vector `w(y)`, checked for shape and sign.
    pub fn propensities(&self, state: &[i64]) -> Result<Vec<f64>> {
        if state.len() != self.n_species() {
            return Err(SimError::InvalidParameter(format!(
                "state has {} entries but the system has {} species",
                state.len(),
                self.n_species()
            )));
        }
        let w = (self.propensity)(state);
        if w.len() != self.n_reactions() {
            return Err(SimError::InvalidModel(format!(
                "propensity returned {} entries for {} reactions",
                w.len(),
                self.n_reactions()
            )));
        }
        if let Some((j, &wj)) = w.iter().enumerate().find(|(_, &wj)| !(wj >= 0.0)) {
            return Err(SimError::InvalidModel(format!(
                "propensity {j} is negative ({wj}) at state {state:?}"
            )));
        }
        Ok(w)
    }
}

/// Total propensity `a(y) = Σ_j w_j(y)`.
pub fn total_propensity(sys: &ReactionSystem, state: &[i64]) -> Result<f64> {
    Ok(sys.propensities(state)?.iter().sum())
}

/// One exact simulation event.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaEvent {
    pub tau: f64,
    pub reaction_index: usize,
    pub new_state: Vec<i64>,
}

/// One step of the direct method: `τ ~ Exp(a(y))` from `u₁`, then the
/// reaction index from `u₂` via the cumulative propensity fractions.
///
/// Returns `None` when `a(y) = 0` (extinction: no reaction can fire).
pub fn gillespie_step(
    sys: &ReactionSystem,
    state: &[i64],
    stream: &mut dyn UniformSource,
) -> Result<Option<SsaEvent>> {
    let w = sys.propensities(state)?;
    let a: f64 = w.iter().sum();
    if a <= 0.0 {
        return Ok(None);
    }
    let tau = sample_exponential(a, stream)?;
    let u2 = stream.next_uniform();
    let mut acc = 0.0;
    let mut reaction_index = w.len() - 1;
    for (j, &wj) in w.iter().enumerate() {
        acc += wj / a;
        if u2 <= acc {
            reaction_index = j;
            break;
        }
    }
    let mut new_state = state.to_vec();
    for (xi, di) in new_state.iter_mut().zip(&sys.state_change[reaction_index]) {
        *xi += di;
    }
    Ok(Some(SsaEvent { tau, reaction_index, new_state }))
}

/// Event-time record of a jump process: integer state per event time.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<i64>>,
}

impl JumpTrajectory {
    pub fn last_state(&self) -> &[i64] {
        self.states.last().unwrap()
    }

    /// Piecewise-constant resampling: the state at grid time `t` is the
    /// state of the last event at or before `t` (previous-event hold).
    pub fn resample(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut idx = 0usize;
        for &t in grid {
            while idx + 1 < self.times.len() && self.times[idx + 1] <= t {
                idx += 1;
            }
            out.push(self.states[idx].iter().map(|&x| x as f64).collect());
        }
        out
    }
}

/// Exact SSA run from `initial` until the next event would pass
/// `t_final` or every propensity vanishes.
pub fn run_ssa(
    sys: &ReactionSystem,
    initial: &[i64],
    t_final: f64,
    stream: &mut dyn UniformSource,
) -> Result<JumpTrajectory> {
    if initial.iter().any(|&x| x < 0) {
        return Err(SimError::InvalidParameter(
            "SSA initial state must be non-negative".into(),
        ));
    }
    let mut times = vec![0.0];
    let mut states = vec![initial.to_vec()];
    let mut t = 0.0;
    let mut state = initial.to_vec();
    while let Some(event) = gillespie_step(sys, &state, stream)? {
        t += event.tau;
        if t > t_final {
            break;
        }
        state = event.new_state;
        times.push(t);
        states.push(state.clone());
    }
    Ok(JumpTrajectory { times, states })
}

/// Poisson variate. Knuth's product-of-uniforms method for small means,
/// a rounded normal approximation `max(0, ⌊λ + √λ·Z⌉)` above λ = 30.
pub fn sample_poisson(lambda: f64, stream: &mut dyn UniformSource) -> Result<u64> {
    if !(lambda >= 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "Poisson mean must be non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda <= 30.0 {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut prod = 1.0;
        loop {
            prod *= 1.0 - stream.next_uniform();
            if prod <= limit {
                return Ok(k);
            }
            k += 1;
        }
    }
    let z = sample_standard_normal(stream);
    Ok((lambda + lambda.sqrt() * z).round().max(0.0) as u64)
}

/// Result of a tau-leap step: the new state plus how many species had
/// to be clamped at zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauLeapStep {
    pub state: Vec<i64>,
    pub clamped: u64,
}

/// One tau-leap: each reaction fires `Poisson(w_j·τ)` times; negative
/// species counts are clamped to zero (counted in `clamped`).
pub fn tau_leap_step(
    sys: &ReactionSystem,
    state: &[i64],
    tau: f64,
    stream: &mut dyn UniformSource,
) -> Result<TauLeapStep> {
    if !(tau > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "tau-leap step must be positive, got {tau}"
        )));
    }
    let w = sys.propensities(state)?;
    let mut next = state.to_vec();
    for (j, &wj) in w.iter().enumerate() {
        let fires = sample_poisson(wj * tau, stream)? as i64;
        if fires == 0 {
            continue;
        }
        for (xi, di) in next.iter_mut().zip(&sys.state_change[j]) {
            *xi += di * fires;
        }
    }
    let mut clamped = 0u64;
    for xi in &mut next {
        if *xi < 0 {
            *xi = 0;
            clamped += 1;
        }
    }
    Ok(TauLeapStep { state: next, clamped })
}

/// Repeated tau-leaping to `t_final`; returns the leap-time trajectory
/// and the total clamp count.
pub fn run_tau_leap(
    sys: &ReactionSystem,
    initial: &[i64],
    tau: f64,
    t_final: f64,
    stream: &mut dyn UniformSource,
) -> Result<(JumpTrajectory, u64)> {
    let mut times = vec![0.0];
    let mut states = vec![initial.to_vec()];
    let mut state = initial.to_vec();
    let mut clamp_total = 0u64;
    let mut t = 0.0;
    while t + tau <= t_final + 1e-12 {
        let step = tau_leap_step(sys, &state, tau, stream)?;
        clamp_total += step.clamped;
        state = step.state;
        t += tau;
        times.push(t);
        states.push(state.clone());
    }
    Ok((JumpTrajectory { times, states }, clamp_total))
}

/// Classical fixed-step RK4 integration of `y' = f(t, y)` with a
/// shortened final step landing on `t_end`.
pub fn run_deterministic(
    deriv: impl Fn(f64, &[f64]) -> Vec<f64>,
    initial: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t0 < t_end) {
        return Err(SimError::InvalidParameter(format!(
            "RK4 needs dt > 0 and t0 < t_end, got dt={dt}, [{t0}, {t_end}]"
        )));
    }
    let d = initial.len();
    let mut times = vec![t0];
    let mut states = vec![initial.to_vec()];
    let mut y = initial.to_vec();
    let mut t = t0;
    let eps = 1e-12 * dt.max(1.0);
    while t < t_end - eps {
        let h = dt.min(t_end - t);
        let k1 = deriv(t, &y);
        let y2: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = deriv(t + 0.5 * h, &y2);
        let y3: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = deriv(t + 0.5 * h, &y3);
        let y4: Vec<f64> = (0..d).map(|i| y[i] + h * k3[i]).collect();
        let k4 = deriv(t + h, &y4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        if y.iter().any(|x| !x.is_finite()) {
            return Err(SimError::Numerical(format!(
                "RK4 produced a non-finite state at t = {t}"
            )));
        }
        times.push(t);
        states.push(y.clone());
    }
    Trajectory::new(times, states)
}

/// A stochastic model together with its mean-field ODE right-hand side.
pub struct Model {
    pub system: ReactionSystem,
    pub ode: Box<dyn Fn(f64, &[f64]) -> Vec<f64>>,
}

/// SIR epidemic with vital dynamics. Species `(S, I, R)`; reactions:
/// birth (into S, rate μN), infection ((β/N)SI), recovery (γI), and
/// per-compartment deaths (μS, μI, μR), with `N = S + I + R`.
pub fn sir(mu: f64, beta: f64, gamma: f64) -> Result<Model> {
    let system = ReactionSystem::new(
        vec!["S".into(), "I".into(), "R".into()],
        vec![
            vec![1, 0, 0],
            vec![-1, 1, 0],
            vec![0, -1, 1],
            vec![-1, 0, 0],
            vec![0, -1, 0],
            vec![0, 0, -1],
        ],
        Box::new(move |y: &[i64]| {
            let (s, i, r) = (y[0] as f64, y[1] as f64, y[2] as f64);
            let n = s + i + r;
            let infection = if n > 0.0 { beta / n * s * i } else { 0.0 };
            vec![mu * n, infection, gamma * i, mu * s, mu * i, mu * r]
        }),
        vec![("mu".into(), mu), ("beta".into(), beta), ("gamma".into(), gamma)],
    )?;
    let ode = Box::new(move |_t: f64, y: &[f64]| {
        let (s, i, r) = (y[0], y[1], y[2]);
        let n = s + i + r;
        let infection = if n > 0.0 { beta / n * s * i } else { 0.0 };
        vec![
            mu * n - infection - mu * s,
            infection - gamma * i - mu * i,
            gamma * i - mu * r,
        ]
    });
    Ok(Model { system, ode })
}

/// Michaelis–Menten enzyme kinetics. Species `(S, E, C, P)`; reactions
/// `S + E → C` (c₁SE), `C → S + E` (c₂C), `C → E + P` (c₃C).
pub fn michaelis_menten(c1: f64, c2: f64, c3: f64) -> Result<Model> {
    let system = ReactionSystem::new(
        vec!["S".into(), "E".into(), "C".into(), "P".into()],
        vec![
            vec![-1, -1, 1, 0],
            vec![1, 1, -1, 0],
            vec![0, 1, -1, 1],
        ],
        Box::new(move |y: &[i64]| {
            let (s, e, c) = (y[0] as f64, y[1] as f64, y[2] as f64);
            vec![c1 * s * e, c2 * c, c3 * c]
        }),
        vec![("c1".into(), c1), ("c2".into(), c2), ("c3".into(), c3)],
    )?;
    let ode = Box::new(move |_t: f64, y: &[f64]| {
        let (s, e, c) = (y[0], y[1], y[2]);
        vec![
            -c1 * s * e + c2 * c,
            -c1 * s * e + (c2 + c3) * c,
            c1 * s * e - (c2 + c3) * c,
            c3 * c,
        ]
    });
    Ok(Model { system, ode })
}

/// Lotka–Volterra predator–prey. Species `(R, F)` (prey, predator);
/// reactions `R → 2R` (αR), `R + F → 2F` (βRF), `F → ∅` (γF).
pub fn lotka_volterra(alpha: f64, beta: f64, gamma: f64) -> Result<Model> {
    let system = ReactionSystem::new(
        vec!["R".into(), "F".into()],
        vec![vec![1, 0], vec![-1, 1], vec![0, -1]],
        Box::new(move |y: &[i64]| {
            let (r, f) = (y[0] as f64, y[1] as f64);
            vec![alpha * r, beta * r * f, gamma * f]
        }),
        vec![
            ("alpha".into(), alpha),
            ("beta".into(), beta),
            ("gamma".into(), gamma),
        ],
    )?;
    let ode = Box::new(move |_t: f64, y: &[f64]| {
        let (r, f) = (y[0], y[1]);
        vec![alpha * r - beta * r * f, beta * r * f - gamma * f]
    });
    Ok(Model { system, ode })
}

/// Radioactive decay `y → ∅` with rate λ per particle.
pub fn decay(lambda: f64) -> Result<Model> {
    let system = ReactionSystem::new(
        vec!["y".into()],
        vec![vec![-1]],
        Box::new(move |y: &[i64]| vec![lambda * y[0] as f64]),
        vec![("lambda".into(), lambda)],
    )?;
    let ode = Box::new(move |_t: f64, y: &[f64]| vec![-lambda * y[0]]);
    Ok(Model { system, ode })
}

/// On-disk reaction model. Each reaction carries a mass-action
/// propensity template: `w = rate · Π_i C(y_i, order_i)` over its
/// reactants (so an order-2 self-reaction contributes `y(y−1)/2`, and
/// an empty reactant map is a constant-rate source `w = rate`).
#[derive(Debug, Deserialize)]
pub struct ModelSpecFile {
    pub species: Vec<String>,
    pub rates: BTreeMap<String, f64>,
    pub reactions: Vec<ReactionSpec>,
}

#[derive(Debug, Deserialize)]
pub struct ReactionSpec {
    /// Name of the rate constant in `rates`.
    pub rate: String,
    /// Reactant species and their orders.
    #[serde(default)]
    pub reactants: BTreeMap<String, u32>,
    /// Net state change per species (absent species unchanged).
    pub change: BTreeMap<String, i64>,
}

impl ModelSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| SimError::InvalidModel(format!("model spec parse error: {e}")))
    }

    pub fn build(&self) -> Result<ReactionSystem> {
        let n = self.species.len();
        let index: BTreeMap<&str, usize> = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut state_change = Vec::with_capacity(self.reactions.len());
        // (rate constant, [(species index, order)]) per reaction.
        let mut terms: Vec<(f64, Vec<(usize, u32)>)> = Vec::with_capacity(self.reactions.len());
        for (j, r) in self.reactions.iter().enumerate() {
            let c = *self.rates.get(&r.rate).ok_or_else(|| {
                SimError::InvalidModel(format!("reaction {j} references unknown rate '{}'", r.rate))
            })?;
            let mut row = vec![0i64; n];
            for (name, delta) in &r.change {
                let &i = index.get(name.as_str()).ok_or_else(|| {
                    SimError::InvalidModel(format!("reaction {j} changes unknown species '{name}'"))
                })?;
                row[i] = *delta;
            }
            let mut orders = Vec::new();
            for (name, order) in &r.reactants {
                let &i = index.get(name.as_str()).ok_or_else(|| {
                    SimError::InvalidModel(format!("reaction {j} consumes unknown species '{name}'"))
                })?;
                orders.push((i, *order));
            }
            state_change.push(row);
            terms.push((c, orders));
        }
        let rates = self.rates.iter().map(|(k, &v)| (k.clone(), v)).collect();
        ReactionSystem::new(
            self.species.clone(),
            state_change,
            Box::new(move |y: &[i64]| {
                terms
                    .iter()
                    .map(|(c, orders)| {
                        let mut w = *c;
                        for &(i, order) in orders {
                            // Binomial coefficient C(y_i, order): the
                            // number of distinct reactant tuples.
                            let yi = y[i];
                            let mut comb = 1.0;
                            for k in 0..order {
                                comb *= (yi - k as i64).max(0) as f64 / (k + 1) as f64;
                            }
                            w *= comb;
                        }
                        w
                    })
                    .collect()
            }),
            rates,
        )
    }
}
