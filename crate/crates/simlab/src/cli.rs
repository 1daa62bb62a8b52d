//! Command-line front end.
//!
//! `simlab` exposes the scenario registry plus direct access to the
//! samplers, estimators, chains, processes, reaction kinetics, and MCMC
//! studies. Every invocation takes one root seed; replications draw
//! from per-replication substreams, so outputs are byte-identical
//! across runs with the same arguments.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 model error
//! (structural invariant violated), 4 numerical diagnostic.

use crate::error::{Result, SimError};
use crate::markov::{
    classify, estimate_chain_event, generate_chain, stationary_distribution, ChainSpec,
    ProbabilityVector, TransitionMatrix,
};
use crate::mcmc::{
    log_gamma_pdf, log_inv_gamma_pdf, log_normal_pdf, mh_chain, ProposalKernel, TargetDensity,
};
use crate::montecarlo::{
    estimate_mean, estimate_tail_naive, importance_estimate, integrate_interval, EstimateReport,
};
use crate::processes::{
    euler_maruyama, gamblers_ruin, gamblers_ruin_exact, hitting_time_box, price_european_call,
    random_walk, random_walk_dd, wiener_path, DiffusionSpec, WalkSpec,
};
use crate::rng::{RandomStream, UniformSource};
use crate::samplers::{sample_binomial, sample_exponential, sample_standard_normal};
use crate::scenarios::{
    run_scenario, tail_importance_spec, weather_matrix, ScenarioOutcome, ScenarioRequest,
};
use crate::ssa::{
    decay, lotka_volterra, michaelis_menten, run_deterministic, run_ssa, run_tau_leap,
    sample_poisson, sir, Model, ModelSpecFile,
};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "simlab",
    version,
    about = "Seeded, reproducible stochastic simulation toolkit"
)]
pub struct Cli {
    /// Root seed; every replication draws from its own substream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the result artifact (table + metadata) to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Artifact format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Number of replications, where the command supports them.
    #[arg(long, global = true)]
    pub reps: Option<u64>,

    /// Suppress the stdout summary (artifacts are still written).
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a named scenario from the registry.
    Run {
        #[arg(long)]
        scenario: String,
        /// Sample size / path count override.
        #[arg(long)]
        n: Option<u64>,
        /// Confidence level for error bars.
        #[arg(long)]
        level: Option<f64>,
        /// Snakes-and-Ladders board JSON file.
        #[arg(long)]
        board: Option<PathBuf>,
    },
    /// Draw variates from a named distribution, one per output line.
    Sample {
        #[arg(long)]
        dist: String,
        /// Distribution parameters as comma-separated key=value pairs.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        /// Also emit an equal-width histogram with this many bins.
        #[arg(long, num_args = 0..=1, default_missing_value = "30")]
        hist: Option<usize>,
    },
    /// Replicated Monte Carlo integration for an estimator scenario.
    Integrate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Finite Markov chain analysis and simulation.
    Markov {
        #[command(subcommand)]
        command: MarkovCommand,
    },
    /// Random walks, Wiener paths, diffusions and derived estimates.
    Process {
        #[command(subcommand)]
        command: ProcessCommand,
    },
    /// Stochastic chemical kinetics.
    Ssa {
        #[command(subcommand)]
        command: SsaCommand,
    },
    /// Markov chain Monte Carlo studies.
    Mcmc {
        #[command(subcommand)]
        command: McmcCommand,
    },
}

/// `--chain` is shared by every chain subcommand; without it the
/// built-in weather chain is used.
#[derive(Debug, Args)]
pub struct ChainArg {
    /// Chain JSON file: { "labels": [...], "P": [[...]], "pi0": [...] }.
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MarkovCommand {
    /// Stationary distribution of an irreducible chain; reducible
    /// chains get their classification and a refusal.
    Stationary {
        #[command(flatten)]
        chain: ChainArg,
    },
    /// Communicating classes, periods, and ergodicity flags.
    Classify {
        #[command(flatten)]
        chain: ChainArg,
    },
    /// Sample one realization of the chain.
    Simulate {
        #[command(flatten)]
        chain: ChainArg,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Estimate the probability of a path event by simulation.
    Event {
        #[command(flatten)]
        chain: ChainArg,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        /// Either `ends:<label>` (X_horizon = label) or
        /// `visits:<label>` (some X_t = label); labels may be state
        /// indices.
        #[arg(long)]
        predicate: String,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProcessCommand {
    /// Simple random walk (dim 1) or uniform axis walk (dim ≥ 2).
    Walk {
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        x0: i64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Wiener process path on a uniform grid.
    Wiener {
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Geometric-Brownian-motion path by Euler–Maruyama.
    Diffusion {
        #[arg(long, default_value_t = 0.05)]
        mu: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 100.0)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Gambler's ruin probability with the exact formula as reference.
    Ruin {
        #[arg(long, default_value_t = 30)]
        k: i64,
        #[arg(long, default_value_t = 100)]
        t: i64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Mean exit time of a Wiener process from a centered box.
    Hitting {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.005)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// European call price by simulated GBM under the risk-neutral
    /// measure, with the Black–Scholes closed form as reference.
    Option {
        #[arg(long, default_value_t = 102.0)]
        s0: f64,
        #[arg(long, default_value_t = 100.0)]
        strike: f64,
        #[arg(long, default_value_t = 0.04)]
        r: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        tfinal: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
}

/// Model selection shared by the kinetics subcommands: a built-in name
/// (decay, sir, michaelis_menten, lotka_volterra) or a JSON model file.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    model: String,
    /// Rate-constant overrides as comma-separated key=value pairs.
    #[arg(long, default_value = "")]
    params: String,
    /// Initial copy numbers as comma-separated species=count pairs.
    #[arg(long, default_value = "")]
    init: String,
    #[arg(long)]
    tfinal: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SsaCommand {
    /// Exact (Gillespie direct-method) trajectories; with `--reps`,
    /// the ensemble mean on a uniform grid.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        /// Resampling grid step for trajectory output.
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Approximate trajectories by Poisson tau-leaping.
    TauLeap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Deterministic mean-field solution by fixed-step RK4.
    Ode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum McmcCommand {
    /// Sample a posterior described by a study configuration file.
    Run {
        /// Study JSON: likelihood, data, priors, proposal covariance,
        /// chain length, burn-in, thinning.
        #[arg(long)]
        study: PathBuf,
        /// Write the per-coordinate summary as JSON to this path.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------

/// One named table of numbers.
#[derive(Debug)]
struct ArtifactTable {
    name: String,
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Everything one invocation produces: reproducibility metadata, named
/// summary numbers, and one or more tables.
#[derive(Debug)]
struct Artifact {
    command: String,
    meta: Vec<(String, String)>,
    summary: Vec<(String, f64)>,
    tables: Vec<ArtifactTable>,
}

impl Artifact {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            meta: vec![
                ("command".into(), command.into()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
                ("seed".into(), seed.to_string()),
            ],
            summary: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    fn note(mut self, key: &str, value: f64) -> Self {
        self.summary.push((key.to_string(), value));
        self
    }

    fn table(mut self, name: &str, headers: &[&str], rows: Vec<Vec<f64>>) -> Self {
        self.tables.push(ArtifactTable {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        });
        self
    }

    fn from_outcome(out: &ScenarioOutcome) -> Self {
        let mut a = Artifact::new("run", out.seed)
            .meta("scenario", &out.scenario)
            .meta("n", out.n);
        for (k, v) in &out.parameters {
            a = a.meta(&format!("param:{k}"), v);
        }
        a = a
            .note("estimate", out.estimate)
            .note("half_width", out.half_width);
        for (k, v) in &out.summary {
            a = a.note(k, *v);
        }
        a.table(
            "results",
            &out.table.headers.iter().map(String::as_str).collect::<Vec<_>>(),
            out.table.rows.clone(),
        )
    }

    /// RFC-4180 CSV: `#`-prefixed `key,value` metadata rows, then each
    /// table (name row, header row, data rows) separated by blank lines.
    fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            s.push_str(&format!("# {},{}\r\n", csv_field(k), csv_field(v)));
        }
        for (k, v) in &self.summary {
            s.push_str(&format!("# {},{v}\r\n", csv_field(k)));
        }
        for table in &self.tables {
            s.push_str("\r\n");
            s.push_str(&format!("# table,{}\r\n", csv_field(&table.name)));
            s.push_str(
                &table
                    .headers
                    .iter()
                    .map(|h| csv_field(h))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            s.push_str("\r\n");
            for row in &table.rows {
                s.push_str(
                    &row.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                );
                s.push_str("\r\n");
            }
        }
        s
    }

    fn to_json(&self) -> String {
        let meta: BTreeMap<&str, &str> = self
            .meta
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let summary: BTreeMap<&str, f64> =
            self.summary.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let tables: BTreeMap<&str, serde_json::Value> = self
            .tables
            .iter()
            .map(|t| {
                (
                    t.name.as_str(),
                    serde_json::json!({ "headers": t.headers, "rows": t.rows }),
                )
            })
            .collect();
        let doc = serde_json::json!({
            "meta": meta,
            "summary": summary,
            "tables": tables,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("artifact serializes");
        text.push('\n');
        text
    }

    fn write(&self, path: &Path, format: Format) -> Result<()> {
        let body = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        };
        std::fs::write(path, body).map_err(|e| {
            SimError::InvalidParameter(format!("cannot write {}: {e}", path.display()))
        })
    }

    fn print_summary(&self) {
        let mut line = format!("{}:", self.command);
        for (k, v) in self.meta.iter().skip(3) {
            line.push_str(&format!(" {k}={v}"));
        }
        for (k, v) in &self.summary {
            line.push_str(&format!(" {k}={v}"));
        }
        line.push_str(&format!(" seed={}", self.meta[2].1));
        println!("{line}");
    }
}

/// RFC-4180 quoting: fields containing commas, quotes or line breaks
/// are wrapped in double quotes with embedded quotes doubled.
fn csv_field(field: &str) -> String {
    if field.contains(['"', ',', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

// ---------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------

/// Parse arguments, dispatch, and return the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version and 2 for usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(artifact) => {
            if let Some(path) = &cli.out {
                if let Err(e) = artifact.write(path, cli.format) {
                    eprintln!("error: {e}");
                    return 2;
                }
            }
            if !cli.quiet {
                artifact.print_summary();
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &SimError) -> i32 {
    match e {
        SimError::InvalidParameter(_) => 2,
        SimError::InvalidModel(_) => 3,
        SimError::NoConvergence(_, _) | SimError::Numerical(_) => 4,
    }
}

fn dispatch(cli: &Cli) -> Result<Artifact> {
    match &cli.command {
        Command::Run { scenario, n, level, board } => {
            let board = match board {
                Some(path) => Some(read_file(path)?),
                None => None,
            };
            let outcome = run_scenario(&ScenarioRequest {
                name: scenario.clone(),
                seed: cli.seed,
                n: *n,
                reps: cli.reps,
                level: *level,
                board,
            })?;
            Ok(Artifact::from_outcome(&outcome))
        }
        Command::Sample { dist, params, n, hist } => {
            sample_command(cli.seed, dist, params, *n, *hist)
        }
        Command::Integrate { scenario, n, level } => {
            integrate_command(cli.seed, scenario, *n, cli.reps.unwrap_or(10), *level)
        }
        Command::Markov { command } => markov_command(cli.seed, command),
        Command::Process { command } => process_command(cli.seed, command),
        Command::Ssa { command } => ssa_command(cli.seed, cli.reps.unwrap_or(1), command),
        Command::Mcmc { command } => mcmc_command(cli.seed, command),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        SimError::InvalidParameter(format!("cannot read {}: {e}", path.display()))
    })
}

/// Parse `k1=v1,k2=v2` into an ordered map.
fn parse_kv(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            SimError::InvalidParameter(format!("expected key=value, got '{part}'"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            SimError::InvalidParameter(format!("'{}' is not a number in '{part}'", value.trim()))
        })?;
        map.insert(key.trim().to_string(), value);
    }
    Ok(map)
}

fn kv_get(map: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    map.get(key).copied().unwrap_or(default)
}

// ---------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------

fn sample_command(
    seed: u64,
    dist: &str,
    params: &str,
    n: u64,
    hist: Option<usize>,
) -> Result<Artifact> {
    if n == 0 {
        return Err(SimError::InvalidParameter("sample needs n >= 1".into()));
    }
    let p = parse_kv(params)?;
    let mut stream = RandomStream::new(seed);
    let mut draw: Box<dyn FnMut(&mut dyn UniformSource) -> Result<f64>> = match dist {
        "uniform" => Box::new(|s| Ok(s.next_uniform())),
        "exponential" => {
            let lambda = kv_get(&p, "lambda", 1.0);
            Box::new(move |s| sample_exponential(lambda, s))
        }
        "normal" => {
            let (mu, sigma) = (kv_get(&p, "mu", 0.0), kv_get(&p, "sigma", 1.0));
            if !(sigma > 0.0) {
                return Err(SimError::InvalidParameter(format!(
                    "normal needs sigma > 0, got {sigma}"
                )));
            }
            Box::new(move |s| Ok(mu + sigma * sample_standard_normal(s)))
        }
        "bernoulli" => {
            let prob = kv_get(&p, "p", 0.5);
            Box::new(move |s| crate::samplers::sample_bernoulli(prob, s).map(f64::from))
        }
        "binomial" => {
            let (trials, prob) = (kv_get(&p, "n", 10.0) as u64, kv_get(&p, "p", 0.5));
            Box::new(move |s| sample_binomial(trials, prob, s).map(|k| k as f64))
        }
        "poisson" => {
            let lambda = kv_get(&p, "lambda", 1.0);
            Box::new(move |s| sample_poisson(lambda, s).map(|k| k as f64))
        }
        other => {
            return Err(SimError::InvalidParameter(format!(
                "unknown distribution '{other}'; known: uniform, exponential, normal, \
                 bernoulli, binomial, poisson"
            )))
        }
    };
    let mut values = Vec::with_capacity(n as usize);
    for _ in 0..n {
        values.push(draw(&mut stream)?);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut artifact = Artifact::new("sample", seed)
        .meta("dist", dist)
        .meta("n", n);
    for (k, v) in &p {
        artifact = artifact.meta(&format!("param:{k}"), v);
    }
    artifact = artifact
        .note("mean", mean)
        .table("samples", &["value"], values.iter().map(|&v| vec![v]).collect());
    if let Some(bins) = hist {
        artifact = artifact.table(
            "histogram",
            &["bin_left", "bin_right", "count"],
            histogram(&values, bins)?,
        );
    }
    Ok(artifact)
}

/// Equal-width bins over [min, max]; the final bin is right-closed.
fn histogram(values: &[f64], bins: usize) -> Result<Vec<Vec<f64>>> {
    if bins == 0 {
        return Err(SimError::InvalidParameter("histogram needs >= 1 bin".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            vec![lo + k as f64 * width, lo + (k + 1) as f64 * width, c as f64]
        })
        .collect())
}

// ---------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------

fn integrate_command(
    seed: u64,
    scenario: &str,
    n: u64,
    reps: u64,
    level: f64,
) -> Result<Artifact> {
    if reps == 0 {
        return Err(SimError::InvalidParameter("integrate needs reps >= 1".into()));
    }
    let root = RandomStream::new(seed);
    let run_one = |s: &mut dyn UniformSource| -> Result<EstimateReport> {
        match scenario {
            "mc_sin" => integrate_interval(f64::sin, 0.0, 1.0, n, level, s),
            "mc_pi" => estimate_mean(
                |x: f64| 4.0 * (1.0 - x * x).sqrt(),
                |s: &mut dyn UniformSource| s.next_uniform(),
                n,
                level,
                s,
            ),
            "mc_expquad" => estimate_mean(
                |x: f64| 2.0 * (x * x - x),
                |s: &mut dyn UniformSource| sample_exponential(0.5, s).unwrap(),
                n,
                level,
                s,
            ),
            "normal_cdf_naive" => estimate_tail_naive(0.0, n, level, s),
            "normal_cdf_importance" => importance_estimate(&tail_importance_spec(), n, level, s),
            other => Err(SimError::InvalidParameter(format!(
                "unknown integrand '{other}'; known: mc_sin, mc_pi, mc_expquad, \
                 normal_cdf_naive, normal_cdf_importance"
            ))),
        }
    };
    let mut rows = Vec::with_capacity(reps as usize);
    let mut estimates = Vec::with_capacity(reps as usize);
    for r in 0..reps {
        let mut s = root.spawn_substream(r);
        let report = run_one(&mut s)?;
        estimates.push(report.mean);
        rows.push(vec![r as f64, report.mean, report.sample_std, report.half_width]);
    }
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let (est_std, pooled) = if reps >= 2 {
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
            / (reps - 1) as f64;
        let report = EstimateReport::new(mean, var.sqrt(), reps, level)?;
        (var.sqrt(), report.half_width)
    } else {
        (0.0, rows[0][3])
    };
    Ok(Artifact::new("integrate", seed)
        .meta("scenario", scenario)
        .meta("n", n)
        .meta("reps", reps)
        .meta("level", level)
        .note("mean", mean)
        .note("s_n", est_std)
        .note("half_width", pooled)
        .table(
            "replications",
            &["replication", "estimate", "sample_std", "half_width"],
            rows,
        ))
}

// ---------------------------------------------------------------------
// markov
// ---------------------------------------------------------------------

fn load_chain(arg: &ChainArg) -> Result<(TransitionMatrix, ProbabilityVector, String)> {
    match &arg.chain {
        Some(path) => {
            let (tm, pi0) = ChainSpec::from_json(&read_file(path)?)?.build()?;
            let dim = tm.dim();
            Ok((
                tm,
                match pi0 {
                    Some(v) => v,
                    None => ProbabilityVector::point_mass(dim, 0)?,
                },
                path.display().to_string(),
            ))
        }
        None => {
            let tm = weather_matrix();
            let pi0 = ProbabilityVector::point_mass(3, 0)?;
            Ok((tm, pi0, "builtin:weather".into()))
        }
    }
}

fn markov_command(seed: u64, command: &MarkovCommand) -> Result<Artifact> {
    match command {
        MarkovCommand::Stationary { chain } => {
            let (tm, _, source) = load_chain(chain)?;
            let info = classify(&tm);
            if !info.irreducible {
                return Err(SimError::InvalidModel(format!(
                    "chain is reducible ({} communicating classes: {:?}); \
                     no unique stationary distribution",
                    info.classes.len(),
                    info.classes
                )));
            }
            let pi = stationary_distribution(&tm, 1e-12, 1_000_000)?;
            let rows = pi
                .entries()
                .iter()
                .enumerate()
                .map(|(i, &p)| vec![i as f64, p])
                .collect();
            Ok(Artifact::new("markov stationary", seed)
                .meta("chain", &source)
                .meta("labels", tm.labels().join("|"))
                .table("stationary", &["state", "probability"], rows))
        }
        MarkovCommand::Classify { chain } => {
            let (tm, _, source) = load_chain(chain)?;
            let info = classify(&tm);
            let mut rows = Vec::new();
            for (class_id, class) in info.classes.iter().enumerate() {
                for &state in class {
                    rows.push(vec![
                        state as f64,
                        class_id as f64,
                        info.periods[class_id] as f64,
                    ]);
                }
            }
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
            Ok(Artifact::new("markov classify", seed)
                .meta("chain", &source)
                .meta("labels", tm.labels().join("|"))
                .note("classes", info.classes.len() as f64)
                .note("irreducible", f64::from(info.irreducible))
                .note("aperiodic", f64::from(info.aperiodic))
                .note("ergodic", f64::from(info.ergodic))
                .table("states", &["state", "class", "period"], rows))
        }
        MarkovCommand::Simulate { chain, steps } => {
            let (tm, pi0, source) = load_chain(chain)?;
            let mut stream = RandomStream::new(seed);
            let path = generate_chain(&pi0, &tm, *steps, &mut stream)?;
            let rows = path
                .iter()
                .enumerate()
                .map(|(t, &x)| vec![t as f64, x as f64])
                .collect();
            Ok(Artifact::new("markov simulate", seed)
                .meta("chain", &source)
                .meta("labels", tm.labels().join("|"))
                .meta("steps", steps)
                .table("path", &["step", "state"], rows))
        }
        MarkovCommand::Event { chain, horizon, predicate, n } => {
            let (tm, pi0, source) = load_chain(chain)?;
            let (kind, label) = predicate.split_once(':').ok_or_else(|| {
                SimError::InvalidParameter(format!(
                    "predicate must be ends:<label> or visits:<label>, got '{predicate}'"
                ))
            })?;
            let target = match tm.label_index(label) {
                Some(i) => i,
                None => label.parse::<usize>().map_err(|_| {
                    SimError::InvalidParameter(format!(
                        "'{label}' is neither a state label nor an index"
                    ))
                })?,
            };
            if target >= tm.dim() {
                return Err(SimError::InvalidParameter(format!(
                    "state index {target} out of range for a {}-state chain",
                    tm.dim()
                )));
            }
            let mut stream = RandomStream::new(seed);
            let report = match kind {
                "ends" => estimate_chain_event(
                    &pi0,
                    &tm,
                    *horizon,
                    |path| *path.last().unwrap() == target,
                    *n,
                    0.95,
                    &mut stream,
                ),
                "visits" => estimate_chain_event(
                    &pi0,
                    &tm,
                    *horizon,
                    |path| path.contains(&target),
                    *n,
                    0.95,
                    &mut stream,
                ),
                other => Err(SimError::InvalidParameter(format!(
                    "unknown predicate kind '{other}'; use ends: or visits:"
                ))),
            }?;
            Ok(Artifact::new("markov event", seed)
                .meta("chain", &source)
                .meta("predicate", predicate)
                .meta("horizon", horizon)
                .meta("n", n)
                .note("estimate", report.mean)
                .note("half_width", report.half_width)
                .table(
                    "estimate",
                    &["n", "estimate", "half_width"],
                    vec![vec![*n as f64, report.mean, report.half_width]],
                ))
        }
    }
}

// ---------------------------------------------------------------------
// process
// ---------------------------------------------------------------------

fn trajectory_rows(traj: &crate::processes::Trajectory) -> Vec<Vec<f64>> {
    traj.times()
        .iter()
        .zip(traj.states())
        .map(|(&t, s)| {
            let mut row = vec![t];
            row.extend_from_slice(s);
            row
        })
        .collect()
}

fn state_headers(dim: usize) -> Vec<String> {
    let mut headers = vec!["time".to_string()];
    for i in 1..=dim {
        headers.push(format!("state{i}"));
    }
    headers
}

fn process_command(seed: u64, command: &ProcessCommand) -> Result<Artifact> {
    let mut stream = RandomStream::new(seed);
    match command {
        ProcessCommand::Walk { p, steps, x0, dim } => {
            let traj = if *dim == 1 {
                random_walk(&WalkSpec { p: *p, x0: *x0, steps: *steps }, &mut stream)?
            } else {
                let mut directions = Vec::new();
                for axis in 0..*dim {
                    for sign in [1.0, -1.0] {
                        let mut d = vec![0.0; *dim];
                        d[axis] = sign;
                        directions.push(d);
                    }
                }
                let probs = vec![1.0 / (2.0 * *dim as f64); 2 * dim];
                random_walk_dd(&directions, &probs, &vec![*x0 as f64; *dim], *steps, &mut stream)?
            };
            let headers = state_headers(traj.dim());
            Ok(Artifact::new("process walk", seed)
                .meta("p", p)
                .meta("steps", steps)
                .meta("dim", dim)
                .table(
                    "trajectory",
                    &headers.iter().map(String::as_str).collect::<Vec<_>>(),
                    trajectory_rows(&traj),
                ))
        }
        ProcessCommand::Wiener { tfinal, dt, dim } => {
            if !(*dt > 0.0) || !(*tfinal > 0.0) {
                return Err(SimError::InvalidParameter(
                    "wiener needs tfinal > 0 and dt > 0".into(),
                ));
            }
            let steps = (tfinal / dt).round() as usize;
            let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
            let traj = wiener_path(&times, *dim, &mut stream)?;
            let headers = state_headers(*dim);
            Ok(Artifact::new("process wiener", seed)
                .meta("tfinal", tfinal)
                .meta("dt", dt)
                .meta("dim", dim)
                .table(
                    "trajectory",
                    &headers.iter().map(String::as_str).collect::<Vec<_>>(),
                    trajectory_rows(&traj),
                ))
        }
        ProcessCommand::Diffusion { mu, sigma, x0, tfinal, dt } => {
            let (mu, sigma) = (*mu, *sigma);
            let spec = DiffusionSpec {
                drift: Box::new(move |_, x| mu * x),
                diffusion: Some(Box::new(move |_, x| sigma * x)),
                t0: 0.0,
                t_end: *tfinal,
                dt: *dt,
                x0: *x0,
            };
            let traj = euler_maruyama(&spec, &mut stream)?;
            Ok(Artifact::new("process diffusion", seed)
                .meta("mu", mu)
                .meta("sigma", sigma)
                .meta("x0", x0)
                .meta("tfinal", tfinal)
                .meta("dt", dt)
                .note("terminal", traj.last_state().unwrap()[0])
                .table("trajectory", &["time", "state1"], trajectory_rows(&traj)))
        }
        ProcessCommand::Ruin { k, t, p, n, level } => {
            let report = gamblers_ruin(*k, *t, *p, *n, *level, &mut stream)?;
            let exact = gamblers_ruin_exact(*k, *t, *p);
            Ok(Artifact::new("process ruin", seed)
                .meta("k", k)
                .meta("t", t)
                .meta("p", p)
                .meta("n", n)
                .note("estimate", report.mean)
                .note("half_width", report.half_width)
                .note("exact", exact)
                .table(
                    "estimate",
                    &["n", "estimate", "half_width", "exact"],
                    vec![vec![*n as f64, report.mean, report.half_width, exact]],
                ))
        }
        ProcessCommand::Hitting { dim, half_width, dt, n, level } => {
            let report = hitting_time_box(*dim, *half_width, *dt, *n, *level, &mut stream)?;
            Ok(Artifact::new("process hitting", seed)
                .meta("dim", dim)
                .meta("half_width", half_width)
                .meta("dt", dt)
                .meta("n", n)
                .note("estimate", report.mean)
                .note("half_width", report.half_width)
                .table(
                    "estimate",
                    &["n", "estimate", "half_width"],
                    vec![vec![*n as f64, report.mean, report.half_width]],
                ))
        }
        ProcessCommand::Option { s0, strike, r, sigma, tfinal, dt, n, level } => {
            let report =
                price_european_call(*s0, *strike, *r, *sigma, *tfinal, *dt, *n, *level, &mut stream)?;
            let bs = crate::processes::black_scholes_call(*s0, *strike, *r, *sigma, *tfinal);
            Ok(Artifact::new("process option", seed)
                .meta("s0", s0)
                .meta("strike", strike)
                .meta("r", r)
                .meta("sigma", sigma)
                .meta("tfinal", tfinal)
                .meta("dt", dt)
                .meta("n", n)
                .note("estimate", report.mean)
                .note("half_width", report.half_width)
                .note("black_scholes", bs)
                .table(
                    "estimate",
                    &["n", "estimate", "half_width", "black_scholes"],
                    vec![vec![*n as f64, report.mean, report.half_width, bs]],
                ))
        }
    }
}

// ---------------------------------------------------------------------
// ssa
// ---------------------------------------------------------------------

struct ResolvedModel {
    model: Model,
    initial: Vec<i64>,
    t_final: f64,
    name: String,
    has_ode: bool,
}

fn resolve_model(args: &ModelArgs) -> Result<ResolvedModel> {
    let params = parse_kv(&args.params)?;
    let init = parse_kv(&args.init)?;
    let get = |key: &str, default: f64| kv_get(&params, key, default);
    let (model, default_init, default_tfinal, has_ode): (Model, Vec<(&str, i64)>, f64, bool) =
        match args.model.as_str() {
            "decay" => (decay(get("lambda", 0.5))?, vec![("y", 1000)], 4.0, true),
            "sir" => (
                sir(get("mu", 1e-4), get("beta", 0.25), get("gamma", 0.05))?,
                vec![("S", 198), ("I", 2), ("R", 0)],
                120.0,
                true,
            ),
            "michaelis_menten" => (
                michaelis_menten(get("c1", 0.002), get("c2", 0.1), get("c3", 0.75))?,
                vec![("S", 312), ("E", 125), ("C", 0), ("P", 0)],
                10.0,
                true,
            ),
            "lotka_volterra" => (
                lotka_volterra(get("alpha", 1.0), get("beta", 0.005), get("gamma", 0.6))?,
                vec![("R", 100), ("F", 50)],
                30.0,
                true,
            ),
            other => {
                let path = Path::new(other);
                if !path.exists() {
                    return Err(SimError::InvalidParameter(format!(
                        "unknown model '{other}'; known: decay, sir, michaelis_menten, \
                         lotka_volterra, or a path to a model JSON file"
                    )));
                }
                let system = ModelSpecFile::from_json(&read_file(path)?)?.build()?;
                let names: Vec<(&str, i64)> =
                    Vec::new();
                let model = Model {
                    system,
                    ode: Box::new(|_, _| Vec::new()),
                };
                (model, names, 10.0, false)
            }
        };
    let mut initial: Vec<i64> = Vec::with_capacity(model.system.n_species());
    for (idx, species) in model.system.species().to_vec().iter().enumerate() {
        let fallback = default_init
            .iter()
            .find(|(name, _)| name == species)
            .map(|&(_, v)| v);
        let value = match init.get(species) {
            Some(&v) => v,
            None => fallback.ok_or_else(|| {
                SimError::InvalidParameter(format!(
                    "missing initial count for species '{species}' (index {idx}); \
                     pass --init {species}=<count>"
                ))
            })?
                as f64,
        };
        if value < 0.0 || value.fract() != 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "initial count for '{species}' must be a non-negative integer, got {value}"
            )));
        }
        initial.push(value as i64);
    }
    Ok(ResolvedModel {
        model,
        initial,
        t_final: args.tfinal.unwrap_or(default_tfinal),
        name: args.model.clone(),
        has_ode,
    })
}

/// Ensemble mean of `reps` trajectories on a uniform grid; single runs
/// keep raw event times unless a grid step is requested.
fn ssa_ensemble(
    resolved: &ResolvedModel,
    seed: u64,
    reps: u64,
    grid_step: Option<f64>,
    mut simulate: impl FnMut(&mut RandomStream) -> Result<crate::ssa::JumpTrajectory>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let species = resolved.model.system.species();
    let root = RandomStream::new(seed);
    let mut headers = vec!["time".to_string()];
    if reps <= 1 && grid_step.is_none() {
        headers.extend(species.iter().cloned());
        let mut s = root.spawn_substream(0);
        let traj = simulate(&mut s)?;
        let rows = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, st)| {
                let mut row = vec![t];
                row.extend(st.iter().map(|&x| x as f64));
                row
            })
            .collect();
        return Ok((headers, rows));
    }
    let step = grid_step.unwrap_or(resolved.t_final / 200.0);
    if !(step > 0.0) {
        return Err(SimError::InvalidParameter("grid step must be positive".into()));
    }
    let points = (resolved.t_final / step).round() as usize;
    let grid: Vec<f64> = (0..=points).map(|k| k as f64 * step).collect();
    if reps <= 1 {
        headers.extend(species.iter().cloned());
    } else {
        headers.extend(species.iter().map(|s| format!("mean_{s}")));
    }
    let mut acc = vec![vec![0.0f64; species.len()]; grid.len()];
    for r in 0..reps.max(1) {
        let mut s = root.spawn_substream(r);
        let traj = simulate(&mut s)?;
        for (row, st) in acc.iter_mut().zip(traj.resample(&grid)) {
            for (a, x) in row.iter_mut().zip(st) {
                *a += x;
            }
        }
    }
    let scale = 1.0 / reps.max(1) as f64;
    let rows = grid
        .iter()
        .zip(&acc)
        .map(|(&t, row)| {
            let mut out = vec![t];
            out.extend(row.iter().map(|&x| x * scale));
            out
        })
        .collect();
    Ok((headers, rows))
}

fn ssa_command(seed: u64, reps: u64, command: &SsaCommand) -> Result<Artifact> {
    match command {
        SsaCommand::Run { model, grid } => {
            let resolved = resolve_model(model)?;
            let (headers, rows) = ssa_ensemble(&resolved, seed, reps, *grid, |s| {
                run_ssa(&resolved.model.system, &resolved.initial, resolved.t_final, s)
            })?;
            Ok(Artifact::new("ssa run", seed)
                .meta("model", &resolved.name)
                .meta("tfinal", resolved.t_final)
                .meta("reps", reps)
                .table(
                    "trajectory",
                    &headers.iter().map(String::as_str).collect::<Vec<_>>(),
                    rows,
                ))
        }
        SsaCommand::TauLeap { model, tau, grid } => {
            let resolved = resolve_model(model)?;
            let mut total_clamped = 0u64;
            let (headers, rows) = ssa_ensemble(&resolved, seed, reps, *grid, |s| {
                let (traj, clamped) = run_tau_leap(
                    &resolved.model.system,
                    &resolved.initial,
                    *tau,
                    resolved.t_final,
                    s,
                )?;
                total_clamped += clamped;
                Ok(traj)
            })?;
            Ok(Artifact::new("ssa tau-leap", seed)
                .meta("model", &resolved.name)
                .meta("tau", tau)
                .meta("tfinal", resolved.t_final)
                .meta("reps", reps)
                .note("clamped_updates", total_clamped as f64)
                .table(
                    "trajectory",
                    &headers.iter().map(String::as_str).collect::<Vec<_>>(),
                    rows,
                ))
        }
        SsaCommand::Ode { model, dt } => {
            let resolved = resolve_model(model)?;
            if !resolved.has_ode {
                return Err(SimError::InvalidModel(format!(
                    "model '{}' has no mean-field ODE; 'ssa ode' supports the built-in \
                     models only",
                    resolved.name
                )));
            }
            let initial: Vec<f64> = resolved.initial.iter().map(|&x| x as f64).collect();
            let traj =
                run_deterministic(&resolved.model.ode, &initial, 0.0, resolved.t_final, *dt)?;
            let mut headers = vec!["time".to_string()];
            headers.extend(resolved.model.system.species().iter().cloned());
            Ok(Artifact::new("ssa ode", seed)
                .meta("model", &resolved.name)
                .meta("dt", dt)
                .meta("tfinal", resolved.t_final)
                .table(
                    "trajectory",
                    &headers.iter().map(String::as_str).collect::<Vec<_>>(),
                    trajectory_rows(&traj),
                ))
        }
    }
}

// ---------------------------------------------------------------------
// mcmc
// ---------------------------------------------------------------------

/// On-disk posterior study description.
#[derive(Debug, Deserialize)]
struct StudySpec {
    likelihood: String,
    #[serde(default)]
    data: Vec<f64>,
    #[serde(default)]
    data_path: Option<String>,
    priors: Vec<PriorSpec>,
    proposal_covariance: Vec<Vec<f64>>,
    theta0: Vec<f64>,
    n: usize,
    burn_in: usize,
    #[serde(default = "default_thin")]
    thin: usize,
    #[serde(default = "default_level")]
    level: f64,
}

fn default_thin() -> usize {
    1
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Deserialize)]
struct PriorSpec {
    name: String,
    #[serde(default)]
    params: Vec<f64>,
}

impl PriorSpec {
    fn log_pdf(&self, x: f64) -> Result<f64> {
        let need = |k: usize| -> Result<&[f64]> {
            if self.params.len() == k {
                Ok(&self.params)
            } else {
                Err(SimError::InvalidModel(format!(
                    "prior '{}' needs {k} parameters, got {}",
                    self.name,
                    self.params.len()
                )))
            }
        };
        match self.name.as_str() {
            "flat" => {
                need(0)?;
                Ok(0.0)
            }
            "normal" => {
                let p = need(2)?;
                Ok(log_normal_pdf(x, p[0], p[1]))
            }
            "gamma" => {
                let p = need(2)?;
                Ok(log_gamma_pdf(x, p[0], p[1]))
            }
            "inv_gamma" => {
                let p = need(2)?;
                Ok(log_inv_gamma_pdf(x, p[0], p[1]))
            }
            other => Err(SimError::InvalidModel(format!(
                "unknown prior '{other}'; known: flat, normal, gamma, inv_gamma"
            ))),
        }
    }
}

impl StudySpec {
    fn load(path: &Path) -> Result<Self> {
        let spec: StudySpec = serde_json::from_str(&read_file(path)?)
            .map_err(|e| SimError::InvalidModel(format!("study parse error: {e}")))?;
        Ok(spec)
    }

    fn data(&self, study_dir: &Path) -> Result<Vec<f64>> {
        if let Some(rel) = &self.data_path {
            let path = study_dir.join(rel);
            let text = read_file(&path)?;
            let mut values = Vec::new();
            for token in text.split([',', '\n', '\r', ' ']).filter(|t| !t.is_empty()) {
                values.push(token.parse::<f64>().map_err(|_| {
                    SimError::InvalidModel(format!(
                        "data file {} contains non-numeric token '{token}'",
                        path.display()
                    ))
                })?);
            }
            Ok(values)
        } else {
            Ok(self.data.clone())
        }
    }

    fn log_likelihood(&self, data: Vec<f64>) -> Result<Box<dyn Fn(&[f64]) -> f64>> {
        match self.likelihood.as_str() {
            // θ = (μ, σ)
            "normal" => Ok(Box::new(move |theta: &[f64]| {
                let (mu, sigma) = (theta[0], theta[1]);
                if sigma <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                data.iter().map(|&x| log_normal_pdf(x, mu, sigma)).sum()
            })),
            // θ = (λ)
            "exponential" => Ok(Box::new(move |theta: &[f64]| {
                let lambda = theta[0];
                if lambda <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                data.iter().map(|&x| lambda.ln() - lambda * x).sum()
            })),
            other => Err(SimError::InvalidModel(format!(
                "unknown likelihood '{other}'; known: normal, exponential"
            ))),
        }
    }
}

fn mcmc_command(seed: u64, command: &McmcCommand) -> Result<Artifact> {
    let McmcCommand::Run { study, summary } = command;
    let spec = StudySpec::load(study)?;
    let dim = spec.theta0.len();
    if spec.priors.len() != dim {
        return Err(SimError::InvalidModel(format!(
            "{} priors for a {dim}-dimensional parameter",
            spec.priors.len()
        )));
    }
    if spec.thin == 0 {
        return Err(SimError::InvalidModel("thinning stride must be >= 1".into()));
    }
    for prior in &spec.priors {
        prior.log_pdf(1.0)?; // validate names and arities up front
    }
    let study_dir = study.parent().unwrap_or(Path::new(".")).to_path_buf();
    let data = spec.data(&study_dir)?;
    let log_likelihood = spec.log_likelihood(data.clone())?;
    let priors: Vec<PriorSpec> = spec
        .priors
        .iter()
        .map(|p| PriorSpec { name: p.name.clone(), params: p.params.clone() })
        .collect();
    let target = TargetDensity::new(dim, move |theta: &[f64]| {
        let mut log_post = log_likelihood(theta);
        for (prior, &x) in priors.iter().zip(theta) {
            log_post += prior.log_pdf(x).unwrap_or(f64::NEG_INFINITY);
        }
        log_post
    });
    let proposal = ProposalKernel::random_walk(&spec.proposal_covariance)?;
    let mut stream = RandomStream::new(seed);
    let run = mh_chain(&target, &proposal, &spec.theta0, spec.n, spec.burn_in, &mut stream)?;
    let reports = run.summary(spec.level)?;
    let kept: Vec<&Vec<f64>> = run.post_burn_in().iter().step_by(spec.thin).collect();

    let mut headers = vec!["draw".to_string()];
    for i in 1..=dim {
        headers.push(format!("theta{i}"));
    }
    let rows: Vec<Vec<f64>> = kept
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut row = vec![i as f64];
            row.extend_from_slice(theta);
            row
        })
        .collect();

    let mut artifact = Artifact::new("mcmc run", seed)
        .meta("study", study.display().to_string())
        .meta("likelihood", &spec.likelihood)
        .meta("n", spec.n)
        .meta("burn_in", spec.burn_in)
        .meta("thin", spec.thin)
        .meta("data_points", data.len())
        .note("acceptance_ratio", run.acceptance_ratio());
    for (i, r) in reports.iter().enumerate() {
        artifact = artifact
            .note(&format!("mean_theta{}", i + 1), r.mean)
            .note(&format!("std_theta{}", i + 1), r.sample_std);
    }
    artifact = artifact.table(
        "samples",
        &headers.iter().map(String::as_str).collect::<Vec<_>>(),
        rows,
    );

    if let Some(path) = summary {
        let per_coordinate: Vec<serde_json::Value> = reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                serde_json::json!({
                    "coordinate": i + 1,
                    "mean": r.mean,
                    "sample_std": r.sample_std,
                    "half_width": r.half_width,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "likelihood": spec.likelihood,
            "n": spec.n,
            "burn_in": spec.burn_in,
            "thin": spec.thin,
            "level": spec.level,
            "acceptance_ratio": run.acceptance_ratio(),
            "coordinates": per_coordinate,
        });
        let mut file = std::fs::File::create(path).map_err(|e| {
            SimError::InvalidParameter(format!("cannot write {}: {e}", path.display()))
        })?;
        let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        writeln!(file, "{text}").map_err(|e| {
            SimError::InvalidParameter(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    Ok(artifact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SCENARIOS;

    fn dispatch_args(args: &[&str]) -> Result<Artifact> {
        let cli = Cli::try_parse_from(args).expect("arguments parse");
        dispatch(&cli)
    }

    #[test]
    fn unknown_scenario_maps_to_config_exit_code() {
        let err = dispatch_args(&["simlab", "run", "--scenario", "nope"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("monty_hall"));
    }

    #[test]
    fn registry_names_all_resolve() {
        // Every registry entry must at least be routable; run the two
        // cheapest end to end.
        for name in SCENARIOS {
            assert!(
                !name.is_empty(),
                "registry entries are non-empty"
            );
        }
        for name in ["weather_chain", "decay_deterministic"] {
            let artifact = dispatch_args(&["simlab", "run", "--scenario", name]).unwrap();
            assert!(artifact.tables[0].rows.len() > 1);
        }
    }

    #[test]
    fn csv_field_quotes_per_rfc_4180() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("line\nbreak"), "\"line\nbreak\"");
    }

    #[test]
    fn sample_rejects_unknown_distribution_and_draws_known_ones() {
        let err =
            dispatch_args(&["simlab", "sample", "--dist", "zeta", "--n", "10"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        for dist in ["uniform", "exponential", "normal", "bernoulli", "binomial", "poisson"] {
            let artifact =
                dispatch_args(&["simlab", "sample", "--dist", dist, "--n", "50"]).unwrap();
            assert_eq!(artifact.tables[0].rows.len(), 50);
        }
    }

    #[test]
    fn sample_histogram_counts_every_draw() {
        let artifact = dispatch_args(&[
            "simlab", "sample", "--dist", "normal", "--n", "500", "--hist", "20",
        ])
        .unwrap();
        let hist = &artifact.tables[1];
        assert_eq!(hist.rows.len(), 20);
        let total: f64 = hist.rows.iter().map(|r| r[2]).sum();
        assert_eq!(total, 500.0);
        // Default bin count when --hist is given without a value.
        let artifact = dispatch_args(&[
            "simlab", "sample", "--dist", "uniform", "--n", "200", "--hist",
        ])
        .unwrap();
        assert_eq!(artifact.tables[1].rows.len(), 30);
    }

    #[test]
    fn integrate_reports_one_row_per_replication() {
        let artifact = dispatch_args(&[
            "simlab", "integrate", "--scenario", "mc_sin", "--n", "2000", "--reps", "5",
        ])
        .unwrap();
        assert_eq!(artifact.tables[0].rows.len(), 5);
        let mean = artifact.summary.iter().find(|(k, _)| k == "mean").unwrap().1;
        assert!((mean - (1.0 - 1.0f64.cos())).abs() < 0.02);
    }

    #[test]
    fn markov_stationary_refuses_reducible_chains() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        std::fs::write(
            &path,
            r#"{"labels": ["a", "b"], "P": [[1.0, 0.0], [0.0, 1.0]]}"#,
        )
        .unwrap();
        let err = dispatch_args(&[
            "simlab", "markov", "stationary", "--chain", path.to_str().unwrap(),
        ])
        .unwrap_err();
        assert_eq!(exit_code(&err), 3);
        assert!(err.to_string().contains("reducible"));
    }

    #[test]
    fn markov_event_predicates_match_exact_probabilities() {
        let artifact = dispatch_args(&[
            "simlab", "markov", "event", "--horizon", "5", "--predicate", "ends:rainy",
            "--n", "20000", "--seed", "11",
        ])
        .unwrap();
        let est = artifact.summary.iter().find(|(k, _)| k == "estimate").unwrap().1;
        let exact = crate::markov::n_step_matrix(&weather_matrix(), 5).entry(0, 2);
        assert!((est - exact).abs() < 0.02, "estimate {est} vs exact {exact}");
    }

    #[test]
    fn process_walk_trajectory_has_unit_increments() {
        let artifact =
            dispatch_args(&["simlab", "process", "walk", "--steps", "64", "--seed", "7"]).unwrap();
        let rows = &artifact.tables[0].rows;
        assert_eq!(rows.len(), 65);
        for pair in rows.windows(2) {
            assert_eq!((pair[1][1] - pair[0][1]).abs(), 1.0);
        }
    }

    #[test]
    fn ssa_run_single_and_ensemble_shapes() {
        let single = dispatch_args(&[
            "simlab", "ssa", "run", "--model", "decay", "--seed", "3",
        ])
        .unwrap();
        assert_eq!(single.tables[0].headers, vec!["time", "y"]);
        assert!(single.tables[0].rows.len() > 100);
        let ensemble = dispatch_args(&[
            "simlab", "ssa", "run", "--model", "decay", "--seed", "3", "--reps", "10",
            "--grid", "0.5",
        ])
        .unwrap();
        assert_eq!(ensemble.tables[0].headers, vec!["time", "mean_y"]);
        assert_eq!(ensemble.tables[0].rows.len(), 9);
    }

    #[test]
    fn ssa_ode_rejects_file_models() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(
            &path,
            r#"{
                "species": ["y"],
                "rates": {"c": 0.5},
                "reactions": [{"rate": "c", "reactants": {"y": 1}, "change": {"y": -1}}]
            }"#,
        )
        .unwrap();
        let err = dispatch_args(&[
            "simlab", "ssa", "ode", "--model", path.to_str().unwrap(), "--init", "y=100",
        ])
        .unwrap_err();
        assert_eq!(exit_code(&err), 3);
        // The same file works for the stochastic simulator.
        let artifact = dispatch_args(&[
            "simlab", "ssa", "run", "--model", path.to_str().unwrap(), "--init", "y=100",
        ])
        .unwrap();
        assert_eq!(artifact.tables[0].headers, vec!["time", "y"]);
    }

    #[test]
    fn mcmc_study_recovers_conjugate_posterior_mean() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.json");
        std::fs::write(
            &path,
            r#"{
                "likelihood": "exponential",
                "data": [5, 8, 12, 7, 9, 10, 3, 6, 8, 11],
                "priors": [{"name": "gamma", "params": [2.0, 1.0]}],
                "proposal_covariance": [[0.25]],
                "theta0": [0.2],
                "n": 20000,
                "burn_in": 2000,
                "thin": 10
            }"#,
        )
        .unwrap();
        let summary_path = dir.path().join("summary.json");
        let artifact = dispatch_args(&[
            "simlab", "mcmc", "run", "--study", path.to_str().unwrap(), "--summary",
            summary_path.to_str().unwrap(), "--seed", "5",
        ])
        .unwrap();
        let mean = artifact
            .summary
            .iter()
            .find(|(k, _)| k == "mean_theta1")
            .unwrap()
            .1;
        assert!((mean - 0.15).abs() < 0.01, "posterior mean {mean}");
        assert_eq!(artifact.tables[0].rows.len(), 1800);
        let text = std::fs::read_to_string(&summary_path).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["coordinates"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn artifacts_are_byte_identical_for_equal_seeds() {
        let run = |seed: &str| {
            dispatch_args(&[
                "simlab", "run", "--scenario", "gamblers_ruin", "--n", "2000", "--seed", seed,
            ])
            .unwrap()
        };
        let (a, b, c) = (run("1"), run("1"), run("2"));
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn csv_embeds_reproducibility_metadata() {
        let artifact = dispatch_args(&[
            "simlab", "run", "--scenario", "monty_hall", "--n", "5000", "--seed", "9",
        ])
        .unwrap();
        let csv = artifact.to_csv();
        assert!(csv.contains("# scenario,monty_hall"));
        assert!(csv.contains("# seed,9"));
        assert!(csv.contains("# version,"));
        assert!(csv.lines().all(|l| !l.ends_with('\r') || !l.is_empty()));
        let json = artifact.to_json();
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["meta"]["seed"], "9");
        assert_eq!(doc["meta"]["scenario"], "monty_hall");
    }
}
