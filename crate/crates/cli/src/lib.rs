//! Experiment harness: flat `key = value` configs, per-iteration CSV traces
//! and summary tables.
//!
//! Config keys:
//!
//! | key | values | default |
//! |---|---|---|
//! | `problem` | `procrustes`, `rayleigh-sphere`, `geodesic-distance` | required |
//! | `algo` | `atriv`, `dtriv`, `rgd`, `rgd-momentum`, `rgd-full-history` | required |
//! | `n` | integer ≥ 2 | 8 |
//! | `k` | integer ≥ 1 or `inf` | 1 |
//! | `opt` | `sgd`, `momentum`, `adagrad`, `rmsprop`, `adam` | `adam` (`sgd` for rgd variants) |
//! | `lr` | positive float | 0.01 |
//! | `iters` | integer | 1000 |
//! | `seed` | integer | 0 |
//! | `out` | CSV path | `results/<problem>-<algo>-k<k>-s<seed>.csv` |
//! | `beta1`, `beta2`, `eps`, `mu` | optimizer hyperparameters | 0.9, 0.99, 1e-8, 0.9 |
//! | `retraction` | `exp`, `cayley` (rgd only) | `exp` |

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use atriv_core::engine::{
    atriv_run, dtriv_run, rgd_momentum_full_history_run, rgd_momentum_transport_run, rgd_run, Period,
    Retraction, RunOptions, RunRecord,
};
use atriv_core::{build_problem, OptimizerRule, ProblemName, RngSeed};
use rayon::prelude::*;

pub const CSV_HEADER: &str = "iter_outer,iter_inner,f,grad_norm,step_dist,restarts";
pub const SUMMARY_HEADER: &str =
    "problem,n,algo,k,opt,lr,iters,seed,final_f,best_f,gap,best_gap,iters_to_gap_1e-6,restarts,wall_time_s";
/// Gap threshold of the `iters_to_gap_1e-6` summary column.
pub const SUMMARY_GAP_THRESHOLD: f64 = 1e-6;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: io::Error },
    Run(String),
}

impl CliError {
    /// Process exit status: 1 run failure, 2 I/O error, 3 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Config(_) => 3,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
            CliError::Run(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<atriv_core::Error> for CliError {
    fn from(e: atriv_core::Error) -> Self {
        match e {
            atriv_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Atriv,
    Dtriv,
    Rgd,
    RgdMomentum,
    RgdFullHistory,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Atriv, Algorithm::Dtriv, Algorithm::Rgd, Algorithm::RgdMomentum, Algorithm::RgdFullHistory];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Atriv => "atriv",
            Algorithm::Dtriv => "dtriv",
            Algorithm::Rgd => "rgd",
            Algorithm::RgdMomentum => "rgd-momentum",
            Algorithm::RgdFullHistory => "rgd-full-history",
        }
    }

    fn is_trivialization(self) -> bool {
        matches!(self, Algorithm::Atriv | Algorithm::Dtriv)
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown algorithm `{s}`")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "problem", "n", "algo", "k", "opt", "lr", "iters", "seed", "out", "beta1", "beta2", "eps", "mu", "retraction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemName,
    pub n: usize,
    pub algorithm: Algorithm,
    pub period: Period,
    pub optimizer: OptimizerRule,
    /// Momentum constant of the rgd-momentum variants.
    pub mu: f64,
    pub retraction: Retraction,
    pub eta: f64,
    pub iters: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Raw `key = value` pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigPairs(BTreeMap<String, String>);

impl ConfigPairs {
    /// Parses a config file body. `#` starts a comment; blank lines are
    /// ignored; a key may appear only once.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(ConfigPairs(pairs))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{pair}` is not `key=value`")))?;
        self.set(key.trim(), value.trim());
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("invalid value `{v}` for `{key}`"))))
            .transpose()
    }

    pub fn into_config(self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_pairs(&self)
    }
}

fn parse_period(s: &str) -> Result<Period, CliError> {
    match s {
        "inf" | "infinity" | "∞" => Ok(Period::Never),
        _ => match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Period::Every(k)),
            _ => Err(CliError::Config(format!("invalid value `{s}` for `k`: expected an integer ≥ 1 or `inf`"))),
        },
    }
}

fn check_unit_interval(key: &str, value: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}` must lie in [0, 1), got {value}")))
    }
}

impl ExperimentConfig {
    pub fn from_pairs(pairs: &ConfigPairs) -> Result<Self, CliError> {
        if let Some(key) = pairs.0.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        let problem: ProblemName = pairs
            .0
            .get("problem")
            .ok_or_else(|| CliError::Config("missing key `problem`".into()))?
            .parse()?;
        let algorithm: Algorithm =
            pairs.0.get("algo").ok_or_else(|| CliError::Config("missing key `algo`".into()))?.parse()?;
        let n = pairs.get::<usize>("n")?.unwrap_or(8);
        if n < 2 {
            return Err(CliError::Config(format!("`n` must be at least 2, got {n}")));
        }
        let period = match pairs.0.get("k") {
            Some(k) if algorithm.is_trivialization() => parse_period(k)?,
            Some(_) => return Err(CliError::Config(format!("`k` does not apply to `{algorithm}`"))),
            None => Period::Every(1),
        };
        let beta1 = pairs.get::<f64>("beta1")?.unwrap_or(0.9);
        let beta2 = pairs.get::<f64>("beta2")?.unwrap_or(0.99);
        let eps = pairs.get::<f64>("eps")?.unwrap_or(atriv_core::optimizer::DEFAULT_EPSILON);
        let mu = pairs.get::<f64>("mu")?.unwrap_or(0.9);
        check_unit_interval("beta1", beta1)?;
        check_unit_interval("beta2", beta2)?;
        check_unit_interval("mu", mu)?;
        if !(eps > 0.0) {
            return Err(CliError::Config(format!("`eps` must be positive, got {eps}")));
        }
        let default_opt = if algorithm.is_trivialization() { "adam" } else { "sgd" };
        let opt_name = pairs.0.get("opt").map_or(default_opt, String::as_str);
        let optimizer = match opt_name {
            "sgd" => OptimizerRule::Sgd,
            "momentum" => OptimizerRule::Momentum { mu },
            "adagrad" => OptimizerRule::Adagrad { eps },
            "rmsprop" => OptimizerRule::RmsProp { beta2, eps },
            "adam" => OptimizerRule::Adam { beta1, beta2, eps },
            other => return Err(CliError::Config(format!("unknown optimizer `{other}`"))),
        };
        if !algorithm.is_trivialization() && optimizer != OptimizerRule::Sgd {
            return Err(CliError::Config(format!("`{algorithm}` only supports `opt = sgd`")));
        }
        let retraction = match pairs.0.get("retraction").map(String::as_str) {
            None | Some("exp") => Retraction::Exp,
            Some("cayley") if algorithm == Algorithm::Rgd => Retraction::Cayley,
            Some("cayley") => return Err(CliError::Config(format!("`{algorithm}` only supports the exp retraction"))),
            Some(other) => return Err(CliError::Config(format!("unknown retraction `{other}`"))),
        };
        let eta = pairs.get::<f64>("lr")?.unwrap_or(1e-2);
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(CliError::Config(format!("`lr` must be positive, got {eta}")));
        }
        let iters = pairs.get::<usize>("iters")?.unwrap_or(1000);
        let seed = pairs.get::<u64>("seed")?.unwrap_or(0);
        let mut config = ExperimentConfig {
            problem,
            n,
            algorithm,
            period,
            optimizer,
            mu,
            retraction,
            eta,
            iters,
            seed,
            out: PathBuf::new(),
        };
        config.out = match pairs.0.get("out") {
            Some(path) if path.is_empty() => return Err(CliError::Config("`out` is empty".into())),
            Some(path) => PathBuf::from(path),
            None => PathBuf::from("results").join(format!("{}.csv", config.label())),
        };
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut pairs = ConfigPairs::parse(&text)?;
        for pair in overrides {
            pairs.set_pair(pair)?;
        }
        pairs.into_config()
    }

    /// Short identifier, e.g. `procrustes-atriv-k1-s53`.
    pub fn label(&self) -> String {
        format!("{}-{}-k{}-s{}", self.problem, self.algorithm, self.period, self.seed)
    }

    /// Sibling path of the summary table: `run.csv` → `run.summary.csv`.
    pub fn summary_path(&self) -> PathBuf {
        let stem = self.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.out.with_file_name(format!("{stem}.summary.csv"))
    }

    fn sort_key(&self) -> (ProblemName, Algorithm, (u8, usize)) {
        let k = match self.period {
            Period::Every(k) => (0, k),
            Period::Never => (1, 0),
        };
        (self.problem, self.algorithm, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config: ExperimentConfig,
    pub final_f: f64,
    pub best_f: f64,
    /// `final_f - f*`, present when the optimum is known.
    pub gap: Option<f64>,
    pub best_gap: Option<f64>,
    /// First iteration count after which the gap is at most 1e-6.
    pub iters_to_gap: Option<usize>,
    pub restarts: usize,
    pub wall_time_s: f64,
    pub aborted: Option<String>,
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        let c = &self.config;
        let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
            c.problem,
            c.n,
            c.algorithm,
            c.period,
            c.optimizer.name(),
            float(c.eta),
            c.iters,
            c.seed,
            float(self.final_f),
            float(self.best_f),
            opt(self.gap),
            opt(self.best_gap),
            self.iters_to_gap.map(|i| i.to_string()).unwrap_or_default(),
            self.restarts,
            self.wall_time_s,
        )
    }
}

/// CSV body of a run trace.
pub fn trace_csv(record: &RunRecord) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.outer,
            r.inner,
            float(r.f),
            float(r.grad_norm),
            float(r.step_dist),
            r.restarts
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Runs the configured experiment without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<(RunRecord, SummaryRow), CliError> {
    let problem = build_problem(config.problem, config.n, RngSeed(config.seed))?;
    let opts = RunOptions::new(config.eta, config.iters);
    let p0 = &problem.start;
    let started = Instant::now();
    let record = match config.algorithm {
        Algorithm::Atriv => atriv_run(&problem, config.optimizer, config.period, opts, p0)?,
        Algorithm::Dtriv => dtriv_run(&problem, config.optimizer, config.period, opts, p0)?,
        Algorithm::Rgd => rgd_run(&problem, opts, p0, config.retraction)?,
        Algorithm::RgdMomentum => rgd_momentum_transport_run(&problem, config.mu, opts, p0)?,
        Algorithm::RgdFullHistory => rgd_momentum_full_history_run(&problem, config.mu, opts, p0)?,
    };
    let wall_time_s = started.elapsed().as_secs_f64();
    let final_f = problem.value(&record.terminal);
    let best_f = record.best_value();
    let optimum = problem.known_optimum;
    let iters_to_gap = optimum.and_then(|f_star| {
        if record.initial_value - f_star <= SUMMARY_GAP_THRESHOLD {
            return Some(0);
        }
        record.rows.iter().position(|r| r.f - f_star <= SUMMARY_GAP_THRESHOLD).map(|i| i + 1)
    });
    let summary = SummaryRow {
        config: config.clone(),
        final_f,
        best_f,
        gap: optimum.map(|f_star| final_f - f_star),
        best_gap: optimum.map(|f_star| best_f - f_star),
        iters_to_gap,
        restarts: record.restarts,
        wall_time_s,
        aborted: record.aborted.clone(),
    };
    Ok((record, summary))
}

/// Runs one experiment, writes its trace CSV and sibling summary CSV.
/// An aborted run still writes its partial trace, then reports a run failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(RunRecord, SummaryRow), CliError> {
    let (record, summary) = execute(config)?;
    write_file(&config.out, &trace_csv(&record))?;
    write_file(&config.summary_path(), &summary_csv(std::slice::from_ref(&summary)))?;
    if let Some(reason) = &record.aborted {
        return Err(CliError::Run(format!("{}: {reason}", config.label())));
    }
    Ok((record, summary))
}

#[derive(Debug)]
pub struct GridOutcome {
    /// Successful runs, sorted by (problem, algorithm, K).
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<(String, CliError)>,
}

/// Runs all configs in parallel. Failed runs are reported in
/// [`GridOutcome::failures`] and left out of the summary.
pub fn run_grid(configs: &[ExperimentConfig]) -> Result<GridOutcome, CliError> {
    if configs.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for c in configs {
        if !seen.insert(&c.out) {
            return Err(CliError::Config(format!("two configs write to {}", c.out.display())));
        }
    }
    let results: Vec<_> = configs.par_iter().map(|c| (c, run_experiment(c))).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (config, result) in results {
        match result {
            Ok((_, summary)) => rows.push(summary),
            Err(e) => failures.push((config.label(), e)),
        }
    }
    rows.sort_by(|a, b| {
        a.config
            .sort_key()
            .cmp(&b.config.sort_key())
            .then_with(|| a.config.label().cmp(&b.config.label()))
            .then_with(|| a.config.out.cmp(&b.config.out))
    });
    Ok(GridOutcome { rows, failures })
}

/// Loads every `*.cfg` file of `dir` in name order.
pub fn load_grid_dir(dir: &Path) -> Result<Vec<ExperimentConfig>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "cfg"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("no .cfg files in {}", dir.display())));
    }
    paths.iter().map(|p| ExperimentConfig::from_file(p, &[])).collect()
}

/// Runs a grid directory and writes the aggregated summary to `summary_out`.
pub fn run_grid_dir(dir: &Path, summary_out: &Path) -> Result<GridOutcome, CliError> {
    let configs = load_grid_dir(dir)?;
    let outcome = run_grid(&configs)?;
    write_file(summary_out, &summary_csv(&outcome.rows))?;
    Ok(outcome)
}
