//! End-to-end commands behind the `hotqubo` binary.
//!
//! Every command is a plain function from a [`RunConfig`] to a report
//! value; the binary only parses flags, calls these and maps errors to
//! exit codes. Reports are deterministic given the config: wall-clock
//! timings are kept out of them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::encode::{baseline_encoding, bounded_encoding, EncodeError, Encoding};
use crate::hotstart::{compute_box, qubit_counts, HotStartBox};
use crate::market::{
    initial_portfolio, load_universe, scale_to_units, weights_from_units, AssetUniverse, Calibration,
    MarketError, UnitParameters,
};
use crate::model::{build_with_transaction_costs, QuadraticModel};
use crate::numerics::NumericsError;
use crate::qubo::{build_qubo, ConstructionMode, QuboError, QuboInstance};
use crate::solve::{
    brute_force, random_search, simulated_annealing, AnnealSchedule, SolveError, SolveResult,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("requested {requested} assets but the universe has {available}")]
    SizeExceedsUniverse { requested: usize, available: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl CliError {
    /// 1 = data error, 2 = configuration error, 3 = solver cap exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } | Self::Output { .. } | Self::SizeExceedsUniverse { .. } => 2,
            Self::Market(MarketError::TickerMismatch(_) | MarketError::InvalidCalibration(_)) => 2,
            Self::Solve(SolveError::TooLarge { .. }) => 3,
            Self::Solve(SolveError::InvalidSchedule(_) | SolveError::InvalidArgument(_)) => 2,
            Self::Encode(EncodeError::Invalid(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hotstart,
    Baseline,
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hotstart" => Ok(Self::Hotstart),
            "baseline" => Ok(Self::Baseline),
            _ => Err(CliError::Config(format!("unknown mode {s:?} (hotstart | baseline)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Bruteforce,
    Anneal,
    Random,
}

impl FromStr for Solver {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" => Ok(Self::Bruteforce),
            "anneal" => Ok(Self::Anneal),
            "random" => Ok(Self::Random),
            _ => Err(CliError::Config(format!("unknown solver {s:?} (bruteforce | anneal | random)"))),
        }
    }
}

/// Everything a pipeline run needs. Unset paths are a configuration error
/// for the commands that read data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub returns_path: Option<PathBuf>,
    pub prices_path: Option<PathBuf>,
    pub budget: f64,
    /// Per-period rate matching the return frequency (monthly data: pass the monthly rate).
    pub risk_free: f64,
    pub gamma: f64,
    pub kappa_scale: f64,
    pub mode: Mode,
    pub baseline_k: u32,
    pub solver: Solver,
    pub sweeps: u32,
    pub restarts: u32,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Random-search sample count; 0 means "same budget as the default annealer".
    pub samples: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Also write the QUBO file when solving.
    pub export_qubo: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        Self {
            returns_path: None,
            prices_path: None,
            budget: 250_000.0,
            risk_free: 0.0,
            gamma: 3.0,
            kappa_scale: 50.0,
            mode: Mode::Hotstart,
            baseline_k: 10,
            solver: Solver::Anneal,
            sweeps: s.sweeps,
            restarts: s.restarts,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            samples: 0,
            seed: 0,
            output_dir: PathBuf::from("out"),
            export_qubo: false,
        }
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys match the long flag names;
    /// underscores and dashes are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| CliError::Config(format!("bad value {v:?} for {key}")))
        }
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "returns" => self.returns_path = Some(PathBuf::from(value)),
            "prices" => self.prices_path = Some(PathBuf::from(value)),
            "budget" => self.budget = num(&key, value)?,
            "risk-free" => self.risk_free = num(&key, value)?,
            "gamma" => self.gamma = num(&key, value)?,
            "kappa-scale" => self.kappa_scale = num(&key, value)?,
            "mode" => self.mode = value.parse()?,
            "k" => self.baseline_k = num(&key, value)?,
            "solver" => self.solver = value.parse()?,
            "sweeps" => self.sweeps = num(&key, value)?,
            "restarts" => self.restarts = num(&key, value)?,
            "beta-start" => self.beta_start = num(&key, value)?,
            "beta-end" => self.beta_end = num(&key, value)?,
            "samples" => self.samples = num(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "out" => self.output_dir = PathBuf::from(value),
            "export" => self.export_qubo = num(&key, value)?,
            _ => return Err(CliError::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn calibration(&self) -> Result<Calibration> {
        Ok(Calibration::new(self.budget, self.risk_free, self.gamma, self.kappa_scale)?)
    }

    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            sweeps: self.sweeps,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            restarts: self.restarts,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.calibration()?;
        if self.baseline_k < 1 {
            return Err(CliError::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

fn open_input(path: &Option<PathBuf>, what: &str) -> Result<File> {
    let path = path.as_ref().ok_or_else(|| CliError::Config(format!("missing --{what} path")))?;
    File::open(path).map_err(|source| CliError::Input { path: path.clone(), source })
}

pub fn load_config_universe(config: &RunConfig) -> Result<AssetUniverse> {
    let returns = open_input(&config.returns_path, "returns")?;
    let prices = open_input(&config.prices_path, "prices")?;
    Ok(load_universe(io::BufReader::new(returns), io::BufReader::new(prices))?)
}

/// Calibrated problem for one universe: the trading-cost objective around
/// the equal-weight start and its hot-start box.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub universe: AssetUniverse,
    pub calibration: Calibration,
    pub params: UnitParameters,
    pub x0: Vec<i64>,
    pub model: QuadraticModel<f64>,
    pub hot_box: HotStartBox<f64>,
}

impl Pipeline {
    pub fn new(universe: AssetUniverse, calibration: Calibration) -> Result<Self> {
        let params = scale_to_units(&universe, &calibration)?;
        let x0 = initial_portfolio(&universe, &calibration);
        let model = build_with_transaction_costs(
            &params.mu_tilde_f,
            &params.sigma_tilde,
            params.gamma_tilde,
            params.kappa_tilde,
            &x0,
        )?;
        let hot_box = compute_box(&model)?;
        Ok(Self { universe, calibration, params, x0, model, hot_box })
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Self::new(load_config_universe(config)?, config.calibration()?)
    }

    pub fn encoding(&self, mode: Mode, k: u32) -> Result<Encoding> {
        let e = match mode {
            Mode::Hotstart => bounded_encoding(&self.hot_box),
            Mode::Baseline => baseline_encoding(self.universe.len(), k)?,
        };
        Ok(e.with_labels(self.universe.tickers().to_vec())?)
    }

    pub fn qubo(&self, mode: Mode, k: u32) -> Result<QuboInstance<f64>> {
        let e = self.encoding(mode, k)?;
        let cm = match mode {
            Mode::Hotstart => ConstructionMode::HotStart,
            Mode::Baseline => ConstructionMode::Baseline,
        };
        Ok(build_qubo(&self.model, &e)?.with_mode(cm))
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let out = |source| CliError::Output { path: dir.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(out)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Output { path: path.clone(), source })?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// derive

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeriveRow {
    pub ticker: String,
    pub x0: i64,
    pub x_star: f64,
    pub smallest: i64,
    pub largest: i64,
    pub integers: u64,
    pub qubits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeriveReport {
    pub rows: Vec<DeriveRow>,
    pub total_qubits: u64,
    pub rounding_shortcut: bool,
}

impl DeriveReport {
    pub fn from_pipeline(p: &Pipeline) -> Self {
        let counts = qubit_counts(&p.hot_box);
        let rows = (0..p.universe.len())
            .map(|i| DeriveRow {
                ticker: p.universe.tickers()[i].clone(),
                x0: p.x0[i],
                x_star: p.hot_box.x_star_cont[i],
                smallest: p.hot_box.lower[i],
                largest: p.hot_box.upper[i],
                integers: (p.hot_box.upper[i] - p.hot_box.lower[i] + 1) as u64,
                qubits: counts.per_asset[i],
            })
            .collect();
        Self { rows, total_qubits: counts.total, rounding_shortcut: p.hot_box.integral_shortcut }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("ticker,x0,x_star,smallest,largest,integers,qubits\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.4},{},{},{},{}",
                r.ticker, r.x0, r.x_star, r.smallest, r.largest, r.integers, r.qubits
            );
        }
        let _ = writeln!(s, "Total,,,,,,{}", self.total_qubits);
        s
    }

    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.ticker.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<w$} {:>10} {:>12} {:>10} {:>10} {:>10} {:>8}",
            "Stock", "x0", "x_star", "smallest", "largest", "#integers", "#qubits"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$} {:>10} {:>12.1} {:>10} {:>10} {:>10} {:>8}",
                r.ticker, r.x0, r.x_star, r.smallest, r.largest, r.integers, r.qubits
            );
        }
        let _ = writeln!(s, "{:<w$} {:>75}", "Total", self.total_qubits);
        if self.rounding_shortcut {
            let _ = writeln!(s, "continuous optimum is integral: optimal by rounding shortcut, 0 qubits");
        }
        s
    }
}

/// Per-asset qubit derivation for the hot-start box; writes `derive.csv`
/// and `derive.txt` into the output directory.
pub fn cmd_derive(config: &RunConfig) -> Result<DeriveReport> {
    let p = Pipeline::from_config(config)?;
    let report = DeriveReport::from_pipeline(&p);
    debug_assert_eq!(report.total_qubits, bounded_encoding(&p.hot_box).total_bits() as u64);
    write_file(&config.output_dir, "derive.csv", &report.to_csv())?;
    write_file(&config.output_dir, "derive.txt", &report.to_text())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub hotstart_qubits: u64,
    pub baseline_qubits: u64,
    /// Every hot-start box fits in the baseline range `[0, 2^k − 1]`.
    pub baseline_covers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub k: u32,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,hotstart_qubits,baseline_qubits\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.n, r.hotstart_qubits, r.baseline_qubits);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:>6} {:>16} {:>16} {:>16}\n", "n", "hotstart_qubits", "baseline_qubits", "baseline_covers");
        for r in &self.rows {
            let _ = writeln!(s, "{:>6} {:>16} {:>16} {:>16}", r.n, r.hotstart_qubits, r.baseline_qubits, r.baseline_covers);
        }
        s
    }
}

/// Qubit totals for the first `s` tickers (input order) for each size.
pub fn scaling_report(universe: &AssetUniverse, cal: &Calibration, sizes: &[usize], k: u32) -> Result<ScalingReport> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("sizes must be strictly ascending".into()));
    }
    let top = 1i64.checked_shl(k).map(|v| v - 1).unwrap_or(i64::MAX);
    let mut rows = Vec::with_capacity(sizes.len());
    for &s in sizes {
        if s == 0 || s > universe.len() {
            return Err(CliError::SizeExceedsUniverse { requested: s, available: universe.len() });
        }
        let p = Pipeline::new(universe.first(s)?, *cal)?;
        let b = &p.hot_box;
        rows.push(ScalingRow {
            n: s,
            hotstart_qubits: qubit_counts(b).total,
            baseline_qubits: s as u64 * k as u64,
            baseline_covers: b.lower.iter().all(|&l| l >= 0) && b.upper.iter().all(|&u| u <= top),
        });
    }
    Ok(ScalingReport { k, rows })
}

/// Writes `scaling.csv` with columns `n,hotstart_qubits,baseline_qubits`.
pub fn cmd_scaling(config: &RunConfig, sizes: &[usize]) -> Result<ScalingReport> {
    config.validate()?;
    let universe = load_config_universe(config)?;
    let report = scaling_report(&universe, &config.calibration()?, sizes, config.baseline_k)?;
    write_file(&config.output_dir, "scaling.csv", &report.to_csv())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// solve / export

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub solver: String,
    pub seed: u64,
    pub units: Vec<i64>,
    pub weights: Vec<f64>,
    pub risk_free_weight: f64,
    pub objective: f64,
    pub energy: Option<f64>,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub config: RunConfig,
    pub tickers: Vec<String>,
    pub x0: Vec<i64>,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub gap_c: f64,
    pub rounded: Vec<i64>,
    pub rounded_objective: f64,
    pub box_lower: Vec<i64>,
    pub box_upper: Vec<i64>,
    pub hotstart_qubits: u64,
    pub baseline_qubits: u64,
    pub qubo_bits: usize,
    pub rounding_shortcut: bool,
    pub solution: SolutionReport,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sol = &self.solution;
        let _ = writeln!(s, "mode {:?}, solver {}, seed {}", self.config.mode, sol.solver, sol.seed);
        let _ = writeln!(s, "gap constant C = {:.6e}, f_star = {:.6}", self.gap_c, self.f_star);
        let _ = writeln!(
            s,
            "qubits: hotstart {}, baseline {}, this QUBO {}",
            self.hotstart_qubits, self.baseline_qubits, self.qubo_bits
        );
        if self.rounding_shortcut && self.config.mode == Mode::Hotstart {
            let _ = writeln!(s, "continuous optimum is integral: optimal by rounding shortcut, 0 qubits");
        }
        let _ = writeln!(s, "{:<8} {:>10} {:>12} {:>10} {:>10} {:>10}", "ticker", "x0", "x_star", "lower", "upper", "units");
        for i in 0..self.tickers.len() {
            let _ = writeln!(
                s,
                "{:<8} {:>10} {:>12.3} {:>10} {:>10} {:>10}",
                self.tickers[i], self.x0[i], self.x_star[i], self.box_lower[i], self.box_upper[i], sol.units[i]
            );
        }
        let _ = writeln!(s, "objective {:.9} (rounded {:.9})", sol.objective, self.rounded_objective);
        if let Some(e) = sol.energy {
            let _ = writeln!(s, "energy {e:.9}, evaluations {}", sol.evaluations);
        }
        let _ = writeln!(s, "risk-free weight {:.6}", sol.risk_free_weight);
        s
    }
}

fn run_solver(config: &RunConfig, q: &QuboInstance<f64>) -> Result<SolveResult<f64>> {
    Ok(match config.solver {
        Solver::Bruteforce => brute_force(q)?,
        Solver::Anneal => simulated_annealing(q, &config.schedule())?,
        Solver::Random => {
            let samples = if config.samples > 0 {
                config.samples
            } else {
                let s = AnnealSchedule::default();
                s.restarts as u64 * s.sweeps as u64
            };
            random_search(q, samples, config.seed)?
        }
    })
}

/// Full pipeline: hot-start box, QUBO for the configured mode, solver.
/// Writes `report.json` (and `qubo.txt` when exporting).
pub fn cmd_solve(config: &RunConfig) -> Result<SolveReport> {
    let p = Pipeline::from_config(config)?;
    let report = solve_pipeline(config, &p)?;
    write_file(&config.output_dir, "report.json", &report.to_json())?;
    Ok(report)
}

pub fn solve_pipeline(config: &RunConfig, p: &Pipeline) -> Result<SolveReport> {
    let b = &p.hot_box;
    let hot_bits = qubit_counts(b).total;
    let baseline_bits = p.universe.len() as u64 * config.baseline_k as u64;
    let rounded_objective = p.model.evaluate_int(&b.rounded)?;

    let shortcut = config.mode == Mode::Hotstart && b.integral_shortcut;
    let (units, energy, evaluations, solver_name, qubo_bits, wall) = if shortcut {
        (b.rounded.clone(), None, 0, "shortcut".to_owned(), 0, std::time::Duration::ZERO)
    } else {
        let q = p.qubo(config.mode, config.baseline_k)?;
        if config.export_qubo {
            write_file(&config.output_dir, "qubo.txt", &q.to_text())?;
        }
        let r = run_solver(config, &q)?;
        (r.best_units, Some(r.best_energy), r.evaluations, r.solver.as_str().to_owned(), q.bits(), r.wall_time)
    };
    let w = weights_from_units(&units, &p.universe, &p.calibration)?;
    Ok(SolveReport {
        config: config.clone(),
        tickers: p.universe.tickers().to_vec(),
        x0: p.x0.clone(),
        x_star: b.x_star_cont.to_vec(),
        f_star: b.f_star,
        gap_c: b.gap_c,
        rounded: b.rounded.clone(),
        rounded_objective,
        box_lower: b.lower.clone(),
        box_upper: b.upper.clone(),
        hotstart_qubits: hot_bits,
        baseline_qubits: baseline_bits,
        qubo_bits,
        rounding_shortcut: b.integral_shortcut,
        solution: SolutionReport {
            solver: solver_name,
            seed: config.seed,
            objective: p.model.evaluate_int(&units)?,
            units,
            weights: w.risky,
            risk_free_weight: w.risk_free,
            energy,
            evaluations,
        },
        wall_time: wall,
    })
}

/// Builds the QUBO for the configured mode and writes it as `qubo.txt`.
pub fn cmd_export(config: &RunConfig) -> Result<(PathBuf, QuboInstance<f64>)> {
    let p = Pipeline::from_config(config)?;
    let q = p.qubo(config.mode, config.baseline_k)?;
    let path = write_file(&config.output_dir, "qubo.txt", &q.to_text())?;
    Ok((path, q))
}

// ---------------------------------------------------------------------------
// gen

/// Synthetic market: prices log-uniform in `[5, 2000]`, returns from a
/// three-factor model plus idiosyncratic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub tickers: Vec<String>,
    pub prices: Vec<f64>,
    pub returns: Vec<Vec<f64>>,
}

impl SyntheticMarket {
    pub fn generate(seed: u64, n: usize, periods: usize) -> Result<Self> {
        if n < 1 {
            return Err(CliError::Config("need at least one asset".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let tickers: Vec<String> = (1..=n).map(|i| format!("S{i:03}")).collect();
        let prices: Vec<f64> = (0..n)
            .map(|_| {
                let p = rng.random_range(5f64.ln()..2000f64.ln()).exp();
                (p * 100.0).round() / 100.0
            })
            .collect();

        const FACTOR_MEAN: [f64; 3] = [0.006, 0.001, 0.0];
        const FACTOR_VOL: [f64; 3] = [0.045, 0.025, 0.02];
        let loadings: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    1.0 + 0.3 * std_normal.sample(&mut rng),
                    0.4 * std_normal.sample(&mut rng),
                    0.4 * std_normal.sample(&mut rng),
                ]
            })
            .collect();
        let alpha: Vec<f64> = (0..n).map(|_| 0.002 * std_normal.sample(&mut rng)).collect();
        let idio: Vec<f64> = (0..n).map(|_| rng.random_range(0.03..0.09)).collect();

        let returns = (0..periods)
            .map(|_| {
                let f: Vec<f64> =
                    (0..3).map(|k| FACTOR_MEAN[k] + FACTOR_VOL[k] * std_normal.sample(&mut rng)).collect();
                (0..n)
                    .map(|i| {
                        let common: f64 = (0..3).map(|k| loadings[i][k] * f[k]).sum();
                        let r = alpha[i] + common + idio[i] * std_normal.sample(&mut rng);
                        (r * 1e8).round() / 1e8
                    })
                    .collect()
            })
            .collect();
        Ok(Self { tickers, prices, returns })
    }

    pub fn returns_csv(&self) -> String {
        let mut s = String::from("period");
        for t in &self.tickers {
            s.push(',');
            s.push_str(t);
        }
        s.push('\n');
        for (k, row) in self.returns.iter().enumerate() {
            let _ = write!(s, "P{:04}", k + 1);
            for r in row {
                let _ = write!(s, ",{r:.8}");
            }
            s.push('\n');
        }
        s
    }

    pub fn prices_csv(&self) -> String {
        let mut s = String::from("ticker,price\n");
        for (t, p) in self.tickers.iter().zip(&self.prices) {
            let _ = writeln!(s, "{t},{p:.2}");
        }
        s
    }
}

/// Writes `returns.csv` and `prices.csv` into `out`.
pub fn cmd_gen(seed: u64, n: usize, periods: usize, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let m = SyntheticMarket::generate(seed, n, periods)?;
    let r = write_file(out, "returns.csv", &m.returns_csv())?;
    let p = write_file(out, "prices.csv", &m.prices_csv())?;
    Ok((r, p))
}

/// Merges a config file (when given) with explicit overrides; overrides win.
pub fn resolve_config(file: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
        c.apply_file(&text)?;
    }
    for (k, v) in overrides {
        c.set(k, v)?;
    }
    Ok(c)
}

/// Writes `s` to stdout, ignoring a closed pipe.
pub fn print_stdout(s: &str) {
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let _ = w.write_all(s.as_bytes());
    let _ = w.flush();
}
