//! Market data ingestion, moment estimation and unit-space calibration.
//!
//! Returns are read as a wide CSV (`period,<ticker1>,...,<tickerN>`) of
//! per-period simple returns; prices as `ticker,price`. Sample moments are
//! estimated with divisor `T − 1` and the covariance is shrunk toward a
//! scaled identity until it passes the Cholesky certificate.

use std::collections::HashMap;
use std::io::Read;

use thiserror::Error;

use crate::numerics::{self, check_dim, cholesky, NumericsError, SymMatrix, Vector};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("ticker mismatch between returns and prices: {0}")]
    TickerMismatch(String),
    #[error("non-positive price {price} for ticker {ticker}")]
    NonPositivePrice { ticker: String, price: f64 },
    #[error("need at least 2 return periods, found {0}")]
    TooFewPeriods(usize),
    #[error("malformed cell at line {line}, column {column}: {value:?}")]
    MalformedCell { line: u64, column: usize, value: String },
    #[error("covariance could not be regularized to positive definiteness")]
    RegularizationFailed,
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, MarketError>;

/// Shrinkage intensities tried in order until the covariance factors.
pub const SHRINKAGE_LADDER: [f64; 5] = [0.0, 1e-6, 1e-4, 1e-2, 0.1];

/// Diagonal used when the input carries no variance at all.
pub const ZERO_VARIANCE_FALLBACK: f64 = 1e-8;

/// `n` assets with prices, a `T × n` return history and estimated moments.
#[derive(Debug, Clone)]
pub struct AssetUniverse {
    tickers: Vec<String>,
    prices: Vector<f64>,
    returns: Vec<Vec<f64>>,
    mu: Vector<f64>,
    sigma: SymMatrix<f64>,
    shrinkage: Shrinkage,
}

/// Outcome of covariance regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// Shrunk toward `avgvar·I` with this intensity (0 = untouched).
    Delta(f64),
    /// Input had zero average variance and was replaced by `εI`.
    Fallback,
}

impl AssetUniverse {
    /// Estimates moments from a `T × n` return matrix (rows are periods).
    pub fn from_parts(tickers: Vec<String>, prices: Vec<f64>, returns: Vec<Vec<f64>>) -> Result<Self> {
        let n = tickers.len();
        check_dim(n, prices.len())?;
        for (t, &p) in tickers.iter().zip(&prices) {
            if !(p > 0.0) || !p.is_finite() {
                return Err(MarketError::NonPositivePrice { ticker: t.clone(), price: p });
            }
        }
        if returns.len() < 2 {
            return Err(MarketError::TooFewPeriods(returns.len()));
        }
        for row in &returns {
            check_dim(n, row.len())?;
        }
        let (mu, raw) = sample_moments(&returns, n);
        let (sigma, shrinkage) = regularize_detailed(&raw)?;
        Ok(Self { tickers, prices: Vector::new(prices)?, returns, mu: Vector::new(mu)?, sigma, shrinkage })
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &Vector<f64> {
        &self.prices
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn periods(&self) -> usize {
        self.returns.len()
    }

    pub fn mu(&self) -> &Vector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &SymMatrix<f64> {
        &self.sigma
    }

    pub fn shrinkage(&self) -> Shrinkage {
        self.shrinkage
    }

    /// Universe restricted to the first `s` tickers in input order, re-estimated.
    pub fn first(&self, s: usize) -> Result<Self> {
        let s = s.min(self.len());
        Self::from_parts(
            self.tickers[..s].to_vec(),
            self.prices.as_slice()[..s].to_vec(),
            self.returns.iter().map(|r| r[..s].to_vec()).collect(),
        )
    }
}

fn sample_moments(returns: &[Vec<f64>], n: usize) -> (Vec<f64>, SymMatrix<f64>) {
    let t = returns.len() as f64;
    let mut mu = vec![0.0; n];
    for row in returns {
        for (m, &r) in mu.iter_mut().zip(row) {
            *m += r;
        }
    }
    for m in &mut mu {
        *m /= t;
    }
    let mut cov = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = returns.iter().map(|r| (r[i] - mu[i]) * (r[j] - mu[j])).sum();
            cov.set(i, j, s / (t - 1.0));
        }
    }
    (mu, cov)
}

/// Reads the wide returns table and the price table, matching tickers by name.
pub fn load_universe<R1: Read, R2: Read>(returns_source: R1, prices_source: R2) -> Result<AssetUniverse> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(returns_source);
    let header = rdr.headers()?.clone();
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if tickers.is_empty() {
        return Err(MarketError::TickerMismatch("returns table has no ticker columns".into()));
    }
    let mut seen = HashMap::new();
    for (i, t) in tickers.iter().enumerate() {
        if seen.insert(t.as_str(), i).is_some() {
            return Err(MarketError::TickerMismatch(format!("duplicate ticker {t} in returns")));
        }
    }

    let mut returns = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, line, j + 1))
            .collect::<Result<Vec<f64>>>()?;
        returns.push(row);
    }
    if returns.len() < 2 {
        return Err(MarketError::TooFewPeriods(returns.len()));
    }

    let mut prices: Vec<Option<f64>> = vec![None; tickers.len()];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(prices_source);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let ticker = rec.get(0).unwrap_or_default();
        let value = parse_cell(rec.get(1).unwrap_or_default(), line, 1)?;
        let idx = *seen.get(ticker).ok_or_else(|| {
            MarketError::TickerMismatch(format!("price for unknown ticker {ticker}"))
        })?;
        if prices[idx].replace(value).is_some() {
            return Err(MarketError::TickerMismatch(format!("duplicate price for {ticker}")));
        }
    }
    let missing: Vec<&str> = tickers
        .iter()
        .zip(&prices)
        .filter(|(_, p)| p.is_none())
        .map(|(t, _)| t.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(MarketError::TickerMismatch(format!("no price for {}", missing.join(", "))));
    }
    let prices = prices.into_iter().flatten().collect();
    AssetUniverse::from_parts(tickers, prices, returns)
}

fn parse_cell(cell: &str, line: u64, column: usize) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MarketError::MalformedCell { line, column, value: cell.to_owned() })
}

/// Shrinks `sigma_raw` toward `avgvar·I` with the smallest ladder intensity
/// that makes it positive definite.
pub fn regularize(sigma_raw: &SymMatrix<f64>) -> Result<SymMatrix<f64>> {
    regularize_detailed(sigma_raw).map(|(m, _)| m)
}

pub fn regularize_detailed(sigma_raw: &SymMatrix<f64>) -> Result<(SymMatrix<f64>, Shrinkage)> {
    let n = sigma_raw.dim();
    let avgvar = if n == 0 { 0.0 } else { sigma_raw.diagonal().iter().sum::<f64>() / n as f64 };
    if !(avgvar > 0.0) {
        return Ok((SymMatrix::from_diagonal(&vec![ZERO_VARIANCE_FALLBACK; n]), Shrinkage::Fallback));
    }
    let target = SymMatrix::from_diagonal(&vec![avgvar; n]);
    for &delta in &SHRINKAGE_LADDER {
        let shrunk = if delta == 0.0 {
            sigma_raw.clone()
        } else {
            sigma_raw.combine(1.0 - delta, &target, delta)?
        };
        if cholesky(&shrunk).is_ok() {
            return Ok((shrunk, Shrinkage::Delta(delta)));
        }
    }
    Err(MarketError::RegularizationFailed)
}

/// Investor parameters: budget `B`, per-period risk-free rate, risk
/// aversion `γ` and the trading-cost multiplier (`κ̃ = kappa_scale·γ/B`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub budget: f64,
    pub risk_free: f64,
    pub gamma: f64,
    pub kappa_scale: f64,
}

impl Calibration {
    pub fn new(budget: f64, risk_free: f64, gamma: f64, kappa_scale: f64) -> Result<Self> {
        let cal = Self { budget, risk_free, gamma, kappa_scale };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MarketError::InvalidCalibration(m.to_owned()));
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad("budget must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.kappa_scale >= 0.0 && self.kappa_scale.is_finite()) {
            return bad("kappa scale must be non-negative");
        }
        if !self.risk_free.is_finite() {
            return bad("risk-free rate must be finite");
        }
        Ok(())
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma / self.budget
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_scale * self.gamma / self.budget
    }
}

/// Problem parameters expressed per share instead of per unit weight.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitParameters {
    pub mu_tilde_f: Vector<f64>,
    pub sigma_tilde: SymMatrix<f64>,
    pub gamma_tilde: f64,
    pub kappa_tilde: f64,
}

pub fn scale_to_units(u: &AssetUniverse, cal: &Calibration) -> Result<UnitParameters> {
    cal.validate()?;
    let excess = Vector::new(u.mu.iter().map(|&m| m - cal.risk_free).collect())?;
    Ok(UnitParameters {
        mu_tilde_f: excess.hadamard(&u.prices)?,
        sigma_tilde: u.sigma.congruence_diag(&u.prices)?,
        gamma_tilde: cal.gamma_tilde(),
        kappa_tilde: cal.kappa_tilde(),
    })
}

/// Equal-weight starting holdings `⌊(B/n)/pᵢ⌋`.
pub fn initial_portfolio(u: &AssetUniverse, cal: &Calibration) -> Vec<i64> {
    let per_asset = cal.budget / u.len() as f64;
    u.prices.iter().map(|&p| (per_asset / p).floor() as i64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub risky: Vec<f64>,
    /// `1 − Σ wᵢ`, held at the risk-free rate.
    pub risk_free: f64,
}

pub fn weights_from_units(x: &[i64], u: &AssetUniverse, cal: &Calibration) -> numerics::Result<Weights> {
    check_dim(u.len(), x.len())?;
    let risky: Vec<f64> = x
        .iter()
        .zip(u.prices.iter())
        .map(|(&q, &p)| q as f64 * p / cal.budget)
        .collect();
    let risk_free = 1.0 - risky.iter().sum::<f64>();
    Ok(Weights { risky, risk_free })
}
