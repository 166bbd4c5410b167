// Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use hotqubo::model::QuadraticModel;
use hotqubo::numerics::{SymMatrix, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random symmetric PD matrix `AAᵀ/n + ridge·I` with standard-normal-ish entries.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[i][j] = (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() / n as f64;
        }
        b[i][i] += ridge;
    }
    b
}

/// Concave model with continuous maximizer `x_hat`: `a = B·x_hat`, `c = 0`.
pub fn model_with_optimum(b: &[Vec<f64>], x_hat: &[f64]) -> QuadraticModel<f64> {
    let n = b.len();
    let a: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[i][j] * x_hat[j]).sum()).collect();
    QuadraticModel::new(Vector::new(a).unwrap(), SymMatrix::from_rows(b).unwrap(), 0.0).unwrap()
}

/// `aᵀx − ½xᵀBx` from dense data, written out independently of the library.
pub fn dense_objective(a: &[f64], b: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += x[i] * b[i][j] * x[j];
        }
    }
    (0..n).map(|i| a[i] * x[i]).sum::<f64>() - 0.5 * quad
}

/// Exact integer maximum of `aᵀx − ½xᵀBx` over the box `lo..=hi`. The first
/// n−1 axes are enumerated; the last is solved in closed form (a concave
/// parabola on an interval peaks at the clamped floor or ceil of its vertex).
/// Returns the best point and its value.
pub fn exhaustive_optimum(a: &[f64], b: &[Vec<f64>], lo: &[i64], hi: &[i64]) -> (Vec<i64>, f64) {
    let n = a.len();
    let last = n - 1;
    let mut x: Vec<i64> = lo.to_vec();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    loop {
        // Vertex of the last coordinate given the others.
        let rest: f64 = (0..last).map(|j| b[last][j] * x[j] as f64).sum();
        let v = (a[last] - rest) / b[last][last];
        for cand in [v.floor(), v.ceil()] {
            let cand = (cand.max(lo[last] as f64).min(hi[last] as f64)) as i64;
            x[last] = cand;
            let xf: Vec<f64> = x.iter().map(|&t| t as f64).collect();
            let f = dense_objective(a, b, &xf);
            if f > best.1 {
                best = (x.clone(), f);
            }
        }
        // Odometer over the first n−1 axes.
        let mut k = 0;
        loop {
            if k == last {
                return best;
            }
            if x[k] < hi[k] {
                x[k] += 1;
                break;
            }
            x[k] = lo[k];
            k += 1;
        }
    }
}

/// Three-term mean-variance-with-trading-cost objective, unexpanded.
pub fn three_term(mu: &[f64], sigma: &[Vec<f64>], gamma: f64, kappa: f64, x0: &[f64], x: &[f64]) -> f64 {
    let n = mu.len();
    let quad = |u: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i] * sigma[i][j] * u[j];
            }
        }
        s
    };
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    (0..n).map(|i| mu[i] * x[i]).sum::<f64>() - 0.5 * gamma * quad(x) - kappa * quad(&d)
}

/// Writes the wide returns CSV and the price list.
pub fn write_market(dir: &Path, tickers: &[&str], prices: &[f64], returns: &[Vec<f64>]) {
    let mut r = String::from("period");
    for t in tickers {
        r.push(',');
        r.push_str(t);
    }
    r.push('\n');
    for (k, row) in returns.iter().enumerate() {
        r.push_str(&format!("t{k}"));
        for v in row {
            r.push_str(&format!(",{v:e}"));
        }
        r.push('\n');
    }
    let mut p = String::from("ticker,price\n");
    for (t, v) in tickers.iter().zip(prices) {
        p.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(dir.join("returns.csv"), r).unwrap();
    std::fs::write(dir.join("prices.csv"), p).unwrap();
}

pub const TABLE_BUDGET: f64 = 1_000_000.0;
pub const TABLE_GAMMA: f64 = 3.0;

/// Four-asset market whose hot-start box has 2, 2, 5 and 2 integers.
///
/// Returns are `μ + Y·diag(σ)` with `Y` four mean-zero orthogonal ±√(7/8)
/// columns of an 8×8 Hadamard matrix, so the sample covariance is exactly
/// `diag(σ²)`. Prices and σ make `Σ̃ = diag(p²σ²) ∝ diag(1, 1, 0.1, 1)`;
/// with no risk-free rate and no trading cost, `μ` is backed out so the
/// continuous optimum is `x̂ = (194.55, 372.55, 1434.2, 489.55)`. The
/// rounding offsets (0.45, 0.45, 0.2, 0.45) then give half-widths
/// ≈ (0.78, 0.78, 2.47, 0.78).
pub fn write_table_fixture(dir: &Path) -> Vec<f64> {
    let x_hat = [194.55, 372.55, 1434.2, 489.55];
    write_diagonal_fixture(dir, &x_hat);
    x_hat.to_vec()
}

/// Same construction with an arbitrary continuous optimum.
pub fn write_diagonal_fixture(dir: &Path, x_hat: &[f64; 4]) {
    let tickers = ["AAA", "BBB", "CCC", "DDD"];
    let prices = [120.0, 45.0, 80.0, 250.0];
    let rel = [1.0, 1.0, 0.1, 1.0];
    // Σ̃ᵢᵢ = pᵢ²σᵢ² = 4·relᵢ
    let sigma: Vec<f64> = (0..4).map(|i| 2.0 * f64::sqrt(rel[i]) / prices[i]).collect();
    let gamma_tilde = TABLE_GAMMA / TABLE_BUDGET;
    // a = μ·p = γ̃·Σ̃·x̂
    let mu: Vec<f64> = (0..4).map(|i| gamma_tilde * 4.0 * rel[i] * x_hat[i] / prices[i]).collect();

    // Sylvester–Hadamard columns 1, 2, 4, 7 (all mean zero, mutually orthogonal).
    let had = |r: usize, c: usize| if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let cols = [1, 2, 4, 7];
    let s = f64::sqrt(7.0 / 8.0);
    let returns: Vec<Vec<f64>> =
        (0..8).map(|t| (0..4).map(|i| mu[i] + sigma[i] * s * had(t, cols[i])).collect()).collect();
    write_market(dir, &tickers, &prices, &returns);
}
