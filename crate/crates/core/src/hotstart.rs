//! Bounding box for the integer optimum of a concave quadratic.
//!
//! With `x̂*` the continuous maximizer and `C = f(x̂*) − f(⌊x̂*⌉)` the loss of
//! naive rounding, every integer point that beats `⌊x̂*⌉` lies in the
//! ellipsoid `E = {x : (x − x̂*)ᵀ M (x − x̂*) ≤ 1}` with `M = B / (2C)`. The
//! axis-aligned box around `E` has half-widths `sqrt(diag(M⁻¹))`, so the
//! integer search can be restricted to `[⌈L⌉, ⌊U⌋]` per asset.

use crate::model::QuadraticModel;
use crate::numerics::{self, cholesky, quad_form, SymMatrix, Vector};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct HotStartBox<T> {
    pub x_star_cont: Vector<T>,
    pub f_star: T,
    pub rounded: Vec<i64>,
    pub gap_c: T,
    /// `M = B / (2C)`; `None` on the rounding shortcut.
    pub ellipsoid_matrix: Option<SymMatrix<T>>,
    /// `sqrt(diag(M⁻¹))`; empty on the rounding shortcut.
    pub halfwidths: Vec<T>,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    /// `x̂*` rounds without loss, so `⌊x̂*⌉` is already optimal.
    pub integral_shortcut: bool,
}

impl<T: Real> HotStartBox<T> {
    pub fn dim(&self) -> usize {
        self.rounded.len()
    }

    /// `Lᵢ = x̂*ᵢ − hᵢ` before integer rounding.
    pub fn real_lower(&self) -> Vec<T> {
        self.x_star_cont.iter().zip(&self.halfwidths).map(|(&x, &h)| x - h).collect()
    }

    pub fn real_upper(&self) -> Vec<T> {
        self.x_star_cont.iter().zip(&self.halfwidths).map(|(&x, &h)| x + h).collect()
    }

    /// Number of integers per asset in the box.
    pub fn integer_counts(&self) -> Vec<u64> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| (u - l + 1) as u64).collect()
    }

    /// Whether `x` lies in the (closed) ellipsoid. On the shortcut the
    /// ellipsoid degenerates to the single point `⌊x̂*⌉`.
    pub fn ellipsoid_contains(&self, x: &[i64]) -> bool {
        match &self.ellipsoid_matrix {
            None => x == self.rounded.as_slice(),
            Some(m) => {
                let d: Vec<T> = x
                    .iter()
                    .zip(self.x_star_cont.iter())
                    .map(|(&v, &c)| T::lit(v as f64) - c)
                    .collect();
                quad_form(m, &d).expect("dimension checked") <= T::one()
            }
        }
    }
}

/// Stationary point `x̂* = B⁻¹a` and its objective value.
pub fn continuous_optimum<T: Real>(m: &QuadraticModel<T>) -> numerics::Result<(Vector<T>, T)> {
    let f = cholesky(m.quadratic())?;
    let x = f.solve(m.linear())?;
    let fx = m.evaluate(&x)?;
    Ok((x, fx))
}

/// Nearest integer per component, ties away from zero.
pub fn round_nearest<T: Real>(x: &[T]) -> Vec<i64> {
    x.iter()
        .map(|v| v.round().to_i64().expect("rounded value fits in i64"))
        .collect()
}

/// `C = f̂* − f(⌊x̂*⌉)`, clamped to zero below `1e-12·(1 + |f̂*|)`.
pub fn gap_constant<T: Real>(m: &QuadraticModel<T>, x_star: &[T], f_star: T) -> T {
    let rounded = round_nearest(x_star);
    let f_round = m.evaluate_int(&rounded).expect("dimension checked");
    let c = f_star - f_round;
    if c < T::rel_tol(1e-12) * (T::one() + f_star.abs()) {
        T::zero()
    } else {
        c
    }
}

/// Runs the full hot-start construction on a canonical model.
///
/// The constant term is dropped before computing `C` so that the box is
/// bit-for-bit independent of it.
pub fn compute_box<T: Real>(m: &QuadraticModel<T>) -> numerics::Result<HotStartBox<T>> {
    let centered = m.with_constant(T::zero());
    let (x_star, f0_star) = continuous_optimum(&centered)?;
    let rounded = round_nearest(&x_star);
    let gap_c = gap_constant(&centered, &x_star, f0_star);
    let f_star = f0_star + m.constant();

    if gap_c == T::zero() {
        return Ok(HotStartBox {
            x_star_cont: x_star,
            f_star,
            lower: rounded.clone(),
            upper: rounded.clone(),
            rounded,
            gap_c,
            ellipsoid_matrix: None,
            halfwidths: Vec::new(),
            integral_shortcut: true,
        });
    }

    let ellipsoid = m.quadratic().scale(T::one() / (T::lit(2.0) * gap_c));
    let halfwidths: Vec<T> = cholesky(&ellipsoid)?.inverse_diagonal().iter().map(|v| v.sqrt()).collect();
    let mut lower = Vec::with_capacity(x_star.len());
    let mut upper = Vec::with_capacity(x_star.len());
    for ((&x, &h), &r) in x_star.iter().zip(&halfwidths).zip(&rounded) {
        let lo = (x - h).ceil().to_i64().expect("bound fits in i64");
        let hi = (x + h).floor().to_i64().expect("bound fits in i64");
        lower.push(lo.min(r));
        upper.push(hi.max(r));
    }
    Ok(HotStartBox {
        x_star_cont: x_star,
        f_star,
        rounded,
        gap_c,
        ellipsoid_matrix: Some(ellipsoid),
        halfwidths,
        lower,
        upper,
        integral_shortcut: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitCounts {
    pub per_asset: Vec<u32>,
    pub total: u64,
}

/// `⌈log₂(count)⌉`, with a single value needing no bits.
pub fn bits_for_count(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        u64::BITS - (count - 1).leading_zeros()
    }
}

pub fn qubit_counts<T: Real>(b: &HotStartBox<T>) -> QubitCounts {
    let per_asset: Vec<u32> = b.integer_counts().into_iter().map(bits_for_count).collect();
    let total = per_asset.iter().map(|&q| q as u64).sum();
    QubitCounts { per_asset, total }
}

/// Checks the ellipsoid guarantee at one integer point: inside `E` the
/// probe must not lose to `⌊x̂*⌉`, outside it must not beat it.
pub fn theorem1_certificate<T: Real>(m: &QuadraticModel<T>, b: &HotStartBox<T>, probe: &[i64]) -> bool {
    let f_round = m.evaluate_int(&b.rounded).expect("dimension checked");
    let f_probe = m.evaluate_int(probe).expect("dimension checked");
    let tol = T::rel_tol(1e-9) * (T::one() + f_round.abs());
    if b.ellipsoid_contains(probe) {
        f_probe >= f_round - tol
    } else {
        f_probe <= f_round + tol
    }
}
