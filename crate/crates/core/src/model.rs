//! Concave quadratic objective `f(x) = aᵀx − ½xᵀBx + c` in canonical
//! maximization form, plus builders for the portfolio variants.

use crate::numerics::{self, check_dim, cholesky, quad_form, NumericsError, SymMatrix, Vector};
use crate::scalar::Real;

/// Canonical maximization problem. `quadratic` is positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel<T> {
    linear: Vector<T>,
    quadratic: SymMatrix<T>,
    constant: T,
}

impl<T: Real> QuadraticModel<T> {
    pub fn new(linear: Vector<T>, quadratic: SymMatrix<T>, constant: T) -> numerics::Result<Self> {
        check_dim(quadratic.dim(), linear.len())?;
        if !constant.is_finite() {
            return Err(NumericsError::NonFinite(0));
        }
        cholesky(&quadratic)?;
        Ok(Self { linear, quadratic, constant })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &Vector<T> {
        &self.linear
    }

    pub fn quadratic(&self) -> &SymMatrix<T> {
        &self.quadratic
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn with_constant(&self, constant: T) -> Self {
        Self { constant, ..self.clone() }
    }

    pub fn evaluate(&self, x: &[T]) -> numerics::Result<T> {
        check_dim(self.dim(), x.len())?;
        let lin: T = self.linear.iter().zip(x).map(|(&a, &v)| a * v).sum();
        let quad = quad_form(&self.quadratic, x)?;
        Ok(lin - T::lit(0.5) * quad + self.constant)
    }

    /// Objective at an integer point.
    pub fn evaluate_int(&self, x: &[i64]) -> numerics::Result<T> {
        let xr: Vec<T> = x.iter().map(|&v| T::lit(v as f64)).collect();
        self.evaluate(&xr)
    }

    /// `a − Bx`.
    pub fn gradient(&self, x: &Vector<T>) -> numerics::Result<Vector<T>> {
        let bx = self.quadratic.mul_vec(x)?;
        self.linear.axpy(-T::one(), &bx)
    }
}

/// Mean-variance objective `μ̃_fᵀx − (γ̃/2)·xᵀΣ̃x`.
pub fn build_basic<T: Real>(
    mu_tilde_f: &Vector<T>,
    sigma_tilde: &SymMatrix<T>,
    gamma_tilde: T,
) -> numerics::Result<QuadraticModel<T>> {
    QuadraticModel::new(mu_tilde_f.clone(), sigma_tilde.scale(gamma_tilde), T::zero())
}

/// Mean-variance objective with the quadratic trading penalty
/// `κ̃·(x − x₀)ᵀΣ̃(x − x₀)`, expanded into canonical form:
/// `a = μ̃_f + 2κ̃Σ̃x₀`, `B = (γ̃ + 2κ̃)Σ̃`, `c = −κ̃·x₀ᵀΣ̃x₀`.
pub fn build_with_transaction_costs<T: Real>(
    mu_tilde_f: &Vector<T>,
    sigma_tilde: &SymMatrix<T>,
    gamma_tilde: T,
    kappa_tilde: T,
    x0: &[i64],
) -> numerics::Result<QuadraticModel<T>> {
    check_dim(sigma_tilde.dim(), x0.len())?;
    check_dim(sigma_tilde.dim(), mu_tilde_f.len())?;
    let x0: Vector<T> = Vector::new(x0.iter().map(|&v| T::lit(v as f64)).collect())?;
    let two_kappa = T::lit(2.0) * kappa_tilde;
    let sx0 = sigma_tilde.mul_vec(&x0)?;
    let linear = mu_tilde_f.axpy(two_kappa, &sx0)?;
    let quadratic = sigma_tilde.scale(gamma_tilde + two_kappa);
    let constant = -kappa_tilde * x0.dot(&sx0)?;
    QuadraticModel::new(linear, quadratic, constant)
}
