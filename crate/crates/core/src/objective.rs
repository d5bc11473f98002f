//! Differentiable pieces of the two estimators, each evaluated together with
//! its gradient.

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::{support_of, CovarianceMatrix, MixingMatrix};
use crate::{Error, Matrix, Result};

/// Value and gradient of a scalar function of an `n×n` matrix.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Matrix,
}

impl ObjectiveEval {
    pub fn zero(n: usize) -> Self {
        ObjectiveEval {
            value: 0.0,
            gradient: Matrix::zeros(n, n),
        }
    }

    /// `self + weight · other`.
    pub fn add_scaled(&mut self, weight: f64, other: &ObjectiveEval) {
        self.value += weight * other.value;
        linalg::axpy(&mut self.gradient, weight, &other.gradient);
    }
}

/// How `g(A)` accumulates its matrix powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GMode {
    /// One multiplication per power; reference implementation.
    Naive,
    /// Doubling recurrences, `O(log n)` multiplications.
    LogSquaring,
}

/// `M = off(A) ∘ off(A)`.
fn hadamard_off_square(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        if i == j {
            0.0
        } else {
            a[(i, j)] * a[(i, j)]
        }
    })
}

/// Returns `(Σ_{k=1}^{n} tr Mᵏ, Σ_{k=1}^{n} k Mᵏ⁻¹)`.
fn power_sums_naive(m: &Matrix) -> (f64, Matrix) {
    let n = m.nrows();
    let mut power = Matrix::identity(n, n); // M^{k-1}
    let mut weighted = Matrix::zeros(n, n);
    let mut trace = 0.0;
    for k in 1..=n {
        linalg::axpy(&mut weighted, k as f64, &power);
        power = &power * m;
        trace += power.trace();
    }
    (trace, weighted)
}

/// Same sums as [`power_sums_naive`] via
/// `P_{2m} = P_m + Mᵐ P_m`, `W_{2m} = W_m + Mᵐ (W_m + m P_m)`,
/// where `P_m = Σ_{k<m} Mᵏ` and `W_m = Σ_{k≤m} k Mᵏ⁻¹`.
fn power_sums_squaring(m: &Matrix) -> (f64, Matrix) {
    let n = m.nrows();
    let eye = Matrix::identity(n, n);
    if n == 0 {
        return (0.0, Matrix::zeros(0, 0));
    }
    // state for count = 1
    let mut count = 1usize;
    let mut p = eye.clone();
    let mut w = eye.clone();
    let mut pow = m.clone();
    let bits = usize::BITS - n.leading_zeros();
    for bit in (0..bits - 1).rev() {
        // double
        let mp = &pow * &p;
        let mut inner = w.clone();
        linalg::axpy(&mut inner, count as f64, &p);
        w += &pow * inner;
        p += mp;
        pow = &pow * &pow;
        count *= 2;
        if n >> bit & 1 == 1 {
            // increment
            linalg::axpy(&mut w, (count + 1) as f64, &pow);
            p = &eye + m * &p;
            pow = m * &pow;
            count += 1;
        }
    }
    debug_assert_eq!(count, n);
    // Σ_{k=1}^{n} Mᵏ = M P_n
    let trace = (m * &p).trace();
    (trace, w)
}

/// `g(A) = tr Σ_{k=2}^{n} (off(A) ∘ off(A))ᵏ` and its gradient
/// `(Σ_k k (Mᵏ⁻¹)ᵀ) ∘ 2 off(A)`.
///
/// `g(A) = 0` exactly when `A` can be brought to lower triangular form by a
/// simultaneous row and column permutation.
pub fn g_eval(a: &Matrix, mode: GMode) -> ObjectiveEval {
    let n = a.nrows();
    let m = hadamard_off_square(a);
    // tr M = 0 because M has a zero diagonal, so the k = 1 term drops out.
    let (value, weighted) = match mode {
        GMode::Naive => power_sums_naive(&m),
        GMode::LogSquaring => power_sums_squaring(&m),
    };
    let gradient = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            weighted[(j, i)] * 2.0 * a[(i, j)]
        }
    });
    ObjectiveEval {
        value: value.max(0.0),
        gradient,
    }
}

/// Minimax concave penalty parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McpParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl McpParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let p = McpParams { lambda, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::input("MCP lambda must be finite and >= 0"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::input("MCP alpha must be finite and > 0"));
        }
        Ok(())
    }

    /// `|a|` beyond which the penalty is flat.
    pub fn knee(&self) -> f64 {
        self.alpha * self.lambda
    }

    pub fn value(&self, a: f64) -> f64 {
        let x = a.abs();
        if x <= self.knee() {
            self.lambda * x - x * x / (2.0 * self.alpha)
        } else {
            self.alpha * self.lambda * self.lambda / 2.0
        }
    }

    /// Derivative, with `0` chosen at `a = 0`.
    pub fn derivative(&self, a: f64) -> f64 {
        if a == 0.0 || a.abs() > self.knee() {
            0.0
        } else {
            a.signum() * self.lambda - a / self.alpha
        }
    }
}

/// Entrywise MCP summed over all cells.
pub fn mcp_eval(a: &Matrix, p: &McpParams) -> ObjectiveEval {
    ObjectiveEval {
        value: a.iter().map(|&v| p.value(v)).sum(),
        gradient: a.map(|v| p.derivative(v)),
    }
}

/// MCP applied to `√(a² + δ²) − δ`, a C¹ surrogate that agrees with
/// [`mcp_eval`] as `δ → 0` and has no kink at zero. `δ = 0` gives the
/// exact penalty.
pub fn mcp_smoothed_eval(a: &Matrix, p: &McpParams, delta: f64) -> ObjectiveEval {
    if delta <= 0.0 {
        return mcp_eval(a, p);
    }
    let mut value = 0.0;
    let gradient = a.map(|v| {
        let r = v.hypot(delta);
        let s = r - delta;
        value += p.value(s);
        p.derivative(s) * v / r
    });
    ObjectiveEval { value, gradient }
}

/// Gaussian negative log-likelihood
/// `(T/2) tr((A Aᵀ)⁻¹ Σ̄) + T log|det A|`; divided by `T` when `averaged`.
///
/// The gradient is `T (A⁻ᵀ − (A Aᵀ)⁻¹ Σ̄ (A Aᵀ)⁻¹ A)`. For a population
/// covariance (`samples = 0`) `T` is taken as 1.
pub fn nll_eval(a: &Matrix, sigma_bar: &CovarianceMatrix, averaged: bool) -> Result<ObjectiveEval> {
    let n = a.nrows();
    if sigma_bar.n() != n {
        return Err(Error::input("covariance and matrix sizes differ"));
    }
    let f = linalg::factor(a)?;
    let inv = &f.inverse;
    let t = if averaged {
        1.0
    } else {
        sigma_bar.samples().max(1) as f64
    };
    // (A Aᵀ)⁻¹ = A⁻ᵀ A⁻¹
    let inv_t = inv.transpose();
    let precision = &inv_t * inv;
    let value = t * (0.5 * (&precision * sigma_bar.matrix()).trace() + f.log_abs_det);
    // (A Aᵀ)⁻¹ Σ̄ (A Aᵀ)⁻¹ A = A⁻ᵀ A⁻¹ Σ̄ A⁻ᵀ
    let gradient = (&inv_t - &precision * sigma_bar.matrix() * &inv_t) * t;
    if !value.is_finite() || gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite likelihood".into()));
    }
    Ok(ObjectiveEval { value, gradient })
}

/// `‖A Aᵀ − Σ̄‖²_F` with gradient `4 (A Aᵀ − Σ̄) A`.
pub fn decomposition_residual_eval(a: &Matrix, sigma_bar: &CovarianceMatrix) -> Result<ObjectiveEval> {
    if sigma_bar.n() != a.nrows() || !a.is_square() {
        return Err(Error::input("covariance and matrix sizes differ"));
    }
    let diff = a * a.transpose() - sigma_bar.matrix();
    Ok(ObjectiveEval {
        value: linalg::frobenius_sq(&diff),
        gradient: diff * a * 4.0,
    })
}

/// BIC-style score: un-averaged NLL plus `0.5 ‖A‖₀ log T` with `‖A‖₀`
/// counted after thresholding at `zero_tol`.
pub fn bic_score(a: &MixingMatrix, sigma_bar: &CovarianceMatrix, zero_tol: f64) -> Result<f64> {
    let t = sigma_bar.samples();
    if t < 1 {
        return Err(Error::input("BIC needs a recorded sample count T >= 1"));
    }
    let nll = nll_eval(a.matrix(), sigma_bar, false)?.value;
    let nnz = support_of(a, zero_tol).nnz() as f64;
    Ok(nll + 0.5 * nnz * (t as f64).ln())
}
