//! Small dense linear-algebra helpers on top of nalgebra.

use crate::{Error, Matrix, Result};

/// Refuse to invert when the 1-norm condition estimate exceeds this.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative singular-value cutoff used by [`numeric_rank`].
pub const RANK_CUTOFF: f64 = 1e-9;

pub fn frobenius_sq(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `y += a · x` elementwise.
pub fn axpy(y: &mut Matrix, a: f64, x: &Matrix) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization of a square matrix together with its inverse and a
/// 1-norm condition number.
pub struct Factored {
    pub inverse: Matrix,
    pub log_abs_det: f64,
    pub condition: f64,
}

/// Factors `m` with partial pivoting. Fails when `m` is singular or its
/// condition number exceeds [`MAX_CONDITION`].
pub fn factor(m: &Matrix) -> Result<Factored> {
    if !m.is_square() {
        return Err(Error::input("factorization requires a square matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in matrix to factor".into()));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut log_abs_det = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 {
            return Err(Error::Singular {
                reason: "zero pivot".into(),
                condition: f64::INFINITY,
            });
        }
        log_abs_det += d.ln();
    }
    let inverse = lu.try_inverse().ok_or_else(|| Error::Singular {
        reason: "LU inverse failed".into(),
        condition: f64::INFINITY,
    })?;
    let condition = norm1(m) * norm1(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular {
            reason: "condition number above guard".into(),
            condition,
        });
    }
    Ok(Factored {
        inverse,
        log_abs_det,
        condition,
    })
}

/// Solves `m x = rhs` for a square `m` (columns of `rhs` solved jointly).
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if !m.is_square() || m.nrows() != rhs.nrows() {
        return Err(Error::input("solve: shape mismatch"));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let (lo, hi) = (0..u.nrows())
        .map(|i| u[(i, i)].abs())
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    // pivot ratio is a cheap lower bound on the condition number
    let condition = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular {
            reason: "pivot ratio above guard".into(),
            condition,
        });
    }
    lu.solve(rhs).ok_or_else(|| Error::Singular {
        reason: "LU solve failed".into(),
        condition,
    })
}

/// Numeric rank using singular values above `RANK_CUTOFF · σ_max`.
pub fn numeric_rank(m: &Matrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_CUTOFF * smax).count()
}

/// `|det m|` divided by the product of column norms; 0 for a zero column.
pub fn relative_det(m: &Matrix) -> f64 {
    let mut scale = 1.0;
    for c in m.column_iter() {
        let nrm = c.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        scale *= nrm;
    }
    (m.determinant() / scale).abs()
}

/// Returns `P` where `P[(a, b)] = m[(perm[a], perm[b])]`.
pub fn permute_symmetric(m: &Matrix, perm: &[usize]) -> Matrix {
    let n = perm.len();
    Matrix::from_fn(n, n, |a, b| m[(perm[a], perm[b])])
}

/// Returns the matrix with rows reordered by `rows` and columns by `cols`.
pub fn permute(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}
