//! Linear SEMs and their mixing matrices.
//!
//! A SEM `x = Bᵀx + e` with `Cov(e) = Ω` corresponds to the mixing matrix
//! `A = (I − B) Ω^{-1/2}`, whose Gram matrix is the SEM's precision
//! `Θ = (I − B) Ω⁻¹ (I − B)ᵀ`. Going back requires picking a column order
//! that puts nonzeros on the diagonal and scaling those to one.

use crate::assignment::{min_cost_assignment, perfect_matching};
use crate::linalg;
use crate::model::{CovarianceMatrix, MixingMatrix, SemModel, SignedPermutation};
use crate::{Error, Matrix, Result};

/// Converts `a` to `(B, Ω)` and the signed permutation `π` used, so that
/// `π.apply(a) = (I − B) Ω^{-1/2}`.
///
/// The column permutation maximizes `∏ |(AP)ᵢᵢ|` among those with a
/// nonzero diagonal.
pub fn a_to_sem(a: &MixingMatrix) -> Result<(SemModel, SignedPermutation)> {
    if !a.is_nonsingular() {
        return Err(Error::Singular {
            reason: "mixing matrix is singular".into(),
            condition: f64::INFINITY,
        });
    }
    let m = a.matrix();
    let n = a.n();
    if perfect_matching(n, |r, c| m[(r, c)] != 0.0).is_none() {
        return Err(Error::input("support has no perfect matching"));
    }
    let logs: Vec<f64> = m.iter().filter(|v| **v != 0.0).map(|v| -v.abs().ln()).collect();
    let spread = logs.iter().map(|v| v.abs()).sum::<f64>();
    let forbidden = 1.0 + 2.0 * spread;
    let cost = m.map(|v| if v == 0.0 { forbidden } else { -v.abs().ln() });
    let (perm, _) = min_cost_assignment(&cost);
    let signs = (0..n).map(|i| if m[(i, perm[i])] < 0.0 { -1 } else { 1 }).collect();
    let pi = SignedPermutation::new(perm, signs)?;
    let apd = pi.apply(m);
    let omega: Vec<f64> = (0..n).map(|i| 1.0 / (apd[(i, i)] * apd[(i, i)])).collect();
    let mut b = Matrix::from_fn(n, n, |i, j| -apd[(i, j)] / apd[(j, j)] + 0.0);
    for i in 0..n {
        b[(i, i)] = 0.0;
    }
    Ok((SemModel::new(b, omega)?, pi))
}

/// `(I − B) Ω^{-1/2}`.
pub fn sem_to_a(m: &SemModel) -> MixingMatrix {
    let n = m.n();
    let ib = Matrix::identity(n, n) - m.b();
    let a = Matrix::from_fn(n, n, |i, j| ib[(i, j)] / m.omega()[j].sqrt());
    MixingMatrix::new(a).expect("SEM entries are finite")
}

/// Whether the nonzero pattern of `b` (edge `r → c` for `b[(r, c)] ≠ 0`)
/// is acyclic.
pub fn dag_check(b: &Matrix) -> Result<bool> {
    if !b.is_square() {
        return Err(Error::input("adjacency must be square"));
    }
    let n = b.nrows();
    if (0..n).any(|i| b[(i, i)] != 0.0) {
        return Err(Error::input("adjacency must have a zero diagonal"));
    }
    // iterative three-colour DFS
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let mut colour = vec![Colour::White; n];
    for root in 0..n {
        if colour[root] != Colour::White {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        colour[root] = Colour::Grey;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(v) = (*next..n).find(|&v| b[(u, v)] != 0.0) {
                *next = v + 1;
                match colour[v] {
                    Colour::Grey => return Ok(false),
                    Colour::White => {
                        colour[v] = Colour::Grey;
                        stack.push((v, 0));
                    }
                    Colour::Black => {}
                }
            } else {
                colour[u] = Colour::Black;
                stack.pop();
            }
        }
    }
    Ok(true)
}

/// Whether the DAG `b` is the only member of its Markov equivalence class,
/// judged by every pair of columns of `supp(I − B)` differing in more than
/// one entry.
pub fn mec_is_singleton(b: &Matrix) -> Result<bool> {
    if !dag_check(b)? {
        return Err(Error::input("graph has a directed cycle"));
    }
    let n = b.nrows();
    let on = |i: usize, j: usize| i == j || b[(i, j)] != 0.0;
    for j in 0..n {
        for k in j + 1..n {
            let diff = (0..n).filter(|&i| on(i, j) != on(i, k)).count();
            if diff <= 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Lower-triangular `L` with positive diagonal and `L Lᵀ = P₁ᵀ Σ P₁`, where
/// `(P₁ᵀ Σ P₁)[a][b] = Σ[p1[a]][p1[b]]`.
///
/// Fails when a pivot drops to `1e-12 · tr Σ` or below.
pub fn permuted_cholesky_factor(sigma: &CovarianceMatrix, p1: &[usize]) -> Result<MixingMatrix> {
    let n = sigma.n();
    if p1.len() != n || !linalg::is_permutation(p1) {
        return Err(Error::input("p1 must be a permutation of the covariance indices"));
    }
    let s = linalg::permute_symmetric(sigma.matrix(), p1);
    let floor = 1e-12 * s.trace();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(Error::Singular {
                reason: format!("covariance not positive definite (pivot {j} = {d:.3e})"),
                condition: f64::INFINITY,
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    MixingMatrix::new(l)
}
