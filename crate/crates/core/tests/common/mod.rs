//! Brute-force oracles and random draws shared by the integration targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use sparse_ica::model::SupportPattern;

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Row `r` of the result is row `rows[r]` of `xi`, column `c` is column
/// `cols[c]`.
fn lower_after(xi: &SupportPattern, rows: &[usize], cols: &[usize]) -> bool {
    let n = xi.n();
    (0..n).all(|r| (r + 1..n).all(|c| !xi.get(rows[r], cols[c])))
}

/// Some permutation applied to rows and columns alike leaves no entry
/// above the diagonal.
pub fn simultaneous_lower_oracle(xi: &SupportPattern) -> bool {
    permutations(xi.n()).iter().any(|p| lower_after(xi, p, p))
}

/// Independent row and column permutations give a lower-triangular
/// pattern with a full diagonal.
pub fn pair_lower_oracle(xi: &SupportPattern) -> bool {
    let perms = permutations(xi.n());
    perms.iter().any(|rows| {
        perms
            .iter()
            .any(|cols| lower_after(xi, rows, cols) && (0..xi.n()).all(|d| xi.get(rows[d], cols[d])))
    })
}

/// Some permutation of columns has every diagonal cell set.
pub fn has_perfect_matching(xi: &SupportPattern) -> bool {
    permutations(xi.n()).iter().any(|p| (0..xi.n()).all(|i| xi.get(i, p[i])))
}

pub fn random_pattern(n: usize, density: f64, rng: &mut impl Rng) -> SupportPattern {
    let cells: Vec<bool> = (0..n * n).map(|_| rng.random_bool(density)).collect();
    SupportPattern::from_fn(n, |i, j| cells[i * n + j])
}

/// A pattern containing a random permutation, so any generic weighting is
/// non-singular.
pub fn random_nonsingular_pattern(n: usize, density: f64, rng: &mut impl Rng) -> SupportPattern {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    let cells: Vec<bool> = (0..n * n).map(|_| rng.random_bool(density)).collect();
    SupportPattern::from_fn(n, |i, j| p[i] == j || cells[i * n + j])
}

/// Weights of magnitude in `[0.2, 1.0)` with random signs on `xi`.
pub fn instantiate(xi: &SupportPattern, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(xi.n(), xi.n(), |i, j| {
        if xi.get(i, j) {
            let v = rng.random_range(0.2..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        } else {
            0.0
        }
    })
}

/// Assumption 4 straight from the definition: for every column subset
/// `I` with `|I| ≥ 2`, the union of supports minus the rank of the
/// all-shared rows exceeds every member's support size.
pub fn assumption4_oracle(xi: &SupportPattern) -> bool {
    let n = xi.n();
    for subset in 0usize..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|j| subset >> j & 1 == 1).collect();
        if members.len() < 2 {
            continue;
        }
        let union = (0..n).filter(|&r| members.iter().any(|&j| xi.get(r, j))).count();
        let shared_rows = (0..n).filter(|&r| members.iter().all(|&j| xi.get(r, j))).count();
        let rank = shared_rows.min(1);
        for &i in &members {
            if union - rank <= xi.column(i).len() {
                return false;
            }
        }
    }
    true
}

/// Central differences with step `1e-6·(1 + |a|)`; returns the relative
/// Frobenius error against `analytic`.
pub fn gradient_error(f: impl Fn(&DMatrix<f64>) -> f64, a: &DMatrix<f64>, analytic: &DMatrix<f64>) -> f64 {
    let mut fd = DMatrix::zeros(a.nrows(), a.ncols());
    for k in 0..a.len() {
        let h = 1e-6 * (1.0 + a[k].abs());
        let (mut up, mut dn) = (a.clone(), a.clone());
        up[k] += h;
        dn[k] -= h;
        fd[k] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    (fd - analytic).norm() / analytic.norm().max(1e-300)
}
