//! Recovery metrics (MCC, Amari distance) and a FastICA baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::assignment::max_weight_assignment;
use crate::linalg;
use crate::model::{MixingMatrix, SignedPermutation};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub mcc: f64,
    pub amari: f64,
    /// Aligns estimated sources to true ones: column `j` of
    /// `matched_perm.apply(ŝ)` pairs with true source `j`.
    pub matched_perm: SignedPermutation,
}

/// `ŝ` with `Â ŝᵀ = xᵀ`, solved by factorization.
pub fn recover_sources(a_hat: &MixingMatrix, x: &Matrix) -> Result<Matrix> {
    if x.ncols() != a_hat.n() {
        return Err(Error::input("samples and mixing matrix do not conform"));
    }
    Ok(linalg::solve(a_hat.matrix(), &x.transpose())?.transpose())
}

fn centred_unit(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if !(norm > 1e-12 * (1.0 + mean.abs()) * (col.len() as f64).sqrt()) {
            return Err(Error::input(format!("column {j} has zero variance")));
        }
        col /= norm;
    }
    Ok(out)
}

/// Mean absolute Pearson correlation under the best one-to-one matching of
/// true and estimated sources, with the matching itself.
pub fn mcc_matched(s_true: &Matrix, s_hat: &Matrix) -> Result<(f64, SignedPermutation)> {
    if s_true.shape() != s_hat.shape() {
        return Err(Error::input("source matrices differ in shape"));
    }
    if s_true.nrows() < 2 {
        return Err(Error::input("need at least 2 samples"));
    }
    let n = s_true.ncols();
    let corr = centred_unit(s_true)?.transpose() * centred_unit(s_hat)?;
    let (assign, total) = max_weight_assignment(&corr.abs());
    let signs = (0..n)
        .map(|j| if corr[(j, assign[j])] < 0.0 { -1 } else { 1 })
        .collect();
    let perm = SignedPermutation::new(assign, signs)?;
    Ok(((total / n as f64).min(1.0), perm))
}

pub fn mcc(s_true: &Matrix, s_hat: &Matrix) -> Result<f64> {
    Ok(mcc_matched(s_true, s_hat)?.0)
}

/// Amari distance of `P = Â⁻¹ Ã`:
/// `(1/2n) Σᵢ(Σⱼ|pᵢⱼ|/maxⱼ|pᵢⱼ| − 1) + (1/2n) Σⱼ(Σᵢ|pᵢⱼ|/maxᵢ|pᵢⱼ| − 1)`.
pub fn amari_distance(a_hat: &MixingMatrix, a_true: &MixingMatrix) -> Result<f64> {
    if a_hat.n() != a_true.n() {
        return Err(Error::input("matrices differ in size"));
    }
    linalg::factor(a_true.matrix())?;
    let p = linalg::solve(a_hat.matrix(), a_true.matrix())?.abs();
    let n = p.nrows();
    let rows: f64 = p
        .row_iter()
        .map(|r| r.sum() / r.max() - 1.0)
        .sum();
    let cols: f64 = p
        .column_iter()
        .map(|c| c.sum() / c.max() - 1.0)
        .sum();
    Ok((rows + cols) / (2.0 * n as f64))
}

/// Both metrics for an estimate against a known truth.
pub fn evaluate(
    a_hat: &MixingMatrix,
    a_true: &MixingMatrix,
    x: &Matrix,
    s_true: &Matrix,
) -> Result<MetricsReport> {
    let s_hat = recover_sources(a_hat, x)?;
    let (mcc, matched_perm) = mcc_matched(s_true, &s_hat)?;
    Ok(MetricsReport {
        mcc,
        amari: amari_distance(a_hat, a_true)?,
        matched_perm,
    })
}

#[derive(Debug, Clone)]
pub struct FastIcaResult {
    pub mixing: MixingMatrix,
    pub converged: bool,
    pub iterations: usize,
}

pub const FASTICA_TOL: f64 = 1e-6;
pub const FASTICA_MAX_ITERS: usize = 500;

/// `(W Wᵀ)^{-1/2} W`.
fn symmetric_decorrelation(w: &Matrix) -> Matrix {
    let eig = (w * w.transpose()).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose() * w
}

/// Symmetric FastICA with the `tanh` contrast on eigen-whitened data.
///
/// Stops when every unmixing row changes direction by less than
/// [`FASTICA_TOL`] or after [`FASTICA_MAX_ITERS`] iterations; in the latter
/// case the last iterate is returned with `converged = false`.
pub fn fastica_baseline(x: &Matrix, n_components: usize, seed: u64) -> Result<FastIcaResult> {
    let (t, n) = x.shape();
    if n_components != n {
        return Err(Error::input("only square unmixing (n_components = n) is supported"));
    }
    if t <= n {
        return Err(Error::input("FastICA needs more samples than components"));
    }
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let cov = xc.transpose() * &xc / t as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * top) {
        return Err(Error::Singular {
            reason: "sample covariance is rank deficient".into(),
            condition: top / eig.eigenvalues.min().max(0.0),
        });
    }
    let e = &eig.eigenvectors;
    let whiten = Matrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt())) * e.transpose();
    let z = &xc * whiten.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FASTICA_MAX_ITERS {
        iterations += 1;
        let g = (&z * w.transpose()).map(f64::tanh);
        let mean_dg = Matrix::from_fn(n, 1, |i, _| {
            g.column(i).iter().map(|v| 1.0 - v * v).sum::<f64>() / t as f64
        });
        let mut next = g.transpose() * &z / t as f64;
        for i in 0..n {
            let scale = mean_dg[(i, 0)];
            for j in 0..n {
                next[(i, j)] -= scale * w[(i, j)];
            }
        }
        let next = symmetric_decorrelation(&next);
        let change = (0..n)
            .map(|i| (1.0 - next.row(i).dot(&w.row(i)).abs()).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < FASTICA_TOL {
            converged = true;
            break;
        }
    }
    // unmixing U = W K, so A = K⁻¹ Wᵀ = E D^{1/2} Wᵀ
    let unwhiten = e * Matrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(FastIcaResult {
        mixing: MixingMatrix::new(unwhiten * w.transpose())?,
        converged,
        iterations,
    })
}
