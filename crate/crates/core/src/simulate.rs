//! Ground-truth generation: sparse mixing matrices, standardized sources,
//! samples and their empirical covariance.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{support_of, CovarianceMatrix, Dataset, MixingMatrix, SupportPattern};
use crate::structure::{check_lower_triangularizable, check_structural_variability};
use crate::{Error, Matrix, Result};

/// Which structural assumptions the generated support satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Structural variability and lower-triangularizability both hold.
    #[default]
    Valid,
    /// Neither holds.
    Violating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub edge_prob: f64,
    pub gaussian_ratio: f64,
    pub weight_range: (f64, f64),
    pub seed: u64,
    pub max_rejections: usize,
    pub regime: Regime,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 10,
            t: 1000,
            edge_prob: 0.4,
            gaussian_ratio: 1.0,
            weight_range: (0.2, 0.8),
            seed: 0,
            max_rejections: 100_000,
            regime: Regime::Valid,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::input("n must be at least 1"));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob < 1.0) {
            return Err(Error::input("edge_prob must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gaussian_ratio) {
            return Err(Error::input("gaussian_ratio must lie in [0, 1]"));
        }
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::input("weight_range needs 0 < lo < hi"));
        }
        if self.max_rejections == 0 {
            return Err(Error::input("max_rejections must be at least 1"));
        }
        if self.regime == Regime::Violating && self.n < 2 {
            return Err(Error::input("the violating regime needs n >= 2"));
        }
        Ok(())
    }
}

fn signed_weight(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    let m = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn weigh(xi: &SupportPattern, range: (f64, f64), rng: &mut impl Rng) -> Result<MixingMatrix> {
    let n = xi.n();
    let mut a = Matrix::zeros(n, n);
    for (i, j) in xi.cells() {
        a[(i, j)] = signed_weight(range.0, range.1, rng);
    }
    MixingMatrix::new(a)
}

/// Unit diagonal plus a random DAG, relabelled by a random simultaneous
/// permutation.
fn dag_pattern(n: usize, p: f64, rng: &mut impl Rng) -> SupportPattern {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut xi = SupportPattern::identity(n);
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(p) {
                xi.set(order[i], order[j], true);
            }
        }
    }
    xi
}

/// Full diagonal plus independent off-diagonal cells, with one column's
/// pattern copied onto another so that structural variability fails.
fn violating_pattern(n: usize, p: f64, rng: &mut impl Rng) -> SupportPattern {
    let mut xi = SupportPattern::identity(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                xi.set(i, j, true);
            }
        }
    }
    let j = rng.random_range(0..n);
    let mut k = rng.random_range(0..n - 1);
    if k >= j {
        k += 1;
    }
    for i in 0..n {
        let on = xi.get(i, j);
        xi.set(i, k, on);
    }
    xi
}

/// Draws a mixing matrix for `cfg.regime`, rejecting until the support has
/// the required structure. Returns the matrix and the number of draws.
pub fn sample_mixing(cfg: &SimConfig, rng: &mut impl Rng) -> Result<(MixingMatrix, usize)> {
    cfg.validate()?;
    let n = cfg.n;
    for attempt in 1..=cfg.max_rejections {
        let xi = match cfg.regime {
            Regime::Valid => dag_pattern(n, cfg.edge_prob, rng),
            Regime::Violating => violating_pattern(n, cfg.edge_prob, rng),
        };
        let variability = check_structural_variability(&xi);
        if cfg.regime == Regime::Valid && !variability {
            continue;
        }
        if cfg.regime == Regime::Violating && variability {
            continue;
        }
        let a = weigh(&xi, cfg.weight_range, rng)?;
        if !a.is_nonsingular() {
            continue;
        }
        let triangular = check_lower_triangularizable(&a)?;
        let accepted = match cfg.regime {
            Regime::Valid => triangular,
            Regime::Violating => !triangular,
        };
        if accepted {
            debug_assert_eq!(support_of(&a, 0.0), xi);
            return Ok((a, attempt));
        }
    }
    Err(Error::Generation {
        attempts: cfg.max_rejections,
        acceptance_rate: 0.0,
    })
}

/// `T×n` standardized sources: the first `⌊ratio·n⌋` columns standard
/// normal, the rest `Exp(1) − 1`.
pub fn sample_sources(n: usize, t: usize, gaussian_ratio: f64, rng: &mut impl Rng) -> Matrix {
    let gaussian = ((gaussian_ratio * n as f64) + 1e-9).floor() as usize;
    let mut s = Matrix::zeros(t, n);
    for j in 0..n {
        for i in 0..t {
            s[(i, j)] = if j < gaussian {
                StandardNormal.sample(rng)
            } else {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            };
        }
    }
    s
}

/// `X = S Aᵀ` and `Σ̄ = (1/T) X_cᵀ X_c` with `X_c` column-centred.
pub fn mix_and_covariance(
    a: &MixingMatrix,
    s: &Matrix,
    gaussian_ratio: f64,
) -> Result<(Dataset, CovarianceMatrix)> {
    if s.ncols() != a.n() {
        return Err(Error::input("sources and mixing matrix do not conform"));
    }
    if s.nrows() < 2 {
        return Err(Error::input("need at least 2 samples"));
    }
    let x = s * a.matrix().transpose();
    let sigma = empirical_covariance(&x)?;
    let data = Dataset::new(x, Some(a.clone()), Some(s.clone()), gaussian_ratio)?;
    Ok((data, sigma))
}

/// Biased (`1/T`) covariance of the columns of `x`.
pub fn empirical_covariance(x: &Matrix) -> Result<CovarianceMatrix> {
    let t = x.nrows();
    if t < 2 {
        return Err(Error::input("need at least 2 samples"));
    }
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let cov = xc.transpose() * &xc / t as f64;
    let sym = (&cov + cov.transpose()) * 0.5;
    CovarianceMatrix::new(sym, t)
}

/// A generated dataset together with its covariance and the number of
/// mixing-matrix draws it took.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub sigma: CovarianceMatrix,
    pub attempts: usize,
}

impl Simulation {
    pub fn truth(&self) -> &MixingMatrix {
        self.dataset.true_a.as_ref().expect("simulated data has a truth")
    }
}

/// Mixing matrix, sources, samples and covariance from one seeded stream.
pub fn generate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    if cfg.t < 2 {
        return Err(Error::input("need at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (a, attempts) = sample_mixing(cfg, &mut rng)?;
    let s = sample_sources(cfg.n, cfg.t, cfg.gaussian_ratio, &mut rng);
    let (dataset, sigma) = mix_and_covariance(&a, &s, cfg.gaussian_ratio)?;
    Ok(Simulation {
        dataset,
        sigma,
        attempts,
    })
}
