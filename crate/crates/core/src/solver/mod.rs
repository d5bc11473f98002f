//! Quadratic-penalty estimators of a sparse mixing matrix.
//!
//! Both methods repeatedly minimize a penalized objective with L-BFGS,
//! warm-starting each outer iteration from the previous one and growing the
//! penalty coefficient `c_k` geometrically until the constraints hold:
//!
//! - decomposition: `ρ(A) + (c_k/2)‖AAᵀ − Σ̄‖²_F + (c_k/2) g(A)²`
//! - likelihood: `L̄(A; Σ̄) + ρ(A) + (c_k/2) g(A)²` with `L̄` the averaged
//!   Gaussian negative log-likelihood.
//!
//! Each restart starts from an independent uniform draw; the final estimate
//! is thresholded and chosen by [`select_model`].

pub mod lbfgs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{support_of, CovarianceMatrix, MixingMatrix, DEFAULT_ZERO_TOL};
use crate::objective::{
    bic_score, decomposition_residual_eval, g_eval, mcp_smoothed_eval, nll_eval, GMode, McpParams,
    ObjectiveEval,
};
use crate::{linalg, Error, Matrix, Result};

pub use lbfgs::{LbfgsOptions, Minimum, StopReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Decomposition,
    Likelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub c1: f64,
    pub beta: f64,
    pub k_max: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub inner_iters: usize,
    pub restarts: usize,
    pub init_scale: f64,
    pub mcp: McpParams,
    pub threshold: f64,
    /// Off gives the "vanilla" estimators without the triangularity penalty.
    pub use_g_constraint: bool,
    pub seed: u64,
    /// Ridge `η` added to the covariance diagonal before solving.
    pub ridge: f64,
    pub g_mode: GMode,
    pub lbfgs_memory: usize,
    /// After thresholding, refit the fit term on the surviving support.
    pub refit: bool,
    /// After the refit, search column-pair rotations for a sparser estimate
    /// with the same fit.
    pub polish: bool,
    /// Width `δ` of the smoothing applied to the penalty at zero inside the
    /// inner solves; `0` uses the exact penalty.
    pub mcp_smoothing: f64,
}

impl SolverConfig {
    pub fn decomposition() -> Self {
        SolverConfig {
            method: Method::Decomposition,
            c1: 1e-5,
            mcp: McpParams {
                lambda: 1.0,
                alpha: 40.0,
            },
            mcp_smoothing: 0.0,
            ..Self::shared()
        }
    }

    pub fn likelihood() -> Self {
        SolverConfig {
            method: Method::Likelihood,
            c1: 1e-2,
            mcp: McpParams {
                lambda: 0.1,
                alpha: 10.0,
            },
            ..Self::shared()
        }
    }

    pub fn for_method(method: Method) -> Self {
        match method {
            Method::Decomposition => Self::decomposition(),
            Method::Likelihood => Self::likelihood(),
        }
    }

    fn shared() -> Self {
        SolverConfig {
            method: Method::Likelihood,
            c1: 1e-2,
            beta: 1.5,
            k_max: 125,
            eps1: 1e-8,
            eps2: 1e-8,
            inner_iters: 250,
            restarts: 30,
            init_scale: 0.1,
            mcp: McpParams {
                lambda: 0.1,
                alpha: 10.0,
            },
            threshold: DEFAULT_ZERO_TOL,
            use_g_constraint: true,
            seed: 0,
            ridge: 0.0,
            g_mode: GMode::LogSquaring,
            lbfgs_memory: 10,
            refit: true,
            polish: true,
            mcp_smoothing: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.c1) {
            return Err(Error::input("c1 must be positive"));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::input("beta must exceed 1"));
        }
        if !positive(self.eps1) || !positive(self.eps2) {
            return Err(Error::input("tolerances must be positive"));
        }
        if self.k_max == 0 || self.inner_iters == 0 || self.restarts == 0 {
            return Err(Error::input("k_max, inner_iters and restarts must be at least 1"));
        }
        if !positive(self.init_scale) {
            return Err(Error::input("init_scale must be positive"));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::input("threshold must be non-negative"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::input("ridge must be non-negative"));
        }
        if !(self.mcp_smoothing >= 0.0 && self.mcp_smoothing.is_finite()) {
            return Err(Error::input("mcp_smoothing must be non-negative"));
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::input("lbfgs_memory must be at least 1"));
        }
        self.mcp.validate()
    }

    fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iters: self.inner_iters,
            memory: self.lbfgs_memory,
            ..Default::default()
        }
    }
}

/// Constraint violations of the returned estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `‖AAᵀ − Σ̄‖²_F`.
    pub residual: f64,
    pub g_value: f64,
    /// Both violations are below their tolerances (`residual` only counts
    /// for the decomposition method, `g_value` only with the constraint on).
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub c: f64,
    pub objective: f64,
    pub residual: f64,
    pub g_value: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub method: Method,
    /// Final estimate: thresholded and, with `refit`, refitted on its support.
    pub a_hat: MixingMatrix,
    /// Last penalty-loop iterate, before thresholding.
    pub a_raw: MixingMatrix,
    pub feasibility: Feasibility,
    /// The penalty loop met its break condition before `k_max`.
    pub converged: bool,
    pub nnz: usize,
    /// Penalized objective at the last outer iteration.
    pub objective: f64,
    /// BIC for the likelihood method, `‖Â‖₀` for the decomposition method.
    pub score: f64,
    pub restart_index: usize,
    pub restarts_tried: usize,
    pub restarts_failed: usize,
    pub trace: Vec<OuterRecord>,
}

/// Runs L-BFGS on `f` from `x0` for at most `iters` iterations.
pub fn inner_minimize<F>(f: F, x0: &MixingMatrix, iters: usize) -> Result<MixingMatrix>
where
    F: FnMut(&Matrix) -> Result<ObjectiveEval>,
{
    let opts = LbfgsOptions {
        max_iters: iters,
        ..Default::default()
    };
    MixingMatrix::new(lbfgs::minimize(f, x0.matrix(), &opts)?.x)
}

pub fn solve_decomposition(sigma_bar: &CovarianceMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    if cfg.method != Method::Decomposition {
        return Err(Error::input("config method is not decomposition"));
    }
    solve(sigma_bar, cfg)
}

pub fn solve_likelihood(sigma_bar: &CovarianceMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    if cfg.method != Method::Likelihood {
        return Err(Error::input("config method is not likelihood"));
    }
    if sigma_bar.samples() < 1 {
        return Err(Error::input(
            "likelihood method needs a covariance with a recorded sample count",
        ));
    }
    solve(sigma_bar, cfg)
}

/// Dispatches on `cfg.method`.
pub fn solve(sigma_bar: &CovarianceMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if sigma_bar.n() == 0 {
        return Err(Error::input("empty covariance"));
    }
    let sigma = if cfg.ridge > 0.0 {
        sigma_bar.ridge(cfg.ridge)?
    } else {
        sigma_bar.clone()
    };
    let runs: Vec<Option<SolveResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&sigma, cfg, r).ok())
        .collect();
    let failed = runs.iter().filter(|r| r.is_none()).count();
    let candidates: Vec<SolveResult> = runs.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Err(Error::Numeric(format!("all {} restarts failed", cfg.restarts)));
    }
    let mut best = select_model(&candidates, &sigma, cfg)?;
    best.restarts_tried = cfg.restarts;
    best.restarts_failed = failed;
    Ok(best)
}

/// Violations of the raw iterate `a`.
fn violations(a: &Matrix, sigma: &CovarianceMatrix, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let residual = decomposition_residual_eval(a, sigma)?.value;
    Ok((residual, g_eval(a, cfg.g_mode).value))
}

fn broke_out(residual: f64, g: f64, cfg: &SolverConfig) -> bool {
    let g_ok = !cfg.use_g_constraint || g < cfg.eps2;
    match cfg.method {
        Method::Decomposition => residual < cfg.eps1 && g_ok,
        Method::Likelihood => g_ok,
    }
}

fn penalized(a: &Matrix, sigma: &CovarianceMatrix, cfg: &SolverConfig, c: f64) -> Result<ObjectiveEval> {
    let mut total = mcp_smoothed_eval(a, &cfg.mcp, cfg.mcp_smoothing);
    match cfg.method {
        Method::Decomposition => {
            total.add_scaled(0.5 * c, &decomposition_residual_eval(a, sigma)?);
        }
        Method::Likelihood => {
            total.add_scaled(1.0, &nll_eval(a, sigma, true)?);
        }
    }
    if cfg.use_g_constraint {
        // d(g²)/dA = 2 g ∇g
        let g = g_eval(a, cfg.g_mode);
        total.value += 0.5 * c * g.value * g.value;
        linalg::axpy(&mut total.gradient, c * g.value, &g.gradient);
    }
    Ok(total)
}

/// Minimizes the fit term (plus the `g²` term at coefficient `c`) over the
/// nonzero entries of `start`, keeping its zeros fixed. Entries that fall to
/// the threshold or below are zeroed and the fit is repeated.
fn refit(start: &MixingMatrix, sigma: &CovarianceMatrix, cfg: &SolverConfig, c: f64) -> Result<MixingMatrix> {
    let opts = LbfgsOptions {
        max_iters: 4 * cfg.inner_iters,
        memory: cfg.lbfgs_memory,
        ftol: 0.0,
        ..Default::default()
    };
    let mut a = start.thresholded(cfg.threshold).into_matrix();
    for _ in 0..a.len() {
        let mask = a.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
        let fit = |x: &Matrix| -> Result<ObjectiveEval> {
            let mut total = match cfg.method {
                Method::Decomposition => decomposition_residual_eval(x, sigma)?,
                Method::Likelihood => nll_eval(x, sigma, true)?,
            };
            if cfg.use_g_constraint {
                let g = g_eval(x, cfg.g_mode);
                // the decomposition objective weighs residual and g² equally
                let w = match cfg.method {
                    Method::Decomposition => 1.0,
                    Method::Likelihood => 0.5 * c,
                };
                total.value += w * g.value * g.value;
                linalg::axpy(&mut total.gradient, 2.0 * w * g.value, &g.gradient);
            }
            total.gradient.component_mul_assign(&mask);
            Ok(total)
        };
        let m = lbfgs::minimize(fit, &a, &opts)?;
        let dropped = m.x.iter().zip(mask.iter()).any(|(v, on)| *on != 0.0 && v.abs() <= cfg.threshold);
        a = m.x.component_mul(&mask);
        if !dropped {
            break;
        }
        a = a.map(|v| if v.abs() > cfg.threshold { v } else { 0.0 });
    }
    MixingMatrix::new(a)
}

/// Fills columns of `a` that are entirely zero with the leading
/// eigenvectors of the unexplained covariance `Σ̄ − AAᵀ`, scaled by the
/// square roots of their eigenvalues. Returns `None` when no column is empty
/// or the residual has no positive direction left.
fn fill_empty_columns(a: &Matrix, sigma: &CovarianceMatrix) -> Option<Matrix> {
    let empty: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).iter().all(|v| *v == 0.0)).collect();
    if empty.is_empty() {
        return None;
    }
    let resid = sigma.matrix() - a * a.transpose();
    let eig = nalgebra::SymmetricEigen::new(0.5 * (&resid + resid.transpose()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut out = a.clone();
    let mut filled = false;
    for (&j, &e) in empty.iter().zip(order.iter()) {
        let lam = eig.eigenvalues[e];
        if lam > 0.0 {
            out.set_column(j, &(eig.eigenvectors.column(e) * lam.sqrt()));
            filled = true;
        }
    }
    filled.then_some(out)
}

/// Reorders (and re-signs) the columns of `a` so the diagonal is the
/// max-product matching. Neither fit term nor `‖A‖₀` changes, but `g` only
/// vanishes when the diagonal is occupied. Singular inputs are returned
/// unchanged.
fn align_columns(a: Matrix) -> Matrix {
    match MixingMatrix::new(a.clone()).and_then(|m| crate::causal::a_to_sem(&m)) {
        Ok((_, pi)) => pi.apply(&a),
        Err(_) => a,
    }
}

fn nnz_of(a: &Matrix) -> usize {
    a.iter().filter(|v| **v != 0.0).count()
}

/// Every single column-pair rotation of `a` that zeroes one entry, with
/// entries at or below `threshold` set to zero.
fn zeroing_rotations(a: &Matrix, threshold: f64) -> Vec<Matrix> {
    let n = a.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for r in 0..n {
                let (ai, aj) = (a[(r, i)], a[(r, j)]);
                if ai == 0.0 || aj == 0.0 {
                    // a lone nonzero can only be moved, not removed
                    continue;
                }
                for theta in [(-ai).atan2(aj), aj.atan2(ai)] {
                    let (sn, cs) = theta.sin_cos();
                    let mut rot = a.clone();
                    for row in 0..n {
                        let (x, y) = (a[(row, i)], a[(row, j)]);
                        let u = cs * x + sn * y;
                        let v = -sn * x + cs * y;
                        rot[(row, i)] = if u.abs() > threshold { u } else { 0.0 };
                        rot[(row, j)] = if v.abs() > threshold { v } else { 0.0 };
                    }
                    out.push(rot);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Standing {
    feasible: bool,
    residual: f64,
    g_value: f64,
    score: f64,
}

impl Standing {
    fn of(a: &MixingMatrix, sigma: &CovarianceMatrix, cfg: &SolverConfig) -> Option<Self> {
        let (residual, g_value) = violations(a.matrix(), sigma, cfg).ok()?;
        let score = match cfg.method {
            Method::Likelihood => bic_score(a, sigma, 0.0).ok()?,
            Method::Decomposition => nnz_of(a.matrix()) as f64,
        };
        Some(Standing {
            feasible: broke_out(residual, g_value, cfg),
            residual,
            g_value,
            score,
        })
    }

    /// `self` (a sparser candidate) may replace `other`.
    fn no_worse_than(&self, other: &Standing, cfg: &SolverConfig) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.score <= other.score,
            (false, false) => {
                let fit_ok = match cfg.method {
                    Method::Decomposition => self.residual <= other.residual * (1.0 + 1e-6) + 1e-12,
                    Method::Likelihood => self.score <= other.score,
                };
                let g_ok = !cfg.use_g_constraint || self.g_value <= other.g_value.max(cfg.eps2);
                fit_ok && g_ok
            }
        }
    }
}

/// Sparsification by Givens rotations of column pairs.
///
/// `AAᵀ` is invariant under `A ← AQ` for orthogonal `Q`, so rotating two
/// columns leaves both fit terms unchanged. We look up to two rotations
/// ahead (the first may keep `‖A‖₀` level) for a matrix with fewer nonzeros
/// whose triangularity violation does not grow, refit it on its support and
/// keep it unless it stands worse. Repeats until no such move exists.
fn polish(start: MixingMatrix, sigma: &CovarianceMatrix, cfg: &SolverConfig, c: f64) -> Result<MixingMatrix> {
    let mut best = start;
    let Some(mut standing) = Standing::of(&best, sigma, cfg) else {
        return Ok(best);
    };
    'outer: loop {
        let a = best.matrix().clone();
        let nnz = nnz_of(&a);
        let g_cap = standing.g_value.max(cfg.eps2);
        let promising = |m: &Matrix| {
            nnz_of(m) < nnz && (!cfg.use_g_constraint || g_eval(m, cfg.g_mode).value <= g_cap)
        };
        for first in zeroing_rotations(&a, cfg.threshold) {
            let level = nnz_of(&first);
            if level > nnz {
                continue;
            }
            let seconds = if level == nnz {
                zeroing_rotations(&first, cfg.threshold)
            } else {
                vec![first]
            };
            for cand in seconds.into_iter().map(align_columns).filter(|m| promising(m)) {
                let Ok(fitted) = refit(&MixingMatrix::new(cand)?, sigma, cfg, c) else {
                    continue;
                };
                if nnz_of(fitted.matrix()) >= nnz {
                    continue;
                }
                if let Some(st) = Standing::of(&fitted, sigma, cfg) {
                    if st.no_worse_than(&standing, cfg) {
                        best = fitted;
                        standing = st;
                        continue 'outer;
                    }
                }
            }
        }
        return Ok(best);
    }
}

/// One restart: the full outer loop from a seeded uniform start, followed
/// by thresholding and (when `cfg.refit`) a support-restricted refit.
pub fn run_restart(sigma: &CovarianceMatrix, cfg: &SolverConfig, index: usize) -> Result<SolveResult> {
    let n = sigma.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let s = cfg.init_scale;
    let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-s..=s));
    let opts = cfg.lbfgs();
    let mut c = cfg.c1;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut objective = f64::NAN;

    for k in 1..=cfg.k_max {
        let m = lbfgs::minimize(|x| penalized(x, sigma, cfg, c), &a, &opts)?;
        a = m.x;
        objective = m.value;
        let (residual, g_value) = violations(&a, sigma, cfg)?;
        trace.push(OuterRecord {
            k,
            c,
            objective,
            residual,
            g_value,
            inner_iterations: m.iterations,
        });
        if broke_out(residual, g_value, cfg) {
            converged = true;
            break;
        }
        if k < cfg.k_max {
            c *= cfg.beta;
        }
    }

    if cfg.use_g_constraint {
        a = align_columns(a);
    }
    let a_raw = MixingMatrix::new(a)?;
    let mut a_hat = if cfg.refit {
        refit(&a_raw, sigma, cfg, c)?
    } else {
        a_raw.thresholded(cfg.threshold)
    };
    if cfg.polish {
        a_hat = polish(a_hat, sigma, cfg, c)?;
    }
    if cfg.refit {
        if let Some(filled) = fill_empty_columns(a_hat.matrix(), sigma) {
            a_hat = refit(&MixingMatrix::new(align_columns(filled))?, sigma, cfg, c)?;
            if cfg.polish {
                a_hat = polish(a_hat, sigma, cfg, c)?;
            }
        }
    }
    let (residual, g_value) = violations(a_hat.matrix(), sigma, cfg)?;
    let nnz = support_of(&a_hat, 0.0).nnz();
    let score = match cfg.method {
        Method::Likelihood => bic_score(&a_hat, sigma, 0.0).unwrap_or(f64::INFINITY),
        Method::Decomposition => nnz as f64,
    };
    Ok(SolveResult {
        method: cfg.method,
        a_hat,
        a_raw,
        feasibility: Feasibility {
            residual,
            g_value,
            feasible: broke_out(residual, g_value, cfg),
        },
        converged,
        nnz,
        objective,
        score,
        restart_index: index,
        restarts_tried: 1,
        restarts_failed: 0,
        trace,
    })
}

/// Picks the final estimate among restart results.
///
/// Feasible candidates win over infeasible ones. Among feasible candidates
/// the likelihood method minimizes BIC and the decomposition method
/// minimizes `‖Â‖₀`, breaking ties by the smaller residual. If nothing is
/// feasible the least-violating candidate is returned with
/// `feasibility.feasible = false`. Remaining ties go to the lower restart
/// index, so the choice does not depend on evaluation order.
pub fn select_model(
    candidates: &[SolveResult],
    sigma_bar: &CovarianceMatrix,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if candidates.is_empty() {
        return Err(Error::input("no candidates to select from"));
    }
    let method = cfg.method;
    let key = |c: &SolveResult| -> (f64, f64) {
        match method {
            Method::Likelihood => {
                let s = if c.score.is_finite() {
                    c.score
                } else {
                    bic_score(&c.a_hat, sigma_bar, 0.0).unwrap_or(f64::INFINITY)
                };
                (s, 0.0)
            }
            Method::Decomposition => (c.nnz as f64, c.feasibility.residual),
        }
    };
    let violation = |c: &SolveResult| -> f64 {
        let g = if cfg.use_g_constraint {
            c.feasibility.g_value / cfg.eps2
        } else {
            0.0
        };
        match method {
            Method::Likelihood => g,
            Method::Decomposition => g.max(c.feasibility.residual / cfg.eps1),
        }
    };
    let lex = |a: &SolveResult, b: &SolveResult, f: &dyn Fn(&SolveResult) -> (f64, f64)| {
        f(a).partial_cmp(&f(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.restart_index.cmp(&b.restart_index))
    };
    let feasible: Vec<&SolveResult> = candidates.iter().filter(|c| c.feasibility.feasible).collect();
    let chosen = if feasible.is_empty() {
        candidates
            .iter()
            .min_by(|a, b| lex(a, b, &|c| (violation(c), 0.0)))
    } else {
        feasible.into_iter().min_by(|a, b| lex(a, b, &key))
    };
    Ok(chosen.expect("nonempty").clone())
}
