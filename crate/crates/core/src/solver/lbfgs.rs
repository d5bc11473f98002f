//! Limited-memory BFGS over `n×n` matrices with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::objective::ObjectiveEval;
use crate::{linalg, Error, Matrix, Result};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Stop when `‖∇f‖_∞ <= gtol`.
    pub gtol: f64,
    /// Stop when the relative decrease of `f` over one step falls to this.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 250,
            memory: 10,
            gtol: 1e-6,
            ftol: 1e7 * f64::EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    Stalled,
    MaxIters,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Matrix,
    pub value: f64,
    pub gradient_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 25;

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn inf_norm(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

struct Probe {
    x: Matrix,
    eval: Option<ObjectiveEval>,
}

impl Probe {
    fn value(&self) -> f64 {
        self.eval.as_ref().map_or(f64::INFINITY, |e| e.value)
    }
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// safeguarded into the interior of the bracket.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let fallback = 0.5 * (a + b);
    if !fb.is_finite() || !db.is_finite() {
        // quadratic from (a, fa, da) and a far point would be unreliable
        return a + 0.25 * (b - a);
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if !t.is_finite() || t <= lo + 0.1 * width || t >= hi - 0.1 * width {
        fallback
    } else {
        t
    }
}

/// Minimizes `f` starting at `x0`.
///
/// `f` may return an error at trial points (the line search treats them as
/// `+∞`); an error or non-finite value at `x0` is returned to the caller.
pub fn minimize<F>(mut f: F, x0: &Matrix, opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&Matrix) -> Result<ObjectiveEval>,
{
    let mut evaluations = 1usize;
    let first = f(x0)?;
    if !first.value.is_finite() || first.gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite objective at the initial point".into()));
    }
    let mut x = x0.clone();
    let mut cur = first;
    let mut pairs: VecDeque<(Matrix, Matrix, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0usize;

    let converged = |e: &ObjectiveEval| inf_norm(&e.gradient) <= opts.gtol;

    let reason = loop {
        if converged(&cur) {
            break StopReason::Gradient;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIters;
        }

        // two-loop recursion
        let mut q = cur.gradient.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            linalg::axpy(&mut q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            q *= dot(s, y) / dot(y, y);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            linalg::axpy(&mut q, a - b, s);
        }
        let mut dir = -q;
        let mut slope = dot(&cur.gradient, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = -cur.gradient.clone();
            slope = dot(&cur.gradient, &dir);
        }
        let step0 = if pairs.is_empty() {
            (1.0 / inf_norm(&dir)).min(1.0)
        } else {
            1.0
        };

        let (next, used) = line_search(&mut f, &x, &cur, &dir, slope, step0);
        evaluations += used;
        let Some((nx, ne)) = next else {
            if pairs.is_empty() {
                break StopReason::LineSearch;
            }
            pairs.clear();
            continue;
        };
        iterations += 1;

        let s = &nx - &x;
        let y = &ne.gradient - &cur.gradient;
        let sy = dot(&s, &y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let decrease = cur.value - ne.value;
        let scale = cur.value.abs().max(ne.value.abs()).max(1.0);
        x = nx;
        cur = ne;
        if decrease <= opts.ftol * scale {
            break StopReason::Stalled;
        }
    };

    Ok(Minimum {
        gradient_inf_norm: inf_norm(&cur.gradient),
        value: cur.value,
        x,
        iterations,
        evaluations,
        reason,
    })
}

/// Strong-Wolfe bracketing and zoom. Returns the accepted point (or the best
/// sufficient-decrease point found) and the number of evaluations used.
fn line_search<F>(
    f: &mut F,
    x: &Matrix,
    cur: &ObjectiveEval,
    dir: &Matrix,
    slope0: f64,
    step0: f64,
) -> (Option<(Matrix, ObjectiveEval)>, usize)
where
    F: FnMut(&Matrix) -> Result<ObjectiveEval>,
{
    let f0 = cur.value;
    let mut evals = 0usize;
    let mut probe = |step: f64, evals: &mut usize| -> Probe {
        *evals += 1;
        let mut xt = x.clone();
        linalg::axpy(&mut xt, step, dir);
        let eval = f(&xt)
            .ok()
            .filter(|e| e.value.is_finite() && e.gradient.iter().all(|v| v.is_finite()));
        Probe { x: xt, eval }
    };
    let armijo = |step: f64, value: f64| value <= f0 + C1 * step * slope0;
    let mut best: Option<(f64, Probe)> = None;
    let keep_best = |step: f64, p: &Probe, best: &mut Option<(f64, Probe)>| {
        if armijo(step, p.value()) && best.as_ref().is_none_or(|(_, b)| p.value() < b.value()) {
            *best = Some((
                step,
                Probe {
                    x: p.x.clone(),
                    eval: p.eval.clone(),
                },
            ));
        }
    };

    let mut prev_step = 0.0;
    let mut prev_value = f0;
    let mut prev_slope = slope0;
    let mut step = step0;
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;

    while evals < MAX_LINE_EVALS {
        let p = probe(step, &mut evals);
        keep_best(step, &p, &mut best);
        let value = p.value();
        let slope = p.eval.as_ref().map_or(f64::NAN, |e| dot(&e.gradient, dir));
        if !armijo(step, value) || (evals > 1 && value >= prev_value) {
            bracket = Some((prev_step, prev_value, prev_slope, step, value, slope));
            break;
        }
        if slope.abs() <= -C2 * slope0 {
            return (p.eval.map(|e| (p.x, e)), evals);
        }
        if slope >= 0.0 {
            bracket = Some((step, value, slope, prev_step, prev_value, prev_slope));
            break;
        }
        prev_step = step;
        prev_value = value;
        prev_slope = slope;
        step *= 2.0;
    }

    if let Some((mut lo, mut flo, mut dlo, mut hi, mut fhi, mut dhi)) = bracket {
        while evals < MAX_LINE_EVALS && (hi - lo).abs() > 1e-16 * lo.abs().max(hi.abs()).max(1e-300) {
            let t = interpolate(lo, flo, dlo, hi, fhi, dhi);
            let p = probe(t, &mut evals);
            keep_best(t, &p, &mut best);
            let value = p.value();
            let slope = p.eval.as_ref().map_or(f64::NAN, |e| dot(&e.gradient, dir));
            if !armijo(t, value) || value >= flo {
                hi = t;
                fhi = value;
                dhi = slope;
            } else {
                if slope.abs() <= -C2 * slope0 {
                    return (p.eval.map(|e| (p.x, e)), evals);
                }
                if slope * (hi - lo) >= 0.0 {
                    hi = lo;
                    fhi = flo;
                    dhi = dlo;
                }
                lo = t;
                flo = value;
                dlo = slope;
            }
        }
    }

    let accepted = best
        .filter(|(_, p)| p.value() < f0)
        .and_then(|(_, p)| p.eval.map(|e| (p.x, e)));
    (accepted, evals)
}
