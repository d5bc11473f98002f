//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Pass criterion numbers as arguments to run a subset.

mod common;

use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sparse_ica::causal::{a_to_sem, dag_check, mec_is_singleton, sem_to_a};
use sparse_ica::cli::main_with_args;
use sparse_ica::metrics::{evaluate, fastica_baseline};
use sparse_ica::model::{signed_perm_equivalent, support_of, CovarianceMatrix, MixingMatrix, SupportPattern};
use sparse_ica::objective::{decomposition_residual_eval, g_eval, mcp_eval, nll_eval, GMode, McpParams};
use sparse_ica::simulate::{generate, sample_mixing, Regime, SimConfig};
use sparse_ica::solver::{solve_decomposition, solve_likelihood, SolverConfig};
use sparse_ica::structure::{
    check_lower_triangularizable, check_structural_variability, covariance_jacobian, example1_equality_residual,
    example1_inequality_value, pattern_lower_triangularizable, rotation_counterexample,
};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String, ok: bool) -> Outcome {
    let took = start.elapsed();
    check(ok && took < limit, format!("{detail}; {:.1}s of {}s", took.as_secs_f64(), limit.as_secs()))
}

fn random_sigma(n: usize, r: &mut ChaCha8Rng) -> CovarianceMatrix {
    let w = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    CovarianceMatrix::new(&w * w.transpose() + DMatrix::identity(n, n), 1000).unwrap()
}

/// Entries in `[-2, 2]` away from zero and from the MCP knee `αλ`.
fn away_from_kinks(n: usize, knee: f64, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| loop {
        let v: f64 = r.random_range(-2.0..2.0);
        if v.abs() > 1e-3 && (v.abs() - knee).abs() > 1e-3 {
            break v;
        }
    })
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = [0.0f64; 5];
    for _ in 0..20 {
        let a = DMatrix::from_fn(6, 6, |_, _| r.random_range(-1.0..1.0));
        let e = g_eval(&a, GMode::LogSquaring);
        worst[0] = worst[0].max(gradient_error(|x| g_eval(x, GMode::LogSquaring).value, &a, &e.gradient));

        let sigma = random_sigma(6, &mut r);
        let well = &a + DMatrix::identity(6, 6) * 2.0;
        let e = nll_eval(&well, &sigma, true).unwrap();
        worst[1] = worst[1].max(gradient_error(|x| nll_eval(x, &sigma, true).unwrap().value, &well, &e.gradient));

        let e = decomposition_residual_eval(&a, &sigma).unwrap();
        worst[2] = worst[2].max(gradient_error(
            |x| decomposition_residual_eval(x, &sigma).unwrap().value,
            &a,
            &e.gradient,
        ));

        for (slot, p) in [(3, McpParams::new(0.1, 10.0).unwrap()), (4, McpParams::new(1.0, 40.0).unwrap())] {
            let m = away_from_kinks(6, p.knee(), &mut r);
            let e = mcp_eval(&m, &p);
            worst[slot] = worst[slot].max(gradient_error(|x| mcp_eval(x, &p).value, &m, &e.gradient));
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    within(
        Duration::from_secs(10),
        start,
        format!("max relative error g {:.1e}, nll {:.1e}, residual {:.1e}, mcp {:.1e}/{:.1e}", worst[0], worst[1], worst[2], worst[3], worst[4]),
        max < 1e-5,
    )
}

fn g_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut agree, mut zeros) = (0, 0);
    for _ in 0..200 {
        let n = r.random_range(2..=6);
        let xi = random_pattern(n, r.random_range(0.1..0.6), &mut r);
        let zero = g_eval(&xi.to_matrix(), GMode::LogSquaring).value == 0.0;
        let oracle = simultaneous_lower_oracle(&xi);
        agree += (zero == oracle) as usize;
        zeros += oracle as usize;
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{agree}/200 agree ({zeros} triangularizable)"),
        agree == 200 && zeros > 0 && zeros < 200,
    )
}

fn pair_oracle() -> Outcome {
    let mut r = rng(3);
    let (mut agree, mut yes) = (0, 0);
    for _ in 0..200 {
        let n = r.random_range(2..=5);
        let xi = random_nonsingular_pattern(n, r.random_range(0.1..0.6), &mut r);
        let a = MixingMatrix::new(instantiate(&xi, &mut r)).unwrap();
        let got = check_lower_triangularizable(&a).unwrap();
        let oracle = pair_lower_oracle(&xi);
        agree += (got == oracle) as usize;
        yes += oracle as usize;
    }
    check(agree == 200 && yes > 0 && yes < 200, format!("{agree}/200 agree ({yes} triangularizable)"))
}

fn example1() -> Outcome {
    let mut r = rng(4);
    let xi1 = SupportPattern::from_rows(&[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]).unwrap();
    let xi2 = SupportPattern::from_rows(&[&[1, 0, 1], &[1, 1, 0], &[0, 1, 1]]).unwrap();
    let (mut worst_eq, mut worst_ineq) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        // the constraints are homogeneous of degree 2 and 6 in Σ
        let s = CovarianceMatrix::from_mixing(&MixingMatrix::new(instantiate(&xi1, &mut r)).unwrap());
        let scale = s.matrix().amax();
        worst_eq = worst_eq.max(example1_equality_residual(&s).unwrap().abs() / scale.powi(2));
        let s = CovarianceMatrix::from_mixing(&MixingMatrix::new(instantiate(&xi2, &mut r)).unwrap());
        let scale = s.matrix().amax();
        worst_ineq = worst_ineq.min(example1_inequality_value(&s).unwrap() / scale.powi(6));
    }
    check(
        worst_eq <= 1e-9 && worst_ineq >= -1e-9,
        format!("max scaled |equality| {worst_eq:.1e}, min scaled inequality {worst_ineq:.1e}"),
    )
}

/// A non-singular matrix whose columns `j` and `k` differ in at most one row.
fn a1_violator(r: &mut ChaCha8Rng) -> MixingMatrix {
    loop {
        let n = r.random_range(3..=6);
        let mut xi = random_nonsingular_pattern(n, r.random_range(0.1..0.5), r);
        let j = r.random_range(0..n);
        let k = (j + 1 + r.random_range(0..n - 1)) % n;
        for i in 0..n {
            xi.set(i, k, xi.get(i, j));
        }
        if r.random_bool(0.5) {
            let i = r.random_range(0..n);
            xi.set(i, k, !xi.get(i, k));
        }
        if check_structural_variability(&xi) || !has_perfect_matching(&xi) {
            continue;
        }
        let a = MixingMatrix::new(instantiate(&xi, r)).unwrap();
        if a.is_nonsingular() {
            return a;
        }
    }
}

fn rotations() -> Outcome {
    let mut r = rng(5);
    let mut fails = Vec::new();
    for t in 0..100 {
        let a = a1_violator(&mut r);
        let Some((rot, _)) = rotation_counterexample(&a) else {
            fails.push(format!("#{t}: no rotation"));
            continue;
        };
        let gap = (rot.gram() - a.gram()).norm() / a.gram().norm();
        let sparser = support_of(&rot, 1e-12).nnz() <= support_of(&a, 0.0).nnz();
        let distinct = signed_perm_equivalent(&rot, &a, 1e-6).unwrap().is_none();
        if gap > 1e-10 || !sparser || !distinct {
            fails.push(format!("#{t}: gap {gap:.1e} sparser {sparser} distinct {distinct}"));
        }
    }
    check(fails.is_empty(), format!("{}/100 counterexamples {}", 100 - fails.len(), fails.join("; ")))
}

/// Valid, violating and unconstrained draws in equal shares.
fn mixed_matrix(t: u64, r: &mut ChaCha8Rng) -> MixingMatrix {
    let n = r.random_range(2..=6);
    match t % 3 {
        0 => sample_mixing(&SimConfig { n, seed: t, ..Default::default() }, r).unwrap().0,
        1 if n >= 3 => generate(&SimConfig { n, t: 2, seed: t, regime: Regime::Violating, ..Default::default() })
            .unwrap()
            .truth()
            .clone(),
        _ => loop {
            let xi = random_nonsingular_pattern(n, r.random_range(0.0..0.5), r);
            let a = MixingMatrix::new(instantiate(&xi, r)).unwrap();
            if a.is_nonsingular() {
                break a;
            }
        },
    }
}

fn dag_equivalence() -> Outcome {
    let mut r = rng(6);
    let (mut agree, mut valid) = (0, 0);
    for t in 0..1000 {
        let a = mixed_matrix(t, &mut r);
        let xi = support_of(&a, 0.0);
        let lhs = check_structural_variability(&xi) && pattern_lower_triangularizable(&xi).unwrap();
        let (sem, _) = a_to_sem(&a).unwrap();
        let rhs = dag_check(sem.b()).unwrap() && mec_is_singleton(sem.b()).unwrap();
        agree += (lhs == rhs) as usize;
        valid += lhs as usize;
    }
    check(agree == 1000, format!("{agree}/1000 agree ({valid} satisfy both assumptions)"))
}

fn conversions() -> Outcome {
    let mut r = rng(7);
    let (mut worst, mut counts_ok) = (0.0f64, 0);
    for t in 0..200 {
        let n = r.random_range(2..=6);
        let a = sample_mixing(&SimConfig { n, seed: 7000 + t, ..Default::default() }, &mut r).unwrap().0;
        let (sem, _) = a_to_sem(&a).unwrap();
        let b_nnz = sem.b().iter().filter(|v| **v != 0.0).count();
        counts_ok += (support_of(&a, 0.0).nnz() == b_nnz + n) as usize;
        // the mixing covariance is the SEM's precision matrix
        let sigma = a.gram();
        let back = sem_to_a(&sem).gram();
        worst = worst
            .max((sem.theta() - &sigma).amax() / sigma.amax())
            .max((back - &sigma).amax() / sigma.amax());
    }
    check(
        counts_ok == 200 && worst <= 1e-8,
        format!("{counts_ok}/200 with nnz(A) = nnz(B) + n, max relative error {worst:.1e}"),
    )
}

fn jacobian_rank() -> Outcome {
    let mut r = rng(8);
    let mut agree = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=8);
        let d = r.random_range(0.0..1.0);
        let cells: Vec<bool> = (0..n * n).map(|_| r.random_bool(d)).collect();
        let xi = SupportPattern::from_fn(n, |i, j| i == j || (j < i && cells[i * n + j]));
        let jac = covariance_jacobian(&MixingMatrix::identity(n), &xi).unwrap();
        agree += (jac.rank() == xi.nnz()) as usize;
    }
    check(agree == 100, format!("{agree}/100 full column rank"))
}

fn population() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for n in 3..=6usize {
        let mut hits = [0usize; 2];
        for trial in 0..10u64 {
            let seed = 1000 * n as u64 + trial;
            let cfg = SimConfig { n, seed, ..Default::default() };
            let (truth, _) = sample_mixing(&cfg, &mut rng(seed)).unwrap();
            let sigma = CovarianceMatrix::from_mixing(&truth).with_samples(1_000_000);
            let d = solve_decomposition(&sigma, &SolverConfig { seed: trial, ..SolverConfig::decomposition() });
            let l = solve_likelihood(&sigma, &SolverConfig { seed: trial, ..SolverConfig::likelihood() });
            for (slot, res) in [d, l].into_iter().enumerate() {
                if let Ok(res) = res {
                    hits[slot] += signed_perm_equivalent(&res.a_hat, &truth, 5e-2).unwrap().is_some() as usize;
                }
            }
        }
        ok &= hits.iter().all(|&h| h >= 9);
        lines.push(format!("n={n} decomposition {}/10 likelihood {}/10", hits[0], hits[1]));
    }
    within(Duration::from_secs(600), start, lines.join(", "), ok)
}

#[derive(Default)]
struct Scores {
    sparse: Vec<(f64, f64)>,
    vanilla: Vec<f64>,
    fastica: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn setting(t: usize, ratio: f64, vanilla: bool) -> Scores {
    let rows: Vec<_> = (0..10u64)
        .into_par_iter()
        .map(|trial| {
            let sim = generate(&SimConfig { n: 10, t, gaussian_ratio: ratio, seed: trial, ..Default::default() }).unwrap();
            let (x, s) = (&sim.dataset.x, sim.dataset.true_s.as_ref().unwrap());
            let cfg = SolverConfig { seed: trial, ..SolverConfig::likelihood() };
            let sparse = solve_likelihood(&sim.sigma, &cfg).unwrap();
            let m = evaluate(&sparse.a_hat, sim.truth(), x, s).unwrap();
            let v = vanilla.then(|| {
                let r = solve_likelihood(&sim.sigma, &SolverConfig { use_g_constraint: false, ..cfg.clone() }).unwrap();
                evaluate(&r.a_hat, sim.truth(), x, s).unwrap().mcc
            });
            let f = fastica_baseline(x, 10, trial).unwrap();
            let fm = evaluate(&f.mixing, sim.truth(), x, s).unwrap().mcc;
            ((m.mcc, m.amari), v, fm)
        })
        .collect();
    let mut out = Scores::default();
    for (s, v, f) in rows {
        out.sparse.push(s);
        out.vanilla.extend(v);
        out.fastica.push(f);
    }
    out
}

fn reproduction() -> Outcome {
    let start = Instant::now();
    let big = setting(10_000, 1.0, true);
    let small = setting(1_000, 1.0, false);
    let clean = setting(1_000, 0.0, false);
    let half = setting(1_000, 0.5, false);
    let mcc = |s: &Scores| median(s.sparse.iter().map(|p| p.0).collect());
    let amari = |s: &Scores| median(s.sparse.iter().map(|p| p.1).collect());

    let (m4, v4, f4) = (mcc(&big), median(big.vanilla.clone()), median(big.fastica.clone()));
    let a = m4 >= 0.9 && m4 >= v4 + 0.1 && m4 >= f4 + 0.1;
    let b = mcc(&small) <= m4;
    let c = amari(&small) >= amari(&big);
    let by_ratio = [mcc(&clean), mcc(&half), mcc(&small)];
    let spread = by_ratio.iter().cloned().fold(f64::MIN, f64::max) - by_ratio.iter().cloned().fold(f64::MAX, f64::min);
    let (f0, f1) = (median(clean.fastica.clone()), median(small.fastica.clone()));
    let d = spread <= 0.1 && f0 - f1 >= 0.1;
    let flag = |x: bool| if x { "ok" } else { "FAIL" };
    within(
        Duration::from_secs(1800),
        start,
        format!(
            "(a) {} T=1e4 mcc {m4:.3} vanilla {v4:.3} fastica {f4:.3}; (b) {} mcc {:.3} -> {m4:.3}; (c) {} amari {:.3} -> {:.3}; \
             (d) {} mcc by ratio 0/0.5/1 {:.3}/{:.3}/{:.3}, fastica {f0:.3} -> {f1:.3}",
            flag(a),
            flag(b),
            mcc(&small),
            flag(c),
            amari(&small),
            amari(&big),
            flag(d),
            by_ratio[0],
            by_ratio[1],
            by_ratio[2],
        ),
        a && b && c && d,
    )
}

/// CSV contents with the wall-clock column removed.
fn stable_csv(path: &std::path::Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let skip = header.iter().position(|h| *h == "runtime_ms");
    text.lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let commands = |tag: &str| -> Vec<Vec<String>> {
        let o = |name: &str| root.join(format!("{tag}-{name}")).to_string_lossy().into_owned();
        let data = root.join("shared-data").to_string_lossy().into_owned();
        [
            vec!["simulate", "--n", "5", "--samples", "500", "--seed", "3", "--out", &o("sim")],
            vec!["run", "--method", "sparseica-likelihood", "--n", "5", "--seed", "3", "--restarts", "6", "--out", &o("lik")],
            vec!["run", "--data", &data, "--method", "sparseica-decomposition", "--restarts", "6", "--out", &o("dec")],
            vec!["run", "--method", "fastica", "--n", "5", "--seed", "3", "--out", &o("ica")],
            vec![
                "sweep", "--axis", "gaussian-ratio", "--grid", "0,1", "--trials", "2", "--n", "4", "--restarts", "4",
                "--pairing", "benchmark", "--out", &o("sweep"),
            ],
        ]
        .into_iter()
        .map(|c| std::iter::once("sparse-ica").chain(c).map(String::from).collect())
        .collect()
    };
    let shared = root.join("shared-data").to_string_lossy().into_owned();
    if main_with_args(["sparse-ica", "simulate", "--n", "5", "--seed", "4", "--out", &shared]) != 0 {
        return Err("simulate failed".into());
    }
    let mut runs = Vec::new();
    for tag in ["first", "second"] {
        let mut files = Vec::new();
        for cmd in commands(tag) {
            let code = main_with_args(&cmd);
            if code != 0 {
                return Err(format!("{} exited {code}", cmd[1]));
            }
        }
        for name in ["sim/X.csv", "sim/S.csv", "lik/metrics.csv", "dec/metrics.csv", "ica/metrics.csv", "sweep/metrics.csv", "sweep/summary.csv"] {
            let (sub, file) = name.split_once('/').unwrap();
            files.push(stable_csv(&root.join(format!("{tag}-{sub}")).join(file)));
        }
        runs.push(files);
    }
    let same = runs[0] == runs[1] && runs[0].iter().all(|f| !f.is_empty());
    check(same, format!("{} CSV files identical across reruns (runtime_ms excluded)", runs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gradient suite", gradients),
        ("g = 0 vs permutation search", g_oracle),
        ("triangularizability vs pair search", pair_oracle),
        ("three-variable constraints", example1),
        ("rotation counterexamples", rotations),
        ("assumptions vs DAG and MEC", dag_equivalence),
        ("SEM conversions", conversions),
        ("Jacobian rank", jacobian_rank),
        ("population recovery", population),
        ("n=10 reproduction", reproduction),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id:>2} {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
