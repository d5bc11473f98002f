//! Likelihood estimator on sampled data with Gaussian sources, scored by
//! MCC and Amari distance.
//!
//! ```text
//! cargo run --release --example likelihood_recovery -- 10000
//! ```

use sparse_ica::metrics::evaluate;
use sparse_ica::simulate::{generate, SimConfig};
use sparse_ica::solver::{solve_likelihood, SolverConfig};

fn main() {
    let t: usize = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("T"));
    let sim = generate(&SimConfig {
        n: 6,
        t,
        gaussian_ratio: 1.0,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let data = &sim.dataset;

    let cfg = SolverConfig {
        restarts: 10,
        ..SolverConfig::likelihood()
    };
    let res = solve_likelihood(&sim.sigma, &cfg).unwrap();
    let m = evaluate(&res.a_hat, sim.truth(), &data.x, data.true_s.as_ref().unwrap()).unwrap();
    println!("estimate ={}", res.a_hat.matrix());
    println!("BIC {:.2}, nnz {}, outer iterations {}", res.score, res.nnz, res.trace.len());
    println!("MCC {:.4}, Amari {:.4}", m.mcc, m.amari);

    // the same data without the triangularity penalty
    let vanilla = solve_likelihood(
        &sim.sigma,
        &SolverConfig {
            use_g_constraint: false,
            ..cfg
        },
    )
    .unwrap();
    let mv = evaluate(&vanilla.a_hat, sim.truth(), &data.x, data.true_s.as_ref().unwrap()).unwrap();
    println!("without g: MCC {:.4}, Amari {:.4}", mv.mcc, mv.amari);
}
