//! FastICA needs non-Gaussian sources; the covariance-based estimator does
//! not. Both run on the same data as the Gaussian share grows.
//!
//! ```text
//! cargo run --release --example fastica_baseline
//! ```

use sparse_ica::metrics::{evaluate, fastica_baseline};
use sparse_ica::simulate::{generate, SimConfig};
use sparse_ica::solver::{solve_likelihood, SolverConfig};

fn main() {
    println!("ratio  fastica_mcc  sparse_mcc");
    for ratio in [0.0, 0.5, 1.0] {
        let sim = generate(&SimConfig {
            n: 6,
            t: 5000,
            gaussian_ratio: ratio,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let (x, s) = (&sim.dataset.x, sim.dataset.true_s.as_ref().unwrap());
        let f = fastica_baseline(x, 6, 0).unwrap();
        let mf = evaluate(&f.mixing, sim.truth(), x, s).unwrap();
        let cfg = SolverConfig {
            restarts: 8,
            ..SolverConfig::likelihood()
        };
        let r = solve_likelihood(&sim.sigma, &cfg).unwrap();
        let ms = evaluate(&r.a_hat, sim.truth(), x, s).unwrap();
        println!("{ratio:<6} {:<12.4} {:.4}", mf.mcc, ms.mcc);
    }
}
