//! Recovers a sparse mixing matrix from its exact covariance with the
//! decomposition estimator.
//!
//! ```text
//! cargo run --release --example decomposition_recovery -- 6
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_ica::model::{signed_perm_equivalent, support_of, CovarianceMatrix};
use sparse_ica::simulate::{sample_mixing, SimConfig};
use sparse_ica::solver::{solve_decomposition, SolverConfig};

fn main() {
    let n: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("n"));
    let sim = SimConfig {
        n,
        seed: 7,
        ..Default::default()
    };
    let (truth, _) = sample_mixing(&sim, &mut ChaCha8Rng::seed_from_u64(sim.seed)).unwrap();
    let sigma = CovarianceMatrix::from_mixing(&truth);

    let cfg = SolverConfig::decomposition();
    let res = solve_decomposition(&sigma, &cfg).unwrap();
    println!("truth ={}", truth.matrix());
    println!("estimate ={}", res.a_hat.matrix());
    println!(
        "restart {} of {}: nnz {} (truth {}), residual {:.2e}, g {:.2e}, feasible {}",
        res.restart_index,
        res.restarts_tried,
        res.nnz,
        support_of(&truth, 0.0).nnz(),
        res.feasibility.residual,
        res.feasibility.g_value,
        res.feasibility.feasible
    );
    match signed_perm_equivalent(&res.a_hat, &truth, 5e-2).unwrap() {
        Some(p) => println!("recovered up to signed permutation {p:?}"),
        None => println!("not recovered"),
    }
}
