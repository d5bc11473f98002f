//! Checks the structural assumptions on a few hand-written supports and on
//! a simulated mixing matrix.
//!
//! ```text
//! cargo run --example verify_assumptions
//! ```

use sparse_ica::cli::verify_matrix;
use sparse_ica::model::{MixingMatrix, SupportPattern};
use sparse_ica::simulate::{generate, Regime, SimConfig};
use sparse_ica::structure;

fn show(name: &str, rows: &[&[u8]]) {
    let xi = SupportPattern::from_rows(rows).unwrap();
    println!(
        "{name:<10} variability={} triangularizable={} column_subset={} a4={} a5={}",
        structure::check_structural_variability(&xi),
        structure::pattern_lower_triangularizable(&xi).unwrap(),
        structure::check_column_subset(&xi),
        structure::check_zheng_assumption4(&xi).unwrap(),
        structure::check_zheng_assumption5(&xi),
    );
}

fn main() {
    show("identity", &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
    show("xi1", &[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]);
    show("xi2", &[&[1, 0, 1], &[1, 1, 0], &[0, 1, 1]]);
    // columns 0 and 1 differ in a single row
    show("twins", &[&[1, 1, 0], &[0, 1, 0], &[0, 0, 1]]);

    for regime in [Regime::Valid, Regime::Violating] {
        let cfg = SimConfig {
            n: 6,
            t: 100,
            regime,
            seed: 11,
            ..Default::default()
        };
        let sim = generate(&cfg).unwrap();
        let report = verify_matrix(sim.truth()).unwrap();
        println!("\n{regime:?} draw ({} attempts):\n{}", sim.attempts, sim.truth().matrix());
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    }

    let singular = MixingMatrix::new(nalgebra::DMatrix::from_element(2, 2, 1.0)).unwrap();
    println!("all-ones 2x2: {:?}", verify_matrix(&singular).unwrap());
}
