//! Two supports on three variables that entail different constraints on
//! the covariance: `[[x,0,0],[x,x,0],[x,0,x]]` forces an equality,
//! `[[x,0,x],[x,x,0],[0,x,x]]` only an inequality.
//!
//! ```text
//! cargo run --example example1_constraints
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_ica::model::{CovarianceMatrix, MixingMatrix, SupportPattern};
use sparse_ica::structure::{example1_equality_residual, example1_inequality_value};

fn draw(xi: &SupportPattern, rng: &mut ChaCha8Rng) -> CovarianceMatrix {
    let a = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
        if xi.get(i, j) {
            rng.random_range(-2.0..2.0)
        } else {
            0.0
        }
    });
    CovarianceMatrix::from_mixing(&MixingMatrix::new(a).unwrap())
}

fn main() {
    let xi1 = SupportPattern::from_rows(&[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]).unwrap();
    let xi2 = SupportPattern::from_rows(&[&[1, 0, 1], &[1, 1, 0], &[0, 1, 1]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut worst_eq: f64 = 0.0;
    let mut min_ineq = f64::INFINITY;
    let mut xi2_eq_gap: f64 = 0.0;
    for _ in 0..1000 {
        worst_eq = worst_eq.max(example1_equality_residual(&draw(&xi1, &mut rng)).unwrap().abs());
        let s2 = draw(&xi2, &mut rng);
        min_ineq = min_ineq.min(example1_inequality_value(&s2).unwrap());
        xi2_eq_gap = xi2_eq_gap.max(example1_equality_residual(&s2).unwrap().abs());
    }
    println!("xi1: max |S11 S23 - S12 S13|      = {worst_eq:.3e}");
    println!("xi2: min inequality discriminant = {min_ineq:.3e}");
    println!("xi2: max |S11 S23 - S12 S13|      = {xi2_eq_gap:.3e} (no equality)");

    // positive definite, but outside the xi2 model
    let outside = CovarianceMatrix::new(
        nalgebra::DMatrix::from_row_slice(3, 3, &[0.97, -0.87, -1.04, -0.87, 1.46, 0.43, -1.04, 0.43, 1.62]),
        0,
    )
    .unwrap();
    println!("outside covariance: discriminant {:.3e}", example1_inequality_value(&outside).unwrap());
}
