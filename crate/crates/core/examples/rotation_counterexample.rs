//! When two columns of the support differ in at most one row, a single
//! Givens rotation gives a second factor of the same covariance that is at
//! least as sparse, so the mixing matrix is not identifiable.
//!
//! ```text
//! cargo run --example rotation_counterexample
//! ```

use sparse_ica::model::{signed_perm_equivalent, support_of, MixingMatrix};
use sparse_ica::structure::{apply_support_rotation, rotation_counterexample, RotationKind};

fn main() {
    let a = MixingMatrix::new(nalgebra::DMatrix::from_row_slice(
        3,
        3,
        &[0.7, 0.4, 0.0, 0.0, 0.5, 0.0, 0.3, -0.6, 0.8],
    ))
    .unwrap();
    println!("A ={}", a.matrix());

    let (rotated, outcome) = rotation_counterexample(&a).expect("columns 0 and 1 are too similar");
    println!("rotation kind: {:?}", outcome.kind);
    println!("A' ={}", rotated.matrix());
    let gap = (a.gram() - rotated.gram()).norm();
    println!("||AA^T - A'A'^T||_F = {gap:.2e}");
    println!(
        "nnz: {} -> {}, signed permutation of A: {}",
        support_of(&a, 0.0).nnz(),
        support_of(&rotated, 1e-12).nnz(),
        signed_perm_equivalent(&rotated, &a, 1e-9).unwrap().is_some()
    );

    // the same pivots on the support alone
    let xi = support_of(&a, 0.0);
    for (i, j, k) in [(0, 0, 1), (0, 1, 0), (1, 1, 0), (2, 2, 0)] {
        let o = apply_support_rotation(&xi, i, j, k).unwrap();
        if o.kind != RotationKind::Inapplicable {
            println!("R({i},{j},{k}) {:?}: nnz {} -> {}", o.kind, xi.nnz(), o.pattern.nnz());
        }
    }
}
