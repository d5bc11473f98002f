//! Mixing matrix to linear SEM and back: `A = (I − B) Ω^{-1/2}`.
//!
//! ```text
//! cargo run --example sem_bridge
//! ```

use sparse_ica::causal::{a_to_sem, dag_check, mec_is_singleton, permuted_cholesky_factor, sem_to_a};
use sparse_ica::model::{signed_perm_equivalent, support_of, CovarianceMatrix};
use sparse_ica::simulate::{generate, SimConfig};
use sparse_ica::structure::triangularizing_permutations;

fn main() {
    let sim = generate(&SimConfig {
        n: 5,
        t: 10,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let a = sim.truth();
    println!("A ={}", a.matrix());

    let (sem, perm) = a_to_sem(a).unwrap();
    println!("column permutation {perm:?}");
    println!("B ={}", sem.b());
    println!("omega = {:?}", sem.omega());
    println!(
        "DAG {}, MEC singleton {}, nnz(A) = {} = nnz(B) + n = {}",
        dag_check(sem.b()).unwrap(),
        mec_is_singleton(sem.b()).unwrap(),
        support_of(a, 0.0).nnz(),
        sem.b().iter().filter(|v| **v != 0.0).count() + a.n()
    );

    let back = sem_to_a(&sem);
    println!("round trip ~ A: {}", signed_perm_equivalent(&back, a, 1e-10).unwrap().is_some());

    // with the row order known, the Cholesky factor already pins A down
    let xi = support_of(a, 0.0);
    let (rows, _) = triangularizing_permutations(&xi).unwrap().unwrap();
    let l = permuted_cholesky_factor(&CovarianceMatrix::from_mixing(a), &rows).unwrap();
    let mut pl = l.matrix().clone();
    for (r, &orig) in rows.iter().enumerate() {
        pl.set_row(orig, &l.matrix().row(r));
    }
    let pl = sparse_ica::model::MixingMatrix::new(pl).unwrap();
    println!("P1 L ~ A: {}", signed_perm_equivalent(&pl, a, 1e-8).unwrap().is_some());
}
