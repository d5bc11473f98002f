//! Dense linear assignment and bipartite matching.

use crate::Matrix;

/// Solves the square min-cost assignment problem with the Hungarian method
/// (shortest augmenting paths with potentials, O(n³)).
///
/// Returns `assign` with `assign[row] = col` and the total cost. All costs
/// must be finite.
pub fn min_cost_assignment(cost: &Matrix) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment requires a square cost matrix");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
    (assign, total)
}

/// Max-weight assignment; returns `assign[row] = col` and the total weight.
pub fn max_weight_assignment(weight: &Matrix) -> (Vec<usize>, f64) {
    let (assign, neg) = min_cost_assignment(&(-weight));
    (assign, -neg)
}

/// Perfect matching on a square bipartite graph given as an adjacency mask
/// (`allowed(row, col)`), using augmenting paths (Kuhn's algorithm).
///
/// Returns `col_of_row` when a perfect matching exists.
pub fn perfect_matching(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| (0..n).filter(|&c| allowed(r, c)).collect())
        .collect();
    let mut row_of_col: Vec<Option<usize>> = vec![None; n];

    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        row_of_col: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            let free = match row_of_col[c] {
                None => true,
                Some(r2) => augment(r2, adj, seen, row_of_col),
            };
            if free {
                row_of_col[c] = Some(r);
                return true;
            }
        }
        false
    }

    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(r, &adj, &mut seen, &mut row_of_col) {
            return None;
        }
    }
    let mut col_of_row = vec![0; n];
    for (c, r) in row_of_col.iter().enumerate() {
        col_of_row[r.expect("perfect matching covers every column")] = c;
    }
    Some(col_of_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_min(cost: &Matrix) -> f64 {
        fn rec(cost: &Matrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.nrows();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[(row, c)], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.nrows()], 0.0, &mut best);
        best
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost = Matrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
                let (assign, total) = min_cost_assignment(&cost);
                assert!(crate::linalg::is_permutation(&assign));
                assert!((total - brute_force_min(&cost)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perfect_matching_on_cycle_and_deficient_graph() {
        let m = perfect_matching(3, |r, c| c == (r + 1) % 3).unwrap();
        assert_eq!(m, vec![1, 2, 0]);
        // two rows compete for a single column
        assert!(perfect_matching(3, |r, c| c == 0 || (r == 2 && c == 1)).is_none());
    }
}
