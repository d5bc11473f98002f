//! Structural assumptions on the support of a mixing matrix.
//!
//! Every checker works on a [`SupportPattern`]; callers holding a numeric
//! matrix take its support first (see [`crate::model::support_of`]).

use serde::{Deserialize, Serialize};

use crate::assignment::perfect_matching;
use crate::linalg;
use crate::model::{CovarianceMatrix, MixingMatrix, SupportPattern};
use crate::{Error, Matrix, Result};

/// Largest dimension accepted by [`check_zheng_assumption4`].
pub const ASSUMPTION4_MAX_N: usize = 12;

/// Every pair of columns differs in more than one entry.
pub fn check_structural_variability(xi: &SupportPattern) -> bool {
    structural_variability_violation(xi).is_none()
}

/// First column pair `(j, k)`, `j < k`, whose supports differ in at most one
/// entry.
pub fn structural_variability_violation(xi: &SupportPattern) -> Option<(usize, usize)> {
    let n = xi.n();
    (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .find(|&(j, k)| xi.column_difference(j, k) <= 1)
}

/// Column permutation `perm` with `ξ[i][perm[i]]` set for every row `i`, i.e.
/// the permuted pattern has a full diagonal.
pub fn diagonal_matching(xi: &SupportPattern) -> Option<Vec<usize>> {
    perfect_matching(xi.n(), |r, c| xi.get(r, c))
}

/// Topological order of the digraph on `n` vertices with edges `u → v`
/// whenever `edge(u, v)`. `None` when the graph has a directed cycle.
/// Self-loops are ignored.
pub(crate) fn topological_order(n: usize, edge: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        for v in 0..n {
            if u != v && edge(u, v) {
                out[u].push(v);
                indegree[v] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop() {
        order.push(u);
        for &v in out[u].iter().rev() {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(v);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Row and column orders `(rows, cols)` such that
/// `ξ[rows[a]][cols[b]]` is lower triangular with a full diagonal, if any.
///
/// Errors when the pattern admits no perfect matching (structurally
/// singular).
pub fn triangularizing_permutations(xi: &SupportPattern) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
    let perm = diagonal_matching(xi)
        .ok_or_else(|| Error::input("support has no perfect matching (structurally singular)"))?;
    // In ξP the edge v_j → v_i exists when (ξP)[i][j] is set.
    let order = topological_order(xi.n(), |j, i| xi.get(i, perm[j]));
    Ok(order.map(|order| {
        let cols = order.iter().map(|&v| perm[v]).collect();
        (order, cols)
    }))
}

/// Whether separate row and column permutations make the pattern lower
/// triangular.
///
/// Finds a column permutation with a full diagonal by bipartite matching,
/// then checks that the induced digraph is acyclic.
pub fn pattern_lower_triangularizable(xi: &SupportPattern) -> Result<bool> {
    Ok(triangularizing_permutations(xi)?.is_some())
}

/// [`pattern_lower_triangularizable`] on the exact support of `a`.
pub fn check_lower_triangularizable(a: &MixingMatrix) -> Result<bool> {
    pattern_lower_triangularizable(&crate::model::support_of(a, 0.0))
}

fn is_subset(xi: &SupportPattern, j: usize, k: usize) -> bool {
    (0..xi.n()).all(|i| !xi.get(i, j) || xi.get(i, k))
}

/// No column support is a subset (possibly equal) of another's.
pub fn check_column_subset(xi: &SupportPattern) -> bool {
    let n = xi.n();
    (0..n).all(|j| (0..n).all(|k| j == k || !is_subset(xi, j, k)))
}

/// The rank inequality over every column subset `I` with `|I| > 1`:
/// `|∪_{j∈I} supp(aⱼ)| − rank(overlap(A_I)) > |supp(aᵢ)|` for all `i ∈ I`.
///
/// `overlap(A_I)` is read as the rows on which every column of `I` is
/// nonzero, instantiated with ones, so its rank is 1 when such a row exists
/// and 0 otherwise. Enumeration is exponential; `n` is capped at
/// [`ASSUMPTION4_MAX_N`].
pub fn check_zheng_assumption4(xi: &SupportPattern) -> Result<bool> {
    let n = xi.n();
    if n > ASSUMPTION4_MAX_N {
        return Err(Error::input(format!(
            "assumption-4 enumeration capped at n = {ASSUMPTION4_MAX_N}"
        )));
    }
    let col_masks: Vec<u32> = (0..n)
        .map(|j| (0..n).filter(|&i| xi.get(i, j)).fold(0u32, |m, i| m | (1 << i)))
        .collect();
    for subset in 1u32..(1u32 << n) {
        if subset.count_ones() < 2 {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| subset & (1 << j) != 0).collect();
        let union = members.iter().fold(0u32, |m, &j| m | col_masks[j]);
        let shared = members.iter().fold(u32::MAX, |m, &j| m & col_masks[j]);
        let overlap_rank = if shared != 0 { 1 } else { 0 };
        let lhs = union.count_ones() as i64 - overlap_rank;
        if members.iter().any(|&i| lhs <= col_masks[i].count_ones() as i64) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// For every column `i` some set of rows has support intersection exactly
/// `{i}`.
///
/// The smallest attainable intersection containing `i` is over all rows
/// that contain `i`, so that is the only candidate checked.
pub fn check_zheng_assumption5(xi: &SupportPattern) -> bool {
    let n = xi.n();
    (0..n).all(|i| {
        let rows = xi.column(i);
        if rows.is_empty() {
            return false;
        }
        (0..n).all(|c| c == i || rows.iter().any(|&r| !xi.get(r, c)))
    })
}

/// Effect of a support rotation on a pair of columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationKind {
    /// Identical columns: only the pivot cell is cleared.
    Reduction,
    /// Columns differ in exactly one other row, which becomes set in both.
    ReversibleAcute,
    /// Columns differ in two or more rows, all of which become set in both.
    IrreversibleAcute,
    /// The pivot is set in `j` but not in `k`: the columns swap.
    ColumnSwap,
    /// Nothing to zero at `(i, j)`.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationOutcome {
    pub pattern: SupportPattern,
    pub kind: RotationKind,
}

/// Applies the support rotation `R(i, j, k)` that zeroes `ξ[i][j]` with a
/// Givens rotation in the `(j, k)` plane, and classifies its effect.
pub fn apply_support_rotation(
    xi: &SupportPattern,
    i: usize,
    j: usize,
    k: usize,
) -> Result<RotationOutcome> {
    let n = xi.n();
    if i >= n || j >= n || k >= n {
        return Err(Error::input("rotation index out of range"));
    }
    if j == k {
        return Err(Error::input("rotation requires two distinct columns"));
    }
    let mut pattern = xi.clone();
    let kind = match (xi.get(i, j), xi.get(i, k)) {
        (false, _) => RotationKind::Inapplicable,
        (true, false) => {
            pattern.swap_columns(j, k);
            RotationKind::ColumnSwap
        }
        (true, true) => {
            let differing: Vec<usize> = (0..n)
                .filter(|&l| l != i && xi.get(l, j) != xi.get(l, k))
                .collect();
            pattern.set(i, j, false);
            for &l in &differing {
                pattern.set(l, j, true);
                pattern.set(l, k, true);
            }
            match differing.len() {
                0 => RotationKind::Reduction,
                1 => RotationKind::ReversibleAcute,
                _ => RotationKind::IrreversibleAcute,
            }
        }
    };
    Ok(RotationOutcome { pattern, kind })
}

/// Pivot `(i, j, k)` of a rotation that keeps `‖ξ‖₀` from growing on a
/// pattern violating structural variability (a Reduction or a
/// ReversibleAcute rotation), if one exists.
pub fn find_sparsifying_rotation(xi: &SupportPattern) -> Option<(usize, usize, usize)> {
    let n = xi.n();
    for j in 0..n {
        for k in 0..n {
            if j == k || xi.column_difference(j, k) > 1 {
                continue;
            }
            if let Some(i) = (0..n).find(|&i| xi.get(i, j) && xi.get(i, k)) {
                return Some((i, j, k));
            }
        }
    }
    None
}

/// `A · G(j, k, θ)` with `θ = atan2(−a[i][j], a[i][k])`, which zeroes entry
/// `(i, j)` while preserving `A Aᵀ`.
pub fn numeric_givens_reduce(a: &MixingMatrix, i: usize, j: usize, k: usize) -> Result<MixingMatrix> {
    let n = a.n();
    if i >= n || j >= n || k >= n || j == k {
        return Err(Error::input("invalid Givens indices"));
    }
    let m = a.matrix();
    let (aij, aik) = (m[(i, j)], m[(i, k)]);
    if aij == 0.0 && aik == 0.0 {
        return Err(Error::input("both Givens pivots are zero"));
    }
    let theta = (-aij).atan2(aik);
    let (s, c) = theta.sin_cos();
    let mut out = m.clone();
    for r in 0..n {
        let (x, y) = (m[(r, j)], m[(r, k)]);
        out[(r, j)] = c * x + s * y;
        out[(r, k)] = -s * x + c * y;
    }
    // exact zero at the pivot; rounding leaves ~1e-17
    out[(i, j)] = 0.0;
    MixingMatrix::new(out)
}

/// For a matrix violating structural variability, returns a second factor
/// of the same covariance with no more nonzeros, built by one Givens
/// rotation.
pub fn rotation_counterexample(a: &MixingMatrix) -> Option<(MixingMatrix, RotationOutcome)> {
    let xi = crate::model::support_of(a, 0.0);
    let (i, j, k) = find_sparsifying_rotation(&xi)?;
    let outcome = apply_support_rotation(&xi, i, j, k).ok()?;
    let rotated = numeric_givens_reduce(a, i, j, k).ok()?;
    Some((rotated, outcome))
}

fn require_three(sigma: &CovarianceMatrix) -> Result<&Matrix> {
    if sigma.n() != 3 {
        return Err(Error::input("the three-variable constraints need n = 3"));
    }
    Ok(sigma.matrix())
}

/// `Σ₁₁Σ₂₃ − Σ₁₂Σ₁₃`, which vanishes on every covariance generated by the
/// support `[[x,0,0],[x,x,0],[x,0,x]]`.
pub fn example1_equality_residual(sigma: &CovarianceMatrix) -> Result<f64> {
    let s = require_three(sigma)?;
    Ok(s[(0, 0)] * s[(1, 2)] - s[(0, 1)] * s[(0, 2)])
}

/// Discriminant of the quadratic in `a₃₂²` for the support
/// `[[x,0,x],[x,x,0],[0,x,x]]`; non-negative on every covariance that
/// support generates.
pub fn example1_inequality_value(sigma: &CovarianceMatrix) -> Result<f64> {
    let s = require_three(sigma)?;
    let (s11, s22, s33) = (s[(0, 0)], s[(1, 1)], s[(2, 2)]);
    let (s12, s13, s23) = (s[(0, 1)], s[(0, 2)], s[(1, 2)]);
    let linear = s11 * s22 * s33 + s11 * s23 * s23 - s22 * s13 * s13 - s33 * s12 * s12;
    let leading = s11 * s22 - s12 * s12;
    let constant = s11 * s33 * s23 * s23 - s13 * s13 * s23 * s23;
    Ok(linear * linear - 4.0 * leading * constant)
}

/// `∂Σ/∂A` for `Σ = A Aᵀ`, restricted to the free parameters of a support.
#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    /// `n² × ‖ξ‖₀`.
    pub entries: Matrix,
    /// `(i, j)` of each row, row-major over `[n]²`.
    pub row_index: Vec<(usize, usize)>,
    /// Support cell `(k, l)` of each column.
    pub col_index: Vec<(usize, usize)>,
}

impl JacobianMatrix {
    pub fn rank(&self) -> usize {
        linalg::numeric_rank(&self.entries)
    }
}

/// Fills the covariance Jacobian by its five-case formula.
pub fn covariance_jacobian(a: &MixingMatrix, xi: &SupportPattern) -> Result<JacobianMatrix> {
    let n = a.n();
    if xi.n() != n {
        return Err(Error::input("pattern and matrix sizes differ"));
    }
    if !xi.contains_support_of(a.matrix()) {
        return Err(Error::input("supp(A) is not contained in the pattern"));
    }
    let m = a.matrix();
    let row_index: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let col_index = xi.cells();
    let entries = Matrix::from_fn(row_index.len(), col_index.len(), |r, c| {
        let (i, j) = row_index[r];
        let (k, l) = col_index[c];
        if i == j {
            if k == i {
                2.0 * m[(i, l)]
            } else {
                0.0
            }
        } else if k == i {
            m[(j, l)]
        } else if k == j {
            m[(i, l)]
        } else {
            0.0
        }
    });
    Ok(JacobianMatrix {
        entries,
        row_index,
        col_index,
    })
}
