//! Core domain records: mixing matrices, support patterns, signed
//! permutations, covariances and linear SEMs.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assignment::min_cost_assignment;
use crate::linalg;
use crate::{Error, Matrix, Result};

/// Default magnitude below which an estimated entry counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 0.01;

/// Cutoff on `|det A| / Π‖aⱼ‖` below which `A` is treated as singular.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    rows: Vec<Vec<f64>>,
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Square, finite mixing matrix `A` in `x = A s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix(Matrix);

impl MixingMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::input(format!(
                "mixing matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("mixing matrix has non-finite entries"));
        }
        Ok(MixingMatrix(entries))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::input("row slice length must be n*n"));
        }
        Self::new(Matrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        MixingMatrix(Matrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `A Aᵀ`.
    pub fn gram(&self) -> Matrix {
        &self.0 * self.0.transpose()
    }

    /// Non-singular when `|det A|` relative to the product of column norms
    /// exceeds [`SINGULAR_CUTOFF`].
    pub fn is_nonsingular(&self) -> bool {
        linalg::relative_det(&self.0) > SINGULAR_CUTOFF
    }

    /// Copy with entries of magnitude `<= tol` set to exactly zero.
    pub fn thresholded(&self, tol: f64) -> Self {
        MixingMatrix(self.0.map(|v| if v.abs() > tol { v } else { 0.0 }))
    }
}

impl Serialize for MixingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            n: self.n(),
            rows: matrix_to_rows(&self.0),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixingMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let m = matrix_from_rows(&raw.rows).map_err(serde::de::Error::custom)?;
        if m.nrows() != raw.n {
            return Err(serde::de::Error::custom("field n disagrees with rows"));
        }
        MixingMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Boolean `n×n` mask of nonzero cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportPattern {
    n: usize,
    mask: Vec<bool>,
}

impl SupportPattern {
    pub fn empty(n: usize) -> Self {
        SupportPattern {
            n,
            mask: vec![false; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut p = Self::empty(n);
        for i in 0..n {
            p.set(i, i, true);
        }
        p
    }

    pub fn full(n: usize) -> Self {
        SupportPattern {
            n,
            mask: vec![true; n * n],
        }
    }

    /// Lower-triangular pattern including the diagonal.
    pub fn lower_triangular(n: usize) -> Self {
        Self::from_fn(n, |i, j| j <= i)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut p = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                p.set(i, j, f(i, j));
            }
        }
        p
    }

    /// Builds a pattern from rows of 0/1 (any nonzero value counts as set).
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::input("support pattern must be square"));
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j] != 0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.mask[i * self.n + j] = on;
    }

    /// `‖ξ‖₀`.
    pub fn nnz(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Row indices set in column `j`.
    pub fn column(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i, j)).collect()
    }

    /// Column indices set in row `i`.
    pub fn row(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j)).collect()
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    /// Size of the symmetric difference between the supports of columns
    /// `j` and `k`.
    pub fn column_difference(&self, j: usize, k: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, j) != self.get(i, k)).count()
    }

    pub fn swap_columns(&mut self, j: usize, k: usize) {
        for i in 0..self.n {
            let (a, b) = (self.get(i, j), self.get(i, k));
            self.set(i, j, b);
            self.set(i, k, a);
        }
    }

    /// Pattern with rows reordered by `rows` and columns by `cols`.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(self.n, |a, b| self.get(rows[a], cols[b]))
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.cells().iter().all(|&(i, j)| j <= i)
    }

    /// The pattern as a 0/1 matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    /// True when every set cell of `a` (exactly nonzero) lies inside this
    /// pattern.
    pub fn contains_support_of(&self, a: &Matrix) -> bool {
        a.nrows() == self.n
            && a.ncols() == self.n
            && (0..self.n).all(|i| (0..self.n).all(|j| a[(i, j)] == 0.0 || self.get(i, j)))
    }
}

impl std::fmt::Display for SupportPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.n {
            let row: Vec<&str> = (0..self.n)
                .map(|j| if self.get(i, j) { "x" } else { "0" })
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Column permutation with sign flips.
///
/// Acting on a matrix `m`, column `j` of the result is
/// `signs[j] · m[:, perm[j]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        if perm.len() != signs.len() {
            return Err(Error::input("perm and signs lengths differ"));
        }
        if !linalg::is_permutation(&perm) {
            return Err(Error::input("perm is not a bijection"));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::input("signs must be +1 or -1"));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s == 1)
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.nrows(), self.len(), |i, j| {
            f64::from(self.signs[j]) * m[(i, self.perm[j])]
        })
    }

    /// `π⁻¹` with `π⁻¹.apply(π.apply(m)) == m`.
    pub fn inverse(&self) -> Self {
        let n = self.len();
        let mut perm = vec![0; n];
        let mut signs = vec![1; n];
        for (j, &p) in self.perm.iter().enumerate() {
            perm[p] = j;
            signs[p] = self.signs[j];
        }
        SignedPermutation { perm, signs }
    }

    /// `other ∘ self`: applying the result equals applying `self`, then
    /// `other`.
    pub fn then(&self, other: &SignedPermutation) -> Self {
        let perm: Vec<usize> = other.perm.iter().map(|&p| self.perm[p]).collect();
        let signs: Vec<i8> = other
            .perm
            .iter()
            .zip(&other.signs)
            .map(|(&p, &s)| s * self.signs[p])
            .collect();
        SignedPermutation { perm, signs }
    }

    /// The signed permutation as an `n×n` matrix `Π` with `m Π = apply(m)`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.len();
        let mut p = Matrix::zeros(n, n);
        for (j, (&src, &s)) in self.perm.iter().zip(&self.signs).enumerate() {
            p[(src, j)] = f64::from(s);
        }
        p
    }
}

/// Finds `π` with `‖π(a) − b‖_∞ ≤ tol`, or `None`.
///
/// Column matching solves an exact assignment over
/// `c[i][j] = min(‖aᵢ − bⱼ‖₂, ‖aᵢ + bⱼ‖₂)`.
pub fn signed_perm_equivalent(
    a: &MixingMatrix,
    b: &MixingMatrix,
    tol: f64,
) -> Result<Option<SignedPermutation>> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            n,
            b.n()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let (am, bm) = (a.matrix(), b.matrix());
    // rows of `cost` index columns of b, columns index columns of a
    let mut flip = vec![vec![false; n]; n];
    let cost = Matrix::from_fn(n, n, |j, i| {
        let minus = (bm.column(j) - am.column(i)).norm();
        let plus = (bm.column(j) + am.column(i)).norm();
        flip[j][i] = plus < minus;
        minus.min(plus)
    });
    let (assign, _) = min_cost_assignment(&cost);
    let signs: Vec<i8> = assign
        .iter()
        .enumerate()
        .map(|(j, &i)| if flip[j][i] { -1 } else { 1 })
        .collect();
    let pi = SignedPermutation {
        perm: assign,
        signs,
    };
    let diff = pi.apply(am) - bm;
    Ok((linalg::max_abs(&diff) <= tol).then_some(pi))
}

/// `mask[i][j] = |a[i][j]| > zero_tol`.
pub fn support_of(a: &MixingMatrix, zero_tol: f64) -> SupportPattern {
    let m = a.matrix();
    SupportPattern::from_fn(a.n(), |i, j| m[(i, j)].abs() > zero_tol)
}

/// Symmetric positive semidefinite covariance together with the sample
/// count it was estimated from (`0` for a population covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: Matrix,
    samples: usize,
}

impl CovarianceMatrix {
    pub fn new(entries: Matrix, samples: usize) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::input("covariance must be square"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("covariance has non-finite entries"));
        }
        let scale = linalg::max_abs(&entries).max(f64::MIN_POSITIVE);
        let asym = linalg::max_abs(&(&entries - entries.transpose()));
        if asym > 1e-12 * scale {
            return Err(Error::input(format!(
                "covariance not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        if sym.nrows() > 0 {
            let min_eig = sym
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -1e-10 * sym.norm() {
                return Err(Error::input(format!(
                    "covariance not positive semidefinite (min eigenvalue {min_eig:.3e})"
                )));
            }
        }
        Ok(CovarianceMatrix {
            entries: sym,
            samples,
        })
    }

    /// Population covariance `A Aᵀ`.
    pub fn from_mixing(a: &MixingMatrix) -> Self {
        let g = a.gram();
        let sym = (&g + g.transpose()) * 0.5;
        CovarianceMatrix {
            entries: sym,
            samples: 0,
        }
    }

    /// Same entries, with a recorded sample count.
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    /// `Σ + η I`.
    pub fn ridge(&self, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(Error::input("ridge must be non-negative"));
        }
        let n = self.n();
        Ok(CovarianceMatrix {
            entries: &self.entries + Matrix::identity(n, n) * eta,
            samples: self.samples,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn samples(&self) -> usize {
        self.samples
    }
}

/// Linear SEM `x = Bᵀx + e` with `Cov(e) = diag(Ω)`. `b[(r, c)] ≠ 0` is the
/// edge `x_r → x_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    b: Matrix,
    omega: Vec<f64>,
}

impl SemModel {
    pub fn new(b: Matrix, omega: Vec<f64>) -> Result<Self> {
        if !b.is_square() || b.nrows() != omega.len() {
            return Err(Error::input("B must be n×n and Ω length n"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("B has non-finite entries"));
        }
        if (0..b.nrows()).any(|i| b[(i, i)] != 0.0) {
            return Err(Error::input("B must have a zero diagonal"));
        }
        if omega.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::input("Ω entries must be positive and finite"));
        }
        Ok(SemModel { b, omega })
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Number of edges (exact nonzeros of `B`).
    pub fn edge_count(&self) -> usize {
        self.b.iter().filter(|v| **v != 0.0).count()
    }

    /// `Θ = (I − B) Ω⁻¹ (I − B)ᵀ`.
    pub fn theta(&self) -> Matrix {
        let n = self.n();
        let ib = Matrix::identity(n, n) - &self.b;
        let scaled = Matrix::from_fn(n, n, |i, j| ib[(i, j)] / self.omega[j]);
        scaled * ib.transpose()
    }
}

#[derive(Serialize, Deserialize)]
struct SemJson {
    b: Vec<Vec<f64>>,
    omega: Vec<f64>,
}

impl Serialize for SemModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SemJson {
            b: matrix_to_rows(&self.b),
            omega: self.omega.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SemModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SemJson::deserialize(d)?;
        let b = matrix_from_rows(&raw.b).map_err(serde::de::Error::custom)?;
        SemModel::new(b, raw.omega).map_err(serde::de::Error::custom)
    }
}

/// Observed samples `X` (`T×n`) with optional ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub true_a: Option<MixingMatrix>,
    pub true_s: Option<Matrix>,
    pub gaussian_ratio: f64,
}

impl Dataset {
    /// Checks the generation identity `X = S Aᵀ` when both truths are known.
    pub fn new(
        x: Matrix,
        true_a: Option<MixingMatrix>,
        true_s: Option<Matrix>,
        gaussian_ratio: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gaussian_ratio) {
            return Err(Error::input("gaussian_ratio must lie in [0, 1]"));
        }
        if let (Some(a), Some(s)) = (&true_a, &true_s) {
            if s.shape() != x.shape() || a.n() != x.ncols() {
                return Err(Error::input("dataset shapes do not conform"));
            }
            if s * a.matrix().transpose() != x {
                return Err(Error::input("X differs from S·Aᵀ"));
            }
        }
        Ok(Dataset {
            x,
            true_a,
            true_s,
            gaussian_ratio,
        })
    }

    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> MixingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MixingMatrix::new(Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn equivalent_to_itself_with_identity() {
        let a = random_matrix(4, 1);
        let pi = signed_perm_equivalent(&a, &a, 1e-9).unwrap().unwrap();
        assert!(pi.is_identity());
    }

    #[test]
    fn swapped_and_negated_columns() {
        let a = random_matrix(3, 2);
        let m = a.matrix();
        let mut b = m.clone();
        b.set_column(0, &(-m.column(1)));
        b.set_column(1, &m.column(0));
        let b = MixingMatrix::new(b).unwrap();
        let pi = signed_perm_equivalent(&a, &b, 1e-9).unwrap().unwrap();
        assert_eq!(pi.perm(), &[1, 0, 2]);
        assert_eq!(pi.signs(), &[-1, 1, 1]);
    }

    #[test]
    fn givens_rotation_is_not_equivalent() {
        // ξ₁ support with fixed weights, rotated in the plane of columns 2,3
        let a = MixingMatrix::from_row_slice(3, &[0.7, 0.0, 0.0, -0.4, 0.6, 0.0, 0.5, 0.0, -0.3])
            .unwrap();
        let t = std::f64::consts::PI / 5.0;
        let mut q = Matrix::identity(3, 3);
        q[(1, 1)] = t.cos();
        q[(1, 2)] = -t.sin();
        q[(2, 1)] = t.sin();
        q[(2, 2)] = t.cos();
        let b = MixingMatrix::new(a.matrix() * q).unwrap();
        assert!(signed_perm_equivalent(&a, &b, 1e-9).unwrap().is_none());
        assert!(signed_perm_equivalent(&a, &b, 0.05).unwrap().is_none());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = signed_perm_equivalent(&MixingMatrix::identity(2), &MixingMatrix::identity(3), 1.0);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn support_thresholds() {
        assert_eq!(
            support_of(&MixingMatrix::identity(3), 0.0),
            SupportPattern::identity(3)
        );
        let a = MixingMatrix::from_row_slice(2, &[1.0, 0.005, 0.0, 1.0]).unwrap();
        let xi = support_of(&a, DEFAULT_ZERO_TOL);
        assert!(!xi.get(0, 1));
        assert_eq!(xi.nnz(), 2);
        let xi2 = SupportPattern::from_rows(&[&[1, 0, 1], &[1, 1, 0], &[0, 1, 1]]).unwrap();
        let a2 = MixingMatrix::new(xi2.to_matrix() * 0.5).unwrap();
        assert_eq!(support_of(&a2, 0.0), xi2);
    }

    #[test]
    fn signed_perm_inverse_and_compose() {
        let pi = SignedPermutation::new(vec![2, 0, 1], vec![-1, 1, -1]).unwrap();
        let m = random_matrix(3, 5);
        let back = pi.inverse().apply(&pi.apply(m.matrix()));
        assert_eq!(&back, m.matrix());
        let sigma = SignedPermutation::new(vec![1, 2, 0], vec![1, -1, 1]).unwrap();
        let composed = pi.then(&sigma).apply(m.matrix());
        assert_eq!(composed, sigma.apply(&pi.apply(m.matrix())));
        assert_eq!(m.matrix() * pi.to_matrix(), pi.apply(m.matrix()));
    }

    #[test]
    fn invalid_signed_permutations() {
        assert!(SignedPermutation::new(vec![0, 0], vec![1, 1]).is_err());
        assert!(SignedPermutation::new(vec![0, 1], vec![1, 0]).is_err());
    }

    #[test]
    fn covariance_validation() {
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CovarianceMatrix::new(bad, 0).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(CovarianceMatrix::new(asym, 0).is_err());
        assert!(CovarianceMatrix::new(Matrix::identity(3, 3), 10).is_ok());
    }

    #[test]
    fn sem_validation_and_theta() {
        let mut b = Matrix::zeros(2, 2);
        b[(0, 1)] = 0.5;
        let sem = SemModel::new(b.clone(), vec![1.0, 2.0]).unwrap();
        let ib = Matrix::identity(2, 2) - &b;
        let omega_inv = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5]));
        assert!((sem.theta() - &ib * omega_inv * ib.transpose()).norm() < 1e-15);
        b[(1, 1)] = 0.1;
        assert!(SemModel::new(b, vec![1.0, 1.0]).is_err());
        assert!(SemModel::new(Matrix::zeros(2, 2), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = random_matrix(3, 9);
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.starts_with("{\"n\":3,\"rows\":"));
        let back: MixingMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }
}
