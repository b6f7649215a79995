//! Sparse Hermitian matrices behind a position oracle and an entry oracle,
//! with query tallies. Indices are 1-based.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tridiag::TridiagMatrix;

const HERMITIAN_TOL: f64 = 1e-12;
/// Rows this short are searched linearly.
const LINEAR_SCAN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("row {row} has {count} nonzeros; ordinal {ordinal} out of range")]
    Ordinal { row: usize, ordinal: usize, count: usize },
    #[error("index {index} outside 1..={n}")]
    Index { index: usize, n: usize },
    #[error("entry ({i}, {j}) given twice")]
    Duplicate { i: usize, j: usize },
    #[error("matrix is not Hermitian at ({i}, {j})")]
    NotHermitian { i: usize, j: usize },
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("malformed matrix file: {0}")]
    Format(String),
}

/// Per-run query counts for the position (`o1`) and entry (`o2`) oracles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub o1: u64,
    pub o2: u64,
}

impl Tally {
    pub fn total(&self) -> u64 {
        self.o1 + self.o2
    }

    pub fn merge(&mut self, other: Tally) {
        self.o1 += other.o1;
        self.o2 += other.o2;
    }
}

/// Shared accumulator; parallel walkers keep a local [`Tally`] and absorb it.
#[derive(Debug, Default)]
pub struct QueryCounter {
    o1: AtomicU64,
    o2: AtomicU64,
}

impl QueryCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn absorb(&self, t: Tally) {
        self.o1.fetch_add(t.o1, Ordering::Relaxed);
        self.o2.fetch_add(t.o2, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> Tally {
        Tally { o1: self.o1.load(Ordering::Relaxed), o2: self.o2.load(Ordering::Relaxed) }
    }
}

/// Oracle access to an `n x n` Hermitian matrix with at most `s` nonzeros per
/// row. Estimators see a matrix only through this trait.
pub trait SparseOracle: Sync {
    fn dim(&self) -> usize;
    fn sparsity(&self) -> usize;
    /// Column of the `ordinal`-th nonzero in `row`. Counts one `o1` query,
    /// also when the ordinal is out of range.
    fn position(&self, tally: &mut Tally, row: usize, ordinal: usize) -> Result<usize, SparseError>;
    /// `A[i, j]`, zero when absent. Counts one `o2` query.
    fn entry(&self, tally: &mut Tally, i: usize, j: usize) -> Complex64;
}

/// Row-compressed Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    s: usize,
}

/// On-disk format: upper triangle as `[i, j, re, im]` rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl SparseHermitian {
    /// Builds from a full list of `(i, j, value)`; both triangles must be
    /// present and conjugate.
    pub fn from_entries(n: usize, entries: &[(usize, usize, Complex64)]) -> Result<Self, SparseError> {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            for index in [i, j] {
                if index == 0 || index > n {
                    return Err(SparseError::Index { index, n });
                }
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(SparseError::NonFinite { i, j });
            }
            if v != Complex64::new(0.0, 0.0) {
                rows[i - 1].push((j, v));
            }
        }
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(SparseError::Duplicate { i: r + 1, j: w[0].0 });
            }
        }
        let m = SparseHermitian { n, s: rows.iter().map(Vec::len).max().unwrap_or(0), rows };
        for i in 1..=n {
            for &(j, v) in &m.rows[i - 1] {
                if (m.get(j, i).conj() - v).norm() > HERMITIAN_TOL * v.norm().max(1.0) {
                    return Err(SparseError::NotHermitian { i, j });
                }
            }
        }
        Ok(m)
    }

    /// Builds from the upper triangle (`i <= j`), filling in the conjugates.
    pub fn from_upper(n: usize, upper: &[(usize, usize, Complex64)]) -> Result<Self, SparseError> {
        let mut all = Vec::with_capacity(2 * upper.len());
        for &(i, j, v) in upper {
            if i > j {
                return Err(SparseError::Format(format!("entry ({i}, {j}) below the diagonal")));
            }
            if i == j && v.im.abs() > HERMITIAN_TOL {
                return Err(SparseError::NotHermitian { i, j });
            }
            all.push((i, j, if i == j { Complex64::new(v.re, 0.0) } else { v }));
            if i != j {
                all.push((j, i, v.conj()));
            }
        }
        Self::from_entries(n, &all)
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self, SparseError> {
        let upper: Vec<_> = file.entries.iter().map(|&(i, j, re, im)| (i, j, Complex64::new(re, im))).collect();
        Self::from_upper(file.n, &upper)
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut entries = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, v) in row.iter().filter(|e| e.0 > r + 1) {
                entries.push((r + 1, j, v.re, v.im));
            }
            if let Some(&(_, v)) = row.iter().find(|e| e.0 == r + 1) {
                entries.push((r + 1, r + 1, v.re, v.im));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        MatrixFile { n: self.n, entries }
    }

    pub fn from_json(text: &str) -> Result<Self, SparseError> {
        let file: MatrixFile = serde_json::from_str(text).map_err(|e| SparseError::Format(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("matrix file serializes")
    }

    /// 2-sparse embedding of a tridiagonal matrix (diagonal kept if nonzero).
    pub fn embed_tridiag(t: &TridiagMatrix) -> Self {
        let mut upper = Vec::new();
        for i in 1..=t.n {
            if t.diag[i - 1] != 0.0 {
                upper.push((i, i, Complex64::new(t.diag[i - 1], 0.0)));
            }
            if i < t.n {
                upper.push((i, i + 1, Complex64::new(t.offdiag[i - 1], 0.0)));
            }
        }
        Self::from_upper(t.n, &upper).expect("tridiagonal embedding is Hermitian")
    }

    /// Direct read, bypassing the oracles. Not available to estimators.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.rows[i - 1];
        if row.len() <= LINEAR_SCAN {
            return row.iter().find(|e| e.0 == j).map_or(Complex64::new(0.0, 0.0), |e| e.1);
        }
        row.binary_search_by_key(&j, |e| e.0).map_or(Complex64::new(0.0, 0.0), |k| row[k].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i - 1]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `sum_m |A[m, i]|`.
    pub fn column_l1(&self, i: usize) -> f64 {
        self.rows[i - 1].iter().map(|e| e.1.norm()).sum()
    }

    /// `max_i ||A_i||_1`.
    pub fn norm1(&self) -> f64 {
        (1..=self.n).map(|i| self.column_l1(i)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.rows.iter().flatten().all(|e| e.1.im == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let rows = self.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, v * c)).collect()).collect();
        SparseHermitian { n: self.n, rows, s: self.s }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut d = DMatrix::from_element(self.n, self.n, Complex64::new(0.0, 0.0));
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[(r, j - 1)] = v;
            }
        }
        d
    }
}

impl SparseOracle for SparseHermitian {
    fn dim(&self) -> usize {
        self.n
    }

    fn sparsity(&self) -> usize {
        self.s
    }

    #[inline]
    fn position(&self, tally: &mut Tally, row: usize, ordinal: usize) -> Result<usize, SparseError> {
        tally.o1 += 1;
        if row == 0 || row > self.n {
            return Err(SparseError::Index { index: row, n: self.n });
        }
        let r = &self.rows[row - 1];
        if ordinal == 0 || ordinal > r.len() {
            return Err(SparseError::Ordinal { row, ordinal, count: r.len() });
        }
        Ok(r[ordinal - 1].0)
    }

    #[inline]
    fn entry(&self, tally: &mut Tally, i: usize, j: usize) -> Complex64 {
        tally.o2 += 1;
        if i == 0 || j == 0 || i > self.n || j > self.n {
            return Complex64::new(0.0, 0.0);
        }
        self.get(i, j)
    }
}

/// Random Hermitian matrix with at most `s` nonzeros per row and entries of
/// modulus at most 1. Real symmetric unless `complex`.
pub fn random_sparse_hermitian(n: usize, s: usize, seed: u64, complex: bool) -> SparseHermitian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = vec![0usize; n];
    let mut present = std::collections::HashSet::new();
    let mut upper = Vec::new();
    for _ in 0..8 * n * s {
        let i = rng.gen_range(1..=n);
        let j = rng.gen_range(1..=n);
        let (i, j) = (i.min(j), i.max(j));
        let room = if i == j { count[i - 1] < s } else { count[i - 1] < s && count[j - 1] < s };
        if !room || !present.insert((i, j)) {
            continue;
        }
        let re = rng.gen_range(-1.0..1.0);
        let im = if complex && i != j { rng.gen_range(-1.0..1.0) } else { 0.0 };
        let v = Complex64::new(re, im);
        let v = if v.norm() > 1.0 { v / v.norm() } else { v };
        upper.push((i, j, v));
        count[i - 1] += 1;
        if i != j {
            count[j - 1] += 1;
        }
    }
    SparseHermitian::from_upper(n, &upper).expect("generated matrix is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseSpectrum;

    #[test]
    fn position_examples() {
        let p = SparseHermitian::embed_tridiag(&TridiagMatrix::path(5, 1.0));
        let mut t = Tally::default();
        assert_eq!(p.position(&mut t, 2, 1).unwrap(), 1);
        assert_eq!(p.position(&mut t, 2, 2).unwrap(), 3);
        assert!(p.position(&mut t, 2, 3).is_err());
        assert_eq!(t, Tally { o1: 3, o2: 0 });
        let diag = SparseHermitian::from_upper(3, &[(1, 1, 1.0.into()), (2, 2, 2.0.into()), (3, 3, 3.0.into())]).unwrap();
        for i in 1..=3 {
            assert_eq!(diag.position(&mut t, i, 1).unwrap(), i);
        }
        assert_eq!(t.o1, 6);
    }

    #[test]
    fn entry_examples() {
        let a = random_sparse_hermitian(30, 4, 9, true);
        let mut t = Tally::default();
        for i in 1..=30 {
            for j in 1..=30 {
                assert_eq!(a.entry(&mut t, i, j), a.entry(&mut t, j, i).conj());
            }
        }
        assert_eq!(t.o2, 2 * 900);
        assert_eq!(SparseHermitian::embed_tridiag(&TridiagMatrix::path(4, 1.0)).entry(&mut t, 1, 3), 0.0.into());
        let d = a.to_dense();
        for i in 1..=30 {
            for j in 1..=30 {
                assert_eq!(a.entry(&mut t, i, j), d[(i - 1, j - 1)]);
            }
        }
        assert!(a.sparsity() <= 4);
    }

    #[test]
    fn norms() {
        let p = SparseHermitian::embed_tridiag(&TridiagMatrix::path(6, 0.5));
        assert_eq!(p.column_l1(3), 1.0);
        assert_eq!(p.column_l1(1), 0.5);
        let m = 7;
        let nff = SparseHermitian::embed_tridiag(&crate::witness::nff_matrix(m));
        assert!((nff.max_abs() - m as f64 / (2 * m - 1) as f64).abs() < 1e-15);
    }

    #[test]
    fn norm1_is_bounded_by_sqrt_s_times_spectral_norm() {
        for seed in 0..10 {
            let a = random_sparse_hermitian(40, 4, seed, seed % 2 == 0);
            let spec = DenseSpectrum::new(&a.to_dense()).norm();
            assert!(a.norm1() <= (a.sparsity() as f64).sqrt() * spec + 1e-12);
        }
    }

    #[test]
    fn file_round_trip_and_validation() {
        let a = random_sparse_hermitian(12, 3, 4, true);
        let b = SparseHermitian::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        let bad = r#"{"n": 2, "entries": [[1, 1, 1.0, 0.5]]}"#;
        assert!(matches!(SparseHermitian::from_json(bad), Err(SparseError::NotHermitian { .. })));
        let bad = r#"{"n": 2, "entries": [[1, 3, 1.0, 0.0]]}"#;
        assert!(SparseHermitian::from_json(bad).is_err());
        let bad = r#"{"n": 2, "entries": [[1, 2, 1.0, 0.0], [1, 2, 2.0, 0.0]]}"#;
        assert!(matches!(SparseHermitian::from_json(bad), Err(SparseError::Duplicate { .. })));
        let asym = [(1, 2, Complex64::new(1.0, 0.0)), (2, 1, Complex64::new(2.0, 0.0))];
        assert!(SparseHermitian::from_entries(2, &asym).is_err());
    }

    #[test]
    fn counter_absorbs_tallies() {
        let c = QueryCounter::new();
        c.absorb(Tally { o1: 3, o2: 4 });
        c.absorb(Tally { o1: 1, o2: 0 });
        assert_eq!(c.snapshot(), Tally { o1: 4, o2: 4 });
    }

    proptest::proptest! {
        #[test]
        fn random_matrices_round_trip(n in 1usize..25, s in 1usize..5, seed in 0u64..1000, complex: bool) {
            let a = random_sparse_hermitian(n, s, seed, complex);
            proptest::prop_assert!(a.sparsity() <= s);
            proptest::prop_assert!(a.max_abs() <= 1.0 + 1e-15);
            let d = a.to_dense();
            proptest::prop_assert_eq!(&d, &d.adjoint());
            proptest::prop_assert_eq!(SparseHermitian::from_json(&a.to_json()).unwrap(), a);
        }
    }
}
