//! Symmetric tridiagonal matrices: eigensolver, entries of `f(A)`, closed
//! forms for corner entries, inverse entries and the inverse eigenvalue
//! reconstruction from a `±`-symmetric spectrum.
//!
//! Indices in the public API are 1-based.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcspace::TargetFunction;

/// Smallest eigenvalue gap accepted by [`reconstruct`].
pub const MIN_RECONSTRUCT_GAP: f64 = 1e-6;
/// Smallest eigenvalue gap accepted by the closed-form entries.
pub const MIN_CLOSED_GAP: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;
const MAX_QL_ITER: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TridiagError {
    #[error("offdiag must have n - 1 = {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("index ({i}, {j}) outside 1..={n}")]
    Index { i: usize, j: usize, n: usize },
    #[error("eigenvalue {index} did not converge")]
    NoConvergence { index: usize },
    #[error("eigenvalue gap {gap:e} below {limit:e}; spectrum too clustered")]
    IllConditioned { gap: f64, limit: f64 },
    #[error("matrix must have zero diagonal")]
    NonZeroDiagonal,
    #[error("off-diagonal must satisfy b_i = b_(n-i)")]
    NotPersymmetric,
    #[error("diagonal must be constant")]
    NonConstantDiagonal,
    #[error("matrix is singular")]
    Singular,
    #[error("need n >= {needed}, got {n}")]
    TooSmall { needed: usize, n: usize },
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("reconstructed b_{index} = {value:e} is not positive")]
    LostPositivity { index: usize, value: f64 },
    #[error("reconstruction inaccurate: spectral residual {residual:e}")]
    Inaccurate { residual: f64 },
}

/// Symmetric tridiagonal matrix with diagonal `a_1..a_n` and off-diagonal
/// `b_1..b_(n-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TridiagRaw")]
pub struct TridiagMatrix {
    pub n: usize,
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

#[derive(Deserialize)]
struct TridiagRaw {
    n: usize,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TryFrom<TridiagRaw> for TridiagMatrix {
    type Error = TridiagError;
    fn try_from(r: TridiagRaw) -> Result<Self, TridiagError> {
        let m = TridiagMatrix::new(r.diag, r.offdiag)?;
        if m.n != r.n {
            return Err(TridiagError::Shape { expected: r.n, got: m.n });
        }
        Ok(m)
    }
}

impl TridiagMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self, TridiagError> {
        let n = diag.len();
        if n == 0 || offdiag.len() + 1 != n {
            return Err(TridiagError::Shape { expected: n.saturating_sub(1), got: offdiag.len() });
        }
        Ok(TridiagMatrix { n, diag, offdiag })
    }

    /// Zero-diagonal matrix with the given off-diagonal.
    pub fn zero_diag(offdiag: Vec<f64>) -> Self {
        TridiagMatrix { n: offdiag.len() + 1, diag: vec![0.0; offdiag.len() + 1], offdiag }
    }

    /// Path of length `n` with constant weight `b`.
    pub fn path(n: usize, b: f64) -> Self {
        Self::zero_diag(vec![b; n.saturating_sub(1)])
    }

    pub fn is_zero_diag(&self) -> bool {
        self.diag.iter().all(|&a| a == 0.0)
    }

    /// `b_i = b_(n-i)` to relative tolerance `tol`.
    pub fn is_persymmetric(&self, tol: f64) -> bool {
        let b = &self.offdiag;
        let k = b.len();
        (0..k).all(|i| (b[i] - b[k - 1 - i]).abs() <= tol * b[i].abs().max(b[k - 1 - i].abs()).max(1e-300))
    }

    /// Dense `A[i, j]` (1-based).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i - 1]
        } else if i + 1 == j {
            self.offdiag[i - 1]
        } else if j + 1 == i {
            self.offdiag[j - 1]
        } else {
            0.0
        }
    }

    fn check_index(&self, i: usize, j: usize) -> Result<(), TridiagError> {
        if i == 0 || j == 0 || i > self.n || j > self.n {
            Err(TridiagError::Index { i, j, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Product `b_lo * ... * b_hi` (1-based, inclusive) as `(ln|prod|, sign)`.
    fn log_bprod(&self, lo: usize, hi: usize) -> (f64, f64) {
        let mut lg = 0.0;
        let mut sg = 1.0;
        for &b in &self.offdiag[lo - 1..hi] {
            lg += b.abs().ln();
            sg *= b.signum();
        }
        (lg, sg)
    }
}

/// Strictly increasing positive values `x_1 < ... < x_m <= 1`, optionally
/// with 0 added to the `±` spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRaw")]
pub struct SymSpectrum {
    pub xs: Vec<f64>,
    #[serde(rename = "zero")]
    pub includes_zero: bool,
}

#[derive(Deserialize)]
struct SpectrumRaw {
    xs: Vec<f64>,
    zero: bool,
}

impl TryFrom<SpectrumRaw> for SymSpectrum {
    type Error = TridiagError;
    fn try_from(r: SpectrumRaw) -> Result<Self, TridiagError> {
        SymSpectrum::new(r.xs, r.zero)
    }
}

impl SymSpectrum {
    pub fn new(xs: Vec<f64>, includes_zero: bool) -> Result<Self, TridiagError> {
        if xs.is_empty() {
            return Err(TridiagError::InvalidSpectrum("empty".into()));
        }
        if !xs.iter().all(|&x| x > 0.0 && x <= 1.0) {
            return Err(TridiagError::InvalidSpectrum("values must lie in (0, 1]".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TridiagError::InvalidSpectrum("values must be strictly increasing".into()));
        }
        Ok(SymSpectrum { xs, includes_zero })
    }

    pub fn dim(&self) -> usize {
        2 * self.xs.len() + usize::from(self.includes_zero)
    }

    /// Full spectrum, ascending.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.xs.iter().rev().map(|x| -x).collect();
        if self.includes_zero {
            v.push(0.0);
        }
        v.extend_from_slice(&self.xs);
        v
    }

    /// Smallest gap between consecutive values of the full spectrum.
    pub fn min_gap(&self) -> f64 {
        self.values().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// `A = V diag(values) V^T`, values ascending; `vectors[k]` is the unit
/// eigenvector for `values[k]`.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition by implicit QL iteration with Wilkinson-type shifts.
pub fn eigen(a: &TridiagMatrix) -> Result<EigenDecomp, TridiagError> {
    let n = a.n;
    let mut d = a.diag.clone();
    let mut e = a.offdiag.clone();
    e.push(0.0);
    // z is row-major: z[row][col], columns are eigenvectors
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(TridiagError::NoConvergence { index: l + 1 });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in z.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order.iter().map(|&k| z.iter().map(|row| row[k]).collect()).collect();
    Ok(EigenDecomp { values, vectors })
}

impl EigenDecomp {
    pub fn entry_with(&self, f: impl Fn(f64) -> f64, i: usize, j: usize) -> f64 {
        self.values.iter().zip(&self.vectors).map(|(&l, v)| f(l) * v[i - 1] * v[j - 1]).sum()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

/// `f(A)[i, j]` from the eigendecomposition (1-based).
pub fn entry_f(a: &TridiagMatrix, f: &TargetFunction, i: usize, j: usize) -> Result<f64, TridiagError> {
    entry_fn(a, |x| f.value(x), i, j)
}

/// [`entry_f`] for an arbitrary real function, e.g. `1/x`.
pub fn entry_fn(a: &TridiagMatrix, f: impl Fn(f64) -> f64, i: usize, j: usize) -> Result<f64, TridiagError> {
    a.check_index(i, j)?;
    Ok(eigen(a)?.entry_with(f, i, j))
}

fn closed_form_values(a: &TridiagMatrix) -> Result<Vec<f64>, TridiagError> {
    if !a.is_zero_diag() {
        return Err(TridiagError::NonZeroDiagonal);
    }
    let values = eigen(a)?.values;
    let gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap < MIN_CLOSED_GAP {
        return Err(TridiagError::IllConditioned { gap, limit: MIN_CLOSED_GAP });
    }
    Ok(values)
}

/// `sum_i g(lambda_i) / prod_(j != i)(lambda_i - lambda_j)` scaled by
/// `exp(log_scale) * sign`, computed term-wise in log space.
fn divided_sum(values: &[f64], log_scale: f64, sign: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, &li) in values.iter().enumerate() {
        let (mut lg, mut sg) = (log_scale, sign);
        for (j, &lj) in values.iter().enumerate() {
            if i != j {
                lg -= (li - lj).abs().ln();
                sg *= (li - lj).signum();
            }
        }
        total += sg * lg.exp() * g(li);
    }
    total
}

/// `f(A)[1, n] = b_1...b_(n-1) sum_i f(lambda_i) / prod_(j != i)(lambda_i - lambda_j)`.
pub fn entry_1n_closed(a: &TridiagMatrix, f: &TargetFunction) -> Result<f64, TridiagError> {
    if a.n == 1 {
        return entry_f(a, f, 1, 1);
    }
    let values = closed_form_values(a)?;
    let (lg, sg) = a.log_bprod(1, a.n - 1);
    Ok(divided_sum(&values, lg, sg, |x| f.value(x)))
}

/// `f(A)[2, n-1] = b_2...b_(n-2) sum_i lambda_i^2 f(lambda_i) / prod_(j != i)(lambda_i - lambda_j)`.
pub fn entry_2n1_closed(a: &TridiagMatrix, f: &TargetFunction) -> Result<f64, TridiagError> {
    if a.n < 4 {
        return Err(TridiagError::TooSmall { needed: 4, n: a.n });
    }
    if !a.is_persymmetric(SYMMETRY_TOL) {
        return Err(TridiagError::NotPersymmetric);
    }
    let values = closed_form_values(a)?;
    let (lg, sg) = a.log_bprod(2, a.n - 2);
    Ok(divided_sum(&values, lg, sg, |x| x * x * f.value(x)))
}

/// `(T^-1)[i, j]` for constant-diagonal `T` via the `theta`/`phi` recurrences.
pub fn inverse_entry(t: &TridiagMatrix, i: usize, j: usize) -> Result<f64, TridiagError> {
    t.check_index(i, j)?;
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    let n = t.n;
    let a = t.diag[0];
    if t.diag.iter().any(|&x| x != a) {
        return Err(TridiagError::NonConstantDiagonal);
    }
    let b = |k: usize| t.offdiag[k - 1];
    // theta[k] for k = 0..=n
    let mut theta = vec![0.0; n + 1];
    theta[0] = 1.0;
    theta[1] = a;
    for k in 2..=n {
        theta[k] = a * theta[k - 1] - b(k - 1).powi(2) * theta[k - 2];
    }
    // phi[k] for k = 1..=n+1
    let mut phi = vec![0.0; n + 2];
    phi[n + 1] = 1.0;
    phi[n] = a;
    for k in (1..n).rev() {
        phi[k] = a * phi[k + 1] - b(k).powi(2) * phi[k + 2];
    }
    let scale = t.offdiag.iter().fold(a.abs(), |m, x| m.max(2.0 * x.abs())).max(f64::MIN_POSITIVE);
    if theta[n] == 0.0 || theta[n].abs() < 1e-13 * scale.powi(n as i32) {
        return Err(TridiagError::Singular);
    }
    let prod: f64 = (i..j).map(b).product();
    let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * prod * theta[i - 1] * phi[j + 1] / theta[n])
}

/// Zero-diagonal, positive, persymmetric matrix with spectrum `±S` (plus 0
/// when flagged). First-coordinate weights are `w_i^2 ∝ 1 / |g'(lambda_i)|`.
pub fn reconstruct(s: &SymSpectrum) -> Result<TridiagMatrix, TridiagError> {
    let gap = s.min_gap();
    if gap < MIN_RECONSTRUCT_GAP {
        return Err(TridiagError::IllConditioned { gap, limit: MIN_RECONSTRUCT_GAP });
    }
    let lambda = s.values();
    let n = lambda.len();
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            -(0..n).filter(|&j| j != i).map(|j| (lambda[i] - lambda[j]).abs().ln()).sum::<f64>()
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (0.5 * (l - top)).exp()).collect();
    normalize(&mut w);
    let b = lanczos(&lambda, &w)?;
    let a = TridiagMatrix::zero_diag(b);
    let residual = spectral_residual(&a, &lambda)?;
    if residual > 1e-9 {
        return Err(TridiagError::Inaccurate { residual });
    }
    Ok(a)
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    nrm
}

/// Lanczos on `diag(lambda)` from `w` with full reorthogonalization; returns
/// the off-diagonal. The diagonal is zero by the `±` symmetry and is not
/// stored.
fn lanczos(lambda: &[f64], w: &[f64]) -> Result<Vec<f64>, TridiagError> {
    let n = lambda.len();
    let mut basis: Vec<Vec<f64>> = vec![w.to_vec()];
    let mut b = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let q = &basis[k];
        let mut r: Vec<f64> = q.iter().zip(lambda).map(|(x, l)| x * l).collect();
        for _ in 0..2 {
            for prev in &basis {
                let c: f64 = prev.iter().zip(&r).map(|(p, x)| p * x).sum();
                r.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
            }
        }
        let beta = normalize(&mut r);
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(TridiagError::LostPositivity { index: k + 1, value: beta });
        }
        b.push(beta);
        basis.push(r);
    }
    Ok(b)
}

fn spectral_residual(a: &TridiagMatrix, lambda: &[f64]) -> Result<f64, TridiagError> {
    let got = eigen(a)?.values;
    Ok(got.iter().zip(lambda).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Left-hand side of the normalization identity for a reconstructed matrix.
///
/// Without zero: `sum_i b_1...b_(2m-1) / (x_i |prod_(j != i)(x_i^2 - x_j^2)|)`.
/// With zero: `sum_i b_2...b_(2m-1) / |prod_(j != i)(x_i^2 - x_j^2)|`.
/// Both equal 1.
pub fn normalization_lhs(a: &TridiagMatrix, s: &SymSpectrum) -> f64 {
    let m = s.xs.len();
    let (lg, _) = if s.includes_zero { a.log_bprod(2, 2 * m - 1) } else { a.log_bprod(1, 2 * m - 1) };
    s.xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut l = lg;
            if !s.includes_zero {
                l -= xi.ln();
            }
            for (j, &xj) in s.xs.iter().enumerate() {
                if i != j {
                    l -= (xi * xi - xj * xj).abs().ln();
                }
            }
            l.exp()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dense(a: &TridiagMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(a.n, a.n, |i, j| a.get(i + 1, j + 1))
    }

    fn random_spectrum(rng: &mut ChaCha8Rng, m: usize, zero: bool, min_gap: f64) -> SymSpectrum {
        loop {
            let mut xs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            xs.sort_by(f64::total_cmp);
            if let Ok(s) = SymSpectrum::new(xs, zero) {
                if s.min_gap() >= min_gap {
                    return s;
                }
            }
        }
    }

    #[test]
    fn eigen_two_by_two() {
        let e = eigen(&TridiagMatrix::zero_diag(vec![0.3])).unwrap();
        assert!((e.values[0] + 0.3).abs() < 1e-15 && (e.values[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn eigen_path_values() {
        for n in [1, 2, 5, 16, 33] {
            let e = eigen(&TridiagMatrix::path(n, 1.0)).unwrap();
            let mut want: Vec<f64> = (1..=n).map(|k| 2.0 * (k as f64 * PI / (n + 1) as f64).cos()).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in e.values.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_residuals_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3, 10, 60] {
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let off: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = TridiagMatrix::new(diag, off).unwrap();
            let e = eigen(&a).unwrap();
            let bmax = a.offdiag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let d = dense(&a);
            for (l, v) in e.values.iter().zip(&e.vectors) {
                let av = &d * nalgebra::DVector::from_column_slice(v);
                let res = av.iter().zip(v).map(|(x, y)| (x - l * y).powi(2)).sum::<f64>().sqrt();
                assert!(res <= 1e-10 * n as f64 * bmax.max(1.0));
            }
            for p in 0..n {
                for q in 0..n {
                    let dot: f64 = e.vectors[p].iter().zip(&e.vectors[q]).map(|(x, y)| x * y).sum();
                    assert!((dot - f64::from(u8::from(p == q))).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn entry_examples() {
        let a = TridiagMatrix::zero_diag(vec![0.3, 0.7, 0.2, 0.5]);
        let sq = entry_fn(&a, |x| x * x, 1, 3).unwrap();
        assert!((sq - 0.21).abs() < 1e-14);
        for m in 1..=6 {
            let p = TridiagMatrix::path(2 * m, 1.0);
            let v = entry_fn(&p, |x| 1.0 / x, 1, 2 * m).unwrap();
            let want = if m % 2 == 1 { 1.0 } else { -1.0 };
            assert!((v - want).abs() < 1e-10);
        }
        assert!(entry_fn(&a, |x| x, 0, 1).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let a = TridiagMatrix::zero_diag(vec![0.3, 0.7, 0.7, 0.3]);
        let x4 = TargetFunction::from_spec("power:d=4").unwrap();
        let v = entry_1n_closed(&a, &x4).unwrap();
        assert!((v - 0.3 * 0.7 * 0.7 * 0.3).abs() < 1e-13);
        let even = TargetFunction::from_spec("cos:t=3").unwrap();
        let b = TridiagMatrix::zero_diag(vec![0.4, 0.2, 0.4]);
        assert!(entry_1n_closed(&b, &even).unwrap().abs() < 1e-13);
        assert!(entry_f(&b, &even, 1, 4).unwrap().abs() < 1e-13);
        let one = TargetFunction::from_spec("const:c=1").unwrap();
        assert!(entry_2n1_closed(&b, &one).unwrap().abs() < 1e-13);
        let sq = TargetFunction::from_spec("power:d=2").unwrap();
        assert!(entry_2n1_closed(&b, &sq).unwrap().abs() < 1e-13);
        assert!(entry_2n1_closed(&a, &sq).is_ok());
        assert!(entry_2n1_closed(&TridiagMatrix::zero_diag(vec![0.1, 0.2, 0.3]), &sq).is_err());
    }

    #[test]
    fn inverse_examples() {
        let t = TridiagMatrix::zero_diag(vec![0.25]);
        assert!((inverse_entry(&t, 1, 2).unwrap() - 4.0).abs() < 1e-14);
        assert!((inverse_entry(&TridiagMatrix::path(4, 1.0), 1, 4).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(inverse_entry(&TridiagMatrix::path(3, 1.0), 1, 3), Err(TridiagError::Singular));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 5, 9, 20] {
            let a = rng.gen_range(-2.0..2.0);
            let off: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = TridiagMatrix::new(vec![a; n], off).unwrap();
            let inv = dense(&t).try_inverse().unwrap();
            for i in 1..=n {
                for j in 1..=n {
                    let v = inverse_entry(&t, i, j).unwrap();
                    assert!((v - inv[(i - 1, j - 1)]).abs() < 1e-9 * inv.amax().max(1.0));
                }
            }
        }
        assert_eq!(
            inverse_entry(&TridiagMatrix::new(vec![1.0, 2.0], vec![0.5]).unwrap(), 1, 2),
            Err(TridiagError::NonConstantDiagonal)
        );
    }

    #[test]
    fn reconstruct_examples() {
        let a = reconstruct(&SymSpectrum::new(vec![0.37], false).unwrap()).unwrap();
        assert!((a.offdiag[0] - 0.37).abs() < 1e-15);
        for m in [1, 2, 5, 16, 32] {
            let xs = (1..=m).map(|i| (2 * i - 1) as f64 / (2 * m - 1) as f64).collect();
            let a = reconstruct(&SymSpectrum::new(xs, false).unwrap()).unwrap();
            for (k, b) in a.offdiag.iter().enumerate() {
                let i = (k + 1) as f64;
                let want = (i * (2.0 * m as f64 - i)).sqrt() / (2 * m - 1) as f64;
                assert!((b - want).abs() < 1e-10, "m={m} i={i}: {b} vs {want}");
            }
        }
        assert!(matches!(
            reconstruct(&SymSpectrum::new(vec![0.5, 0.5 + 1e-8], false).unwrap()),
            Err(TridiagError::IllConditioned { .. })
        ));
        assert!(SymSpectrum::new(vec![0.0, 0.5], false).is_err());
        assert!(SymSpectrum::new(vec![0.6, 0.5], false).is_err());
    }

    #[test]
    fn reconstruct_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let m = rng.gen_range(1..=50);
            let zero = trial % 2 == 1;
            let s = random_spectrum(&mut rng, m, zero, 1e-4);
            let a = reconstruct(&s).unwrap();
            let got = eigen(&a).unwrap().values;
            for (x, y) in got.iter().zip(s.values()) {
                assert!((x - y).abs() < 1e-8);
            }
            assert!(a.offdiag.iter().all(|&b| b > 0.0));
            assert!(a.is_persymmetric(1e-8));
            assert!((normalization_lhs(&a, &s) - 1.0).abs() < 1e-7, "{}", normalization_lhs(&a, &s));
        }
    }

    #[test]
    fn closed_forms_match_dense_on_reconstructed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fs = ["sin:t=7", "cos:t=4", "exp:t=2", "cheb:d=9"].map(|s| TargetFunction::from_spec(s).unwrap());
        for n in 4..=40 {
            for _ in 0..3 {
                let zero = n % 2 == 1;
                let s = random_spectrum(&mut rng, n / 2, zero, 1e-3);
                let a = reconstruct(&s).unwrap();
                for f in &fs {
                    let c1 = entry_1n_closed(&a, f).unwrap();
                    let d1 = entry_f(&a, f, 1, n).unwrap();
                    assert!((c1 - d1).abs() < 1e-8, "n={n} {}: {c1} vs {d1}", f.label());
                    let c2 = entry_2n1_closed(&a, f).unwrap();
                    let d2 = entry_f(&a, f, 2, n - 1).unwrap();
                    assert!((c2 - d2).abs() < 1e-8, "n={n} {}: {c2} vs {d2}", f.label());
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zero_diagonal_spectrum_is_paired(b in prop::collection::vec(0.01f64..1.0, 1..40)) {
            let a = TridiagMatrix::zero_diag(b);
            let v = eigen(&a).unwrap().values;
            let n = v.len();
            for k in 0..n {
                prop_assert!((v[k] + v[n - 1 - k]).abs() < 1e-9);
            }
        }

        #[test]
        fn reconstruct_has_unit_norm_bound(seed in any::<u64>(), m in 1usize..30, zero in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_spectrum(&mut rng, m, zero, 1e-4);
            let a = reconstruct(&s).unwrap();
            prop_assert!(eigen(&a).unwrap().spectral_radius() <= 1.0 + 1e-12);
        }
    }
}
