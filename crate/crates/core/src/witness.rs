//! Witness matrices: zero-diagonal tridiagonal matrices whose `(1, n)` or
//! `(2, n-1)` entry of `f(A)` equals the best-approximation error of the odd
//! or even part of `f`, and lower-bound certificates built from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approxdeg::{self, ApproxError, Basis, DualWeights};
use crate::funcspace::{parity_split, Parity, TargetFunction};
use crate::tridiag::{self, SymSpectrum, TridiagError, TridiagMatrix};

/// Required agreement between claimed and achieved entries.
pub const WITNESS_TOL: f64 = 1e-6;
/// Replacement for a reference point at 0. Keeps the `±` spectrum gap at
/// `2 * NUDGE` above the reconstruction limit while moving the objective by
/// `O(NUDGE^2)` for smooth even functions.
pub const NUDGE: f64 = 2e-5;
/// Below this Val the problem is treated as exactly representable.
const DEGENERATE_VAL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;
/// Alternation points closer to 0 than this are ignored; 0 itself belongs to
/// the spectrum only through the even construction.
const MIN_POINT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Tridiag(#[from] TridiagError),
    #[error("the {0} part of f vanishes; no witness exists")]
    ZeroPart(Parity),
    #[error("eps = {eps} must satisfy 0 < eps < sup|f_parity| = {sup}")]
    BadEps { eps: f64, sup: f64 },
    #[error("parity must be odd or even")]
    BadParity,
    #[error("reference point {0} outside (0, 1]")]
    RefOutOfRange(f64),
    #[error("cannot place reference points: {0}")]
    Nudge(String),
    #[error("achieved entry {achieved} differs from claimed {claimed}")]
    Mismatch { claimed: f64, achieved: f64 },
    #[error("found only {found} alternating +-1 points, need {needed}")]
    NoAlternation { found: usize, needed: usize },
}

/// A reference point moved before reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nudge {
    pub from: f64,
    pub to: f64,
}

/// Witness matrix together with the data that justifies its entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub function: String,
    pub matrix: TridiagMatrix,
    pub entry_indices: (usize, usize),
    /// Signed dual objective at the points actually used; the entry equals it.
    pub claimed_value: f64,
    /// Dense-oracle value of the entry.
    pub achieved_value: f64,
    /// `Val(f_parity, d)` from the minimax solver.
    pub val: f64,
    pub eps: Option<f64>,
    pub degree_d: usize,
    pub parity: Parity,
    pub dim_offset_c: usize,
    pub refs: Vec<f64>,
    pub dual: DualWeights,
    /// Measured left side of the normalization identity (ideally 1).
    pub normalization: f64,
    pub nudge: Option<Nudge>,
}

/// Dimension offset `c` with `n = d + c`.
pub fn dim_offset(d: usize, parity: Parity) -> usize {
    match (parity, d % 2) {
        (Parity::Odd, 0) => 2,
        (Parity::Odd, _) => 3,
        (_, 0) => 5,
        _ => 4,
    }
}

fn entry_indices(n: usize, parity: Parity) -> (usize, usize) {
    if parity == Parity::Odd {
        (1, n)
    } else {
        (2, n - 1)
    }
}

fn parity_part(f: &TargetFunction, parity: Parity) -> Result<TargetFunction, WitnessError> {
    let parts = parity_split(f);
    match parity {
        Parity::Odd => Ok(parts.odd),
        Parity::Even => Ok(parts.even),
        Parity::None => Err(WitnessError::BadParity),
    }
}

/// Builds the witness for `f_parity` at a fixed degree `d`.
pub fn build_witness_at_degree(
    f: &TargetFunction,
    d: usize,
    parity: Parity,
) -> Result<WitnessCertificate, WitnessError> {
    let g = parity_part(f, parity)?;
    let ba = approxdeg::best_approx(&g, d, parity)?;
    let nref = Basis::new(d, parity).nref();
    let mut nudge = None;
    let refs: Vec<f64> = if ba.error <= DEGENERATE_VAL {
        // every point set is optimal; take positive Chebyshev-like points
        (0..nref).rev().map(|k| (std::f64::consts::PI * k as f64 / (2 * nref + 1) as f64).cos()).collect()
    } else {
        let mut r = ba.refs.clone();
        if let Some(&bad) = r.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(WitnessError::RefOutOfRange(bad));
        }
        if r[0] < NUDGE {
            if r.len() > 1 && r[1] <= 2.0 * NUDGE {
                return Err(WitnessError::Nudge(format!("second reference {} too close to 0", r[1])));
            }
            nudge = Some(Nudge { from: r[0], to: NUDGE });
            r[0] = NUDGE;
        }
        r
    };
    let dual = DualWeights::at_points(&g, &refs, parity)?;
    let claimed = dual.objective * dual.alpha.signum();
    let spectrum = SymSpectrum::new(refs.clone(), parity == Parity::Even)?;
    let matrix = tridiag::reconstruct(&spectrum)?;
    let n = matrix.n;
    let (i, j) = entry_indices(n, parity);
    let achieved = tridiag::entry_f(&matrix, f, i, j)?;
    let cert = WitnessCertificate {
        function: f.label().to_string(),
        normalization: tridiag::normalization_lhs(&matrix, &spectrum),
        matrix,
        entry_indices: (i, j),
        claimed_value: claimed,
        achieved_value: achieved,
        val: ba.error,
        eps: None,
        degree_d: d,
        parity,
        dim_offset_c: n - d,
        refs,
        dual,
        nudge,
    };
    if (achieved - claimed).abs() > WITNESS_TOL {
        return Err(WitnessError::Mismatch { claimed, achieved });
    }
    debug_assert_eq!(cert.dim_offset_c, dim_offset(d, parity));
    Ok(cert)
}

fn build_for_eps(f: &TargetFunction, eps: f64, parity: Parity) -> Result<WitnessCertificate, WitnessError> {
    let g = parity_part(f, parity)?;
    let sup = g.sup_norm();
    if sup == 0.0 {
        return Err(WitnessError::ZeroPart(parity));
    }
    if !(eps > 0.0 && eps < sup) {
        return Err(WitnessError::BadEps { eps, sup });
    }
    let (d, _) = approxdeg::approx_degree_parity(&g, eps, parity)?;
    let mut cert = build_witness_at_degree(f, d, parity)?;
    cert.eps = Some(eps);
    Ok(cert)
}

/// Witness for the odd part: entry `(1, n)`, spectrum `{±x_i}`.
pub fn build_odd_witness(f: &TargetFunction, eps: f64) -> Result<WitnessCertificate, WitnessError> {
    build_for_eps(f, eps, Parity::Odd)
}

/// Witness for the even part: entry `(2, n-1)`, spectrum `{0, ±x_i}`.
pub fn build_even_witness(f: &TargetFunction, eps: f64) -> Result<WitnessCertificate, WitnessError> {
    build_for_eps(f, eps, Parity::Even)
}

/// Outcome of re-checking a certificate from its matrix alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub recomputed: f64,
    pub residual: f64,
    pub spectral_radius: f64,
    pub dimension_law: bool,
    pub reasons: Vec<String>,
}

/// Recomputes the entry of `f(A)` and checks the certificate's claims.
pub fn verify(cert: &WitnessCertificate, f: &TargetFunction) -> Result<Verification, WitnessError> {
    let m = &cert.matrix;
    let mut reasons = Vec::new();
    let eig = tridiag::eigen(m)?;
    let (i, j) = cert.entry_indices;
    if (i, j) != entry_indices(m.n, cert.parity) {
        reasons.push(format!("entry ({i}, {j}) does not match parity {}", cert.parity));
    }
    if i == 0 || j == 0 || i > m.n || j > m.n {
        reasons.push("entry index out of range".into());
        return Ok(Verification {
            ok: false,
            recomputed: f64::NAN,
            residual: f64::NAN,
            spectral_radius: eig.spectral_radius(),
            dimension_law: false,
            reasons,
        });
    }
    let recomputed = eig.entry_with(|x| f.value(x), i, j);
    let residual = (recomputed - cert.claimed_value).abs();
    if residual > WITNESS_TOL {
        reasons.push(format!("entry residual {residual:e} exceeds {WITNESS_TOL:e}"));
    }
    let radius = eig.spectral_radius();
    if radius > 1.0 + NORM_TOL {
        reasons.push(format!("spectral radius {radius} exceeds 1"));
    }
    let dimension_law = m.n == cert.degree_d + cert.dim_offset_c
        && cert.dim_offset_c == dim_offset(cert.degree_d, cert.parity);
    if !dimension_law {
        reasons.push("dimension law n = d + c violated".into());
    }
    if !m.is_zero_diag() {
        reasons.push("diagonal is not zero".into());
    }
    Ok(Verification { ok: reasons.is_empty(), recomputed, residual, spectral_radius: radius, dimension_law, reasons })
}

/// Certified lower bound on the approximate degree of `f_parity` from the
/// entry `(1, n)` (odd) or `(2, n-1)` (even) of `f_parity(A)`.
///
/// Polynomials of degree at most `n - 2` (resp. `n - 4`) vanish in that entry
/// for any tridiagonal `A`, so when `||A|| <= 1` and `|entry| > eps` no such
/// polynomial is `eps`-close to `f_parity`. Returns 0 when no bound follows.
pub fn certify_lower_bound(a: &TridiagMatrix, f: &TargetFunction, eps: f64, parity: Parity) -> usize {
    let Ok(g) = parity_part(f, parity) else { return 0 };
    let n = a.n;
    let needed = if parity == Parity::Odd { 2 } else { 4 };
    if n <= needed {
        return 0;
    }
    let Ok(eig) = tridiag::eigen(a) else { return 0 };
    if eig.spectral_radius() > 1.0 + NORM_TOL {
        return 0;
    }
    let (i, j) = entry_indices(n, parity);
    let entry = eig.entry_with(|x| g.value(x), i, j);
    if entry.abs() > eps {
        n - needed
    } else {
        0
    }
}

/// Size-`2m` matrix with `b_i = sqrt(i(2m-i))/(2m-1)`.
pub fn nff_matrix(m: usize) -> TridiagMatrix {
    assert!(m >= 1, "m must be positive");
    let k = (2 * m - 1) as f64;
    let b = (1..2 * m).map(|i| ((i * (2 * m - i)) as f64).sqrt() / k.max(1.0)).collect();
    TridiagMatrix::zero_diag(b)
}

/// All points of `(0, 1]` where `f` reaches `+1` or `-1` (to `1e-9`), with
/// consecutive duplicates of the same sign dropped, ascending.
pub fn alternation_points(f: &TargetFunction) -> Vec<f64> {
    const GRID: usize = 20_000;
    let xs: Vec<f64> = (1..=GRID).map(|k| k as f64 / GRID as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for k in 0..GRID {
        let v = vals[k];
        let left = if k == 0 { f64::NAN } else { vals[k - 1] };
        let right = if k + 1 == GRID { f64::NAN } else { vals[k + 1] };
        let s = v.signum();
        let is_peak = !(s * left > s * v) && !(s * right > s * v);
        if !is_peak || v.abs() < 0.5 {
            continue;
        }
        let lo = if k == 0 { 1e-12 } else { xs[k - 1] };
        let hi = if k + 1 == GRID { 1.0 } else { xs[k + 1] };
        let (x, fx) = golden_peak(|x| s * f.value(x), lo, hi);
        if (fx - 1.0).abs() <= 1e-9 && x >= MIN_POINT {
            let value = s;
            match out.last() {
                Some(&(_, prev)) if prev == value => {}
                _ => out.push((x, value)),
            }
        }
    }
    out.into_iter().map(|p| p.0).collect()
}

fn golden_peak(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut best = (0.5 * (a + b), g(0.5 * (a + b)));
    for x in [a, b] {
        if g(x) > best.1 {
            best = (x, g(x));
        }
    }
    best
}

/// The first `m` alternating `±1` points of `f` in `(0, 1]`. With `m` points
/// the odd construction gives `|<1|f(A)|2m>| = 1` for odd `f`; for even `f`
/// the same points with 0 added give `|<2|f(A)|2m>| = 1`.
pub fn periodic_witness_points(f: &TargetFunction, m: usize) -> Result<SymSpectrum, WitnessError> {
    let pts = alternation_points(f);
    if m == 0 || pts.len() < m {
        return Err(WitnessError::NoAlternation { found: pts.len(), needed: m.max(1) });
    }
    Ok(SymSpectrum::new(pts[..m].to_vec(), false)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tridiag::{eigen, entry_f};

    fn f(spec: &str) -> TargetFunction {
        TargetFunction::from_spec(spec).unwrap()
    }

    fn check(cert: &WitnessCertificate) {
        assert!((cert.achieved_value - cert.claimed_value).abs() <= WITNESS_TOL);
        assert!((cert.claimed_value.abs() - cert.dual.objective).abs() < 1e-15);
        assert_eq!(cert.matrix.n, cert.degree_d + cert.dim_offset_c);
        assert_eq!(cert.dim_offset_c, dim_offset(cert.degree_d, cert.parity));
        assert!(eigen(&cert.matrix).unwrap().spectral_radius() <= 1.0 + 1e-12);
    }

    #[test]
    fn odd_witness_sin() {
        let cert = build_odd_witness(&f("sin:t=12"), 0.25).unwrap();
        check(&cert);
        assert!(cert.val <= 0.25);
        assert!((cert.claimed_value.abs() - cert.val).abs() < 1e-7);
        assert!(cert.matrix.n >= 12 && cert.matrix.n <= 30, "n = {}", cert.matrix.n);
    }

    #[test]
    fn odd_witness_t3() {
        let cert = build_odd_witness(&f("cheb:d=3"), 0.5).unwrap();
        check(&cert);
        assert_eq!(cert.degree_d, 3);
        assert_eq!(cert.matrix.n, 6);
    }

    #[test]
    fn odd_witness_identity_is_trivial() {
        let cert = build_odd_witness(&f("power:d=1"), 0.5).unwrap();
        check(&cert);
        assert_eq!(cert.degree_d, 1);
        assert!(cert.claimed_value.abs() < 1e-12 && cert.achieved_value.abs() < 1e-12);
    }

    #[test]
    fn even_witnesses() {
        let cert = build_even_witness(&f("cheb:d=4"), 0.5).unwrap();
        check(&cert);
        let cert = build_even_witness(&f("cos:t=10"), 0.25).unwrap();
        check(&cert);
        assert!((cert.claimed_value.abs() - cert.val).abs() < 1e-6);
        let cert = build_even_witness(&f("power:d=2"), 0.3).unwrap();
        check(&cert);
        assert!(cert.achieved_value.abs() < 1e-12);
    }

    #[test]
    fn witness_errors() {
        assert!(matches!(build_odd_witness(&f("cos:t=3"), 0.1), Err(WitnessError::ZeroPart(_))));
        assert!(matches!(build_odd_witness(&f("sin:t=3"), 1.5), Err(WitnessError::BadEps { .. })));
    }

    #[test]
    fn nff_examples() {
        assert_eq!(nff_matrix(1).offdiag, vec![1.0]);
        let b = nff_matrix(2).offdiag;
        let want = [3f64.sqrt() / 3.0, 2.0 / 3.0, 3f64.sqrt() / 3.0];
        for (x, y) in b.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        for m in [1, 3, 8, 64] {
            let v = eigen(&nff_matrix(m)).unwrap().values;
            let k = (2 * m - 1) as f64;
            for (i, x) in v[m..].iter().enumerate() {
                assert!((x - (2 * i + 1) as f64 / k).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nff_certifies_sin() {
        let m = 16;
        let t = (2 * m - 1) as f64 * std::f64::consts::PI / 2.0;
        let g = TargetFunction::analytic("sin", Parity::Odd, move |x| (t * x).sin(), move |z| (z * t).sin()).unwrap();
        let a = nff_matrix(m);
        // with positive b the corner entry is (-1)^(m-1)
        let e = entry_f(&a, &g, 1, 2 * m).unwrap();
        assert!((e + 1.0).abs() < 1e-6, "{e}");
        let a3 = nff_matrix(3);
        let t3 = 2.5 * std::f64::consts::PI;
        let g3 = TargetFunction::new("sin", Parity::Odd, move |x| (t3 * x).sin()).unwrap();
        assert!((entry_f(&a3, &g3, 1, 6).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(certify_lower_bound(&a, &g, 0.9, Parity::Odd), 2 * m - 2);
        // degree <= n-2 polynomials vanish in the corner
        let p = f("cheb:d=29");
        assert_eq!(certify_lower_bound(&a, &p, 1e-9, Parity::Odd), 0);
    }

    #[test]
    fn periodic_points_for_sin_and_chebyshev() {
        let t = 20.0;
        let m = ((t / std::f64::consts::PI + 1.0) / 2.0).floor() as usize;
        let s = periodic_witness_points(&f("sin:t=20"), m).unwrap();
        for (i, x) in s.xs.iter().enumerate() {
            let want = (2 * i + 1) as f64 * std::f64::consts::PI / (2.0 * t);
            assert!((x - want).abs() < 1e-7, "{x} vs {want}");
        }
        for d in [24usize, 25, 40, 41] {
            let g = f(&format!("cheb:d={d}"));
            let pts = alternation_points(&g);
            assert_eq!(pts.len(), d.div_ceil(2), "d = {d}");
            let parity = if d % 2 == 1 { Parity::Odd } else { Parity::Even };
            let s = SymSpectrum::new(pts.clone(), parity == Parity::Even).unwrap();
            let a = tridiag::reconstruct(&s).unwrap();
            let bound = certify_lower_bound(&a, &g, 0.5, parity);
            assert!(bound + 4 >= d, "d = {d}: bound {bound}");
        }
        assert!(periodic_witness_points(&f("const:c=0.5"), 1).is_err());
    }
}
