//! Classical estimators for `<i|f(A)|j>` on oracle-access matrices: exact
//! expansion over paths, random-walk Monte Carlo and contour integration.
//!
//! Every routine here is generic over [`SparseOracle`] and touches the matrix
//! only through `position` and `entry`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::funcspace::ChebPoly;
use crate::sparsemat::{QueryCounter, SparseError, SparseOracle, Tally};

/// Walks handed to one worker at a time. Fixed so that the reduction order,
/// and hence every bit of the result, is independent of the thread count.
const CHUNK: u64 = 4096;
/// Samples used to bound `max |f|` on the contour.
pub const CIRCLE_SAMPLES: usize = 4096;
/// Safety factor on the sampled contour maximum.
pub const CIRCLE_MARGIN: f64 = 1.1;
/// Default cap on oracle queries for [`exact_entry`].
pub const DEFAULT_EXACT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("fail_prob must lie in (0, 1), got {0}")]
    BadFailProb(f64),
    #[error("index {index} outside 1..={n}")]
    Index { index: usize, n: usize },
    #[error("query budget {limit} exceeded")]
    Budget { limit: u64 },
    #[error("walk count {needed} exceeds the cap {cap}")]
    TooManyWalks { needed: u64, cap: u64 },
    #[error("contour radius {big_lambda} must exceed the norm bound {lambda} > 0")]
    Radius { lambda: f64, big_lambda: f64 },
    #[error("max |f| on the contour is not finite")]
    Overflow,
    #[error("non-finite polynomial coefficient")]
    NonFinite,
    #[error(transparent)]
    Oracle(#[from] SparseError),
}

/// Polynomial `sum_r a_r x^r` in the monomial basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySpec {
    coeffs: Vec<f64>,
}

impl PolySpec {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self, EstimateError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(EstimateError::NonFinite);
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(PolySpec { coeffs })
    }

    pub fn from_cheb(p: &ChebPoly) -> Self {
        PolySpec::new(p.to_monomial()).expect("Chebyshev coefficients are finite")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// `||p(beta x)||_{l1} = sum_r |a_r| beta^r`.
pub fn poly_norm_l1_scaled(p: &PolySpec, beta: f64) -> f64 {
    let mut pow = 1.0;
    let mut total = 0.0;
    for &a in &p.coeffs {
        total += a.abs() * pow;
        pow *= beta;
    }
    total
}

/// `||p(beta x)||_{l2} = (sum_r |a_r beta^r|^2)^(1/2)`.
pub fn poly_norm_l2_scaled(p: &PolySpec, beta: f64) -> f64 {
    let mut pow = 1.0;
    let mut total = 0.0;
    for &a in &p.coeffs {
        total += (a * pow).powi(2);
        pow *= beta;
    }
    total.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Walk,
    Contour,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: Complex64,
    /// Imaginary part dropped when the caller declared a real matrix.
    pub imag_residue: f64,
    pub target_eps: f64,
    pub walks_used: u64,
    pub queries: Tally,
    pub method: Method,
    pub seed: u64,
    /// Trapezoid nodes `M` (contour only).
    pub nodes: Option<usize>,
    /// Neumann truncation order `N` (contour only).
    pub terms: Option<usize>,
    /// Bound `L` on `|f|` over the contour (contour only).
    pub contour_max: Option<f64>,
}

fn check_index<O: SparseOracle + ?Sized>(a: &O, index: usize) -> Result<(), EstimateError> {
    if index == 0 || index > a.dim() {
        return Err(EstimateError::Index { index, n: a.dim() });
    }
    Ok(())
}

/// Nonzeros `(m, A[m, k], |A[m, k]|)` of column `k`, read through the
/// oracles. A Hermitian matrix has the same pattern in row `k` and column `k`.
fn column<O: SparseOracle + ?Sized>(
    a: &O,
    tally: &mut Tally,
    k: usize,
    buf: &mut Vec<(usize, Complex64, f64)>,
) -> Result<(), EstimateError> {
    buf.clear();
    for ord in 1..=a.sparsity() {
        match a.position(tally, k, ord) {
            Ok(m) => {
                let v = a.entry(tally, m, k);
                buf.push((m, v, (v.re * v.re + v.im * v.im).sqrt()));
            }
            Err(SparseError::Ordinal { .. }) => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// `||A||_1` computed through the oracles (`n` column scans).
pub fn oracle_norm1<O: SparseOracle + ?Sized>(a: &O, counter: &QueryCounter) -> Result<f64, EstimateError> {
    let mut tally = Tally::default();
    let mut buf = Vec::new();
    let mut best = 0.0f64;
    for k in 1..=a.dim() {
        column(a, &mut tally, k, &mut buf)?;
        best = best.max(buf.iter().map(|e| e.2).sum());
    }
    counter.absorb(tally);
    Ok(best)
}

/// `<i|A^r|j>` for `r = 0..=d` by expanding every path of length `d` from
/// `j`. Paths are not merged, so the cost is about `3 s^(d-1)` queries; the
/// last step only needs the single entry `A[i, k]`.
pub fn exact_powers<O: SparseOracle + ?Sized>(
    a: &O,
    d: usize,
    i: usize,
    j: usize,
    counter: &QueryCounter,
    budget: u64,
) -> Result<Vec<Complex64>, EstimateError> {
    check_index(a, i)?;
    check_index(a, j)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); d + 1];
    let mut tally = Tally::default();
    let result = expand(a, d, i, j, 0, Complex64::new(1.0, 0.0), &mut acc, &mut tally, budget);
    counter.absorb(tally);
    result.map(|_| acc)
}

#[allow(clippy::too_many_arguments)]
fn expand<O: SparseOracle + ?Sized>(
    a: &O,
    d: usize,
    i: usize,
    k: usize,
    depth: usize,
    amp: Complex64,
    acc: &mut [Complex64],
    tally: &mut Tally,
    budget: u64,
) -> Result<(), EstimateError> {
    if k == i {
        acc[depth] += amp;
    }
    if depth == d {
        return Ok(());
    }
    if depth + 1 == d {
        acc[d] += amp * a.entry(tally, i, k);
    } else {
        let mut buf = Vec::with_capacity(a.sparsity());
        column(a, tally, k, &mut buf)?;
        for (m, v, _) in buf {
            expand(a, d, i, m, depth + 1, amp * v, acc, tally, budget)?;
        }
    }
    if tally.total() > budget {
        return Err(EstimateError::Budget { limit: budget });
    }
    Ok(())
}

/// Exact `<i|p(A)|j>` from [`exact_powers`].
pub fn exact_entry<O: SparseOracle + ?Sized>(
    a: &O,
    p: &PolySpec,
    i: usize,
    j: usize,
    counter: &QueryCounter,
    budget: u64,
) -> Result<EstimateReport, EstimateError> {
    let before = counter.snapshot();
    let powers = exact_powers(a, p.degree(), i, j, counter, budget)?;
    let value = p.coeffs.iter().zip(&powers).map(|(&c, &w)| w * c).sum();
    let after = counter.snapshot();
    Ok(EstimateReport {
        value,
        imag_residue: 0.0,
        target_eps: 0.0,
        walks_used: 0,
        queries: Tally { o1: after.o1 - before.o1, o2: after.o2 - before.o2 },
        method: Method::Exact,
        seed: 0,
        nodes: None,
        terms: None,
        contour_max: None,
    })
}

/// Walks needed so that `d` union-bounded Hoeffding estimates all hold:
/// `ceil(ln(2d / fail) / (2 eps'^2))` with `eps' = eps / l1`.
pub fn walk_count(l1: f64, d: usize, eps: f64, fail_prob: f64) -> u64 {
    if l1 == 0.0 {
        return 0;
    }
    let e = eps / l1;
    ((2.0 * d.max(1) as f64 / fail_prob).ln() / (2.0 * e * e)).ceil() as u64
}

/// Runs `walks` random walks of length `d` from `j` and returns the sample
/// means of `Y_r`, `r = 0..=d`.
///
/// Walk `w` uses words `[2dw, 2d(w+1))` of the ChaCha8 stream seeded by
/// `seed`, one uniform per step whether or not the walk survives, and sums
/// are reduced chunk by chunk in index order. The output is therefore the
/// same under every [`Exec`] policy and thread count.
pub fn walk_means<O: SparseOracle + ?Sized>(
    a: &O,
    d: usize,
    i: usize,
    j: usize,
    walks: u64,
    seed: u64,
    exec: Exec,
    counter: &QueryCounter,
) -> Result<Vec<Complex64>, EstimateError> {
    check_index(a, i)?;
    check_index(a, j)?;
    let zero = Complex64::new(0.0, 0.0);
    if walks == 0 {
        return Ok(vec![zero; d + 1]);
    }
    let chunks = walks.div_ceil(CHUNK) as usize;
    let parts = exec.map_range(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(walks);
        let mut sums = vec![zero; d + 1];
        let mut tally = Tally::default();
        let mut buf = Vec::with_capacity(a.sparsity());
        let mut uniforms = vec![0.0; d];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(lo as u128 * 2 * d as u128);
        for _ in lo..hi {
            uniforms.iter_mut().for_each(|u| *u = rng.gen());
            one_walk(a, d, i, j, &uniforms, &mut sums, &mut tally, &mut buf)?;
        }
        Ok::<_, EstimateError>((sums, tally))
    });
    let mut total = vec![zero; d + 1];
    let mut tally = Tally::default();
    for part in parts {
        let (sums, t) = part?;
        for (acc, s) in total.iter_mut().zip(sums) {
            *acc += s;
        }
        tally.merge(t);
    }
    counter.absorb(tally);
    let p = walks as f64;
    Ok(total.into_iter().map(|s| s / p).collect())
}

#[allow(clippy::too_many_arguments)]
fn one_walk<O: SparseOracle + ?Sized>(
    a: &O,
    d: usize,
    i: usize,
    j: usize,
    uniforms: &[f64],
    sums: &mut [Complex64],
    tally: &mut Tally,
    buf: &mut Vec<(usize, Complex64, f64)>,
) -> Result<(), EstimateError> {
    let mut k = j;
    let mut weight = Complex64::new(1.0, 0.0);
    for (r, sum) in sums.iter_mut().enumerate() {
        if k == i {
            *sum += weight;
        }
        if r == d {
            break;
        }
        column(a, tally, k, buf)?;
        let norm: f64 = buf.iter().map(|e| e.2).sum();
        if norm == 0.0 {
            // absorbing dead end: every later Y_r is zero
            break;
        }
        let u = uniforms[r] * norm;
        let mut cum = 0.0;
        let mut next = buf[buf.len() - 1];
        for &e in buf.iter() {
            cum += e.2;
            if u < cum {
                next = e;
                break;
            }
        }
        weight *= next.1 * (norm / next.2);
        k = next.0;
    }
    Ok(())
}

/// Settings for [`walk_estimate`].
#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub eps: f64,
    pub fail_prob: f64,
    pub seed: u64,
    /// Upper bound on `||A||_1`; measured through the oracles when absent.
    pub norm1: Option<f64>,
    pub exec: Exec,
    pub max_walks: u64,
}

impl WalkConfig {
    pub fn new(eps: f64, fail_prob: f64, seed: u64) -> Self {
        WalkConfig { eps, fail_prob, seed, norm1: None, exec: Exec::default(), max_walks: 1 << 32 }
    }
}

fn check_accuracy(eps: f64, fail_prob: f64) -> Result<(), EstimateError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(EstimateError::BadEps(eps));
    }
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(EstimateError::BadFailProb(fail_prob));
    }
    Ok(())
}

/// Random-walk estimate of `<i|p(A)|j>`, within `eps` with probability at
/// least `1 - fail_prob`.
pub fn walk_estimate<O: SparseOracle + ?Sized>(
    a: &O,
    p: &PolySpec,
    i: usize,
    j: usize,
    cfg: &WalkConfig,
    counter: &QueryCounter,
) -> Result<EstimateReport, EstimateError> {
    check_accuracy(cfg.eps, cfg.fail_prob)?;
    let before = counter.snapshot();
    let norm1 = match cfg.norm1 {
        Some(v) => v,
        None => oracle_norm1(a, counter)?,
    };
    let d = p.degree();
    // the r = 0 term is exact, so only the d higher powers are sampled
    let tail = PolySpec { coeffs: std::iter::once(0.0).chain(p.coeffs[1..].iter().copied()).collect() };
    let walks = if d == 0 { 0 } else { walk_count(poly_norm_l1_scaled(&tail, norm1), d, cfg.eps, cfg.fail_prob) };
    if walks > cfg.max_walks {
        return Err(EstimateError::TooManyWalks { needed: walks, cap: cfg.max_walks });
    }
    let means = walk_means(a, d, i, j, walks, cfg.seed, cfg.exec, counter)?;
    let mut value: Complex64 = p.coeffs.iter().zip(&means).skip(1).map(|(&c, &m)| m * c).sum();
    if i == j {
        value += p.coeffs[0];
    }
    let after = counter.snapshot();
    Ok(EstimateReport {
        value,
        imag_residue: 0.0,
        target_eps: cfg.eps,
        walks_used: walks,
        queries: Tally { o1: after.o1 - before.o1, o2: after.o2 - before.o2 },
        method: Method::Walk,
        seed: cfg.seed,
        nodes: None,
        terms: None,
        contour_max: None,
    })
}

/// Trapezoid node count `M = ceil(ln(1/eps) / ln(Lambda/lambda))` and Neumann
/// order `N` with `N + 1 = ceil((ln(1/(1 - lambda/Lambda)) + ln(1/eps)) / ln(Lambda/lambda))`.
pub fn contour_params(eps: f64, lambda: f64, big_lambda: f64) -> Result<(usize, usize), EstimateError> {
    if !(lambda > 0.0 && big_lambda > lambda && big_lambda.is_finite()) {
        return Err(EstimateError::Radius { lambda, big_lambda });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(EstimateError::BadEps(eps));
    }
    let q = (big_lambda / lambda).ln();
    let m = ((1.0 / eps).ln() / q).ceil().max(1.0) as usize;
    let n1 = (((1.0 / (1.0 - lambda / big_lambda)).ln() + (1.0 / eps).ln()) / q).ceil().max(1.0) as usize;
    Ok((m, n1 - 1))
}

/// `CIRCLE_MARGIN * max |f(z)|` over [`CIRCLE_SAMPLES`] equispaced points of `|z| = radius`.
pub fn contour_max(f: &(dyn Fn(Complex64) -> Complex64 + Sync), radius: f64) -> Result<f64, EstimateError> {
    let mut best = 0.0f64;
    for k in 0..CIRCLE_SAMPLES {
        let z = Complex64::from_polar(radius, 2.0 * PI * k as f64 / CIRCLE_SAMPLES as f64);
        let v = f(z).norm();
        if !v.is_finite() {
            return Err(EstimateError::Overflow);
        }
        best = best.max(v);
    }
    let l = CIRCLE_MARGIN * best;
    if !l.is_finite() {
        return Err(EstimateError::Overflow);
    }
    Ok(l)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Settings for [`contour_estimate`].
#[derive(Clone, Debug)]
pub struct ContourConfig {
    /// Upper bound on the spectral norm `||A||`.
    pub lambda: f64,
    /// Contour radius; must bound `||A||_1`. Measured through the oracles when absent.
    pub big_lambda: Option<f64>,
    pub eps: f64,
    pub fail_prob: f64,
    pub seed: u64,
    /// Caller asserts `A` is real symmetric, so the imaginary part is noise.
    pub real_input: bool,
    pub exec: Exec,
    pub max_walks: u64,
}

impl ContourConfig {
    pub fn new(lambda: f64, eps: f64, fail_prob: f64, seed: u64) -> Self {
        ContourConfig {
            lambda,
            big_lambda: None,
            eps,
            fail_prob,
            seed,
            real_input: false,
            exec: Exec::default(),
            max_walks: 1 << 32,
        }
    }
}

/// Contour estimate of `<i|f(A)|j>` for `f` analytic on a disk of radius
/// greater than `Lambda^2 / lambda` (the caller's responsibility).
///
/// Each of the `M` trapezoid nodes `z_k = Lambda e^(2 pi i k / M)` needs the
/// resolvent entry `<i|(I - A/z_k)^(-1)|j>`, which is approximated by the
/// truncated Neumann series and estimated by walks to accuracy `eps / L`,
/// with failure budget `fail_prob / M` per node.
pub fn contour_estimate<O: SparseOracle + ?Sized>(
    a: &O,
    f: &(dyn Fn(Complex64) -> Complex64 + Sync),
    i: usize,
    j: usize,
    cfg: &ContourConfig,
    counter: &QueryCounter,
) -> Result<EstimateReport, EstimateError> {
    check_accuracy(cfg.eps, cfg.fail_prob)?;
    let before = counter.snapshot();
    let big_lambda = match cfg.big_lambda {
        Some(v) => v,
        None => oracle_norm1(a, counter)?,
    };
    let (m, n) = contour_params(cfg.eps, cfg.lambda, big_lambda)?;
    let l = contour_max(f, big_lambda)?;
    // |z_k| = Lambda >= ||A||_1, so the series has l1 norm at most N + 1
    let walks = if n == 0 { 0 } else { walk_count((n + 1) as f64, n, cfg.eps / l, cfg.fail_prob / m as f64) };
    if walks > cfg.max_walks {
        return Err(EstimateError::TooManyWalks { needed: walks, cap: cfg.max_walks });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..m {
        let z = Complex64::from_polar(big_lambda, 2.0 * PI * k as f64 / m as f64);
        let means = walk_means(a, n, i, j, walks, splitmix(cfg.seed ^ splitmix(k as u64)), cfg.exec, counter)?;
        let mut resolvent = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        let mut zpow = Complex64::new(1.0, 0.0);
        for mean in &means[1..] {
            zpow /= z;
            resolvent += mean * zpow;
        }
        total += f(z) * resolvent;
    }
    let mut value = total / m as f64;
    let mut imag_residue = 0.0;
    if cfg.real_input {
        imag_residue = value.im.abs();
        value = Complex64::new(value.re, 0.0);
    }
    let after = counter.snapshot();
    Ok(EstimateReport {
        value,
        imag_residue,
        target_eps: cfg.eps,
        walks_used: walks * m as u64,
        queries: Tally { o1: after.o1 - before.o1, o2: after.o2 - before.o2 },
        method: Method::Contour,
        seed: cfg.seed,
        nodes: Some(m),
        terms: Some(n),
        contour_max: Some(l),
    })
}
