//! Best uniform polynomial approximation, approximate degree and dual weights.
//!
//! The solver is a Remez exchange over a Chebyshev basis. Parity-restricted
//! problems use only odd or even Chebyshev indices and work on `[0, 1]`.
//! When the exchange stalls, a dense-grid LP supplies the reference set.

use std::f64::consts::PI;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::funcspace::{ChebPoly, Parity, TargetFunction};

/// Tolerance for the strong-duality check in [`dual_weights`].
pub const DUALITY_TOL: f64 = 1e-7;
/// Absolute floor under which residual differences count as rounding noise.
const NOISE_FLOOR: f64 = 1e-13;
/// Default cap for [`approx_degree`].
pub const DEFAULT_DEGREE_CAP: usize = 512;

#[derive(Debug, Error, Clone)]
pub enum ApproxError {
    #[error("eps must satisfy 0 < eps, got {0}")]
    BadEps(f64),
    #[error("function parity {function} incompatible with requested {requested}")]
    ParityMismatch { function: Parity, requested: Parity },
    #[error(
        "exchange did not converge at degree {degree} after {iterations} iterations; \
         error bracket [{lower}, {upper}]"
    )]
    NoConvergence { degree: usize, iterations: usize, lower: f64, upper: f64, best: Box<BestApprox> },
    #[error("no degree up to {cap} reaches eps = {eps}; Val at cap is {val}")]
    DegreeCap { cap: usize, eps: f64, val: f64 },
    #[error("expected {expected} reference points, got {got}")]
    RefCount { expected: usize, got: usize },
    #[error("reference points must be distinct and lie in the working interval")]
    BadPoints,
    #[error("duality gap: dual objective {objective} vs primal error {error}")]
    DualityGap { objective: f64, error: f64 },
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// Minimax approximation of degree at most `degree` with its reference set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestApprox {
    pub poly: ChebPoly,
    pub error: f64,
    pub refs: Vec<f64>,
    pub signs: Vec<i8>,
    pub degree: usize,
    pub parity: Parity,
    pub iterations: usize,
}

/// Signed measure on the reference points annihilating the allowed basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualWeights {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RemezConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub degree_cap: usize,
    pub exec: Exec,
}

impl Default for RemezConfig {
    fn default() -> Self {
        RemezConfig { max_iter: 60, tol: 1e-10, degree_cap: DEFAULT_DEGREE_CAP, exec: Exec::default() }
    }
}

/// Chebyshev indices allowed at degree `d` under `parity`, plus the working
/// interval.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    pub idx: Vec<usize>,
    pub lo: f64,
}

impl Basis {
    pub fn new(d: usize, parity: Parity) -> Self {
        match parity {
            Parity::None => Basis { idx: (0..=d).collect(), lo: -1.0 },
            Parity::Odd => Basis { idx: (0..d.div_ceil(2)).map(|k| 2 * k + 1).collect(), lo: 0.0 },
            Parity::Even => Basis { idx: (0..=d / 2).map(|k| 2 * k).collect(), lo: 0.0 },
        }
    }

    pub fn nref(&self) -> usize {
        self.idx.len() + 1
    }

    fn row(&self, x: f64, out: &mut [f64]) {
        let top = self.idx.last().copied().unwrap_or(0);
        let (mut prev, mut cur) = (1.0, x);
        let mut j = 0;
        for k in 0..=top {
            let t = match k {
                0 => 1.0,
                1 => x,
                _ => {
                    let next = 2.0 * x * cur - prev;
                    prev = cur;
                    cur = next;
                    next
                }
            };
            if j < self.idx.len() && self.idx[j] == k {
                out[j] = t;
                j += 1;
            }
        }
    }

    fn poly(&self, c: &[f64]) -> ChebPoly {
        let top = self.idx.last().copied().unwrap_or(0);
        let mut coeffs = vec![0.0; top + 1];
        for (&k, &v) in self.idx.iter().zip(c) {
            coeffs[k] = v;
        }
        ChebPoly::new(coeffs)
    }

    fn initial_refs(&self) -> Vec<f64> {
        let n = self.nref();
        let nb = self.idx.len();
        // extrema of the first Chebyshev polynomial outside the basis
        let denom = match (self.lo < 0.0, self.idx.first()) {
            (true, _) => n - 1,
            (false, Some(&k)) if k % 2 == 0 => 2 * nb,
            (false, _) => 2 * nb + 1,
        };
        let mut r: Vec<f64> = (0..n).map(|k| (PI * k as f64 / denom as f64).cos()).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    fn grid(&self, size: usize) -> Vec<f64> {
        let span = if self.lo < 0.0 { PI } else { PI / 2.0 };
        let mut g: Vec<f64> = (0..size).map(|k| (span * k as f64 / (size - 1) as f64).cos()).collect();
        g.reverse();
        if self.lo == 0.0 {
            g[0] = 0.0;
        }
        g
    }
}

fn required_parity(f: &TargetFunction, parity: Parity) -> Result<(), ApproxError> {
    if parity == Parity::None || f.parity() == parity {
        Ok(())
    } else {
        Err(ApproxError::ParityMismatch { function: f.parity(), requested: parity })
    }
}

/// Minimax approximation of `f` by polynomials of degree at most `d`.
pub fn best_approx(f: &TargetFunction, d: usize, parity: Parity) -> Result<BestApprox, ApproxError> {
    best_approx_with(f, d, parity, &RemezConfig::default())
}

pub fn best_approx_with(
    f: &TargetFunction,
    d: usize,
    parity: Parity,
    cfg: &RemezConfig,
) -> Result<BestApprox, ApproxError> {
    required_parity(f, parity)?;
    let basis = Basis::new(d, parity);
    match remez(f, d, parity, &basis, cfg) {
        Ok(ba) => Ok(ba),
        Err(ApproxError::NoConvergence { degree, iterations, lower, upper, best }) => {
            match lp_fallback(f, d, parity, &basis, cfg) {
                Some(ba) if ba.error <= best.error => Ok(ba),
                _ => Err(ApproxError::NoConvergence { degree, iterations, lower, upper, best }),
            }
        }
        Err(e) => Err(e),
    }
}

struct Leveled {
    poly: ChebPoly,
    level: f64,
}

fn level(f: &TargetFunction, basis: &Basis, refs: &[f64]) -> Result<Leveled, ApproxError> {
    let n = refs.len();
    let nb = basis.idx.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut row = vec![0.0; nb];
    for (i, &x) in refs.iter().enumerate() {
        basis.row(x, &mut row);
        for j in 0..nb {
            m[(i, j)] = row[j];
        }
        m[(i, nb)] = if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let rhs = DVector::from_iterator(n, refs.iter().map(|&x| f.value(x)));
    let sol = m.lu().solve(&rhs).ok_or_else(|| ApproxError::Solver("singular reference system".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(ApproxError::Solver("non-finite reference solution".into()));
    }
    Ok(Leveled { poly: basis.poly(&sol.as_slice()[..nb]), level: sol[nb] })
}

/// Local extrema of the error with alternating sign, one per sign run.
fn alternating_extrema(
    f: &TargetFunction,
    poly: &ChebPoly,
    basis: &Basis,
    grid: &[f64],
    exec: Exec,
) -> Vec<(f64, f64)> {
    let err = |x: f64| f.value(x) - poly.value(x);
    let vals = exec.map(grid, |&x| err(x));
    let mut runs: Vec<(usize, f64)> = Vec::new();
    let mut sign = 0i8;
    for (k, &v) in vals.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let s = if v > 0.0 { 1 } else { -1 };
        if s != sign {
            runs.push((k, v));
            sign = s;
        } else if let Some(last) = runs.last_mut() {
            if v.abs() > last.1.abs() {
                *last = (k, v);
            }
        }
    }
    let hi = 1.0;
    let refined = |&(k, v): &(usize, f64)| -> (f64, f64) {
        let a = if k == 0 { grid[0] } else { grid[k - 1] };
        let b = if k + 1 == grid.len() { grid[k] } else { grid[k + 1] };
        let (x, ex) = golden_max(|x| err(x) * v.signum(), a.max(basis.lo), b.min(hi));
        if ex > v.abs() {
            (x, ex * v.signum())
        } else {
            (grid[k], v)
        }
    };
    exec.map(&runs, refined)
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if b - a <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    let mut best = if gc > gd { (c, gc) } else { (d, gd) };
    for x in [a, b] {
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn pick_window(mut ext: Vec<(f64, f64)>, n: usize) -> Vec<(f64, f64)> {
    while ext.len() > n {
        if ext[0].1.abs() < ext[ext.len() - 1].1.abs() {
            ext.remove(0);
        } else {
            ext.pop();
        }
    }
    ext
}

fn finish(
    poly: ChebPoly,
    ext: &[(f64, f64)],
    error: f64,
    d: usize,
    parity: Parity,
    iterations: usize,
) -> BestApprox {
    BestApprox {
        poly,
        error,
        refs: ext.iter().map(|e| e.0).collect(),
        signs: ext.iter().map(|e| if e.1 >= 0.0 { 1 } else { -1 }).collect(),
        degree: d,
        parity,
        iterations,
    }
}

fn grid_size(nref: usize) -> usize {
    (32 * nref).max(4096)
}

fn remez(
    f: &TargetFunction,
    d: usize,
    parity: Parity,
    basis: &Basis,
    cfg: &RemezConfig,
) -> Result<BestApprox, ApproxError> {
    let n = basis.nref();
    let grid = basis.grid(grid_size(n));
    let mut refs = basis.initial_refs();
    let scale = f.sup_norm().max(1e-300);
    let mut best: Option<(BestApprox, f64)> = None;
    for it in 1..=cfg.max_iter {
        let lev = level(f, basis, &refs)?;
        let ext = alternating_extrema(f, &lev.poly, basis, &grid, cfg.exec);
        let emax = ext.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        if emax <= 1e-14 * scale.max(1.0) {
            let shown = if ext.len() >= n { pick_window(ext, n) } else { refs_with_errors(f, &lev.poly, &refs) };
            return Ok(finish(lev.poly, &shown, emax, d, parity, it));
        }
        if ext.len() < n {
            break;
        }
        let win = pick_window(ext, n);
        let emin = win.iter().fold(f64::INFINITY, |m, e| m.min(e.1.abs()));
        let candidate = finish(lev.poly, &win, emax, d, parity, it);
        // relative test with an absolute floor at rounding level
        if emax - emin <= cfg.tol * emax + NOISE_FLOOR * scale.max(1.0) {
            return Ok(candidate);
        }
        let lower = lev.level.abs();
        if best.as_ref().is_none_or(|(b, _)| emax < b.error) {
            best = Some((candidate, lower));
        }
        let next: Vec<f64> = win.iter().map(|e| e.0).collect();
        if next == refs {
            break;
        }
        refs = next;
    }
    let (best, lower) = match best {
        Some(b) => b,
        None => {
            let lev = level(f, basis, &refs)?;
            let ext = refs_with_errors(f, &lev.poly, &refs);
            let upper = grid.iter().fold(0.0f64, |m, &x| m.max((f.value(x) - lev.poly.value(x)).abs()));
            (finish(lev.poly, &ext, upper, d, parity, cfg.max_iter), lev.level.abs())
        }
    };
    Err(ApproxError::NoConvergence {
        degree: d,
        iterations: cfg.max_iter,
        lower,
        upper: best.error,
        best: Box::new(best),
    })
}

fn refs_with_errors(f: &TargetFunction, poly: &ChebPoly, refs: &[f64]) -> Vec<(f64, f64)> {
    refs.iter().map(|&x| (x, f.value(x) - poly.value(x))).collect()
}

/// Result of the dense-grid LP: optimal value and the support of the optimal
/// dual measure.
#[derive(Clone, Debug)]
pub struct GridLp {
    pub value: f64,
    pub support: Vec<f64>,
}

/// Solves the discretized dual LP
/// `max sum f(x_i)(p_i - q_i)` subject to orthogonality against the allowed
/// basis and `sum (p_i + q_i) = 1`, over the given points.
pub fn grid_lp(f: &TargetFunction, d: usize, parity: Parity, points: &[f64]) -> Result<GridLp, ApproxError> {
    let basis = Basis::new(d, parity);
    let nb = basis.idx.len();
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let mut rows: Vec<LinearExpr> = (0..=nb).map(|_| LinearExpr::empty()).collect();
    let mut vars = Vec::with_capacity(points.len());
    let mut phi = vec![0.0; nb];
    for &x in points {
        let fx = f.value(x);
        let p = pb.add_var(fx, (0.0, f64::INFINITY));
        let q = pb.add_var(-fx, (0.0, f64::INFINITY));
        basis.row(x, &mut phi);
        for (r, &v) in rows.iter_mut().zip(&phi) {
            r.add(p, v);
            r.add(q, -v);
        }
        rows[nb].add(p, 1.0);
        rows[nb].add(q, 1.0);
        vars.push((p, q));
    }
    for (k, r) in rows.into_iter().enumerate() {
        pb.add_constraint(r, ComparisonOp::Eq, if k == nb { 1.0 } else { 0.0 });
    }
    let sol = pb.solve().map_err(|e| ApproxError::Solver(e.to_string()))?;
    let support = points
        .iter()
        .zip(&vars)
        .filter(|(_, (p, q))| sol[*p] + sol[*q] > 1e-12)
        .map(|(&x, _)| x)
        .collect();
    Ok(GridLp { value: sol.objective(), support })
}

fn lp_fallback(
    f: &TargetFunction,
    d: usize,
    parity: Parity,
    basis: &Basis,
    cfg: &RemezConfig,
) -> Option<BestApprox> {
    let n = basis.nref();
    let pts = basis.grid(grid_size(n).max(10_000));
    let lp = grid_lp(f, d, parity, &pts).ok()?;
    if lp.support.len() != n {
        return None;
    }
    let lev = level(f, basis, &lp.support).ok()?;
    let ext = alternating_extrema(f, &lev.poly, basis, &pts, cfg.exec);
    let emax = ext.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
    let shown = refs_with_errors(f, &lev.poly, &lp.support);
    Some(finish(lev.poly, &shown, emax, d, parity, cfg.max_iter))
}

/// Smallest `d` with `Val(f, d) <= eps`, searched exponentially then by
/// bisection.
pub fn approx_degree(f: &TargetFunction, eps: f64) -> Result<(usize, BestApprox), ApproxError> {
    approx_degree_with(f, eps, Parity::None, &RemezConfig::default())
}

/// Approximate degree under a parity restriction.
pub fn approx_degree_parity(
    f: &TargetFunction,
    eps: f64,
    parity: Parity,
) -> Result<(usize, BestApprox), ApproxError> {
    approx_degree_with(f, eps, parity, &RemezConfig::default())
}

pub fn approx_degree_with(
    f: &TargetFunction,
    eps: f64,
    parity: Parity,
    cfg: &RemezConfig,
) -> Result<(usize, BestApprox), ApproxError> {
    if !(eps > 0.0) {
        return Err(ApproxError::BadEps(eps));
    }
    required_parity(f, parity)?;
    if eps >= 1.0 {
        return Ok((0, zero_approx(f, parity)));
    }
    let solve = |d: usize| best_approx_with(f, d, parity, cfg);
    let first = solve(0)?;
    if first.error <= eps {
        return Ok((0, first));
    }
    let (mut lo, mut hi) = (0usize, 1usize);
    let mut hit = loop {
        let ba = solve(hi)?;
        if ba.error <= eps {
            break ba;
        }
        if hi >= cfg.degree_cap {
            return Err(ApproxError::DegreeCap { cap: cfg.degree_cap, eps, val: ba.error });
        }
        lo = hi;
        hi = (2 * hi).min(cfg.degree_cap);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let ba = solve(mid)?;
        if ba.error <= eps {
            hi = mid;
            hit = ba;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hit))
}

/// The zero polynomial, which approximates any `|f| <= 1` within 1.
fn zero_approx(f: &TargetFunction, parity: Parity) -> BestApprox {
    let basis = Basis::new(0, parity);
    let (x, v) = basis
        .grid(4096)
        .into_iter()
        .map(|x| (x, f.value(x)))
        .fold((0.0f64, 0.0f64), |b, c| if c.1.abs() > b.1.abs() { c } else { b });
    BestApprox {
        poly: ChebPoly::zero(),
        error: v.abs(),
        refs: vec![x],
        signs: vec![if v >= 0.0 { 1 } else { -1 }],
        degree: 0,
        parity,
        iterations: 0,
    }
}

/// Closed-form weights on `points` annihilating the allowed basis, normalized
/// to unit `l1` mass. Returns the weights and the free parameter `alpha`, with
/// the sign convention that `alpha > 0`.
pub fn vandermonde_weights(points: &[f64], parity: Parity) -> Result<(Vec<f64>, f64), ApproxError> {
    let n = points.len();
    if n == 0 || points.iter().any(|x| !x.is_finite()) {
        return Err(ApproxError::BadPoints);
    }
    if parity != Parity::None && points.iter().any(|&x| x < 0.0) {
        return Err(ApproxError::BadPoints);
    }
    if parity == Parity::Odd && points.contains(&0.0) {
        return Err(ApproxError::BadPoints);
    }
    let mut logs = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for (i, &xi) in points.iter().enumerate() {
        let (mut lg, mut sg) = (0.0f64, 1.0f64);
        for (j, &xj) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff = match parity {
                Parity::None => xi - xj,
                _ => xi * xi - xj * xj,
            };
            if diff == 0.0 {
                return Err(ApproxError::BadPoints);
            }
            lg -= diff.abs().ln();
            sg *= diff.signum();
        }
        if parity == Parity::Odd {
            lg -= xi.ln();
        }
        logs.push(lg);
        signs.push(sg);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    let weights = logs.iter().zip(&signs).map(|(l, s)| s * (l - top).exp() / total).collect();
    let alpha = (-(top + total.ln())).exp();
    Ok((weights, alpha))
}

impl DualWeights {
    /// Weights on arbitrary points with the objective sign fixed nonnegative.
    pub fn at_points(f: &TargetFunction, points: &[f64], parity: Parity) -> Result<Self, ApproxError> {
        let (mut weights, mut alpha) = vandermonde_weights(points, parity)?;
        let mut objective: f64 = points.iter().zip(&weights).map(|(&x, h)| f.value(x) * h).sum();
        if objective < 0.0 {
            weights.iter_mut().for_each(|h| *h = -*h);
            alpha = -alpha;
            objective = -objective;
        }
        Ok(DualWeights { points: points.to_vec(), weights, alpha, objective })
    }

    /// Value of `h_i` from the closed form, for checking the weights.
    pub fn closed_form(&self, i: usize, parity: Parity) -> f64 {
        let xi = self.points[i];
        let mut den = if parity == Parity::Odd { xi } else { 1.0 };
        for (j, &xj) in self.points.iter().enumerate() {
            if j != i {
                den *= match parity {
                    Parity::None => xi - xj,
                    _ => xi * xi - xj * xj,
                };
            }
        }
        self.alpha / den
    }
}

/// Dual weights on the reference set of `ba`, with the strong-duality check
/// `objective = ba.error`.
pub fn dual_weights(
    f: &TargetFunction,
    ba: &BestApprox,
    d: usize,
    parity: Parity,
) -> Result<DualWeights, ApproxError> {
    let expected = Basis::new(d, parity).nref();
    if ba.refs.len() != expected {
        return Err(ApproxError::RefCount { expected, got: ba.refs.len() });
    }
    let dw = DualWeights::at_points(f, &ba.refs, parity)?;
    if (dw.objective - ba.error).abs() > DUALITY_TOL * ba.error.max(1.0) {
        return Err(ApproxError::DualityGap { objective: dw.objective, error: ba.error });
    }
    Ok(dw)
}
