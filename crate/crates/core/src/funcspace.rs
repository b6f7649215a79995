//! Target functions on `[-1, 1]` and polynomials in the Chebyshev basis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Number of uniform points used to validate boundedness and parity.
pub const CHECK_GRID: usize = 10_000;
/// Number of Chebyshev extrema added to the validation grid.
const CHECK_CHEB: usize = 1025;
const PARITY_TOL: f64 = 1e-12;
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuncError {
    #[error("point {0} lies outside [-1, 1]")]
    Domain(f64),
    #[error("|f({x})| = {value} exceeds 1")]
    OutOfRange { x: f64, value: f64 },
    #[error("declared {parity:?} parity violated at x = {x}")]
    ParityViolation { parity: Parity, x: f64 },
    #[error("bad function spec `{0}`")]
    BadSpec(String),
}

/// Parity restriction attached to functions and approximation problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    None,
    Even,
    Odd,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::None => "none",
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

/// A function `[-1, 1] -> [-1, 1]` with a label and declared parity.
///
/// Registry functions also carry their analytic continuation, which the
/// contour estimator needs.
#[derive(Clone)]
pub struct TargetFunction {
    eval: RealFn,
    complex: Option<ComplexFn>,
    label: String,
    parity: Parity,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("label", &self.label)
            .field("parity", &self.parity)
            .field("analytic", &self.complex.is_some())
            .finish()
    }
}

fn check_grid() -> impl Iterator<Item = f64> {
    let uniform = (0..CHECK_GRID).map(|k| -1.0 + 2.0 * k as f64 / (CHECK_GRID - 1) as f64);
    let cheb = (0..CHECK_CHEB).map(|k| (PI * k as f64 / (CHECK_CHEB - 1) as f64).cos());
    uniform.chain(cheb)
}

impl TargetFunction {
    /// Wraps an evaluator after checking `|f| <= 1` and the declared parity on
    /// the validation grid.
    pub fn new<F>(label: impl Into<String>, parity: Parity, eval: F) -> Result<Self, FuncError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_parts(label.into(), parity, Arc::new(eval), None)
    }

    /// Like [`TargetFunction::new`] but with an analytic continuation.
    pub fn analytic<F, G>(
        label: impl Into<String>,
        parity: Parity,
        eval: F,
        complex: G,
    ) -> Result<Self, FuncError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self::from_parts(label.into(), parity, Arc::new(eval), Some(Arc::new(complex)))
    }

    fn from_parts(
        label: String,
        parity: Parity,
        eval: RealFn,
        complex: Option<ComplexFn>,
    ) -> Result<Self, FuncError> {
        for x in check_grid() {
            let v = eval(x);
            if !(v.abs() <= 1.0 + BOUND_TOL) {
                return Err(FuncError::OutOfRange { x, value: v });
            }
            let mirrored = match parity {
                Parity::None => continue,
                Parity::Even => eval(-x) - v,
                Parity::Odd => eval(-x) + v,
            };
            if mirrored.abs() > PARITY_TOL {
                return Err(FuncError::ParityViolation { parity, x });
            }
        }
        Ok(TargetFunction { eval, complex, label, parity })
    }

    /// Builds a function from the registry, e.g. `"sin:t=12.5"`, `"cheb:d=9"`,
    /// `"power:d=16"`, `"exp:t=2"`, `"const:c=0.3"`, `"mono:c=0;0;1"`.
    pub fn from_spec(spec: &str) -> Result<Self, FuncError> {
        let bad = || FuncError::BadSpec(spec.to_string());
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = Vec::new();
        for kv in args.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            params.push((k.trim(), v.trim()));
        }
        let get = |key: &str| -> Result<&str, FuncError> {
            params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(bad)
        };
        let real = |key: &str| -> Result<f64, FuncError> {
            get(key)?.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad)
        };
        let int = |key: &str| -> Result<usize, FuncError> { get(key)?.parse::<usize>().map_err(|_| bad()) };
        let expected = match name {
            "sin" | "cos" | "exp" => vec!["t"],
            "power" | "cheb" => vec!["d"],
            "const" | "mono" => vec!["c"],
            _ => return Err(bad()),
        };
        if params.iter().any(|(k, _)| !expected.contains(k)) {
            return Err(bad());
        }
        let label = spec.to_string();
        match name {
            "sin" => {
                let t = real("t")?;
                Self::analytic(label, Parity::Odd, move |x| (t * x).sin(), move |z| (z * t).sin())
            }
            "cos" => {
                let t = real("t")?;
                Self::analytic(label, Parity::Even, move |x| (t * x).cos(), move |z| (z * t).cos())
            }
            "exp" => {
                let t = real("t")?;
                if t < 0.0 {
                    return Err(bad());
                }
                Self::analytic(
                    label,
                    Parity::None,
                    move |x| (t * (x - 1.0)).exp(),
                    move |z| ((z - 1.0) * t).exp(),
                )
            }
            "power" => {
                let d = int("d")?;
                let parity = if d % 2 == 0 { Parity::Even } else { Parity::Odd };
                let p = d as i32;
                Self::analytic(label, parity, move |x| x.powi(p), move |z| z.powi(p))
            }
            "cheb" => {
                let d = int("d")?;
                let mut c = vec![0.0; d + 1];
                c[d] = 1.0;
                Self::from_cheb_labeled(ChebPoly::new(c), label)
            }
            "const" => {
                let c = real("c")?;
                Self::analytic(label, Parity::Even, move |_| c, move |_| Complex64::new(c, 0.0))
            }
            "mono" => {
                let coeffs: Vec<f64> = get("c")?
                    .split(';')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(bad());
                }
                let parity = monomial_parity(&coeffs);
                let re = coeffs.clone();
                Self::analytic(
                    label,
                    parity,
                    move |x| re.iter().rev().fold(0.0, |acc, &a| acc * x + a),
                    move |z| coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a),
                )
            }
            _ => Err(bad()),
        }
    }

    /// Wraps a Chebyshev polynomial; parity follows its coefficient pattern.
    pub fn from_cheb(poly: ChebPoly) -> Result<Self, FuncError> {
        let label = format!("chebpoly:deg={}", poly.degree());
        Self::from_cheb_labeled(poly, label)
    }

    fn from_cheb_labeled(poly: ChebPoly, label: String) -> Result<Self, FuncError> {
        let parity = poly.parity();
        let p = Arc::new(poly);
        let q = p.clone();
        Self::analytic(label, parity, move |x| p.value(x), move |z| q.value_complex(z))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_analytic(&self) -> bool {
        self.complex.is_some()
    }

    /// Evaluates without the domain check. Used on points already known to
    /// lie in `[-1, 1]`, and by the dense oracle on spectra.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Analytic continuation, when the function carries one.
    pub fn value_complex(&self, z: Complex64) -> Option<Complex64> {
        self.complex.as_ref().map(|g| g(z))
    }

    pub fn complex_fn(&self) -> Option<ComplexFn> {
        self.complex.clone()
    }

    /// Maximum of `|f|` over the validation grid.
    pub fn sup_norm(&self) -> f64 {
        check_grid().map(|x| self.value(x).abs()).fold(0.0, f64::max)
    }
}

/// Evaluates `f(x)` for `x` in `[-1, 1]`.
pub fn eval_function(f: &TargetFunction, x: f64) -> Result<f64, FuncError> {
    check_domain(x)?;
    Ok(f.value(x))
}

fn check_domain(x: f64) -> Result<(), FuncError> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(FuncError::Domain(x))
    }
}

fn monomial_parity(coeffs: &[f64]) -> Parity {
    let odd_zero = coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0);
    let even_zero = coeffs.iter().step_by(2).all(|&c| c == 0.0);
    if odd_zero {
        Parity::Even
    } else if even_zero {
        Parity::Odd
    } else {
        Parity::None
    }
}

/// Polynomial `sum_k c_k T_k(x)` with trailing zero coefficients trimmed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ChebPoly {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ChebPoly {
    type Error = String;
    fn try_from(v: Vec<f64>) -> Result<Self, String> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err("non-finite Chebyshev coefficient".into());
        }
        Ok(ChebPoly::new(v))
    }
}

impl From<ChebPoly> for Vec<f64> {
    fn from(p: ChebPoly) -> Vec<f64> {
        p.coeffs
    }
}

impl ChebPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        ChebPoly { coeffs }
    }

    pub fn zero() -> Self {
        ChebPoly { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Clenshaw recurrence, no domain check.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    pub fn value_complex(&self, z: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let (mut b1, mut b2) = (zero, zero);
        for &c in self.coeffs[1..].iter().rev() {
            let b0 = z * b1 * 2.0 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        z * b1 - b2 + self.coeffs[0]
    }

    pub fn parity(&self) -> Parity {
        // Chebyshev T_k has the parity of k, same pattern as monomials.
        monomial_parity(&self.coeffs)
    }

    /// Keeps only the coefficients whose index has the requested parity.
    pub fn parity_part(&self, parity: Parity) -> ChebPoly {
        let keep = |k: usize| match parity {
            Parity::None => true,
            Parity::Even => k.is_multiple_of(2),
            Parity::Odd => k % 2 == 1,
        };
        ChebPoly::new(
            self.coeffs.iter().enumerate().map(|(k, &c)| if keep(k) { c } else { 0.0 }).collect(),
        )
    }

    /// Monomial coefficients `a_0..a_d` with `p(x) = sum a_r x^r`.
    pub fn to_monomial(&self) -> Vec<f64> {
        let d = self.degree();
        let mut out = vec![0.0; d + 1];
        let mut prev = vec![0.0; d + 1]; // T_{k-1}
        let mut cur = vec![0.0; d + 1]; // T_k
        prev[0] = 1.0;
        out[0] += self.coeffs[0];
        if d == 0 {
            return out;
        }
        cur[1] = 1.0;
        for (o, t) in out.iter_mut().zip(&cur) {
            *o += self.coeffs[1] * t;
        }
        for k in 2..=d {
            let mut next = vec![0.0; d + 1];
            for r in 0..d {
                next[r + 1] += 2.0 * cur[r];
            }
            for r in 0..=d {
                next[r] -= prev[r];
            }
            for (o, t) in out.iter_mut().zip(&next) {
                *o += self.coeffs[k] * t;
            }
            prev = std::mem::replace(&mut cur, next);
        }
        out
    }
}

/// Evaluates `p(x)` for `x` in `[-1, 1]`.
pub fn eval_poly(p: &ChebPoly, x: f64) -> Result<f64, FuncError> {
    check_domain(x)?;
    Ok(p.value(x))
}

/// Interpolates `f` at the `d + 1` Chebyshev points of the second kind.
pub fn cheb_fit(f: &TargetFunction, d: usize) -> ChebPoly {
    if d == 0 {
        return ChebPoly::new(vec![f.value(0.0)]);
    }
    let dd = d as f64;
    let vals: Vec<f64> = (0..=d).map(|k| f.value((PI * k as f64 / dd).cos())).collect();
    let coeffs = (0..=d)
        .map(|j| {
            let mut s = 0.0;
            for (k, v) in vals.iter().enumerate() {
                let w = if k == 0 || k == d { 0.5 } else { 1.0 };
                // reduce the angle index mod 2d before taking the cosine
                let idx = (j * k) % (2 * d);
                s += w * v * (PI * idx as f64 / dd).cos();
            }
            let scale = if j == 0 || j == d { 1.0 / dd } else { 2.0 / dd };
            s * scale
        })
        .collect();
    ChebPoly::new(coeffs)
}

/// Even and odd parts of a function.
#[derive(Clone, Debug)]
pub struct ParityParts {
    pub even: TargetFunction,
    pub odd: TargetFunction,
}

/// Splits `f` into `(f(x) + f(-x)) / 2` and `(f(x) - f(-x)) / 2`.
pub fn parity_split(f: &TargetFunction) -> ParityParts {
    let part = |parity: Parity| {
        let g = f.eval.clone();
        let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
        let eval: RealFn = Arc::new(move |x| 0.5 * (g(x) + sign * g(-x)));
        let complex = f.complex.clone().map(|h| -> ComplexFn {
            Arc::new(move |z: Complex64| (h(z) + h(-z) * sign) * 0.5)
        });
        TargetFunction { eval, complex, label: format!("{}[{}]", f.label, parity), parity }
    };
    ParityParts { even: part(Parity::Even), odd: part(Parity::Odd) }
}
