//! Reduction instances: the parity graph, the clock Hamiltonian and the
//! Forrelation circuit, with exact dense checks of their identities.
//!
//! Vertex `(i, t)` of a parity graph on `n` bits has index `2i + t + 1`. The
//! even variant appends pendant vertices `(-1, t)` at `2(n+1) + t + 1` and
//! `(n+1, t)` at `2(n+2) + t + 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::DenseSpectrum;
use crate::funcspace::{Parity, TargetFunction};
use crate::sparsemat::{SparseError, SparseHermitian};
use crate::tridiag::{self, TridiagError, TridiagMatrix};
use crate::witness::{self, WitnessError};

/// Largest `n` for statevector evaluation of Forrelation.
pub const MAX_FORRELATION_QUBITS: usize = 12;
/// Largest `n` for the dense identity check on `N * 2^n` dimensions.
pub const MAX_IDENTITY_QUBITS: usize = 6;
const UNITARY_TOL: f64 = 1e-10;
const SUBSPACE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HardnessError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bit {0} is not 0 or 1")]
    BadBit(u8),
    #[error("U_{index} is not unitary (defect {defect:e})")]
    NotUnitary { index: usize, defect: f64 },
    #[error("n = {n} exceeds the budget {max}")]
    Budget { n: usize, max: usize },
    #[error("truth table entry {0} is not +-1")]
    BadTable(i8),
    #[error("subspace action deviates from the tridiagonal form by {0:e}")]
    Subspace(f64),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Tridiag(#[from] TridiagError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Square matrix stored by rows of `(column, value)`, 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseUnitary {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseUnitary {
    pub fn identity(dim: usize) -> Self {
        SparseUnitary { dim, rows: (0..dim).map(|a| vec![(a, c(1.0))]).collect() }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| (0..m.ncols()).filter(|&k| m[(r, k)].norm() > 1e-15).map(|k| (k, m[(r, k)])).collect())
            .collect();
        SparseUnitary { dim: m.nrows(), rows }
    }

    /// Hadamard on qubit `q` of `n`, basis index `sum_q x_q 2^q`.
    pub fn hadamard(n: usize, q: usize) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bit = 1 << q;
        let rows = (0..1usize << n)
            .map(|a| {
                let mut row = vec![(a & !bit, c(h)), (a | bit, c(if a & bit != 0 { -h } else { h }))];
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        SparseUnitary { dim: 1 << n, rows }
    }

    pub fn diagonal(signs: &[i8]) -> Self {
        SparseUnitary { dim: signs.len(), rows: signs.iter().enumerate().map(|(a, &s)| vec![(a, c(s as f64))]).collect() }
    }

    pub fn sparsity(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, c(0.0));
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                m[(r, k)] = v;
            }
        }
        m
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_iterator(self.dim, self.rows.iter().map(|row| row.iter().map(|&(k, x)| x * v[k]).sum()))
    }

    /// `max |U^* U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.to_dense();
        let g = m.adjoint() * &m - DMatrix::identity(self.dim, self.dim);
        g.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityVariant {
    /// Paths `(0, t) .. (n, .)`, entry `<(0,0)|f(A)|(n,1)>` is entry `(1, n+1)`
    /// of the weighted path.
    #[default]
    Odd,
    /// Pendants on both ends, so the same entry is `(2, n+2)` of a path on
    /// `n + 3` vertices. The extra vertices `(-1, t)` and `(n+1, t)` get
    /// indices `2(n+1) + t + 1` and `2(n+2) + t + 1`; weights are the leading
    /// pendant, the `n` bit edges, then the trailing pendant.
    Even,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParityInstance {
    pub bits: Vec<u8>,
    pub weights: Vec<f64>,
    pub variant: ParityVariant,
    pub matrix: SparseHermitian,
}

impl ParityInstance {
    pub fn n(&self) -> usize {
        self.bits.len()
    }

    /// 1-based index of vertex `(i, t)`, `i` in `-1..=n+1` for the even variant.
    pub fn vertex(&self, i: i64, t: u8) -> usize {
        vertex_index(self.n(), i, t)
    }

    /// `(source, target)` = `((0, 0), (n, 1))`.
    pub fn entry_indices(&self) -> (usize, usize) {
        (self.vertex(0, 0), self.vertex(self.n() as i64, 1))
    }

    pub fn parity(&self) -> u8 {
        self.bits.iter().fold(0, |p, b| p ^ b)
    }

    /// The path through `(0, 0)` as a tridiagonal matrix.
    pub fn path(&self) -> TridiagMatrix {
        TridiagMatrix::zero_diag(self.weights.clone())
    }

    /// Entry of the path matrix that the parity-1 case reproduces.
    pub fn path_indices(&self) -> (usize, usize) {
        match self.variant {
            ParityVariant::Odd => (1, self.n() + 1),
            ParityVariant::Even => (2, self.n() + 2),
        }
    }
}

fn vertex_index(n: usize, i: i64, t: u8) -> usize {
    let t = t as usize;
    if i < 0 {
        2 * (n + 1) + t + 1
    } else if i as usize > n {
        2 * (n + 2) + t + 1
    } else {
        2 * i as usize + t + 1
    }
}

/// Weighted graph with edges `(i-1, t) -- (i, t xor x_i)` of weight `b_i`.
///
/// The even variant expects `n + 2` weights: the first joins `(-1, t)` to
/// `(0, t)`, the last joins `(n, t)` to `(n+1, t)`, and the middle `n` are
/// the bit edges.
pub fn parity_graph(bits: &[u8], weights: &[f64], variant: ParityVariant) -> Result<ParityInstance, HardnessError> {
    let n = bits.len();
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(HardnessError::BadBit(b));
    }
    let (bit_weights, extra) = match variant {
        ParityVariant::Odd => (weights, None),
        ParityVariant::Even => {
            if weights.len() != n + 2 {
                return Err(HardnessError::Shape(format!("even variant needs {} weights, got {}", n + 2, weights.len())));
            }
            (&weights[1..=n], Some((weights[0], weights[n + 1])))
        }
    };
    if bit_weights.len() != n {
        return Err(HardnessError::Shape(format!("{} bits but {} weights", n, weights.len())));
    }
    let mut upper = Vec::new();
    let mut edge = |u: usize, v: usize, w: f64| {
        if w != 0.0 {
            upper.push((u.min(v), u.max(v), c(w)));
        }
    };
    for i in 1..=n {
        for t in 0..2u8 {
            edge(vertex_index(n, i as i64 - 1, t), vertex_index(n, i as i64, t ^ bits[i - 1]), bit_weights[i - 1]);
        }
    }
    let dim = match extra {
        None => 2 * (n + 1),
        Some((first, last)) => {
            for t in 0..2u8 {
                edge(vertex_index(n, -1, t), vertex_index(n, 0, t), first);
                edge(vertex_index(n, n as i64, t), vertex_index(n, n as i64 + 1, t), last);
            }
            2 * (n + 3)
        }
    };
    let matrix = SparseHermitian::from_upper(dim, &upper)?;
    Ok(ParityInstance { bits: bits.to_vec(), weights: weights.to_vec(), variant, matrix })
}

/// `<(0,0)|f(A)|(n,1)>` by dense eigendecomposition of the whole graph.
pub fn parity_entry(inst: &ParityInstance, f: impl Fn(f64) -> f64) -> f64 {
    let (i, j) = inst.entry_indices();
    DenseSpectrum::new(&inst.matrix.to_dense()).entry(f, i - 1, j - 1).re
}

/// Path weights from a witness for `f`: odd part, entry `(1, n+1)`, for the
/// odd variant on `n` bits (`n` odd); even part, entry `(2, n+2)`, for the
/// even variant (`n` even). Returns the weights and the witness value.
pub fn parity_witness_weights(
    f: &TargetFunction,
    n: usize,
    variant: ParityVariant,
) -> Result<(Vec<f64>, f64), HardnessError> {
    let (size, parity) = match variant {
        ParityVariant::Odd => (n + 1, Parity::Odd),
        ParityVariant::Even => (n + 3, Parity::Even),
    };
    let d = (0..size)
        .find(|&d| d + witness::dim_offset(d, parity) == size)
        .ok_or_else(|| HardnessError::Shape(format!("no {parity} witness has dimension {size}")))?;
    let cert = witness::build_witness_at_degree(f, d, parity)?;
    Ok((cert.matrix.offdiag, cert.achieved_value))
}

/// Outcome of the exact parity check for one bit string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityCheck {
    pub parity: u8,
    pub entry: f64,
    pub path_value: f64,
    pub residual: f64,
    pub ok: bool,
}

/// Checks the dichotomy: the entry is 0 for even parity and the path value
/// for odd parity.
pub fn parity_check(inst: &ParityInstance, f: &TargetFunction, tol: f64) -> Result<ParityCheck, HardnessError> {
    let entry = parity_entry(inst, |x| f.value(x));
    let (pi, pj) = inst.path_indices();
    let path_value = tridiag::entry_f(&inst.path(), f, pi, pj)?;
    let parity = inst.parity();
    let want = if parity == 1 { path_value } else { 0.0 };
    let residual = (entry - want).abs();
    Ok(ParityCheck { parity, entry, path_value, residual, ok: residual <= tol })
}

#[derive(Clone, Debug)]
pub struct ClockInstance {
    pub unitaries: Vec<SparseUnitary>,
    pub weights: Vec<f64>,
    pub hamiltonian: SparseHermitian,
}

impl ClockInstance {
    /// Number of clock positions `N`.
    pub fn clock_size(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn inner_dim(&self) -> usize {
        self.unitaries[0].dim
    }

    /// History states `|t> (x) U_t .. U_1 |0>`, as dense vectors.
    pub fn history_states(&self) -> Vec<DVector<Complex64>> {
        let dim = self.inner_dim();
        let big = self.clock_size() * dim;
        let mut inner = DVector::from_element(dim, c(0.0));
        inner[0] = c(1.0);
        let mut out = Vec::with_capacity(self.clock_size());
        for t in 0..self.clock_size() {
            if t > 0 {
                inner = self.unitaries[t - 1].apply(&inner);
            }
            let mut v = DVector::from_element(big, c(0.0));
            v.rows_mut(t * dim, dim).copy_from(&inner);
            out.push(v);
        }
        out
    }

    /// The tridiagonal matrix the Hamiltonian reduces to on the history states.
    pub fn reduced(&self) -> TridiagMatrix {
        TridiagMatrix::zero_diag(self.weights.clone())
    }
}

/// `A = sum_t b_t (|t><t-1| (x) U_t + |t-1><t| (x) U_t^*)`, index `t * D + a + 1`.
pub fn clock_hamiltonian(unitaries: Vec<SparseUnitary>, weights: Vec<f64>) -> Result<ClockInstance, HardnessError> {
    if unitaries.is_empty() || unitaries.len() != weights.len() {
        return Err(HardnessError::Shape(format!("{} unitaries, {} weights", unitaries.len(), weights.len())));
    }
    let dim = unitaries[0].dim;
    for (k, u) in unitaries.iter().enumerate() {
        if u.dim != dim || u.rows.len() != dim {
            return Err(HardnessError::Shape(format!("U_{} has dimension {}, expected {dim}", k + 1, u.dim)));
        }
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(HardnessError::NotUnitary { index: k + 1, defect });
        }
    }
    let n_clock = weights.len() + 1;
    let mut entries = Vec::new();
    for t in 1..n_clock {
        let b = weights[t - 1];
        for (a, row) in unitaries[t - 1].rows.iter().enumerate() {
            for &(k, v) in row {
                let (r, col) = (t * dim + a + 1, (t - 1) * dim + k + 1);
                entries.push((r, col, v * b));
                entries.push((col, r, (v * b).conj()));
            }
        }
    }
    let hamiltonian = SparseHermitian::from_entries(n_clock * dim, &entries)?;
    let inst = ClockInstance { unitaries, weights, hamiltonian };
    let deviation = subspace_deviation(&inst);
    if deviation > SUBSPACE_TOL * inst.weights.iter().fold(1.0f64, |m, b| m.max(b.abs())) {
        return Err(HardnessError::Subspace(deviation));
    }
    Ok(inst)
}

/// `max |<psi_s|A|psi_t> - T[s, t]|` over the history states.
pub fn subspace_deviation(inst: &ClockInstance) -> f64 {
    let psi = inst.history_states();
    let a = inst.hamiltonian.to_dense();
    let t = inst.reduced();
    let mut worst = 0.0f64;
    let images: Vec<_> = psi.iter().map(|p| &a * p).collect();
    for (s, ps) in psi.iter().enumerate() {
        for (k, ak) in images.iter().enumerate() {
            let v = ps.dotc(ak);
            worst = worst.max((v - t.get(s + 1, k + 1)).norm());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForrelationInstance {
    pub n: usize,
    pub g1: Vec<i8>,
    pub g2: Vec<i8>,
    pub phi: f64,
}

/// In-place Walsh-Hadamard transform scaled to be unitary.
fn hadamard_all(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for k in block..block + h {
                let (x, y) = (v[k], v[k + h]);
                v[k] = x + y;
                v[k + h] = x - y;
            }
        }
        h *= 2;
    }
    let s = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
}

/// `<0^n| H D1 H D2 H |0^n>` by statevector evaluation.
pub fn forrelation_value(g1: &[i8], g2: &[i8]) -> f64 {
    let mut v = vec![0.0; g1.len()];
    v[0] = 1.0;
    hadamard_all(&mut v);
    v.iter_mut().zip(g2).for_each(|(x, &g)| *x *= g as f64);
    hadamard_all(&mut v);
    v.iter_mut().zip(g1).for_each(|(x, &g)| *x *= g as f64);
    hadamard_all(&mut v);
    v[0]
}

pub fn forrelation_instance(n: usize, g1: Vec<i8>, g2: Vec<i8>) -> Result<ForrelationInstance, HardnessError> {
    if n > MAX_FORRELATION_QUBITS {
        return Err(HardnessError::Budget { n, max: MAX_FORRELATION_QUBITS });
    }
    for g in [&g1, &g2] {
        if g.len() != 1 << n {
            return Err(HardnessError::Shape(format!("truth table of length {}, expected {}", g.len(), 1usize << n)));
        }
        if let Some(&bad) = g.iter().find(|&&x| x != 1 && x != -1) {
            return Err(HardnessError::BadTable(bad));
        }
    }
    let phi = forrelation_value(&g1, &g2);
    Ok(ForrelationInstance { n, g1, g2, phi })
}

/// `U_1, .., U_{N-1}` applied in that order: `H` on each qubit, `D2`, `H` on
/// each qubit, `D1`, `H` on each qubit. `N = 3(n + 1)`.
pub fn forrelation_unitaries(inst: &ForrelationInstance) -> Vec<SparseUnitary> {
    let layer = || (0..inst.n).map(|q| SparseUnitary::hadamard(inst.n, q));
    layer()
        .chain([SparseUnitary::diagonal(&inst.g2)])
        .chain(layer())
        .chain([SparseUnitary::diagonal(&inst.g1)])
        .chain(layer())
        .collect()
}

/// Clock size `N = 3(n + 1)` of the Forrelation circuit.
pub fn forrelation_clock_size(n: usize) -> usize {
    3 * (n + 1)
}

/// Odd-witness weights for a clock of at least `min_size` positions. Odd
/// witnesses have even dimension, so an odd `min_size` is rounded up; the
/// caller pads the circuit with identity layers to match.
pub fn clock_witness_weights(f: &TargetFunction, min_size: usize) -> Result<(Vec<f64>, f64), HardnessError> {
    let size = min_size.max(2).next_multiple_of(2);
    let cert = witness::build_witness_at_degree(f, size - 2, Parity::Odd)?;
    Ok((cert.matrix.offdiag, cert.achieved_value))
}

/// Both sides of `<phi_{N-1}|f(A)|psi_0> = <psi_{N-1}|f(A)|psi_0> * Phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `<psi_{N-1}|f(A)|psi_0>`.
    pub history_entry: f64,
    /// The same entry from the reduced tridiagonal matrix.
    pub reduced_entry: f64,
    pub clock_size: usize,
}

/// Builds the clock Hamiltonian of the circuit with the given weights and
/// evaluates both sides densely. More weights than `3n + 2` append identity
/// layers to the circuit.
pub fn forrelation_identity_check(
    inst: &ForrelationInstance,
    f: &TargetFunction,
    weights: &[f64],
) -> Result<IdentityCheck, HardnessError> {
    if inst.n > MAX_IDENTITY_QUBITS {
        return Err(HardnessError::Budget { n: inst.n, max: MAX_IDENTITY_QUBITS });
    }
    let mut unitaries = forrelation_unitaries(inst);
    if weights.len() < unitaries.len() {
        return Err(HardnessError::Shape(format!("need at least {} weights, got {}", unitaries.len(), weights.len())));
    }
    let dim = 1usize << inst.n;
    unitaries.resize(weights.len(), SparseUnitary::identity(dim));
    let clock = clock_hamiltonian(unitaries, weights.to_vec())?;
    let n_clock = clock.clock_size();
    let spec = DenseSpectrum::new(&clock.hamiltonian.to_dense());
    let g = |x: f64| f.value(x);
    let lhs = spec.entry(g, (n_clock - 1) * dim, 0).re;
    let psi = clock.history_states();
    let psi0: Vec<Complex64> = psi[0].iter().copied().collect();
    let last: Vec<Complex64> = psi[n_clock - 1].iter().copied().collect();
    let history_entry = spec.form(g, &last, &psi0).re;
    let reduced_entry = tridiag::entry_f(&clock.reduced(), f, n_clock, 1)?;
    let rhs = history_entry * inst.phi;
    Ok(IdentityCheck { lhs, rhs, residual: (lhs - rhs).abs(), history_entry, reduced_entry, clock_size: n_clock })
}

/// Replayable instance description written by `hardness gen`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Bundle {
    Parity { bits: Vec<u8>, weights: Vec<f64>, variant: ParityVariant, function: String },
    Forrelation { n: usize, g1: Vec<i8>, g2: Vec<i8>, weights: Vec<f64>, function: String },
}

/// Result of re-deriving a bundle's identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub ok: bool,
    pub residual: f64,
    pub details: serde_json::Value,
}

pub const BUNDLE_TOL: f64 = 1e-8;

pub fn verify_bundle(bundle: &Bundle) -> Result<BundleReport, HardnessError> {
    let target = |spec: &str| {
        TargetFunction::from_spec(spec).map_err(|e| HardnessError::Shape(format!("function {spec:?}: {e}")))
    };
    match bundle {
        Bundle::Parity { bits, weights, variant, function } => {
            let inst = parity_graph(bits, weights, *variant)?;
            let check = parity_check(&inst, &target(function)?, BUNDLE_TOL)?;
            Ok(BundleReport {
                ok: check.ok,
                residual: check.residual,
                details: serde_json::to_value(&check).expect("serializable"),
            })
        }
        Bundle::Forrelation { n, g1, g2, weights, function } => {
            let inst = forrelation_instance(*n, g1.clone(), g2.clone())?;
            let check = forrelation_identity_check(&inst, &target(function)?, weights)?;
            Ok(BundleReport {
                ok: check.residual <= BUNDLE_TOL,
                residual: check.residual,
                details: serde_json::json!({ "phi": inst.phi, "check": check }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsemat::SparseOracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sin(t: f64) -> TargetFunction {
        TargetFunction::from_spec(&format!("sin:t={t}")).unwrap()
    }

    #[test]
    fn parity_graph_is_two_paths() {
        let inst = parity_graph(&[1, 0, 1, 1], &[0.3, 0.4, 0.5, 0.6], ParityVariant::Odd).unwrap();
        assert_eq!(inst.matrix.sparsity(), 2);
        // every vertex except the four path ends has degree 2
        let ends = (1..=10).filter(|&v| inst.matrix.row(v).len() == 1).count();
        assert_eq!(ends, 4);
        assert_eq!(inst.matrix.get(inst.vertex(0, 0), inst.vertex(1, 1)).re, 0.3);
        assert_eq!(inst.matrix.get(inst.vertex(1, 1), inst.vertex(2, 1)).re, 0.4);
    }

    #[test]
    fn parity_cases() {
        let f = sin(3.0);
        let w = [0.5, 0.4, 0.3];
        let even = parity_graph(&[1, 1, 0], &w, ParityVariant::Odd).unwrap();
        assert!(parity_entry(&even, |x| f.value(x)).abs() < 1e-12);
        let odd = parity_graph(&[1, 0, 0], &w, ParityVariant::Odd).unwrap();
        let chk = parity_check(&odd, &f, 1e-10).unwrap();
        assert!(chk.ok && chk.entry.abs() > 1e-3);
    }

    #[test]
    fn parity_witness_value() {
        let f = sin(4.0);
        let (w, val) = parity_witness_weights(&f, 7, ParityVariant::Odd).unwrap();
        let inst = parity_graph(&[1, 1, 0, 1, 0, 0, 0], &w, ParityVariant::Odd).unwrap();
        assert!((parity_entry(&inst, |x| f.value(x)) - val).abs() < 1e-9);
    }

    #[test]
    fn even_variant() {
        let f = TargetFunction::from_spec("cos:t=4").unwrap();
        let (w, val) = parity_witness_weights(&f, 6, ParityVariant::Even).unwrap();
        assert_eq!(w.len(), 8);
        let odd = parity_graph(&[1, 0, 0, 1, 1, 0], &w, ParityVariant::Even).unwrap();
        assert_eq!(odd.matrix.sparsity(), 2);
        assert!((parity_entry(&odd, |x| f.value(x)) - val).abs() < 1e-9);
        let even = parity_graph(&[1, 0, 0, 1, 0, 0], &w, ParityVariant::Even).unwrap();
        assert!(parity_entry(&even, |x| f.value(x)).abs() < 1e-12);
    }

    #[test]
    fn clock_two_positions() {
        let inst = clock_hamiltonian(vec![SparseUnitary::identity(2)], vec![1.0]).unwrap();
        let psi = inst.history_states();
        let a = inst.hamiltonian.to_dense();
        assert_eq!(psi[1].dotc(&(&a * &psi[0])), c(1.0));
        assert_eq!(psi[0].dotc(&(&a * &psi[0])), c(0.0));
    }

    #[test]
    fn clock_rejects_non_unitary() {
        let mut u = SparseUnitary::identity(2);
        u.rows[1][0].1 = c(1.1);
        assert!(matches!(
            clock_hamiltonian(vec![u], vec![0.5]),
            Err(HardnessError::NotUnitary { index: 1, .. })
        ));
    }

    #[test]
    fn forrelation_constant_tables() {
        for n in 1..=6 {
            let ones = vec![1i8; 1 << n];
            let inst = forrelation_instance(n, ones.clone(), ones).unwrap();
            assert!((inst.phi - 2f64.powf(-(n as f64) / 2.0)).abs() < 1e-14);
            assert_eq!(forrelation_unitaries(&inst).len(), forrelation_clock_size(n) - 1);
        }
        assert!(forrelation_instance(13, vec![], vec![]).is_err());
    }

    #[test]
    fn forrelation_identity_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 2;
        let table = |rng: &mut ChaCha8Rng| (0..1 << n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let inst = forrelation_instance(n, table(&mut rng), table(&mut rng)).unwrap();
        let f = sin(5.0);
        let (w, val) = clock_witness_weights(&f, forrelation_clock_size(n)).unwrap();
        let chk = forrelation_identity_check(&inst, &f, &w).unwrap();
        assert!(chk.residual < 1e-10);
        assert!((chk.history_entry - val).abs() < 1e-9);
        assert!((chk.history_entry - chk.reduced_entry).abs() < 1e-10);
    }

    #[test]
    fn bundle_round_trip() {
        let b = Bundle::Parity { bits: vec![1, 0, 1], weights: vec![0.5; 3], variant: ParityVariant::Odd, function: "sin:t=2".into() };
        let text = serde_json::to_string(&b).unwrap();
        let back: Bundle = serde_json::from_str(&text).unwrap();
        assert_eq!(b, back);
        assert!(verify_bundle(&back).unwrap().ok);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn parity_dichotomy(bits in proptest::collection::vec(0u8..2, 1..12), w in 0.05f64..0.5) {
            let f = sin(3.0);
            let weights = vec![w; bits.len()];
            let inst = parity_graph(&bits, &weights, ParityVariant::Odd).unwrap();
            let chk = parity_check(&inst, &f, 1e-10).unwrap();
            proptest::prop_assert!(chk.ok);
            proptest::prop_assert_eq!(u32::from(chk.parity), bits.iter().map(|&b| u32::from(b)).sum::<u32>() % 2);
            if chk.parity == 0 {
                proptest::prop_assert!(chk.entry.abs() < 1e-10);
            }
        }
    }
}
