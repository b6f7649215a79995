//! Dense Hermitian eigendecomposition, used as a reference for `f(A)`.
//!
//! Indices here are 0-based, unlike the oracle interfaces.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Eigendecomposition `A = V diag(lambda) V^*` of a dense Hermitian matrix.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<f64>,
    vectors: Vectors,
}

#[derive(Clone, Debug)]
enum Vectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl DenseSpectrum {
    /// Decomposes `a`, taking the real symmetric path when every entry is real.
    /// Only the lower triangle is trusted to be Hermitian-consistent.
    pub fn new(a: &DMatrix<Complex64>) -> Self {
        assert!(a.is_square(), "matrix must be square");
        if a.iter().all(|z| z.im == 0.0) {
            let re = a.map(|z| z.re);
            let eig = SymmetricEigen::new(re);
            DenseSpectrum {
                eigenvalues: eig.eigenvalues.iter().copied().collect(),
                vectors: Vectors::Real(eig.eigenvectors),
            }
        } else {
            let eig = SymmetricEigen::new(a.clone());
            DenseSpectrum {
                eigenvalues: eig.eigenvalues.iter().copied().collect(),
                vectors: Vectors::Complex(eig.eigenvectors),
            }
        }
    }

    pub fn from_real(a: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(a.clone());
        DenseSpectrum {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            vectors: Vectors::Real(eig.eigenvectors),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest `|lambda|`.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// `f(A)[i, j]`.
    pub fn entry(&self, f: impl Fn(f64) -> f64, i: usize, j: usize) -> Complex64 {
        match &self.vectors {
            Vectors::Real(v) => {
                let s: f64 = self
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| f(l) * v[(i, k)] * v[(j, k)])
                    .sum();
                Complex64::new(s, 0.0)
            }
            Vectors::Complex(v) => self
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, &l)| v[(i, k)] * v[(j, k)].conj() * f(l))
                .sum(),
        }
    }

    /// `u^* f(A) w`.
    pub fn form(&self, f: impl Fn(f64) -> f64, u: &[Complex64], w: &[Complex64]) -> Complex64 {
        let n = self.dim();
        assert!(u.len() == n && w.len() == n);
        let mut total = Complex64::new(0.0, 0.0);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let (mut pu, mut pw) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for r in 0..n {
                let vk = match &self.vectors {
                    Vectors::Real(v) => Complex64::new(v[(r, k)], 0.0),
                    Vectors::Complex(v) => v[(r, k)],
                };
                pu += vk.conj() * u[r];
                pw += vk.conj() * w[r];
            }
            total += pu.conj() * pw * f(l);
        }
        total
    }
}
