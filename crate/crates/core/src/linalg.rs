//! Dense complex matrix helpers. All matrices here are at most ~20x20.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of the anti-Hermitian part, `max |m - m^dagger| / 2`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint())) * 0.5
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let d = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues (ascending) and
/// unitary eigenvector matrix whose columns are the eigenvectors.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let d = m.nrows();
    let mut vecs = CMatrix::zeros(d, d);
    let mut vals = Vec::with_capacity(d);
    for (col, &k) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[k]);
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// `V f(Λ) V^dagger` for Hermitian `m`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    spectral(&vals, &vecs, f)
}

pub fn spectral(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let d = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        let fj = f(lambda);
        for i in 0..d {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn unitary_exp(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function(h, |e| Complex64::from_polar(1.0, -e * t))
}

/// `u m u^dagger`
pub fn conjugate(u: &CMatrix, m: &CMatrix) -> CMatrix {
    u * m * u.adjoint()
}

pub fn outer(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_reconstructs_hermitian_matrix() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                Complex64::new(0.5, 0.3),
                c(0.0),
                Complex64::new(0.5, -0.3),
                c(-1.0),
                Complex64::new(0.0, 1.2),
                c(0.0),
                Complex64::new(0.0, -1.2),
                c(0.5),
            ],
        );
        let (vals, vecs) = eigh(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = spectral(&vals, &vecs, c);
        assert!(max_abs(&(back - &m)) < 1e-13);
    }

    #[test]
    fn unitary_exp_matches_pade_exponential() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3), Complex64::new(0.1, 0.7), Complex64::new(0.1, -0.7), c(-0.4)],
        );
        let ours = unitary_exp(&h, 1.7);
        let reference = (h * Complex64::new(0.0, -1.7)).exp();
        assert!(max_abs(&(ours - reference)) < 1e-12);
    }
}
