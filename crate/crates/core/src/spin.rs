//! Angular-momentum algebra for a single spin-F and density-matrix states.
//!
//! Conventions: hbar = 1, so spin operators are dimensionless. The basis is
//! ordered m = +F, F-1, ..., -F, i.e. row 0 is the stretched state |m = +F>.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};

/// Eigenvalues above this (negative) bound are accepted as round-off.
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Spin quantum number stored as `2F` so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinQuantumNumber {
    two_f: u32,
}

impl SpinQuantumNumber {
    pub const fn from_two_f(two_f: u32) -> Self {
        Self { two_f }
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self::from_two_f((dim - 1) as u32))
    }

    /// Accepts integer or half-integer `f`.
    pub fn from_f(f: f64) -> Result<Self> {
        let two_f = 2.0 * f;
        if !(two_f >= 0.0) || (two_f - two_f.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "spin F = {f} is not a non-negative (half-)integer"
            )));
        }
        Ok(Self::from_two_f(two_f.round() as u32))
    }

    pub fn two_f(self) -> u32 {
        self.two_f
    }

    pub fn f(self) -> f64 {
        self.two_f as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_f as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.two_f % 2 == 0
    }

    /// F(F+1)
    pub fn casimir(self) -> f64 {
        let f = self.f();
        f * (f + 1.0)
    }

    /// Magnetic quantum numbers in basis order (+F first).
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let f = self.f();
        (0..self.dim()).map(move |i| f - i as f64)
    }
}

impl fmt::Display for SpinQuantumNumber {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(out, "{}", self.two_f / 2)
        } else {
            write!(out, "{}/2", self.two_f)
        }
    }
}

impl FromStr for SpinQuantumNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse spin quantum number {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Self::from_f(num / den)
        } else {
            Self::from_f(s.parse().map_err(|_| bad())?)
        }
    }
}

/// Matrix representation of F_x, F_y, F_z, F_+ and F_- for one spin.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub f: SpinQuantumNumber,
    pub fx: CMatrix,
    pub fy: CMatrix,
    pub fz: CMatrix,
    pub f_plus: CMatrix,
    pub f_minus: CMatrix,
}

impl SpinOperators {
    pub fn new(f: SpinQuantumNumber) -> Self {
        let d = f.dim();
        let casimir = f.casimir();
        let m: Vec<f64> = f.m_values().collect();
        let fz = linalg::real_diag(&m);
        // F+ |m> = sqrt(F(F+1) - m(m+1)) |m+1>; |m+1> sits one row above |m>.
        let mut f_plus = CMatrix::zeros(d, d);
        for i in 1..d {
            let mi = m[i];
            f_plus[(i - 1, i)] = c((casimir - mi * (mi + 1.0)).sqrt());
        }
        let f_minus = f_plus.adjoint();
        let fx = (&f_plus + &f_minus) * c(0.5);
        let fy = (&f_plus - &f_minus) * Complex64::new(0.0, -0.5);
        Self {
            f,
            fx,
            fy,
            fz,
            f_plus,
            f_minus,
        }
    }

    pub fn for_dim(dim: usize) -> Result<Self> {
        Ok(Self::new(SpinQuantumNumber::from_dim(dim)?))
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `n . F` for a (not necessarily normalized) direction `n`.
    pub fn along(&self, n: [f64; 3]) -> CMatrix {
        &self.fx * c(n[0]) + &self.fy * c(n[1]) + &self.fz * c(n[2])
    }

    pub fn identity(&self) -> CMatrix {
        linalg::identity(self.dim())
    }
}

pub fn spin_operators(f: SpinQuantumNumber) -> SpinOperators {
    SpinOperators::new(f)
}

/// Density matrix of a single spin (or of a truncated oscillator mode).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    rho: CMatrix,
}

impl QuantumState {
    /// Validates trace, Hermiticity and positivity at the default tolerances.
    pub fn new(rho: CMatrix) -> Result<Self> {
        Self::with_tolerance(rho, TRACE_TOLERANCE, POSITIVITY_TOLERANCE)
    }

    pub fn with_tolerance(rho: CMatrix, trace_tol: f64, positivity_tol: f64) -> Result<Self> {
        if !rho.is_square() || rho.nrows() == 0 {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let herm = linalg::hermiticity_residual(&rho);
        if herm > HERMITICITY_TOLERANCE.max(trace_tol) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (residual {herm:e})"
            )));
        }
        let tr = linalg::trace(&rho);
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = linalg::eigvalsh(&rho)[0];
        if min_eig < -positivity_tol {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self {
            rho: linalg::hermitian_part(&rho),
        })
    }

    /// For maps already known to preserve the invariants (unitary conjugation).
    pub(crate) fn from_trusted(rho: CMatrix) -> Self {
        Self {
            rho: linalg::hermitian_part(&rho),
        }
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(Self::from_trusted(linalg::outer(&(psi / c(norm)))))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut psi = CVector::zeros(dim);
        psi[index] = c(1.0);
        Self::pure(&psi)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim) * c(1.0 / dim as f64))
    }

    /// `w * self + (1 - w) * other`
    pub fn mix(&self, other: &QuantumState, w: f64) -> Result<Self> {
        self.check_dim(other.dim())?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} not in [0, 1]")));
        }
        Ok(Self::from_trusted(&self.rho * c(w) + &other.rho * c(1.0 - w)))
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> CMatrix {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.rho).re
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.rho, &self.rho).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.rho)
    }

    pub fn population(&self, index: usize) -> f64 {
        self.rho[(index, index)].re
    }

    pub fn expectation(&self, op: &CMatrix) -> f64 {
        linalg::trace_product(&self.rho, op).re
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: d,
            });
        }
        Ok(())
    }
}

pub fn expectation(state: &QuantumState, op: &CMatrix) -> Result<f64> {
    state.check_dim(op.nrows())?;
    Ok(state.expectation(op))
}

/// Symmetrized covariance `<ab + ba>/2 - <a><b>`.
pub fn covariance(state: &QuantumState, a: &CMatrix, b: &CMatrix) -> Result<f64> {
    state.check_dim(a.nrows())?;
    state.check_dim(b.nrows())?;
    let sym = linalg::anticommutator(a, b) * c(0.5);
    Ok(state.expectation(&sym) - state.expectation(a) * state.expectation(b))
}

/// Mean spin vector `(<Fx>, <Fy>, <Fz>)`.
pub fn mean_spin(state: &QuantumState, ops: &SpinOperators) -> Result<[f64; 3]> {
    state.check_dim(ops.dim())?;
    Ok([
        state.expectation(&ops.fx),
        state.expectation(&ops.fy),
        state.expectation(&ops.fz),
    ])
}

/// Rotation operator `exp(-i angle n.F)` for a unit axis `n`.
pub fn rotation_operator(ops: &SpinOperators, axis: [f64; 3], angle: f64) -> Result<CMatrix> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm < 1e-12 {
        return Err(Error::ZeroAxis);
    }
    let n = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
    Ok(linalg::unitary_exp(&ops.along(n), angle))
}

/// Rotates `state` by `angle` about `axis`. The axis is normalized.
pub fn rotate(state: &QuantumState, axis: [f64; 3], angle: f64) -> Result<QuantumState> {
    let ops = SpinOperators::for_dim(state.dim())?;
    let u = rotation_operator(&ops, axis, angle)?;
    Ok(QuantumState::from_trusted(linalg::conjugate(&u, state.rho())))
}

/// State vector `exp(-i phi Fz) exp(-i theta Fy) |m = +F>`.
pub fn coherent_spin_vector(f: SpinQuantumNumber, theta: f64, phi: f64) -> CVector {
    let ops = SpinOperators::new(f);
    let mut stretched = CVector::zeros(f.dim());
    stretched[0] = c(1.0);
    let ry = linalg::unitary_exp(&ops.fy, theta);
    let rz = linalg::unitary_exp(&ops.fz, phi);
    rz * (ry * stretched)
}

/// Coherent spin state pointing along polar angle `theta`, azimuth `phi`.
pub fn coherent_spin_state(f: SpinQuantumNumber, theta: f64, phi: f64) -> QuantumState {
    QuantumState::from_trusted(linalg::outer(&coherent_spin_vector(f, theta, phi)))
}

/// Coherent spin state along +x, the optically pumped starting point.
pub fn css_x(f: SpinQuantumNumber) -> QuantumState {
    coherent_spin_state(f, std::f64::consts::FRAC_PI_2, 0.0)
}

pub(crate) fn unit_vector(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = norm3(v);
    (n > 0.0).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn all_spins() -> impl Iterator<Item = SpinQuantumNumber> {
        (1..=8).map(SpinQuantumNumber::from_two_f)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = SpinOperators::new(SpinQuantumNumber::from_two_f(1));
        let sx = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]);
        let sy = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5), c(0.0)],
        );
        assert!(max_abs(&(&ops.fx - sx)) < 1e-15);
        assert!(max_abs(&(&ops.fy - sy)) < 1e-15);
        assert_eq!(ops.fz[(0, 0)], c(0.5));
        assert_eq!(ops.fz[(1, 1)], c(-0.5));
    }

    #[test]
    fn spin_one_ladder_coefficients() {
        let ops = SpinOperators::new(SpinQuantumNumber::from_two_f(2));
        let diag: Vec<f64> = ops.fz.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        assert!((ops.f_plus[(0, 1)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!((ops.f_plus[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ops.f_plus[(1, 0)], c(0.0));
    }

    #[test]
    fn commutators_and_casimir_hold_up_to_spin_four() {
        for f in all_spins() {
            let o = SpinOperators::new(f);
            let i = linalg::I;
            let r1 = linalg::commutator(&o.fy, &o.fz) - &o.fx * i;
            let r2 = linalg::commutator(&o.fz, &o.fx) - &o.fy * i;
            let r3 = linalg::commutator(&o.fx, &o.fy) - &o.fz * i;
            assert!(max_abs(&r1).max(max_abs(&r2)).max(max_abs(&r3)) <= 1e-12, "F={f}");
            let cas = &o.fx * &o.fx + &o.fy * &o.fy + &o.fz * &o.fz - o.identity() * c(f.casimir());
            assert!(max_abs(&cas) <= 1e-12, "F={f}");
            for m in [&o.fx, &o.fy, &o.fz] {
                assert!(linalg::hermiticity_residual(m) <= 1e-15);
            }
            let fp = &o.fx + &o.fy * i;
            assert!(max_abs(&(fp - &o.f_plus)) <= 1e-14);
        }
        let four = SpinOperators::new(SpinQuantumNumber::from_two_f(8));
        let cas = &four.fx * &four.fx + &four.fy * &four.fy + &four.fz * &four.fz;
        assert!(max_abs(&(cas - four.identity() * c(20.0))) <= 1e-12);
    }

    #[test]
    fn parses_integer_and_half_integer_spins() {
        assert_eq!("4".parse::<SpinQuantumNumber>().unwrap().two_f(), 8);
        assert_eq!("3/2".parse::<SpinQuantumNumber>().unwrap().two_f(), 3);
        assert_eq!("1.5".parse::<SpinQuantumNumber>().unwrap().two_f(), 3);
        assert!("1.3".parse::<SpinQuantumNumber>().is_err());
        assert!("-1".parse::<SpinQuantumNumber>().is_err());
        assert_eq!(SpinQuantumNumber::from_two_f(3).to_string(), "3/2");
    }

    #[test]
    fn css_along_x_for_spin_four() {
        let f = SpinQuantumNumber::from_two_f(8);
        let ops = SpinOperators::new(f);
        let s = coherent_spin_state(f, FRAC_PI_2, 0.0);
        assert!((s.expectation(&ops.fx) - 4.0).abs() < 1e-12);
        assert!((covariance(&s, &ops.fy, &ops.fy).unwrap() - 2.0).abs() < 1e-12);
        assert!((covariance(&s, &ops.fz, &ops.fz).unwrap() - 2.0).abs() < 1e-12);
        assert!(covariance(&s, &ops.fy, &ops.fz).unwrap().abs() < 1e-12);
        let id = ops.identity();
        assert!(covariance(&s, &id, &id).unwrap().abs() < 1e-12);
    }

    #[test]
    fn css_spin_half_along_z() {
        let s = coherent_spin_state(SpinQuantumNumber::from_two_f(1), 0.0, 0.0);
        assert!((s.rho()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(s.rho()[(1, 1)].norm() < 1e-15);
    }

    /// Closed-form coherent-state amplitudes
    /// `<m|theta,phi> = sqrt(C(2F, F+m)) cos(theta/2)^(F+m) sin(theta/2)^(F-m) e^(-i m phi)`.
    fn css_closed_form(f: SpinQuantumNumber, theta: f64, phi: f64) -> CVector {
        let two_f = f.two_f() as i64;
        let binom = |n: i64, k: i64| -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        let amps: Vec<Complex64> = f
            .m_values()
            .map(|m| {
                let up = (f.f() + m).round() as i64;
                let down = two_f - up;
                let mag = binom(two_f, up).sqrt()
                    * (theta / 2.0).cos().powi(up as i32)
                    * (theta / 2.0).sin().powi(down as i32);
                Complex64::from_polar(mag, -m * phi)
            })
            .collect();
        nalgebra::DVector::from_column_slice(&amps)
    }

    #[test]
    fn css_matches_closed_form_amplitudes() {
        let f = SpinQuantumNumber::from_two_f(8);
        let ours = coherent_spin_vector(f, PI / 3.0, PI / 4.0);
        let oracle = css_closed_form(f, PI / 3.0, PI / 4.0);
        let overlap = ours.dotc(&oracle).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        let ops = SpinOperators::new(f);
        let s = coherent_spin_state(f, PI / 3.0, PI / 4.0);
        let m = mean_spin(&s, &ops).unwrap();
        assert!((norm3(m) - 4.0).abs() < 1e-12);
        let expect = [
            4.0 * (PI / 3.0).sin() * (PI / 4.0).cos(),
            4.0 * (PI / 3.0).sin() * (PI / 4.0).sin(),
            4.0 * (PI / 3.0).cos(),
        ];
        for k in 0..3 {
            assert!((m[k] - expect[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations() {
        let f = SpinQuantumNumber::from_two_f(8);
        let ops = SpinOperators::new(f);
        let sx = css_x(f);
        let r = rotate(&sx, [1.0, 0.0, 0.0], 0.77).unwrap();
        assert!((r.expectation(&ops.fx) - 4.0).abs() < 1e-12);

        let sz = coherent_spin_state(f, 0.0, 0.0);
        let r = rotate(&sz, [0.0, 1.0, 0.0], FRAC_PI_2).unwrap();
        assert!(max_abs(&(r.rho() - sx.rho())) < 1e-10);

        let generic = coherent_spin_state(f, 1.1, -0.4).mix(&QuantumState::maximally_mixed(9), 0.7).unwrap();
        let full = rotate(&generic, [0.0, 0.0, 2.0], 2.0 * PI).unwrap();
        assert!(max_abs(&(full.rho() - generic.rho())) < 1e-10);

        assert!(matches!(rotate(&sx, [0.0, 0.0, 0.0], 1.0), Err(Error::ZeroAxis)));
    }

    #[test]
    fn state_validation() {
        let mut bad = linalg::identity(2) * c(0.5);
        bad[(0, 0)] = c(0.7);
        assert!(QuantumState::new(bad).is_err());
        let neg = linalg::real_diag(&[1.2, -0.2]);
        assert!(QuantumState::new(neg).is_err());
        let mut non_herm = linalg::identity(2) * c(0.5);
        non_herm[(0, 1)] = c(0.1);
        assert!(QuantumState::new(non_herm).is_err());
        assert!(QuantumState::new(linalg::identity(3) * c(1.0 / 3.0)).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = QuantumState::maximally_mixed(3);
        let op = linalg::identity(4);
        assert!(matches!(
            covariance(&s, &op, &op),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
