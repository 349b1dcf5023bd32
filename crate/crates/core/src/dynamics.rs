//! Squeezing Hamiltonians and time evolution.
//!
//! Rates and energies are in rad/ms, times in ms. Squeezing dynamics are
//! computed in the frame co-rotating with the Larmor precession about x.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::spin::{QuantumState, SpinOperators};

pub const HAMILTONIAN_TOLERANCE: f64 = 1e-12;
/// Positivity bound for integrated (non-unitary) states.
pub const LINDBLAD_POSITIVITY_TOLERANCE: f64 = 1e-7;
pub const LINDBLAD_TRACE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    matrix: CMatrix,
    pub label: String,
}

impl Hamiltonian {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        let residual = linalg::hermiticity_residual(&matrix);
        if residual > HAMILTONIAN_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "Hamiltonian is not Hermitian (residual {residual:e})"
            )));
        }
        Ok(Self {
            matrix: linalg::hermitian_part(&matrix),
            label: label.into(),
        })
    }

    pub(crate) fn trusted(matrix: CMatrix, label: impl Into<String>) -> Self {
        Self {
            matrix: linalg::hermitian_part(&matrix),
            label: label.into(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::trusted(CMatrix::zeros(dim, dim), "0")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    /// Sum of two Hamiltonians; labels are joined with `+`.
    pub fn plus(&self, other: &Hamiltonian) -> Result<Hamiltonian> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self::trusted(
            &self.matrix + &other.matrix,
            format!("{} + {}", self.label, other.label),
        ))
    }
}

/// One-axis twisting, `alpha Fz^2`.
pub fn oat_hamiltonian(ops: &SpinOperators, alpha: f64) -> Hamiltonian {
    Hamiltonian::trusted(&ops.fz * &ops.fz * c(alpha), format!("{alpha} Fz^2"))
}

/// Two-axis countertwisting, `alpha (Fz^2 - Fy^2)`.
pub fn tact_hamiltonian(ops: &SpinOperators, alpha: f64) -> Hamiltonian {
    let m = &ops.fz * &ops.fz - &ops.fy * &ops.fy;
    Hamiltonian::trusted(m * c(alpha), format!("{alpha} (Fz^2 - Fy^2)"))
}

/// Static AC-Stark shift of z-polarized light, `-(a0 + a2 Fz^2) / 4`, where
/// `a0`, `a2` already include the field intensity.
pub fn light_shift_hamiltonian(ops: &SpinOperators, a0: f64, a2: f64) -> Hamiltonian {
    let m = (ops.identity() * c(a0) + &ops.fz * &ops.fz * c(a2)) * c(-0.25);
    Hamiltonian::trusted(m, format!("-({a0} + {a2} Fz^2)/4"))
}

/// Lab-frame Zeeman Hamiltonian `omega_l Fx + beta Fx^2`.
pub fn zeeman_hamiltonian(ops: &SpinOperators, omega_l: f64, beta: f64) -> Hamiltonian {
    let m = &ops.fx * c(omega_l) + &ops.fx * &ops.fx * c(beta);
    Hamiltonian::trusted(m, format!("{omega_l} Fx + {beta} Fx^2"))
}

/// Number of phase samples used for Larmor-period averages. The averaged
/// integrands are trigonometric polynomials of degree <= 4 in the phase, so
/// any uniform rule with more than 4 nodes is exact.
const PERIOD_SAMPLES: usize = 16;

/// Secular (period-averaged) part of a phase-dependent Hamiltonian in the
/// frame rotating about x: the average over one Larmor period of
/// `U^dagger H(phase) U` with `U = exp(-i phase Fx)`.
pub fn rotating_frame_average(
    ops: &SpinOperators,
    lab: impl Fn(f64) -> CMatrix,
) -> CMatrix {
    let (vals, vecs) = linalg::eigh(&ops.fx);
    let d = ops.dim();
    let mut acc = CMatrix::zeros(d, d);
    for k in 0..PERIOD_SAMPLES {
        let phase = 2.0 * PI * k as f64 / PERIOD_SAMPLES as f64;
        let u = linalg::spectral(&vals, &vecs, |e| Complex64::from_polar(1.0, -e * phase));
        acc += u.adjoint() * lab(phase) * u;
    }
    acc * c(1.0 / PERIOD_SAMPLES as f64)
}

/// Rotating-frame effective light shift of the Raman drive.
///
/// The two Raman fields are shifted by +-omega_L, so the z-polarized intensity
/// beats at `2 omega_L`: `|E_z|^2 (1 + cos 2 omega_L t)`. The secular part of
/// the resulting tensor shift is
/// `-(a0 + a2 [(Fy^2 + Fz^2)/2 + (Fz^2 - Fy^2)/4]) / 4`.
pub fn raman_light_shift(ops: &SpinOperators, a0: f64, a2: f64) -> Hamiltonian {
    let static_part = light_shift_hamiltonian(ops, a0, a2);
    let m = rotating_frame_average(ops, |phase| {
        static_part.matrix() * c(1.0 + (2.0 * phase).cos())
    });
    Hamiltonian::trusted(m, format!("<-({a0} + {a2} Fz^2)/4>_rot"))
}

/// Rotating-frame Zeeman term: the Larmor part is the frame itself, so only
/// the quadratic shift `beta Fx^2` survives.
pub fn zeeman_rotating(ops: &SpinOperators, beta: f64) -> Hamiltonian {
    let lab = zeeman_hamiltonian(ops, 0.0, beta);
    let m = rotating_frame_average(ops, |_| lab.matrix().clone());
    Hamiltonian::trusted(m, format!("{beta} Fx^2"))
}

/// Light shift tuned against the quadratic Zeeman shift (`a2 = -8 beta`).
#[derive(Clone, Debug)]
pub struct CompensatedHamiltonian {
    /// Traceless effective part, `(beta/2)(Fz^2 - Fy^2)`.
    pub hamiltonian: Hamiltonian,
    /// Constant energy offset removed from the sum, `beta F(F+1)`.
    pub offset: f64,
}

pub fn compensated_hamiltonian(ops: &SpinOperators, beta: f64) -> CompensatedHamiltonian {
    let total = raman_light_shift(ops, 0.0, -8.0 * beta)
        .plus(&zeeman_rotating(ops, beta))
        .expect("same dimension");
    let d = ops.dim();
    let offset = linalg::trace(total.matrix()).re / d as f64;
    let effective = total.matrix() - ops.identity() * c(offset);
    CompensatedHamiltonian {
        hamiltonian: Hamiltonian::trusted(effective, format!("{} (Fz^2 - Fy^2)", beta / 2.0)),
        offset,
    }
}

/// `exp(-i h t) rho exp(i h t)`
pub fn evolve_unitary(state: &QuantumState, h: &Hamiltonian, t: f64) -> Result<QuantumState> {
    state.check_dim(h.dim())?;
    let u = linalg::unitary_exp(h.matrix(), t);
    Ok(QuantumState::from_trusted(linalg::conjugate(&u, state.rho())))
}

/// Precomputed spectral propagator for repeated unitary evolution under one
/// Hamiltonian.
#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl UnitaryPropagator {
    pub fn new(h: &Hamiltonian) -> Self {
        let (energies, vectors) = linalg::eigh(h.matrix());
        Self { energies, vectors }
    }

    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        state.check_dim(self.energies.len())?;
        let u = linalg::spectral(&self.energies, &self.vectors, |e| {
            Complex64::from_polar(1.0, -e * t)
        });
        Ok(QuantumState::from_trusted(linalg::conjugate(&u, state.rho())))
    }
}

/// Dark decay times plus light-induced scattering while the Raman pulse is on.
///
/// T1 is isotropic depolarization toward I/d. T2 is dephasing about x with
/// jump operator `sqrt(gamma_phi) Fx`; `gamma_phi` is chosen so that the
/// Delta m = 1 coherences (x basis) decay at `1/T2` including the T1 part.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayChannels {
    pub t1: f64,
    pub t2: f64,
    pub extra_scatter_rate: f64,
}

impl DecayChannels {
    pub fn new(t1: f64, t2: f64, extra_scatter_rate: f64) -> Result<Self> {
        if !(t1 > 0.0) || !(t2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay times must be positive (T1 = {t1}, T2 = {t2})"
            )));
        }
        if !(extra_scatter_rate >= 0.0) || !extra_scatter_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scatter rate must be finite and >= 0, got {extra_scatter_rate}"
            )));
        }
        if 1.0 / t2 < 1.0 / t1 {
            return Err(Error::InvalidParameter(format!(
                "T2 = {t2} ms exceeds T1 = {t1} ms: depolarization alone already \
                 dephases at 1/T1, so the dephasing rate would be negative"
            )));
        }
        Ok(Self {
            t1,
            t2,
            extra_scatter_rate,
        })
    }

    /// No decay at all.
    pub fn none() -> Self {
        Self {
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            extra_scatter_rate: 0.0,
        }
    }

    pub fn depolarizing_rate(&self) -> f64 {
        1.0 / self.t1 + self.extra_scatter_rate
    }

    /// `gamma_phi` of the `Fx` jump operator.
    pub fn dephasing_rate(&self) -> f64 {
        2.0 * (1.0 / self.t2 - 1.0 / self.t1)
    }

    pub fn is_zero(&self) -> bool {
        self.depolarizing_rate() == 0.0 && self.dephasing_rate() == 0.0
    }
}

/// Fixed-step RK4 integrator for
/// `drho/dt = -i[H, rho] + G (Tr(rho) I/d - rho) + g (Fx rho Fx - {Fx^2, rho}/2)`.
#[derive(Clone, Debug)]
pub struct LindbladPropagator {
    h: CMatrix,
    jump: CMatrix,
    jump_sq_half: CMatrix,
    depolarizing: f64,
    dephasing: f64,
}

impl LindbladPropagator {
    pub fn new(ops: &SpinOperators, h: &Hamiltonian, decay: &DecayChannels) -> Result<Self> {
        if h.dim() != ops.dim() {
            return Err(Error::DimensionMismatch {
                expected: ops.dim(),
                got: h.dim(),
            });
        }
        Ok(Self {
            h: h.matrix().clone(),
            jump: ops.fx.clone(),
            jump_sq_half: &ops.fx * &ops.fx * c(0.5),
            depolarizing: decay.depolarizing_rate(),
            dephasing: decay.dephasing_rate(),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim();
        let h_rho = &self.h * rho;
        let mut out = (&h_rho - h_rho.adjoint()) * Complex64::new(0.0, -1.0);
        if self.depolarizing != 0.0 {
            let tr = linalg::trace(rho);
            out += (CMatrix::identity(d, d) * (tr / d as f64) - rho) * c(self.depolarizing);
        }
        if self.dephasing != 0.0 {
            let a = &self.jump_sq_half * rho;
            let sandwich = &self.jump * rho * &self.jump;
            out += (sandwich - &a - a.adjoint()) * c(self.dephasing);
        }
        out
    }

    pub fn step(&self, rho: &CMatrix, dt: f64) -> CMatrix {
        let half = c(dt / 2.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &k1 * half));
        let k3 = self.rhs(&(rho + &k2 * half));
        let k4 = self.rhs(&(rho + &k3 * c(dt)));
        rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(dt / 6.0)
    }

    /// Evolves `state` and returns snapshots at each of the sorted `times`.
    /// Each interval is split into equal steps no longer than `dt`.
    pub fn trajectory(
        &self,
        state: &QuantumState,
        times: &[f64],
        dt: f64,
    ) -> Result<Vec<QuantumState>> {
        state.check_dim(self.dim())?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
        }
        if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "evolution times must be non-negative and sorted".into(),
            ));
        }
        let mut rho = state.rho().clone();
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - now;
            if span > 0.0 {
                let n = (span / dt).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for k in 0..n {
                    rho = self.step(&rho, h);
                    if (k + 1) % 50 == 0 || k + 1 == n {
                        self.check_positivity(&rho, now + (k + 1) as f64 * h)?;
                    }
                }
                now = target;
            }
            out.push(self.snapshot(&rho, now)?);
        }
        Ok(out)
    }

    fn check_positivity(&self, rho: &CMatrix, time: f64) -> Result<()> {
        let min = linalg::eigvalsh(&linalg::hermitian_part(rho))[0];
        if min < -LINDBLAD_POSITIVITY_TOLERANCE || !min.is_finite() {
            return Err(Error::PositivityLost {
                time,
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    fn snapshot(&self, rho: &CMatrix, time: f64) -> Result<QuantumState> {
        QuantumState::with_tolerance(
            rho.clone(),
            LINDBLAD_TRACE_TOLERANCE,
            LINDBLAD_POSITIVITY_TOLERANCE,
        )
        .map_err(|e| match e {
            Error::InvalidState(msg) => Error::InvalidState(format!("at t = {time} ms: {msg}")),
            other => other,
        })
    }
}

/// Master-equation evolution over `t` with fixed RK4 step `dt` (the last
/// step is shortened so the final time is hit exactly).
pub fn evolve_lindblad(
    state: &QuantumState,
    h: &Hamiltonian,
    decay: &DecayChannels,
    t: f64,
    dt: f64,
) -> Result<QuantumState> {
    let ops = SpinOperators::for_dim(state.dim())?;
    let prop = LindbladPropagator::new(&ops, h, decay)?;
    Ok(prop.trajectory(state, &[t], dt)?.pop().expect("one snapshot"))
}

/// Result of step-halving refinement.
#[derive(Clone, Debug)]
pub struct RefinedTrajectory {
    pub states: Vec<QuantumState>,
    pub dt: f64,
    pub final_change: f64,
}

/// Halves `dt` until `observable` at the last time changes by less than
/// `tol` between successive step sizes.
pub fn evolve_lindblad_refined(
    prop: &LindbladPropagator,
    state: &QuantumState,
    times: &[f64],
    dt: f64,
    tol: f64,
    max_halvings: usize,
    observable: impl Fn(&QuantumState) -> f64,
) -> Result<RefinedTrajectory> {
    let mut dt = dt;
    let mut states = prop.trajectory(state, times, dt)?;
    if times.is_empty() || times.iter().all(|&t| t == 0.0) {
        return Ok(RefinedTrajectory {
            states,
            dt,
            final_change: 0.0,
        });
    }
    let mut last = observable(states.last().expect("non-empty"));
    let mut change = f64::INFINITY;
    for _ in 0..max_halvings {
        let finer = prop.trajectory(state, times, dt / 2.0)?;
        let value = observable(finer.last().expect("non-empty"));
        change = (value - last).abs();
        dt /= 2.0;
        states = finer;
        last = value;
        if change < tol {
            return Ok(RefinedTrajectory {
                states,
                dt,
                final_change: change,
            });
        }
    }
    Err(Error::InvalidParameter(format!(
        "Lindblad step refinement did not settle after {max_halvings} halvings \
         (last change {change:e}, dt = {dt} ms)"
    )))
}
