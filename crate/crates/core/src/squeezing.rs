//! Squeezing parameters of a single-spin state and the two-axis
//! countertwisting optimum.
//!
//! For N uncorrelated identical atoms the collective mean spin and transverse
//! variance both scale with N, so chi^2, zeta^2 and xi^2 computed per atom
//! equal the ensemble values. [`EnsembleMoments`] makes that scaling explicit.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{tact_hamiltonian, Hamiltonian, UnitaryPropagator};
use crate::error::{Error, Result};
use crate::spin::{self, css_x, QuantumState, SpinOperators, SpinQuantumNumber};

/// Below this fraction of F the mean spin is treated as collapsed.
const COLLAPSE_FRACTION: f64 = 1e-9;
/// Covariances closer than this to isotropic use the zero-angle tie-break.
const ISOTROPY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    /// `<F>` per atom.
    pub mean_spin: [f64; 3],
    /// Covariance over `(F_y', F_z')`, the axes transverse to the mean spin.
    pub cov: [[f64; 2]; 2],
    /// Transverse axes `(y', z')` in lab coordinates.
    pub axes: [[f64; 3]; 2],
    /// Angle in the y'z' plane of the minimum-variance quadrature.
    pub optimal_angle: f64,
    pub min_variance: f64,
    pub max_variance: f64,
    pub chi2: f64,
    pub zeta2: f64,
    pub xi2: f64,
    /// Reference spin length of the initial CSS.
    pub j_initial: f64,
}

impl SqueezingReport {
    pub fn mean_spin_length(&self) -> f64 {
        spin::norm3(self.mean_spin)
    }

    /// Variance a CSS of the same mean spin length would have.
    pub fn css_reference_variance(&self) -> f64 {
        self.mean_spin_length() / 2.0
    }
}

/// Orthonormal pair `(y', z')` completing the unit mean-spin direction `n` to
/// a right-handed frame. For `n = x` this is `(y, z)`.
pub fn transverse_axes(n: [f64; 3]) -> [[f64; 3]; 2] {
    let z = [0.0, 0.0, 1.0];
    let zn = spin::cross(z, n);
    let yp = if spin::norm3(zn) > 1e-9 {
        spin::unit_vector(zn).expect("non-zero")
    } else {
        // n along +-z
        [0.0, 1.0, 0.0]
    };
    let zp = spin::cross(n, yp);
    [yp, zp]
}

/// Variance of `cos(theta) F_y' + sin(theta) F_z'`.
pub fn quadrature_variance(cov: &[[f64; 2]; 2], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c * cov[0][0] + s * s * cov[1][1] + 2.0 * s * c * cov[0][1]
}

/// Angle in (-pi/2, pi/2] minimizing [`quadrature_variance`]; 0 when the
/// covariance is isotropic.
pub fn optimal_quadrature_angle(cov: &[[f64; 2]; 2]) -> f64 {
    let diff = cov[0][0] - cov[1][1];
    let off = cov[0][1];
    let scale = cov[0][0].abs().max(cov[1][1].abs()).max(1.0);
    if diff.abs() <= ISOTROPY_TOLERANCE * scale && off.abs() <= ISOTROPY_TOLERANCE * scale {
        return 0.0;
    }
    // the maximum sits at atan2(2 cov_yz, cov_yy - cov_zz) / 2, the minimum a quarter turn away
    let mut theta = 0.5 * (2.0 * off).atan2(diff) + FRAC_PI_2;
    if theta > FRAC_PI_2 {
        theta -= PI;
    }
    theta
}

/// Eigenvalues `(min, max)` of a symmetric 2x2 covariance.
pub fn principal_variances(cov: &[[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (cov[0][0] + cov[1][1]);
    let radius = (0.25 * (cov[0][0] - cov[1][1]).powi(2) + cov[0][1].powi(2)).sqrt();
    (mean - radius, mean + radius)
}

pub fn squeezing_report(state: &QuantumState, j_initial: f64) -> Result<SqueezingReport> {
    let ops = SpinOperators::for_dim(state.dim())?;
    squeezing_report_with(&ops, state, j_initial)
}

pub fn squeezing_report_with(
    ops: &SpinOperators,
    state: &QuantumState,
    j_initial: f64,
) -> Result<SqueezingReport> {
    if !(j_initial > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference spin length must be > 0, got {j_initial}"
        )));
    }
    let mean = spin::mean_spin(state, ops)?;
    let length = spin::norm3(mean);
    if length <= COLLAPSE_FRACTION * ops.f.f().max(0.5) {
        return Err(Error::MeanSpinCollapsed(length));
    }
    let n = [mean[0] / length, mean[1] / length, mean[2] / length];
    let axes = transverse_axes(n);
    let fy = ops.along(axes[0]);
    let fz = ops.along(axes[1]);
    let cyy = spin::covariance(state, &fy, &fy)?;
    let czz = spin::covariance(state, &fz, &fz)?;
    let cyz = spin::covariance(state, &fy, &fz)?;
    let cov = [[cyy, cyz], [cyz, czz]];
    let optimal_angle = optimal_quadrature_angle(&cov);
    let (min_variance, max_variance) = principal_variances(&cov);
    Ok(SqueezingReport {
        mean_spin: mean,
        cov,
        axes,
        optimal_angle,
        min_variance,
        max_variance,
        chi2: 2.0 * min_variance / j_initial,
        zeta2: 2.0 * min_variance / length,
        xi2: 2.0 * j_initial * min_variance / (length * length),
        j_initial,
    })
}

/// Collective moments of N uncorrelated copies of a single-atom state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleMoments {
    pub n_atoms: f64,
    /// `|<J>|`
    pub mean_spin_length: f64,
    /// Minimal transverse variance of J.
    pub min_variance: f64,
    /// `J` of the initial CSS, `N j_initial`.
    pub j_initial: f64,
}

impl EnsembleMoments {
    pub fn from_single_atom(report: &SqueezingReport, n_atoms: f64) -> Self {
        Self {
            n_atoms,
            mean_spin_length: n_atoms * report.mean_spin_length(),
            min_variance: n_atoms * report.min_variance,
            j_initial: n_atoms * report.j_initial,
        }
    }

    pub fn chi2(&self) -> f64 {
        2.0 * self.min_variance / self.j_initial
    }

    pub fn zeta2(&self) -> f64 {
        2.0 * self.min_variance / self.mean_spin_length
    }

    pub fn xi2(&self) -> f64 {
        2.0 * self.j_initial * self.min_variance / self.mean_spin_length.powi(2)
    }
}

/// Minimum of one squeezing parameter over the evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterMinimum {
    /// Twisting strength times time (rad).
    pub alpha_t: f64,
    pub value: f64,
    pub report: SqueezingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistingOptimum {
    pub f: SpinQuantumNumber,
    pub chi2: ParameterMinimum,
    pub zeta2: ParameterMinimum,
    pub xi2: ParameterMinimum,
    /// End of the first squeezing window in alpha t.
    pub window_end: f64,
    /// Coarse grid spacing in alpha t before refinement.
    pub scan_step: f64,
    pub refine_tolerance: f64,
}

pub const TACT_SCAN_POINTS: usize = 2000;
pub const TACT_REFINE_TOLERANCE: f64 = 1e-6;

/// Best squeezing reachable by two-axis countertwisting from CSS_x.
///
/// Scans alpha t over (0, pi] on a uniform grid and refines each parameter's
/// minimum by golden-section search. Minima are taken within the first
/// squeezing window: from t = 0 up to the first local minimum of |<F>|, where
/// the distribution has wrapped around the sphere. Later revivals are excluded.
pub fn tact_optimum(f: SpinQuantumNumber) -> Result<TwistingOptimum> {
    if f.two_f() < 2 {
        return Err(Error::SpinHalfNoSqueezing);
    }
    let ops = SpinOperators::new(f);
    twisting_optimum(&ops, &tact_hamiltonian(&ops, 1.0), TACT_SCAN_POINTS, TACT_REFINE_TOLERANCE)
}

/// Same scan as [`tact_optimum`] for any unit-strength twisting Hamiltonian.
pub fn twisting_optimum(
    ops: &SpinOperators,
    h: &Hamiltonian,
    points: usize,
    tol: f64,
) -> Result<TwistingOptimum> {
    let f = ops.f;
    let j = f.f();
    let start = css_x(f);
    let prop = UnitaryPropagator::new(h);
    let report_at = |t: f64| -> Option<SqueezingReport> {
        let s = prop.evolve(&start, t).ok()?;
        squeezing_report_with(ops, &s, j).ok()
    };

    let step = PI / points as f64;
    let grid: Vec<(f64, Option<SqueezingReport>)> =
        (1..=points).map(|i| (i as f64 * step, report_at(i as f64 * step))).collect();
    let length = |r: &Option<SqueezingReport>| r.as_ref().map_or(0.0, |r| r.mean_spin_length());

    let mut window = grid.len();
    for i in 1..grid.len().saturating_sub(1) {
        let (prev, here, next) = (length(&grid[i - 1].1), length(&grid[i].1), length(&grid[i + 1].1));
        if here < prev && here <= next {
            window = i + 1;
            break;
        }
    }
    let window_end = grid[window - 1].0;

    let pick = |value: fn(&SqueezingReport) -> f64| -> Result<ParameterMinimum> {
        let (idx, _) = grid[..window]
            .iter()
            .enumerate()
            .filter_map(|(i, (_, r))| r.as_ref().map(|r| (i, value(r))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or(Error::MeanSpinCollapsed(0.0))?;
        let lo = if idx == 0 { step * 1e-3 } else { grid[idx - 1].0 };
        let hi = grid[(idx + 1).min(window - 1)].0;
        let objective = |t: f64| report_at(t).map_or(f64::INFINITY, |r| value(&r));
        let (t_best, _) = golden_section_min(objective, lo, hi, tol);
        // keep the grid point if refinement ran into a collapse
        let (alpha_t, report) = match report_at(t_best) {
            Some(r) if value(&r) <= value(grid[idx].1.as_ref().expect("present")) => (t_best, r),
            _ => (grid[idx].0, grid[idx].1.clone().expect("present")),
        };
        Ok(ParameterMinimum {
            alpha_t,
            value: value(&report),
            report,
        })
    };

    Ok(TwistingOptimum {
        f,
        chi2: pick(|r| r.chi2)?,
        zeta2: pick(|r| r.zeta2)?,
        xi2: pick(|r| r.xi2)?,
        window_end,
        scan_step: step,
        refine_tolerance: tol,
    })
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Husimi Q function `Q(theta, phi) = <CSS(theta, phi)| rho |CSS(theta, phi)>`
/// on an equiangular grid: `theta_i = (i + 1/2) pi / n_theta`,
/// `phi_j = 2 pi j / n_phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub f: SpinQuantumNumber,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major `[theta][phi]`.
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * PI / self.n_theta as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j]
    }

    /// `(2F+1)/(4 pi) * sum Q sin(theta) dtheta dphi`; 1 for a normalized state.
    pub fn normalization(&self) -> f64 {
        let dtheta = PI / self.n_theta as f64;
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut sum = 0.0;
        for i in 0..self.n_theta {
            let w = self.theta(i).sin() * dtheta * dphi;
            for j in 0..self.n_phi {
                sum += w * self.value(i, j);
            }
        }
        sum * self.f.dim() as f64 / (4.0 * PI)
    }

    /// Grid indices of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (k / self.n_phi, k % self.n_phi)
    }

    /// Writes `theta,phi,value` rows (angles in radians).
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "theta_rad,phi_rad,q")?;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                writeln!(out, "{:.17e},{:.17e},{:.17e}", self.theta(i), self.phi(j), self.value(i, j))?;
            }
        }
        Ok(())
    }
}

/// Amplitudes `<m|CSS(theta, phi)>` in closed form,
/// `sqrt(C(2F, F+m)) cos(theta/2)^(F+m) sin(theta/2)^(F-m) e^(-i m phi)`.
fn css_amplitudes(f: SpinQuantumNumber, theta: f64, phi: f64, binom: &[f64]) -> Vec<num_complex::Complex64> {
    let two_f = f.two_f() as i32;
    let (cos_h, sin_h) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    f.m_values()
        .enumerate()
        .map(|(row, m)| {
            let up = two_f - row as i32;
            let mag = binom[row].sqrt() * cos_h.powi(up) * sin_h.powi(two_f - up);
            num_complex::Complex64::from_polar(mag, -m * phi)
        })
        .collect()
}

pub fn husimi(state: &QuantumState, n_theta: usize, n_phi: usize) -> Result<HusimiGrid> {
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::InvalidParameter("Husimi grid needs at least 1x1 points".into()));
    }
    let f = SpinQuantumNumber::from_dim(state.dim())?;
    let two_f = f.two_f() as usize;
    // binom[row] = C(2F, F + m) with row 0 = m = +F
    let binom: Vec<f64> = (0..=two_f)
        .map(|row| {
            let k = two_f - row;
            (0..k).fold(1.0, |acc, i| acc * (two_f - i) as f64 / (i + 1) as f64)
        })
        .collect();
    let rho = state.rho();
    let d = state.dim();
    let mut grid = HusimiGrid {
        f,
        n_theta,
        n_phi,
        values: vec![0.0; n_theta * n_phi],
    };
    for i in 0..n_theta {
        let theta = grid.theta(i);
        for j in 0..n_phi {
            let psi = css_amplitudes(f, theta, grid.phi(j), &binom);
            let mut q = num_complex::Complex64::new(0.0, 0.0);
            for a in 0..d {
                for b in 0..d {
                    q += psi[a].conj() * rho[(a, b)] * psi[b];
                }
            }
            grid.values[i * n_phi + j] = q.re.clamp(0.0, 1.0);
        }
    }
    Ok(grid)
}
