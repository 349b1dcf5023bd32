//! Faraday-probe measurement model.
//!
//! The probe maps the two transverse spin components onto the cosine and
//! sine Larmor components of the polarization homodyne signal. In vacuum
//! units each output quadrature is
//!
//! ```text
//! y = l + sqrt(kappa2 / 2) x_atom + sqrt(kappa2^2 / 12) b
//! ```
//!
//! with `l`, `b` independent vacuum-noise light modes (variance 1/2), giving
//! `Var(y) = 1/2 + kappa2/2 Var(x_atom) + kappa2^2/24`. Demodulation is taken
//! as already performed; a record holds one `(y_c, y_s)` pair per shot.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{self, QuantumState, SpinOperators};
use crate::squeezing::{optimal_quadrature_angle, transverse_axes};
use crate::stats;

/// Quadrature variance of light in its vacuum state.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Thermal-state atomic noise per quadrature, normalized to the mean spin of
/// a fully pumped F = 4 ensemble. All 16 Cs ground sublevels are equally
/// populated; only the 9 F = 4 sublevels couple to the probe, contributing
/// `(9/16) F(F+1)/3 = 15/4` per atom, divided by `F = 4`.
pub const THERMAL_NOISE_FACTOR: f64 = 15.0 / 16.0;

/// First and second moments of the canonical variables
/// `x = F_y' / sqrt(J_ref)`, `p = F_z' / sqrt(J_ref)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl CanonicalMoments {
    pub fn new(mean_x: f64, mean_p: f64, var_x: f64, var_p: f64, cov_xp: f64) -> Result<Self> {
        if !(var_x > 0.0 && var_p > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "canonical variances must be positive (var_x = {var_x}, var_p = {var_p})"
            )));
        }
        if ![mean_x, mean_p, cov_xp].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite canonical moment".into()));
        }
        Ok(Self {
            mean_x,
            mean_p,
            var_x,
            var_p,
            cov_xp,
        })
    }

    /// Oscillator ground state.
    pub fn vacuum() -> Self {
        Self {
            mean_x: 0.0,
            mean_p: 0.0,
            var_x: 0.5,
            var_p: 0.5,
            cov_xp: 0.0,
        }
    }

    pub fn thermal(mean_occupation: f64) -> Result<Self> {
        let v = mean_occupation + 0.5;
        Self::new(0.0, 0.0, v, v, 0.0)
    }

    /// Minimum-uncertainty squeezed vacuum with `var_p` along p.
    pub fn squeezed_vacuum(var_p: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.25 / var_p, var_p, 0.0)
    }

    pub fn determinant(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    /// `det >= 1/4 - tol`
    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.determinant() >= 0.25 - tol
    }

    /// Rotates the quadrature frame so the new `p` is `cos(a) x + sin(a) p`
    /// and the new `x` is `sin(a) x - cos(a) p`; `[x, p] = i` is preserved.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let a = [s, -c];
        let b = [c, s];
        let cov = [[self.var_x, self.cov_xp], [self.cov_xp, self.var_p]];
        let quad = |u: [f64; 2], v: [f64; 2]| {
            u[0] * (cov[0][0] * v[0] + cov[0][1] * v[1]) + u[1] * (cov[1][0] * v[0] + cov[1][1] * v[1])
        };
        Self {
            mean_x: a[0] * self.mean_x + a[1] * self.mean_p,
            mean_p: b[0] * self.mean_x + b[1] * self.mean_p,
            var_x: quad(a, a),
            var_p: quad(b, b),
            cov_xp: quad(a, b),
        }
    }

    /// Frame in which `p` is the minimum-variance quadrature.
    pub fn aligned_to_squeezing(&self) -> Self {
        let angle = optimal_quadrature_angle(&[[self.var_x, self.cov_xp], [self.cov_xp, self.var_p]]);
        self.rotated(angle)
    }
}

/// Canonical moments of `state` in the frame transverse to its mean spin,
/// normalized by the reference mean spin `pump_jx` (per atom). The atom
/// number cancels: `Var(J)/J_x = N Var(F) / (N pump_jx)`.
pub fn canonical_moments(
    state: &QuantumState,
    ops: &SpinOperators,
    pump_jx: f64,
) -> Result<CanonicalMoments> {
    if !(pump_jx > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference mean spin must be > 0, got {pump_jx}"
        )));
    }
    let mean = spin::mean_spin(state, ops)?;
    let n = spin::unit_vector(mean).ok_or(Error::MeanSpinCollapsed(0.0))?;
    let [ey, ez] = transverse_axes(n);
    let fy = ops.along(ey);
    let fz = ops.along(ez);
    let scale = 1.0 / pump_jx.sqrt();
    CanonicalMoments::new(
        state.expectation(&fy) * scale,
        state.expectation(&fz) * scale,
        spin::covariance(state, &fy, &fy)? / pump_jx,
        spin::covariance(state, &fz, &fz)? / pump_jx,
        spin::covariance(state, &fy, &fz)? / pump_jx,
    )
}

fn check_kappa2(kappa2: f64) -> Result<()> {
    if !(kappa2 >= 0.0) || !kappa2.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa2 must be finite and >= 0, got {kappa2}")));
    }
    Ok(())
}

/// Light noise plus back-action variance in each output quadrature.
pub fn probe_noise_variance(kappa2: f64) -> f64 {
    VACUUM_VARIANCE + kappa2 * kappa2 / 12.0 * VACUUM_VARIANCE
}

/// Output variances `(Var y_c, Var y_s)` for atoms in `moments`.
pub fn output_variance(moments: &CanonicalMoments, kappa2: f64) -> Result<(f64, f64)> {
    check_kappa2(kappa2)?;
    let noise = probe_noise_variance(kappa2);
    Ok((
        noise + kappa2 / 2.0 * moments.var_x,
        noise + kappa2 / 2.0 * moments.var_p,
    ))
}

/// Scaled homodyne outcomes for repeated preparations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// `(y_c, y_s)` per shot.
    pub shots: Vec<[f64; 2]>,
    pub kappa2: f64,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn new(shots: Vec<[f64; 2]>, kappa2: f64, seed: u64) -> Result<Self> {
        check_kappa2(kappa2)?;
        Ok(Self { shots, kappa2, seed })
    }

    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.shots.iter().map(|s| s[k]).collect()
    }

    /// Multiplies every outcome by `factor` (detector gain).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shots: self.shots.iter().map(|s| [s[0] * factor, s[1] * factor]).collect(),
            kappa2: self.kappa2,
            seed: self.seed,
        }
    }

    /// CSV with `#`-prefixed metadata, one `y_c,y_s` row per shot. Values
    /// carry 17 significant digits so reading back is bit-exact.
    pub fn write_csv(&self, mut out: impl Write, extra_header: &[(String, String)]) -> std::io::Result<()> {
        writeln!(out, "# kappa2={:.16e}", self.kappa2)?;
        writeln!(out, "# n_shots={}", self.n_shots())?;
        writeln!(out, "# seed={}", self.seed)?;
        for (k, v) in extra_header {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "y_c_vac,y_s_vac")?;
        for s in &self.shots {
            writeln!(out, "{:.16e},{:.16e}", s[0], s[1])?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut kappa2 = None;
        let mut n_shots = None;
        let mut seed = 0u64;
        let mut shots = Vec::new();
        let mut saw_header = false;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let v = v.trim();
                    match k.trim() {
                        "kappa2" => kappa2 = Some(v.parse::<f64>().map_err(|e| parse_err(e.to_string()))?),
                        "n_shots" => n_shots = Some(v.parse::<usize>().map_err(|e| parse_err(e.to_string()))?),
                        "seed" => seed = v.parse::<u64>().map_err(|e| parse_err(e.to_string()))?,
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                if trimmed.starts_with("y_c") {
                    continue;
                }
            }
            let (a, b) = trimmed
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected two columns, got {trimmed:?}")))?;
            let yc = a.trim().parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            let ys = b.trim().parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            shots.push([yc, ys]);
        }
        let kappa2 = kappa2.ok_or(Error::Parse {
            line: 0,
            message: "missing '# kappa2=' header".into(),
        })?;
        if let Some(n) = n_shots {
            if n != shots.len() {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("header says {n} shots, found {}", shots.len()),
                });
            }
        }
        Self::new(shots, kappa2, seed)
    }
}

/// Independent stream per shot so records can be generated in parallel and
/// stay bit-identical for a given seed.
fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cholesky factor `[l11, l21, l22]` of the atomic covariance.
fn cholesky2(m: &CanonicalMoments) -> Result<[f64; 3]> {
    let l11 = m.var_x.sqrt();
    let l21 = m.cov_xp / l11;
    let rem = m.var_p - l21 * l21;
    if !(rem > 0.0) {
        return Err(Error::InvalidParameter(
            "atomic covariance is not positive definite".into(),
        ));
    }
    Ok([l11, l21, rem.sqrt()])
}

fn synthesize(
    moments: &CanonicalMoments,
    kappa2: f64,
    back_action: bool,
    n_shots: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    check_kappa2(kappa2)?;
    if n_shots == 0 {
        return Err(Error::InvalidParameter("n_shots must be >= 1".into()));
    }
    let [l11, l21, l22] = cholesky2(moments)?;
    let gain = (kappa2 / 2.0).sqrt();
    let ba = if back_action { (kappa2 * kappa2 / 12.0).sqrt() } else { 0.0 };
    let vac = VACUUM_VARIANCE.sqrt();
    let m = *moments;
    let shots = (0..n_shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_rng(seed, i);
            let z1 = normal(&mut rng);
            let z2 = normal(&mut rng);
            let x = m.mean_x + l11 * z1;
            let p = m.mean_p + l21 * z1 + l22 * z2;
            let lc = vac * normal(&mut rng);
            let ls = vac * normal(&mut rng);
            let bc = vac * normal(&mut rng);
            let bs = vac * normal(&mut rng);
            [lc + gain * x + ba * bc, ls + gain * p + ba * bs]
        })
        .collect();
    MeasurementRecord::new(shots, kappa2, seed)
}

/// Draws `n_shots` probe outcomes with light noise and back-action.
pub fn simulate_records(
    moments: &CanonicalMoments,
    kappa2: f64,
    n_shots: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    synthesize(moments, kappa2, true, n_shots, seed)
}

/// Records from a thermal ensemble: atomic variance `thermal_factor` in both
/// quadratures and no back-action.
pub fn simulate_thermal_records(
    kappa2: f64,
    thermal_factor: f64,
    n_shots: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    let m = CanonicalMoments::new(0.0, 0.0, thermal_factor, thermal_factor, 0.0)?;
    synthesize(&m, kappa2, false, n_shots, seed)
}

/// Light-only record (atoms shifted out of the detection band).
pub fn simulate_vacuum_records(n_shots: usize, seed: u64) -> Result<MeasurementRecord> {
    synthesize(&CanonicalMoments::vacuum(), 0.0, false, n_shots, seed)
}

/// Scale that brings the light-only record to vacuum variance 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacuumCalibration {
    /// Amplitude factor applied to raw outcomes.
    pub scale: f64,
}

impl VacuumCalibration {
    pub fn apply(&self, record: &MeasurementRecord) -> MeasurementRecord {
        record.scaled(self.scale)
    }
}

pub fn vacuum_calibration(record_no_atoms: &MeasurementRecord) -> Result<VacuumCalibration> {
    if record_no_atoms.n_shots() < 2 {
        return Err(Error::InvalidParameter("vacuum calibration needs >= 2 shots".into()));
    }
    let var = stats::pooled_variance(&record_no_atoms.column(0), &record_no_atoms.column(1));
    if !(var > 0.0) {
        return Err(Error::ZeroVacuumVariance);
    }
    Ok(VacuumCalibration {
        scale: (VACUUM_VARIANCE / var).sqrt(),
    })
}

/// Coupling strength from a vacuum-normalized thermal record:
/// `kappa2 = (Var y - 1/2) / (factor / 2)`, with `factor = (15/16) / pump_fraction_reference`
/// when the mean-spin reference ensemble is pumped to that fraction.
pub fn thermal_calibration(record_thermal: &MeasurementRecord, pump_fraction_reference: f64) -> Result<f64> {
    if !(pump_fraction_reference > 0.0 && pump_fraction_reference <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pump fraction must be in (0, 1], got {pump_fraction_reference}"
        )));
    }
    if record_thermal.n_shots() < 2 {
        return Err(Error::InvalidParameter("thermal calibration needs >= 2 shots".into()));
    }
    let var = stats::pooled_variance(&record_thermal.column(0), &record_thermal.column(1));
    if var <= VACUUM_VARIANCE {
        return Err(Error::NoAtomicNoise { sample_var: var });
    }
    let factor = THERMAL_NOISE_FACTOR / pump_fraction_reference;
    Ok((var - VACUUM_VARIANCE) / (factor / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{css_x, SpinQuantumNumber};

    #[test]
    fn css_maps_to_oscillator_vacuum() {
        let f = SpinQuantumNumber::from_two_f(8);
        let ops = SpinOperators::new(f);
        let m = canonical_moments(&css_x(f), &ops, 4.0).unwrap();
        assert!(m.mean_x.abs() < 1e-12 && m.mean_p.abs() < 1e-12);
        assert!((m.var_x - 0.5).abs() < 1e-12 && (m.var_p - 0.5).abs() < 1e-12);
        assert!(m.cov_xp.abs() < 1e-12);
        assert!(canonical_moments(&css_x(f), &ops, 0.0).is_err());
    }

    #[test]
    fn three_db_squeezing() {
        let m = CanonicalMoments::squeezed_vacuum(0.25).unwrap();
        assert_eq!(m.var_p, 0.25);
        assert!(m.var_x >= 0.5);
        assert!(m.satisfies_uncertainty(1e-12));
    }

    #[test]
    fn output_variance_budget() {
        let (c0, s0) = output_variance(&CanonicalMoments::vacuum(), 0.0).unwrap();
        assert_eq!((c0, s0), (0.5, 0.5));
        let (c, s) = output_variance(&CanonicalMoments::vacuum(), 0.8).unwrap();
        let expected = 0.5 + 0.4 * 0.5 + 0.64 / 12.0 * 0.5;
        assert!((c - expected).abs() < 1e-15 && (s - expected).abs() < 1e-15);
        assert!((c - 0.726_666_666_666_666_7).abs() < 1e-12);
        let sq = CanonicalMoments::squeezed_vacuum(0.25).unwrap();
        let (_, s) = output_variance(&sq, 0.8).unwrap();
        assert!((s - (0.5 + 0.1 + 0.64 / 24.0)).abs() < 1e-15);
        assert!((s - 0.626_666_666_666_666_7).abs() < 1e-12);
        assert!(output_variance(&sq, -0.1).is_err());
    }

    #[test]
    fn output_variance_increases_with_coupling() {
        let m = CanonicalMoments::squeezed_vacuum(0.2).unwrap();
        let mut last = 0.0;
        for k in 0..50 {
            let (c, _) = output_variance(&m, k as f64 * 0.05).unwrap();
            assert!(c > last || k == 0);
            last = c;
        }
    }

    #[test]
    fn rotation_keeps_determinant_and_aligns_squeezing() {
        let m = CanonicalMoments::new(0.1, -0.2, 1.3, 0.7, 0.4).unwrap();
        for a in [0.0, 0.3, -1.2, 2.0] {
            let r = m.rotated(a);
            assert!((r.determinant() - m.determinant()).abs() < 1e-12);
            assert!((r.var_x + r.var_p - m.var_x - m.var_p).abs() < 1e-12);
        }
        let aligned = m.aligned_to_squeezing();
        let (min, _) = crate::squeezing::principal_variances(&[[1.3, 0.4], [0.4, 0.7]]);
        assert!((aligned.var_p - min).abs() < 1e-12);
        assert!(aligned.cov_xp.abs() < 1e-12);
    }

    #[test]
    fn seeded_records_are_reproducible() {
        let m = CanonicalMoments::squeezed_vacuum(0.3).unwrap();
        let a = simulate_records(&m, 0.8, 500, 17).unwrap();
        let b = simulate_records(&m, 0.8, 500, 17).unwrap();
        let c = simulate_records(&m, 0.8, 500, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a
            .shots
            .iter()
            .zip(&b.shots)
            .all(|(x, y)| x[0].to_bits() == y[0].to_bits() && x[1].to_bits() == y[1].to_bits()));
    }

    #[test]
    fn no_coupling_gives_shot_noise() {
        let m = CanonicalMoments::squeezed_vacuum(0.3).unwrap();
        let n = 100_000;
        let r = simulate_records(&m, 0.0, n, 3).unwrap();
        let v = stats::variance(&r.column(0));
        let sigma = 0.5 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((v - 0.5).abs() < 3.0 * sigma, "{v}");
    }

    #[test]
    fn css_records_match_closed_form() {
        let n = 10_000;
        let r = simulate_records(&CanonicalMoments::vacuum(), 0.8, n, 11).unwrap();
        let (expected, _) = output_variance(&CanonicalMoments::vacuum(), 0.8).unwrap();
        // 99% band of the scaled chi-square distribution, normal approximation
        let half_width = 2.576 * expected * (2.0 / (n as f64 - 1.0)).sqrt();
        for k in 0..2 {
            let v = stats::variance(&r.column(k));
            assert!((v - expected).abs() < half_width, "quadrature {k}: {v}");
        }
    }

    #[test]
    fn displaced_mean_is_transferred_linearly() {
        let m = CanonicalMoments::new(1.0, 0.0, 0.5, 0.5, 0.0).unwrap();
        let n = 100_000;
        let r = simulate_records(&m, 0.8, n, 5).unwrap();
        let mean = stats::mean(&r.column(0));
        let (var, _) = output_variance(&m, 0.8).unwrap();
        assert!((mean - 0.4f64.sqrt()).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn thermal_factor_from_sixteen_level_mixture() {
        // Uniform mixture over the 7 F=3 and 9 F=4 sublevels. The probe sees
        // only F=4, so its Fz is embedded with zeros on the F=3 block.
        let f4 = SpinOperators::new(SpinQuantumNumber::from_two_f(8));
        let weight = 1.0 / 16.0;
        let second_moment: f64 = (0..9).map(|i| weight * f4.fz[(i, i)].re.powi(2)).sum();
        let first_moment: f64 = (0..9).map(|i| weight * f4.fz[(i, i)].re).sum();
        let per_atom = second_moment - first_moment * first_moment;
        assert!((per_atom - 15.0 / 4.0).abs() < 1e-14);
        // canonical normalization: divide by the fully pumped <Fx> = F = 4
        assert!((per_atom / 4.0 - THERMAL_NOISE_FACTOR).abs() < 1e-15);
    }

    #[test]
    fn thermal_calibration_round_trip() {
        let n = 200_000;
        let r = simulate_thermal_records(0.8, THERMAL_NOISE_FACTOR, n, 21).unwrap();
        let k = thermal_calibration(&r, 1.0).unwrap();
        // Var(kappa2 estimate) from pooled variance over 2n samples
        let total = 0.5 + 0.4 * THERMAL_NOISE_FACTOR;
        let sigma = total * (2.0 / (2.0 * n as f64)).sqrt() / (THERMAL_NOISE_FACTOR / 2.0);
        assert!((k - 0.8).abs() < 4.0 * sigma, "{k}");
    }

    #[test]
    fn thermal_calibration_rejects_light_only_noise() {
        let r = MeasurementRecord::new(vec![[0.5, 0.5], [-0.5, -0.5]], 0.8, 0).unwrap();
        assert!(matches!(
            thermal_calibration(&r, 1.0),
            Err(Error::NoAtomicNoise { .. })
        ));
    }

    #[test]
    fn vacuum_calibration_cases() {
        // raw variance 2.0 -> amplitude scale 1/2
        let r = MeasurementRecord::new(vec![[1.0, 1.0], [-1.0, -1.0]], 0.0, 0).unwrap();
        assert!((stats::variance(&r.column(0)) - 2.0).abs() < 1e-15);
        let cal = vacuum_calibration(&r).unwrap();
        assert!((cal.scale - 0.5).abs() < 1e-15);
        let scaled = cal.apply(&r);
        assert!((stats::variance(&scaled.column(0)) - 0.5).abs() < 1e-15);

        let flat = MeasurementRecord::new(vec![[1.0, 1.0]; 4], 0.0, 0).unwrap();
        assert!(matches!(vacuum_calibration(&flat), Err(Error::ZeroVacuumVariance)));
    }

    #[test]
    fn calibration_pipeline_recovers_kappa2() {
        let gain = 37.5;
        let n = 200_000;
        let raw_vacuum = simulate_vacuum_records(n, 1).unwrap().scaled(gain);
        let raw_thermal = simulate_thermal_records(0.8, THERMAL_NOISE_FACTOR, n, 2).unwrap().scaled(gain);
        let cal = vacuum_calibration(&raw_vacuum).unwrap();
        let k = thermal_calibration(&cal.apply(&raw_thermal), 1.0).unwrap();
        assert!((k - 0.8).abs() < 0.02, "{k}");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = CanonicalMoments::squeezed_vacuum(0.3).unwrap();
        let r = simulate_records(&m, 0.8, 257, 99).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &[("config_sha256".into(), "abc".into())]).unwrap();
        let back = MeasurementRecord::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.kappa2.to_bits(), r.kappa2.to_bits());
        assert_eq!(back.seed, 99);
        assert_eq!(back.shots.len(), r.shots.len());
        for (a, b) in back.shots.iter().zip(&r.shots) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(MeasurementRecord::read_csv("y_c_vac,y_s_vac\n1,2\n".as_bytes()).is_err());
        assert!(MeasurementRecord::read_csv("# kappa2=0.8\ny_c_vac,y_s_vac\n1;2\n".as_bytes()).is_err());
        assert!(MeasurementRecord::read_csv("# kappa2=0.8\n# n_shots=3\ny_c_vac,y_s_vac\n1,2\n".as_bytes()).is_err());
    }
}
