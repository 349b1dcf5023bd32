//! End-to-end pipeline: pumped initial state, compensated twisting with
//! decay over a sweep of Raman durations, probe records and reconstruction.
//!
//! Times are in ms and rates in rad/ms (or 1/ms), so `2 pi x 322 kHz` is
//! `2 pi x 322 rad/ms`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{self, raman_light_shift, zeeman_rotating, DecayChannels, Hamiltonian, LindbladPropagator};
use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::probe::{canonical_moments, simulate_records, CanonicalMoments, MeasurementRecord};
use crate::spin::{css_x, QuantumState, SpinOperators, SpinQuantumNumber};
use crate::squeezing::{squeezing_report_with, SqueezingReport};
use crate::tomography::{correct_covariance, mle_reconstruct, CorrectedCovariance, MleOptions, MleReconstruction};

/// Default twisting rate (rad/ms). Together with [`DEFAULT_EXTRA_SCATTER_RATE`]
/// this puts the decayed sweep minimum of zeta^2 near 0.5 around 1 ms.
pub const DEFAULT_TWISTING_RATE: f64 = 0.12;
/// Light-induced scattering on top of T1 (1/ms).
pub const DEFAULT_EXTRA_SCATTER_RATE: f64 = 0.005;
/// Relative change of the final zeta^2 accepted when halving the step.
pub const STEP_REFINE_TOLERANCE: f64 = 1e-7;
const MAX_STEP_HALVINGS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub f: SpinQuantumNumber,
    pub n_atoms: f64,
    /// Larmor frequency (rad/ms). Sets the rotating frame; not a dynamical input.
    pub omega_l: f64,
    /// Quadratic Zeeman coefficient (rad/ms).
    pub beta: f64,
    /// Coefficient of `Fz^2 - Fy^2` produced by the Raman light; the tensor
    /// light shift is `a2 = -16 twisting_rate`. Exact compensation is
    /// `beta = 2 twisting_rate`.
    pub twisting_rate: f64,
    pub decay: bool,
    pub t1: f64,
    pub t2: f64,
    pub extra_scatter_rate: f64,
    pub pump_fraction: f64,
    pub raman_durations: Vec<f64>,
    pub kappa2: f64,
    pub n_shots: usize,
    pub seed: u64,
    /// Initial RK4 step (ms); refined by halving.
    pub dt: f64,
    /// Recorded only.
    pub raman_detuning_mhz: f64,
    pub raman_frequency_khz: f64,
    pub probe_detuning_mhz: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            f: SpinQuantumNumber::from_two_f(8),
            n_atoms: 1e12,
            omega_l: 2.0 * PI * 322.0,
            beta: 2.0 * DEFAULT_TWISTING_RATE,
            twisting_rate: DEFAULT_TWISTING_RATE,
            decay: true,
            t1: 80.0,
            t2: 20.0,
            extra_scatter_rate: DEFAULT_EXTRA_SCATTER_RATE,
            pump_fraction: 0.98,
            raman_durations: (0..=24).map(|k| k as f64 * 0.25).collect(),
            kappa2: 0.8,
            n_shots: 10_000,
            seed: 1,
            dt: dynamics::DEFAULT_DT,
            raman_detuning_mhz: -550.0,
            raman_frequency_khz: 644.2,
            probe_detuning_mhz: 825.0,
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{key}: expected a number, got '{v}'"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("{key}: expected on/off, got '{v}'"),
        }),
    }
}

/// Either a comma-separated list or an inclusive `start:stop:step` range.
fn parse_durations(line: usize, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let start = parse_f64(line, "raman_durations", parts[0])?;
        let stop = parse_f64(line, "raman_durations", parts[1])?;
        let step = parse_f64(line, "raman_durations", parts[2])?;
        if !(step > 0.0) || stop < start {
            return Err(Error::Parse {
                line,
                message: format!("raman_durations: bad range '{v}'"),
            });
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    if parts.len() != 1 {
        return Err(Error::Parse {
            line,
            message: format!("raman_durations: expected list or start:stop:step, got '{v}'"),
        });
    }
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(line, "raman_durations", s))
        .collect()
}

impl ExperimentConfig {
    /// Parses flat `key = value` lines; `#` starts a comment. Unknown keys
    /// are rejected. Keys not given keep their defaults, except that giving
    /// only one of `beta`, `twisting_rate` sets the other for exact compensation.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key = value, got '{content}'"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), line).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
            match key {
                "f" => {
                    cfg.f = v.parse().map_err(|e: Error| Error::Parse {
                        line,
                        message: format!("f: {e}"),
                    })?
                }
                "n_atoms" => cfg.n_atoms = parse_f64(line, key, v)?,
                "omega_l" => cfg.omega_l = parse_f64(line, key, v)?,
                "beta" => cfg.beta = parse_f64(line, key, v)?,
                "twisting_rate" => cfg.twisting_rate = parse_f64(line, key, v)?,
                "decay" => cfg.decay = parse_bool(line, key, v)?,
                "t1" => cfg.t1 = parse_f64(line, key, v)?,
                "t2" => cfg.t2 = parse_f64(line, key, v)?,
                "extra_scatter_rate" => cfg.extra_scatter_rate = parse_f64(line, key, v)?,
                "pump_fraction" => cfg.pump_fraction = parse_f64(line, key, v)?,
                "raman_durations" => cfg.raman_durations = parse_durations(line, v)?,
                "kappa2" => cfg.kappa2 = parse_f64(line, key, v)?,
                "n_shots" => {
                    cfg.n_shots = v.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("n_shots: expected a non-negative integer, got '{v}'"),
                    })?
                }
                "seed" => {
                    cfg.seed = v.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("seed: expected a non-negative integer, got '{v}'"),
                    })?
                }
                "dt" => cfg.dt = parse_f64(line, key, v)?,
                "raman_detuning_mhz" => cfg.raman_detuning_mhz = parse_f64(line, key, v)?,
                "raman_frequency_khz" => cfg.raman_frequency_khz = parse_f64(line, key, v)?,
                "probe_detuning_mhz" => cfg.probe_detuning_mhz = parse_f64(line, key, v)?,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        match (seen.contains_key("beta"), seen.contains_key("twisting_rate")) {
            (true, false) => cfg.twisting_rate = cfg.beta / 2.0,
            (false, true) => cfg.beta = 2.0 * cfg.twisting_rate,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.f.two_f() < 1 {
            return bad("f must be >= 1/2".into());
        }
        for (name, v) in [("t1", self.t1), ("t2", self.t2), ("dt", self.dt), ("n_atoms", self.n_atoms)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        for (name, v) in [
            ("beta", self.beta),
            ("twisting_rate", self.twisting_rate),
            ("omega_l", self.omega_l),
            ("kappa2", self.kappa2),
            ("extra_scatter_rate", self.extra_scatter_rate),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if !(self.pump_fraction > 0.0 && self.pump_fraction <= 1.0) {
            return bad(format!("pump_fraction must be in (0, 1], got {}", self.pump_fraction));
        }
        if !(self.kappa2 > 0.0) {
            return bad(format!("kappa2 must be > 0, got {}", self.kappa2));
        }
        if self.n_shots < 2 {
            return bad(format!("n_shots must be >= 2, got {}", self.n_shots));
        }
        if self.raman_durations.is_empty() {
            return bad("raman_durations is empty".into());
        }
        if self.raman_durations.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return bad("raman_durations must be finite and >= 0".into());
        }
        if self.raman_durations.windows(2).any(|w| w[1] < w[0]) {
            return bad("raman_durations must be sorted".into());
        }
        if self.decay {
            DecayChannels::new(self.t1, self.t2, self.extra_scatter_rate)?;
        }
        Ok(())
    }

    /// Canonical `key = value` text; [`parse`](Self::parse) reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let durations: Vec<String> = self.raman_durations.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "f = {}", self.f);
        let _ = writeln!(s, "n_atoms = {:?}", self.n_atoms);
        let _ = writeln!(s, "omega_l = {:?}", self.omega_l);
        let _ = writeln!(s, "beta = {:?}", self.beta);
        let _ = writeln!(s, "twisting_rate = {:?}", self.twisting_rate);
        let _ = writeln!(s, "decay = {}", if self.decay { "on" } else { "off" });
        let _ = writeln!(s, "t1 = {:?}", self.t1);
        let _ = writeln!(s, "t2 = {:?}", self.t2);
        let _ = writeln!(s, "extra_scatter_rate = {:?}", self.extra_scatter_rate);
        let _ = writeln!(s, "pump_fraction = {:?}", self.pump_fraction);
        let _ = writeln!(s, "raman_durations = {}", durations.join(", "));
        let _ = writeln!(s, "kappa2 = {:?}", self.kappa2);
        let _ = writeln!(s, "n_shots = {}", self.n_shots);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "dt = {:?}", self.dt);
        let _ = writeln!(s, "raman_detuning_mhz = {:?}", self.raman_detuning_mhz);
        let _ = writeln!(s, "raman_frequency_khz = {:?}", self.raman_frequency_khz);
        let _ = writeln!(s, "probe_detuning_mhz = {:?}", self.probe_detuning_mhz);
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn decay_channels(&self) -> Result<DecayChannels> {
        if self.decay {
            DecayChannels::new(self.t1, self.t2, self.extra_scatter_rate)
        } else {
            Ok(DecayChannels::none())
        }
    }

    pub fn spin_operators(&self) -> SpinOperators {
        SpinOperators::new(self.f)
    }

    /// Rotating-frame Hamiltonian of the Raman light (`a2 = -16 twisting_rate`)
    /// plus the quadratic Zeeman shift, with its trace removed.
    pub fn hamiltonian(&self) -> Hamiltonian {
        let ops = self.spin_operators();
        let sum = raman_light_shift(&ops, 0.0, -16.0 * self.twisting_rate)
            .plus(&zeeman_rotating(&ops, self.beta))
            .expect("same dimension");
        let offset = linalg::trace(sum.matrix()).re / ops.dim() as f64;
        Hamiltonian::trusted(sum.matrix() - ops.identity() * c(offset), "raman + zeeman")
    }
}

/// Pumped CSS along x mixed with the maximally mixed state.
pub fn prepare_initial_state(config: &ExperimentConfig) -> Result<QuantumState> {
    let css = css_x(config.f);
    if config.pump_fraction == 1.0 {
        return Ok(css);
    }
    css.mix(&QuantumState::maximally_mixed(config.f.dim()), config.pump_fraction)
}

/// Record seed for one duration; depends only on the run seed and `t_r`.
pub fn record_seed(seed: u64, t_r: f64) -> u64 {
    let mut z = seed ^ t_r.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Raman duration (ms).
    pub t_r: f64,
    pub zeta2_true: f64,
    pub xi2_true: f64,
    pub chi2_true: f64,
    pub zeta2_reconstructed: f64,
    pub zeta2_reconstructed_err: f64,
    /// `|<F>|(t_r) / |<F>|(0)`.
    pub mean_spin_fraction: f64,
    /// Transverse variance of a CSS with the current mean spin, per atom.
    pub css_reference_variance: f64,
    /// Coupling of this point, scaled with the mean spin.
    pub kappa2: f64,
    pub record_seed: u64,
    /// Canonical moments fed to the probe, squeezed quadrature along p.
    pub moments: CanonicalMoments,
    pub corrected: CorrectedCovariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    /// RK4 step the trajectory settled on (ms).
    pub dt: f64,
    pub rows: Vec<SweepRow>,
}

/// Squeezing and probe state at one duration.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub t_r: f64,
    pub state: QuantumState,
    pub report: SqueezingReport,
    pub moments: CanonicalMoments,
    pub mean_spin_fraction: f64,
    pub kappa2: f64,
    pub record_seed: u64,
}

impl SweepPoint {
    fn new(config: &ExperimentConfig, ops: &SpinOperators, t_r: f64, state: QuantumState, initial_length: f64) -> Result<Self> {
        let report = squeezing_report_with(ops, &state, config.f.f())?;
        let length = report.mean_spin_length();
        let fraction = length / initial_length;
        // canonical normalization by the current mean spin; kappa2 scales with it
        let moments = canonical_moments(&state, ops, length)?.aligned_to_squeezing();
        Ok(Self {
            t_r,
            state,
            report,
            moments,
            mean_spin_fraction: fraction,
            kappa2: config.kappa2 * fraction,
            record_seed: record_seed(config.seed, t_r),
        })
    }

    pub fn record(&self, n_shots: usize) -> Result<MeasurementRecord> {
        simulate_records(&self.moments, self.kappa2, n_shots, self.record_seed)
    }
}

fn at(t_r: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtDuration {
        t_r,
        source: Box::new(e),
    }
}

/// Evolved states at every configured duration.
pub fn sweep_points(config: &ExperimentConfig) -> Result<(Vec<SweepPoint>, f64)> {
    config.validate()?;
    let ops = config.spin_operators();
    let initial = prepare_initial_state(config)?;
    let initial_length = squeezing_report_with(&ops, &initial, config.f.f())?.mean_spin_length();
    let prop = LindbladPropagator::new(&ops, &config.hamiltonian(), &config.decay_channels()?)?;
    let last = *config.raman_durations.last().expect("validated non-empty");
    let traj = dynamics::evolve_lindblad_refined(
        &prop,
        &initial,
        &config.raman_durations,
        config.dt,
        STEP_REFINE_TOLERANCE,
        MAX_STEP_HALVINGS,
        |s| squeezing_report_with(&ops, s, config.f.f()).map_or(f64::NAN, |r| r.zeta2),
    )
    .map_err(at(last))?;
    let points = config
        .raman_durations
        .iter()
        .zip(traj.states)
        .map(|(&t, s)| SweepPoint::new(config, &ops, t, s, initial_length).map_err(at(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok((points, traj.dt))
}

/// The sweep point at a single duration.
pub fn sweep_point(config: &ExperimentConfig, t_r: f64) -> Result<SweepPoint> {
    let single = ExperimentConfig {
        raman_durations: vec![t_r],
        ..config.clone()
    };
    Ok(sweep_points(&single)?.0.remove(0))
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let (points, dt) = sweep_points(config)?;
    let rows = points
        .par_iter()
        .map(|p| {
            let record = p.record(config.n_shots).map_err(at(p.t_r))?;
            let corrected = correct_covariance(&record).map_err(at(p.t_r))?;
            Ok(SweepRow {
                t_r: p.t_r,
                zeta2_true: p.report.zeta2,
                xi2_true: p.report.xi2,
                chi2_true: p.report.chi2,
                zeta2_reconstructed: 2.0 * corrected.var_p,
                zeta2_reconstructed_err: 2.0 * corrected.var_p_error(),
                mean_spin_fraction: p.mean_spin_fraction,
                css_reference_variance: p.report.css_reference_variance(),
                kappa2: p.kappa2,
                record_seed: p.record_seed,
                moments: p.moments,
                corrected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        config_hash: config.hash(),
        dt,
        rows,
    })
}

impl SweepResult {
    pub const CSV_HEADER: &'static str = "t_r_ms,zeta2_true,xi2_true,chi2_true,zeta2_reconstructed,\
        zeta2_reconstructed_err,mean_spin_fraction,css_reference_variance_per_atom";

    pub fn min_zeta2_true(&self) -> Option<&SweepRow> {
        self.rows.iter().min_by(|a, b| a.zeta2_true.total_cmp(&b.zeta2_true))
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# config_sha256={}", self.config_hash)?;
        writeln!(out, "# dt_ms={:e}", self.dt)?;
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.6},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.t_r,
                r.zeta2_true,
                r.xi2_true,
                r.chi2_true,
                r.zeta2_reconstructed,
                r.zeta2_reconstructed_err,
                r.mean_spin_fraction,
                r.css_reference_variance
            )?;
        }
        Ok(())
    }

    /// Same columns as the CSV, one object per row.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "t_r_ms": r.t_r,
                    "zeta2_true": r.zeta2_true,
                    "xi2_true": r.xi2_true,
                    "chi2_true": r.chi2_true,
                    "zeta2_reconstructed": r.zeta2_reconstructed,
                    "zeta2_reconstructed_err": r.zeta2_reconstructed_err,
                    "mean_spin_fraction": r.mean_spin_fraction,
                    "css_reference_variance_per_atom": r.css_reference_variance,
                })
            })
            .collect();
        serde_json::json!({
            "config_sha256": self.config_hash,
            "dt_ms": self.dt,
            "rows": rows,
        })
    }
}

/// MLE reconstruction of every sweep point, regenerating each record from its seed.
pub fn reconstruct_sweep(
    sweep: &SweepResult,
    config: &ExperimentConfig,
    opts: &MleOptions,
) -> Result<Vec<MleReconstruction>> {
    sweep
        .rows
        .par_iter()
        .map(|row| {
            let record = simulate_records(&row.moments, row.kappa2, config.n_shots, row.record_seed)
                .map_err(at(row.t_r))?;
            mle_reconstruct(&record, opts).map_err(at(row.t_r))
        })
        .collect()
}
