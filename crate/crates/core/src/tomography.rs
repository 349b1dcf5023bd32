//! State reconstruction from probe records.
//!
//! Two routes: a Gaussian one that inverts the probe noise budget to get the
//! atomic covariance directly, and iterative maximum-likelihood estimation of
//! the density matrix in a truncated Fock basis of `b = (x + i p)/sqrt(2)`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::probe::{probe_noise_variance, CanonicalMoments, MeasurementRecord};
use crate::stats;

/// Atomic covariance recovered from a record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedCovariance {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub n_shots: usize,
    /// Relative 1-sigma error of a Gaussian sample variance, `sqrt(2/(n-1))`.
    pub statistical_error: f64,
    pub kappa2: f64,
    /// Sample variances of the raw outputs `(y_c, y_s)`.
    pub total_var_c: f64,
    pub total_var_s: f64,
}

impl CorrectedCovariance {
    /// Absolute 1-sigma error of `var_x`.
    pub fn var_x_error(&self) -> f64 {
        self.statistical_error * self.total_var_c * 2.0 / self.kappa2
    }

    pub fn var_p_error(&self) -> f64 {
        self.statistical_error * self.total_var_s * 2.0 / self.kappa2
    }

    pub fn determinant(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    /// Statistical 1-sigma of the determinant, propagated from the variances.
    pub fn determinant_error(&self) -> f64 {
        ((self.var_p * self.var_x_error()).powi(2) + (self.var_x * self.var_p_error()).powi(2)).sqrt()
    }

    pub fn to_moments(&self) -> Result<CanonicalMoments> {
        CanonicalMoments::new(self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp)
    }
}

/// Inverts the probe variance budget for one quadrature:
/// `(total - 1/2 - kappa2^2/24) * 2 / kappa2`.
pub fn atomic_variance_from_output(total: f64, kappa2: f64) -> Result<f64> {
    if !(kappa2 > 0.0) {
        return Err(Error::ZeroCoupling);
    }
    Ok((total - probe_noise_variance(kappa2)) * 2.0 / kappa2)
}

pub fn correct_covariance(record: &MeasurementRecord) -> Result<CorrectedCovariance> {
    if !(record.kappa2 > 0.0) {
        return Err(Error::ZeroCoupling);
    }
    let n = record.n_shots();
    if n < 2 {
        return Err(Error::InvalidParameter("covariance correction needs >= 2 shots".into()));
    }
    let (yc, ys) = (record.column(0), record.column(1));
    let total_var_c = stats::variance(&yc);
    let total_var_s = stats::variance(&ys);
    let scale = 2.0 / record.kappa2;
    let out = CorrectedCovariance {
        mean_x: stats::mean(&yc) * scale.sqrt(),
        mean_p: stats::mean(&ys) * scale.sqrt(),
        var_x: atomic_variance_from_output(total_var_c, record.kappa2)?,
        var_p: atomic_variance_from_output(total_var_s, record.kappa2)?,
        cov_xp: stats::covariance(&yc, &ys) * scale,
        n_shots: n,
        statistical_error: (2.0 / (n as f64 - 1.0)).sqrt(),
        kappa2: record.kappa2,
        total_var_c,
        total_var_s,
    };
    for (quadrature, value, err) in [
        ("x", out.var_x, out.var_x_error()),
        ("p", out.var_p, out.var_p_error()),
    ] {
        if value < -3.0 * err {
            return Err(Error::UnphysicalCorrection {
                quadrature,
                value,
                tolerance: 3.0 * err,
            });
        }
    }
    Ok(out)
}

/// Density matrix in the Fock basis `|0>, ..., |dim-1>`.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorDensityMatrix {
    rho: CMatrix,
}

/// Highest-level population above which the truncation is not trusted.
pub const TRUNCATION_POPULATION_LIMIT: f64 = 1e-3;

impl OscillatorDensityMatrix {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if !rho.is_square() || rho.nrows() < 2 {
            return Err(Error::InvalidState("oscillator density matrix must be square, dim >= 2".into()));
        }
        let tr = linalg::trace(&rho);
        if (tr.re - 1.0).abs() > 1e-8 || linalg::hermiticity_residual(&rho) > 1e-8 {
            return Err(Error::InvalidState(format!("trace {tr} or Hermiticity out of tolerance")));
        }
        let min = linalg::eigvalsh(&rho)[0];
        if min < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self {
            rho: linalg::hermitian_part(&rho),
        })
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidParameter(format!("level {n} outside truncation {dim}")));
        }
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(n, n)] = c(1.0);
        Self::new(rho)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.rho).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.rho)
    }

    pub fn population(&self, n: usize) -> f64 {
        self.rho[(n, n)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.population(n)).collect()
    }

    pub fn truncation_valid(&self) -> bool {
        self.population(self.dim() - 1) < TRUNCATION_POPULATION_LIMIT
    }

    /// Row-major `re,im` pairs, one matrix row per line.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# dim={}", self.dim())?;
        writeln!(out, "# row-major (re, im) pairs; basis |0> .. |dim-1> of b^dagger b")?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.16e},{:.16e}", self.rho[(i, j)].re, self.rho[(i, j)].im))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        DensityMatrixJson {
            dim: self.dim(),
            re_im: self.rho.transpose().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// JSON form of a density matrix: row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub re_im: Vec<[f64; 2]>,
}

impl DensityMatrixJson {
    pub fn to_matrix(&self) -> Result<OscillatorDensityMatrix> {
        if self.re_im.len() != self.dim * self.dim {
            return Err(Error::InvalidState(format!(
                "expected {} entries, got {}",
                self.dim * self.dim,
                self.re_im.len()
            )));
        }
        let rho = CMatrix::from_row_iterator(
            self.dim,
            self.dim,
            self.re_im.iter().map(|p| Complex64::new(p[0], p[1])),
        );
        OscillatorDensityMatrix::new(rho)
    }
}

/// Exact truncated-basis matrices of `b`, `b^dagger`, `b^2` etc.
struct LadderMatrices {
    b: CMatrix,
    b2: CMatrix,
    number: CMatrix,
}

impl LadderMatrices {
    fn new(dim: usize) -> Self {
        let mut b = CMatrix::zeros(dim, dim);
        let mut b2 = CMatrix::zeros(dim, dim);
        let mut number = CMatrix::zeros(dim, dim);
        for n in 0..dim {
            number[(n, n)] = c(n as f64);
            if n + 1 < dim {
                b[(n, n + 1)] = c(((n + 1) as f64).sqrt());
            }
            if n + 2 < dim {
                b2[(n, n + 2)] = c((((n + 1) * (n + 2)) as f64).sqrt());
            }
        }
        Self { b, b2, number }
    }
}

/// Quadrature moments of a truncated oscillator state, with
/// `x = (b + b^dagger)/sqrt(2)`, `p = (b - b^dagger)/(i sqrt(2))`.
/// Second moments use the exact restrictions of `x^2`, `p^2`, `xp + px`.
pub fn variances_from_rho(rho: &OscillatorDensityMatrix) -> Result<CanonicalMoments> {
    let l = LadderMatrices::new(rho.dim());
    let s2 = std::f64::consts::SQRT_2;
    let bd = l.b.adjoint();
    let b2d = l.b2.adjoint();
    let x = (&l.b + &bd) * c(1.0 / s2);
    let p = (&l.b - &bd) * Complex64::new(0.0, -1.0 / s2);
    let id = linalg::identity(rho.dim());
    let two_n_plus_one = &l.number * c(2.0) + &id;
    let x2 = (&l.b2 + &b2d + &two_n_plus_one) * c(0.5);
    let p2 = (&two_n_plus_one - &l.b2 - &b2d) * c(0.5);
    let xp_px = (&b2d - &l.b2) * linalg::I;
    let e = |m: &CMatrix| linalg::trace_product(rho.rho(), m).re;
    let (mx, mp) = (e(&x), e(&p));
    CanonicalMoments::new(mx, mp, e(&x2) - mx * mx, e(&p2) - mp * mp, 0.5 * e(&xp_px) - mx * mp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub dim: usize,
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain per iteration drops below this.
    pub tol: f64,
    pub n_bins: usize,
    /// Half-width of the binned outcome range in units of the outcome spread.
    pub range_sigmas: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            dim: 10,
            max_iter: 5000,
            tol: 1e-10,
            n_bins: 64,
            range_sigmas: 6.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleReconstruction {
    pub density: OscillatorDensityMatrix,
    /// Log-likelihood after each accepted iteration (entry 0 is the start).
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    /// Sample means subtracted before reconstruction, in atomic units.
    pub mean_x: f64,
    pub mean_p: f64,
}

/// Binned noisy-quadrature POVM for one quadrature angle.
struct QuadraturePovm {
    elements: Vec<CMatrix>,
    counts: Vec<f64>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Hermite functions `psi_0 .. psi_{dim-1}` at `q`, normalized for
/// vacuum variance 1/2.
fn hermite_functions(q: f64, dim: usize, out: &mut [f64]) {
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * q * q).exp();
    if dim > 1 {
        out[1] = std::f64::consts::SQRT_2 * q * out[0];
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * q * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Quadrature grid for the POVM overlap integrals.
struct OverlapGrid {
    step: f64,
    points: Vec<f64>,
    /// `psi[j * dim + n]`
    psi: Vec<f64>,
}

impl OverlapGrid {
    fn new(dim: usize, half_width: f64, step: f64) -> Self {
        let n = (2.0 * half_width / step).ceil() as usize + 1;
        let points: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * step).collect();
        let mut psi = vec![0.0; n * dim];
        for (j, &q) in points.iter().enumerate() {
            hermite_functions(q, dim, &mut psi[j * dim..(j + 1) * dim]);
        }
        Self { step, points, psi }
    }
}

impl QuadraturePovm {
    /// `outcomes` are centered, atomic-unit quadrature readings with Gaussian
    /// blur `noise_sigma`; `angle` is 0 for x and pi/2 for p.
    fn new(
        outcomes: &[f64],
        angle: f64,
        noise_sigma: f64,
        grid: &OverlapGrid,
        dim: usize,
        opts: &MleOptions,
    ) -> Self {
        let spread = stats::variance(outcomes).sqrt().max(noise_sigma);
        let half = opts.range_sigmas * spread;
        let width = 2.0 * half / opts.n_bins as f64;
        let mut counts = vec![0.0; opts.n_bins];
        for &u in outcomes {
            let k = ((u + half) / width).floor();
            let k = k.clamp(0.0, (opts.n_bins - 1) as f64) as usize;
            counts[k] += 1.0;
        }
        // edge bins extend to +-infinity so the elements sum to the identity
        let edge = |k: usize| -> f64 {
            if k == 0 {
                f64::NEG_INFINITY
            } else if k == opts.n_bins {
                f64::INFINITY
            } else {
                -half + k as f64 * width
            }
        };
        let phase: Vec<Complex64> = (0..dim)
            .map(|n| Complex64::from_polar(1.0, angle * n as f64))
            .collect();
        let elements = (0..opts.n_bins)
            .map(|k| {
                let (lo, hi) = (edge(k), edge(k + 1));
                let mut real = vec![0.0; dim * dim];
                for (j, &q) in grid.points.iter().enumerate() {
                    let w = normal_cdf((hi - q) / noise_sigma) - normal_cdf((lo - q) / noise_sigma);
                    if w < 1e-300 {
                        continue;
                    }
                    let psi = &grid.psi[j * dim..(j + 1) * dim];
                    for m in 0..dim {
                        let wm = w * psi[m];
                        for n in m..dim {
                            real[m * dim + n] += wm * psi[n];
                        }
                    }
                }
                // <m|Pi|n> = e^{i (m - n) angle} int w(q) psi_m(q) psi_n(q) dq
                let mut el = CMatrix::zeros(dim, dim);
                for m in 0..dim {
                    for n in m..dim {
                        let v = real[m * dim + n] * grid.step;
                        let z = phase[m] * phase[n].conj() * v;
                        el[(m, n)] = z;
                        el[(n, m)] = z.conj();
                    }
                }
                el
            })
            .collect();
        Self { elements, counts }
    }
}

struct Likelihood {
    povms: Vec<QuadraturePovm>,
    total: f64,
}

impl Likelihood {
    fn probabilities(&self, rho: &CMatrix) -> Vec<Vec<f64>> {
        self.povms
            .iter()
            .map(|p| {
                p.elements
                    .iter()
                    .map(|e| linalg::trace_product(e, rho).re.max(1e-300))
                    .collect()
            })
            .collect()
    }

    fn log_likelihood(&self, probs: &[Vec<f64>]) -> f64 {
        self.povms
            .iter()
            .zip(probs)
            .map(|(p, pr)| {
                p.counts
                    .iter()
                    .zip(pr)
                    .filter(|(n, _)| **n > 0.0)
                    .map(|(n, q)| n * q.ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// `R = sum_k f_k Pi_k / p_k`, with frequencies normalized over all shots
    /// of all quadratures so that `R = I` at the fixed point.
    fn r_operator(&self, probs: &[Vec<f64>], dim: usize) -> CMatrix {
        let mut r = CMatrix::zeros(dim, dim);
        for (p, pr) in self.povms.iter().zip(probs) {
            for ((e, n), q) in p.elements.iter().zip(&p.counts).zip(pr) {
                if *n > 0.0 {
                    r += e * c(n / (self.total * q));
                }
            }
        }
        r
    }
}

/// Largest exponent tried in the over-relaxed step `R^t rho R^t`.
const MAX_OVER_RELAXATION: f64 = 16.0;

fn normalized(m: CMatrix) -> CMatrix {
    let m = linalg::hermitian_part(&m);
    let tr = linalg::trace(&m).re;
    m * c(1.0 / tr)
}

/// Maximum-likelihood density matrix from a record.
///
/// Each shot is read as two independent noisy quadrature measurements, x from
/// `y_c` and p from `y_s`, scaled to atomic units by `sqrt(2/kappa2)`; the
/// light and back-action noise become a Gaussian blur of variance
/// `(1/2 + kappa2^2/24) 2/kappa2`. Outcomes are centered and binned. The
/// iteration is `rho <- N[R rho R]`; if a step would lower the likelihood it
/// is diluted to `(I + eps R) rho (I + eps R)` with eps halved until the
/// likelihood does not decrease. An accepted plain step is extended to
/// `R^t rho R^t` for t = 2, 4, ... while that raises the likelihood further;
/// the fixed points are the same since `R = I` there.
pub fn mle_reconstruct(record: &MeasurementRecord, opts: &MleOptions) -> Result<MleReconstruction> {
    if record.n_shots() < 2 {
        return Err(Error::InvalidParameter("MLE needs >= 2 shots".into()));
    }
    if opts.dim < 2 || opts.n_bins < 2 || !(opts.range_sigmas > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid MLE options {opts:?}")));
    }
    if !(record.kappa2 > 0.0) {
        return Err(Error::ZeroCoupling);
    }
    let dim = opts.dim;
    let scale = (2.0 / record.kappa2).sqrt();
    let noise_sigma = (probe_noise_variance(record.kappa2) * 2.0 / record.kappa2).sqrt();
    let mut quadratures = Vec::with_capacity(2);
    let mut means = [0.0; 2];
    for k in 0..2 {
        let mut u: Vec<f64> = record.column(k).iter().map(|y| y * scale).collect();
        means[k] = stats::mean(&u);
        u.iter_mut().for_each(|v| *v -= means[k]);
        quadratures.push(u);
    }
    // Hermite functions up to dim-1 live within |q| < sqrt(2 dim + 1); pad by the blur
    let support = (2.0 * dim as f64 + 1.0).sqrt() + 8.0;
    let grid = OverlapGrid::new(dim, support, 0.01);
    let povms = vec![
        QuadraturePovm::new(&quadratures[0], 0.0, noise_sigma, &grid, dim, opts),
        QuadraturePovm::new(&quadratures[1], std::f64::consts::FRAC_PI_2, noise_sigma, &grid, dim, opts),
    ];
    let like = Likelihood {
        total: 2.0 * record.n_shots() as f64,
        povms,
    };

    let mut rho = linalg::identity(dim) * c(1.0 / dim as f64);
    let mut probs = like.probabilities(&rho);
    let mut ll = like.log_likelihood(&probs);
    let mut history = vec![ll];
    let mut last_gain = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let r = like.r_operator(&probs, dim);
        let evaluate = |candidate: CMatrix| {
            let cand_probs = like.probabilities(&candidate);
            let cand_ll = like.log_likelihood(&cand_probs);
            (candidate, cand_probs, cand_ll)
        };
        let mut accepted = None;
        let plain = evaluate(normalized(&r * &rho * &r));
        if plain.2 >= ll {
            // over-relax along R^t while the likelihood keeps rising
            let (vals, vecs) = linalg::eigh(&r);
            let mut best = plain;
            let mut t = 2.0;
            while t <= MAX_OVER_RELAXATION {
                let rt = linalg::spectral(&vals, &vecs, |e| c(e.max(0.0).powf(t)));
                let trial = evaluate(normalized(&rt * &rho * &rt));
                if trial.2 <= best.2 {
                    break;
                }
                best = trial;
                t *= 2.0;
            }
            accepted = Some(best);
        } else {
            let mut eps = 1.0;
            for _ in 0..40 {
                let g = linalg::identity(dim) + &r * c(eps);
                let trial = evaluate(normalized(&g * &rho * &g));
                if trial.2 >= ll {
                    accepted = Some(trial);
                    break;
                }
                eps *= 0.5;
            }
        }
        let Some((next, next_probs, next_ll)) = accepted else {
            // no ascent direction left at working precision
            return finish(rho, history, iter - 1, means);
        };
        last_gain = (next_ll - ll) / ll.abs().max(1.0);
        rho = next;
        probs = next_probs;
        ll = next_ll;
        history.push(ll);
        if last_gain < opts.tol {
            return finish(rho, history, iter, means);
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        last_gain,
    })
}

fn finish(rho: CMatrix, log_likelihood: Vec<f64>, iterations: usize, means: [f64; 2]) -> Result<MleReconstruction> {
    Ok(MleReconstruction {
        density: OscillatorDensityMatrix::new(rho)?,
        log_likelihood,
        iterations,
        mean_x: means[0],
        mean_p: means[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{output_variance, simulate_records};

    #[test]
    fn exact_moment_inversion() {
        let v = atomic_variance_from_output(0.5 + 0.4 * 0.5 + 0.64 / 24.0, 0.8).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let v = atomic_variance_from_output(0.5 + 0.1 + 0.64 / 24.0, 0.8).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        let sq = CanonicalMoments::squeezed_vacuum(0.31).unwrap();
        let (tc, ts) = output_variance(&sq, 1.3).unwrap();
        assert!((atomic_variance_from_output(tc, 1.3).unwrap() - sq.var_x).abs() < 1e-12);
        assert!((atomic_variance_from_output(ts, 1.3).unwrap() - sq.var_p).abs() < 1e-12);
        assert!(matches!(atomic_variance_from_output(0.7, 0.0), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn zero_coupling_record_is_rejected() {
        let r = MeasurementRecord::new(vec![[0.1, 0.2], [0.3, -0.1]], 0.0, 0).unwrap();
        assert!(matches!(correct_covariance(&r), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn statistical_error_formula() {
        let r = simulate_records(&CanonicalMoments::vacuum(), 0.8, 101, 1).unwrap();
        let cc = correct_covariance(&r).unwrap();
        assert!((cc.statistical_error - (2.0f64 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(cc.n_shots, 101);
    }

    #[test]
    fn strongly_sub_vacuum_output_is_unphysical() {
        // output variance far below the light noise floor
        let shots: Vec<[f64; 2]> = (0..1000)
            .map(|i| {
                let s = if i % 2 == 0 { 0.1 } else { -0.1 };
                [s, s]
            })
            .collect();
        let r = MeasurementRecord::new(shots, 0.8, 0).unwrap();
        assert!(matches!(
            correct_covariance(&r),
            Err(Error::UnphysicalCorrection { .. })
        ));
    }

    #[test]
    fn fock_state_variances() {
        let v0 = variances_from_rho(&OscillatorDensityMatrix::fock(10, 0).unwrap()).unwrap();
        assert!((v0.var_x - 0.5).abs() < 1e-15 && (v0.var_p - 0.5).abs() < 1e-15);
        let v1 = variances_from_rho(&OscillatorDensityMatrix::fock(10, 1).unwrap()).unwrap();
        assert!((v1.var_x - 1.5).abs() < 1e-15 && (v1.var_p - 1.5).abs() < 1e-15);
        assert!(v1.cov_xp.abs() < 1e-15);
    }

    fn coherent_state(dim: usize, alpha: Complex64) -> OscillatorDensityMatrix {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let mut fact = 1.0;
        for n in 0..dim {
            if n > 0 {
                fact *= n as f64;
            }
            amps[n] = alpha.powu(n as u32) / fact.sqrt() * (-alpha.norm_sqr() / 2.0).exp();
        }
        let psi = nalgebra::DVector::from_vec(amps);
        let psi = &psi / c(psi.norm());
        OscillatorDensityMatrix::new(linalg::outer(&psi)).unwrap()
    }

    #[test]
    fn coherent_state_quadrature_means() {
        // <x> = sqrt(2) Re(alpha), <p> = sqrt(2) Im(alpha)
        let rho = coherent_state(20, Complex64::new(0.3, -0.5));
        let m = variances_from_rho(&rho).unwrap();
        assert!((m.mean_x - 0.3 * 2f64.sqrt()).abs() < 1e-10);
        assert!((m.mean_p + 0.5 * 2f64.sqrt()).abs() < 1e-10);
        assert!((m.var_x - 0.5).abs() < 1e-9 && (m.var_p - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let dim = 10;
        let grid = OverlapGrid::new(dim, 12.0, 0.01);
        for m in 0..dim {
            for n in 0..dim {
                let s: f64 = (0..grid.points.len())
                    .map(|j| grid.psi[j * dim + m] * grid.psi[j * dim + n])
                    .sum::<f64>()
                    * grid.step;
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-10, "({m},{n}) {s}");
            }
        }
    }

    #[test]
    fn povm_sums_to_identity_and_reads_the_right_quadrature() {
        let dim = 12;
        let opts = MleOptions { dim, ..MleOptions::default() };
        let grid = OverlapGrid::new(dim, 14.0, 0.01);
        let outcomes: Vec<f64> = (0..200).map(|i| (i as f64 - 100.0) / 40.0).collect();
        let rho = coherent_state(dim, Complex64::new(0.0, 0.6));
        for (angle, expected_mean) in [(0.0, 0.0), (std::f64::consts::FRAC_PI_2, 0.6 * 2f64.sqrt())] {
            let povm = QuadraturePovm::new(&outcomes, angle, 0.7, &grid, dim, &opts);
            let sum = povm.elements.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
            assert!(linalg::max_abs(&(sum - linalg::identity(dim))) < 1e-8);
            // bin-center estimate of the blurred mean
            let spread = stats::variance(&outcomes).sqrt();
            let half = opts.range_sigmas * spread;
            let width = 2.0 * half / opts.n_bins as f64;
            let mean: f64 = povm
                .elements
                .iter()
                .enumerate()
                .map(|(k, e)| (-half + (k as f64 + 0.5) * width) * linalg::trace_product(e, rho.rho()).re)
                .sum();
            assert!((mean - expected_mean).abs() < 0.02, "angle {angle}: {mean}");
        }
    }

    #[test]
    fn density_matrix_json_round_trip() {
        let rho = coherent_state(6, Complex64::new(0.2, 0.1));
        let json = serde_json::to_string(&rho.to_json()).unwrap();
        let back: DensityMatrixJson = serde_json::from_str(&json).unwrap();
        let diff = back.to_matrix().unwrap().rho() - rho.rho();
        assert!(linalg::max_abs(&diff) < 1e-15);
    }
}
