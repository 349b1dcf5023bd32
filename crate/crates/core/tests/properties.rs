use std::f64::consts::PI;

use proptest::prelude::*;

use squeezesim::linalg;
use squeezesim::probe::simulate_records;
use squeezesim::spin::{coherent_spin_state, rotate, rotation_operator};
use squeezesim::squeezing::{optimal_quadrature_angle, quadrature_variance};
use squeezesim::stats;
use squeezesim::*;

fn axis(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotations_compose_about_a_fixed_axis(
        tf in 1u32..=8, theta in 0.0..PI, phi in 0.0..2.0 * PI, a in -PI..PI, b in -PI..PI,
    ) {
        let ops = SpinOperators::new(SpinQuantumNumber::from_two_f(tf));
        let n = axis(theta, phi);
        let ra = rotation_operator(&ops, n, a).unwrap();
        let rb = rotation_operator(&ops, n, b).unwrap();
        let rab = rotation_operator(&ops, n, a + b).unwrap();
        prop_assert!(linalg::max_abs(&(&ra * &rb - rab)) < 1e-10);
        let unit = &ra * ra.adjoint() - linalg::identity(ops.dim());
        prop_assert!(linalg::max_abs(&unit) < 1e-12);
    }

    #[test]
    fn rotations_carry_the_mean_spin_as_a_vector(
        tf in 1u32..=8, t0 in 0.0..PI, p0 in 0.0..2.0 * PI, theta in 0.0..PI, phi in 0.0..2.0 * PI, a in -PI..PI,
    ) {
        let f = SpinQuantumNumber::from_two_f(tf);
        let ops = SpinOperators::new(f);
        let s = coherent_spin_state(f, t0, p0);
        let n = axis(theta, phi);
        let m = spin::mean_spin(&s, &ops).unwrap();
        let r = spin::mean_spin(&rotate(&s, n, a).unwrap(), &ops).unwrap();
        // Rodrigues' formula
        let dot = n[0] * m[0] + n[1] * m[1] + n[2] * m[2];
        let cr = [n[1] * m[2] - n[2] * m[1], n[2] * m[0] - n[0] * m[2], n[0] * m[1] - n[1] * m[0]];
        for k in 0..3 {
            let expected = m[k] * a.cos() + cr[k] * a.sin() + n[k] * dot * (1.0 - a.cos());
            prop_assert!((r[k] - expected).abs() < 1e-10, "{k}: {} vs {expected}", r[k]);
        }
    }

    #[test]
    fn optimal_angle_matches_brute_force_scan(
        a in 0.01f64..5.0, b in 0.01f64..5.0, rho in -0.99f64..0.99,
    ) {
        let c = rho * (a * b).sqrt();
        let cov = [[a, c], [c, b]];
        let theta = optimal_quadrature_angle(&cov);
        prop_assert!(theta > -PI / 2.0 - 1e-12 && theta <= PI / 2.0 + 1e-12);
        let best = (0..10_000)
            .map(|k| quadrature_variance(&cov, -PI / 2.0 + PI * k as f64 / 10_000.0))
            .fold(f64::INFINITY, f64::min);
        let v = quadrature_variance(&cov, theta);
        prop_assert!(v <= best + 1e-12);
        // grid resolution pi/1e4 bounds how far the scan can lag
        prop_assert!(best - v <= (a + b) * 1e-6);
    }

    #[test]
    fn record_moments_round_trip(
        var_p in 0.1f64..2.0, angle in 0.0..PI, kappa2 in 0.2f64..2.0, seed in any::<u64>(),
    ) {
        let m = CanonicalMoments::squeezed_vacuum(var_p).unwrap().rotated(angle);
        let rec = simulate_records(&m, kappa2, 20_000, seed).unwrap();
        let cc = correct_covariance(&rec).unwrap();
        // 5 sigma keeps the false-failure rate negligible over all cases
        prop_assert!((cc.var_x - m.var_x).abs() < 5.0 * cc.var_x_error());
        prop_assert!((cc.var_p - m.var_p).abs() < 5.0 * cc.var_p_error());
        // sampling spread of the output cross moment, mapped to atomic units
        let out_cov = cc.cov_xp * kappa2 / 2.0;
        let cov_err = 5.0 * 2.0 / kappa2 * (cc.total_var_c * cc.total_var_s + out_cov * out_cov).sqrt()
            / (rec.n_shots() as f64).sqrt();
        prop_assert!((cc.cov_xp - m.cov_xp).abs() < cov_err);
    }

    #[test]
    fn record_csv_is_bit_exact(n in 2usize..50, kappa2 in 0.1f64..2.0, seed in any::<u64>()) {
        let rec = simulate_records(&CanonicalMoments::vacuum(), kappa2, n, seed).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, &[]).unwrap();
        let back = MeasurementRecord::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn pooled_variance_is_between_columns(xs in prop::collection::vec(-10.0f64..10.0, 3..40)) {
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let p = stats::pooled_variance(&xs, &ys);
        let (a, b) = (stats::variance(&xs), stats::variance(&ys));
        prop_assert!(p >= a.min(b) - 1e-9 && p <= a.max(b) + 1e-9);
    }
}
