"""Smoke test for the pysqueezesim extension module.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/python/Cargo.toml`.
"""

import math

import pysqueezesim as sq


def main():
    css = sq.QuantumState.css_x("4")
    assert css.dim == 9
    rep = css.squeezing(4.0)
    assert abs(rep["zeta2"] - 1.0) < 1e-10, rep
    mean = css.mean_spin()
    assert abs(mean[0] - 4.0) < 1e-12

    opt = sq.tact_optimum("4")
    chi2, _ = opt["chi2"]
    zeta2, alpha_t = opt["zeta2"]
    xi2, _ = opt["xi2"]
    assert abs(chi2 - 0.163) < 0.005 and abs(zeta2 - 0.247) < 0.005 and abs(xi2 - 0.327) < 0.005
    squeezed = css.evolve_tact(alpha_t).squeezing(4.0)
    assert abs(squeezed["zeta2"] - zeta2) < 1e-9

    h, offset = sq.compensated_hamiltonian("4", 0.24)
    assert abs(offset - 0.24 * 20.0) < 1e-12
    assert len(h) == 9 and abs(sum(h[i][i] for i in range(9))) < 1e-12

    q = css.husimi(8, 16)
    assert len(q) == 8 and len(q[0]) == 16

    moments = sq.CanonicalMoments(1.0, 0.25)
    assert abs(moments.determinant() - 0.25) < 1e-15
    record = sq.MeasurementRecord.simulate(moments, 0.8, 10_000, 7)
    assert len(record) == 10_000
    cov = record.correct_covariance()
    assert abs(cov["var_p"] - 0.25) < 4 * cov["var_p_err"], cov

    vac = sq.MeasurementRecord.simulate(sq.CanonicalMoments.vacuum(), 0.8, 10_000, 3)
    mle = vac.mle()
    assert mle["populations"][0] > 0.95
    ll = mle["log_likelihood"]
    assert all(b >= a for a, b in zip(ll, ll[1:]))

    cfg = sq.ExperimentConfig("raman_durations = 0, 0.75\nn_shots = 2000\n")
    result = cfg.run_sweep()
    assert len(result["rows"]) == 2
    assert 0.35 <= result["rows"][1]["zeta2_true"] <= 0.6
    state = cfg.state_at(0.75)
    assert math.isclose(state.squeezing(4.0)["zeta2"], result["rows"][1]["zeta2_true"], rel_tol=1e-6)

    try:
        sq.tact_optimum("1/2")
    except ValueError:
        pass
    else:
        raise AssertionError("spin-1/2 must be rejected")

    print("pysqueezesim smoke test passed")


if __name__ == "__main__":
    main()
