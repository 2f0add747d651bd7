import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx
from scipy.stats import norm

from gwma_arl.calibrate import (ANALYTIC, MONTE_CARLO, calibrate_limit, match_lambda,
                                match_lambda_curve)
from gwma_arl.chart import (ChartSpec, EwmaParams, GwmaParams, ewma_variance_factor,
                            gwma_q_asymptotic)
from gwma_arl.errors import CalibrationError, ParameterError
from gwma_arl.markov import ewma_arl
from gwma_arl.simulate import SimConfig


@pytest.mark.parametrize("alpha, lam, tol", [(1.0, 0.25, 1e-9), (0.8, 0.206, 5e-4),
                                             (0.5, 0.152, 5e-4)])
def test_match_lambda_examples(alpha, lam, tol):
    assert match_lambda(GwmaParams(0.75, alpha)) == approx(lam, abs=tol)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(0.05, 0.95), alpha=st.floats(0.3, 2.0))
def test_match_lambda_inverts_ewma_variance(q, alpha):
    p = GwmaParams(q, alpha)
    lam = match_lambda(p)
    assert 0 < lam <= 1
    assert ewma_variance_factor(EwmaParams(lam)) == approx(gwma_q_asymptotic(p), rel=1e-12)


def test_match_curve_shape():
    rows = match_lambda_curve(0.75, (0.5, 1.5), 100)
    assert len(rows) == 101
    alphas, Qs, lams = map(np.array, zip(*rows))
    assert alphas[0] == 0.5 and alphas[-1] == 1.5
    assert np.all(np.diff(lams) > 0)
    assert lams[50] == approx(0.25, abs=1e-12)
    assert Qs[0] < Qs[50]
    for a, Q, lam in rows[::17]:
        assert lam == match_lambda(GwmaParams(0.75, a))


def test_match_curve_validation():
    with pytest.raises(ParameterError):
        match_lambda_curve(0.75, (0.0, 1.0), 10)
    with pytest.raises(ParameterError):
        match_lambda_curve(0.75, (0.5, 1.0), 0)


def test_analytic_ewma_recovers_table_limit():
    res = calibrate_limit(ChartSpec(EwmaParams(0.25), 1.0), 500.0)
    assert res.L == approx(3.002, abs=0.01)
    assert abs(res.achieved_arl0 - 500) <= 0.5
    assert res.achieved_std_error == 0.0
    assert res.bracket[0] <= res.L <= res.bracket[1]


def test_analytic_shewhart_inversion():
    res = calibrate_limit(ChartSpec(EwmaParams(1.0), 1.0), 370.4, tol=0.05)
    assert res.L == approx(3.000, abs=1e-3)
    exact = -norm.ppf(1 / (2 * 370.4))
    assert res.L == approx(exact, abs=2e-4)


def test_gwma_alpha_one_uses_the_ewma_chain():
    a = calibrate_limit(ChartSpec(GwmaParams(0.75, 1.0), 1.0), 500.0)
    b = calibrate_limit(ChartSpec(EwmaParams(0.25), 1.0), 500.0)
    assert a.L == b.L


def test_idempotent_recalibration():
    spec = ChartSpec(EwmaParams(0.206), 1.0)
    first = calibrate_limit(spec, 500.0)
    again = calibrate_limit(spec, 500.0, bracket=(first.L - 0.5, first.L + 0.5))
    assert again.iterations <= 2
    assert again.L == approx(first.L, abs=1e-12)


def test_analytic_arl_increasing_in_L():
    Ls = np.linspace(2.0, 4.0, 21)
    arls = [ewma_arl(EwmaParams(0.25), L, 0.0) for L in Ls]
    assert np.all(np.diff(arls) > 0)


def test_bracket_expansion():
    res = calibrate_limit(ChartSpec(EwmaParams(0.25), 1.0), 50_000.0, tol=5.0)
    assert res.L > 4.0
    res = calibrate_limit(ChartSpec(EwmaParams(1.0), 1.0), 5.0, tol=0.01)
    assert res.L < 2.0


def test_analytic_rejects_fractional_alpha():
    with pytest.raises(ParameterError):
        calibrate_limit(ChartSpec(GwmaParams(0.75, 0.5), 1.0), 500.0, ANALYTIC)


def test_bad_inputs():
    spec = ChartSpec(EwmaParams(0.25), 1.0)
    with pytest.raises(ParameterError):
        calibrate_limit(spec, 1.0)
    with pytest.raises(ParameterError):
        calibrate_limit(spec, 500.0, engine="magic")
    with pytest.raises(ParameterError):
        calibrate_limit(spec, 500.0, MONTE_CARLO, cfg=None)


def test_monte_carlo_shewhart():
    cfg = SimConfig(seed=31, reps=50_000)
    res = calibrate_limit(ChartSpec(EwmaParams(1.0), 1.0), 370.4, MONTE_CARLO, tol=0.5, cfg=cfg,
                          confirm_reps=None)
    assert res.engine == MONTE_CARLO
    assert abs(res.achieved_arl0 - 370.4) <= res.tolerance
    # 2 se at 5e4 reps is about 0.9% in ARL, i.e. roughly 0.01 in L
    assert res.L == approx(3.0, abs=0.02)
    assert res.history and res.settings["search_reps"] == 50_000


def test_monte_carlo_is_reproducible():
    cfg = SimConfig(seed=32, reps=5000)
    spec = ChartSpec(EwmaParams(0.25), 1.0)
    a = calibrate_limit(spec, 100.0, MONTE_CARLO, cfg=cfg, confirm_reps=None)
    b = calibrate_limit(spec, 100.0, MONTE_CARLO, cfg=cfg.replace(workers=4), confirm_reps=None)
    assert (a.L, a.achieved_arl0, a.iterations) == (b.L, b.achieved_arl0, b.iterations)


def test_monte_carlo_noise_floor_is_reported():
    # a single replicate gives an integer-valued, zero-variance ARL map that cannot hit 2.5
    cfg = SimConfig(seed=33, reps=1)
    with pytest.raises(CalibrationError, match="noise floor"):
        calibrate_limit(ChartSpec(EwmaParams(1.0), 1.0), 2.5, MONTE_CARLO, tol=1e-9, cfg=cfg,
                        confirm_reps=None)
