import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from gwma_arl.chart import (ChartSpec, EwmaParams, GwmaParams, LimitMode, ProcessModel,
                            apply_chart, control_limit_series, control_limits, ewma_statistic,
                            ewma_variance_factor, ewma_variance_series, gwma_q_asymptotic,
                            gwma_qt, gwma_qt_series, gwma_statistic, gwma_weights)
from gwma_arl.errors import ParameterError

qs = st.floats(0.01, 0.99)
alphas = st.floats(0.1, 3.0)
ts = st.integers(1, 300)


def direct_weights(q, alpha, t):
    """Straight from the definition, with Python's pow."""
    return [q ** ((i - 1) ** alpha) - q ** (i**alpha) for i in range(1, t + 1)], q ** (t**alpha)


def direct_gwma(x, q, alpha, mu0):
    out = []
    for t in range(1, len(x) + 1):
        w, head = direct_weights(q, alpha, t)
        out.append(sum(w[i] * x[t - 1 - i] for i in range(t)) + head * mu0)
    return np.array(out)


# --- weights ---------------------------------------------------------------


def test_weights_alpha_one_are_geometric():
    prof = gwma_weights(GwmaParams(0.75, 1.0), 3)
    assert prof.weights == approx([0.25, 0.1875, 0.140625], abs=1e-15)
    assert prof.head == approx(0.421875, abs=1e-15)


def test_weights_not_monotone_for_alpha_175():
    w = gwma_weights(GwmaParams(0.75, 1.75), 20).weights
    assert np.any(w[1:] > w[:-1])


def test_weights_monotone_for_alpha_below_one():
    w = gwma_weights(GwmaParams(0.75, 0.5), 20).weights
    assert np.all(np.diff(w) < 0)


@settings(max_examples=200, deadline=None)
@given(qs, alphas, ts)
def test_weight_convexity(q, alpha, t):
    prof = gwma_weights(GwmaParams(q, alpha), t)
    assert np.all(prof.weights >= 0) and prof.head >= 0
    assert abs(prof.total() - 1.0) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(qs, alphas, st.integers(1, 60))
def test_weights_match_definition(q, alpha, t):
    w, head = direct_weights(q, alpha, t)
    prof = gwma_weights(GwmaParams(q, alpha), t)
    assert prof.weights == approx(w, rel=1e-12, abs=1e-15)
    assert prof.head == approx(head, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("q, alpha", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -1.0),
                                      (float("nan"), 1.0)])
def test_bad_gwma_params(q, alpha):
    with pytest.raises(ParameterError):
        GwmaParams(q, alpha)


@pytest.mark.parametrize("lam", [0.0, -0.1, 1.5])
def test_bad_ewma_params(lam):
    with pytest.raises(ParameterError):
        EwmaParams(lam)


def test_zero_time_rejected():
    with pytest.raises(ParameterError):
        gwma_weights(GwmaParams(0.75, 1.0), 0)
    with pytest.raises(ParameterError):
        gwma_qt(GwmaParams(0.75, 1.0), 0)
    with pytest.raises(ParameterError):
        ewma_variance_factor(EwmaParams(0.2), 0)


# --- statistics ------------------------------------------------------------


def test_constant_series_stays_at_mu0():
    x = np.full(50, 4.2)
    assert gwma_statistic(x, GwmaParams(0.75, 0.5), 4.2) == approx(x, abs=1e-12)
    assert ewma_statistic(x, EwmaParams(0.3), 4.2) == approx(x, abs=1e-12)


def test_single_observation():
    mu0, sigma0 = 10.0, 2.0
    g = gwma_statistic([mu0 + sigma0], GwmaParams(0.75, 0.5), mu0)
    assert g[0] == approx(mu0 + 0.25 * sigma0, abs=1e-12)


def test_gwma_matches_definition():
    rng = np.random.default_rng(0)
    x = rng.normal(1.0, 2.0, 80)
    for alpha in (0.5, 1.0, 1.75):
        assert gwma_statistic(x, GwmaParams(0.7, alpha), 1.0) == approx(
            direct_gwma(list(x), 0.7, alpha, 1.0), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(qs, st.lists(st.floats(-100, 100), min_size=1, max_size=120), st.floats(-10, 10))
def test_gwma_alpha_one_is_ewma(q, x, mu0):
    g = gwma_statistic(x, GwmaParams(q, 1.0), mu0)
    z = ewma_statistic(x, EwmaParams(1.0 - q), mu0)
    assert np.max(np.abs(g - z)) <= 1e-12 * max(1.0, np.max(np.abs(x)))


def test_ewma_shewhart_reduction():
    x = np.random.default_rng(1).normal(size=30)
    assert np.array_equal(ewma_statistic(x, EwmaParams(1.0), 5.0), x)


def test_ewma_recursion_equals_closed_form():
    lam, mu0 = 0.2, -1.0
    x = np.random.default_rng(2).normal(size=100)
    z = ewma_statistic(x, EwmaParams(lam), mu0)
    closed = [lam * sum((1 - lam) ** (i - 1) * x[t - i] for i in range(1, t + 1))
              + (1 - lam) ** t * mu0 for t in range(1, 101)]
    assert z == approx(closed, abs=1e-12)


def test_empty_series_rejected():
    with pytest.raises(ParameterError):
        gwma_statistic([], GwmaParams(0.5, 1.0))


# --- variance factors ------------------------------------------------------

# 50-digit mpmath summation of the squared weights, q = 0.75
Q_ORACLE = {
    0.8: {1: 0.0625, 2: 0.083237446425852478, 10: 0.11314386776751405,
          50: 0.11496208002831288, 100: 0.11496217993294229, 200: 0.11496217993805127},
    1.2: {1: 0.0625, 2: 0.11708011307760751, 10: 0.17388975492879035,
          100: 0.17391951968570853},
    0.5: {1: 0.0625, 10: 0.079491902280910504, 100: 0.082076152088426621,
          200: 0.08209459427343241},
}


@pytest.mark.parametrize("alpha", sorted(Q_ORACLE))
def test_qt_against_oracle(alpha):
    series = gwma_qt_series(GwmaParams(0.75, alpha), 200)
    for t, v in Q_ORACLE[alpha].items():
        assert series[t - 1] == approx(v, rel=1e-13)
        assert gwma_qt(GwmaParams(0.75, alpha), t) == approx(v, rel=1e-13)


def test_qt_alpha_one():
    p = GwmaParams(0.75, 1.0)
    assert gwma_qt(p, 1) == approx(0.0625, abs=1e-16)
    assert gwma_qt(p, 500) == approx(1 / 7, abs=1e-14)


def test_qt_plateau_ordering():
    # smaller alpha puts more weight in the past and lowers the plateau
    q08 = gwma_qt_series(GwmaParams(0.75, 0.8), 100)
    q10 = gwma_qt_series(GwmaParams(0.75, 1.0), 100)
    q12 = gwma_qt_series(GwmaParams(0.75, 1.2), 100)
    assert q08[-1] < q10[-1] < q12[-1]
    assert abs(q08[-1] - q08[89]) < 1e-9


@settings(max_examples=100, deadline=None)
@given(qs, alphas, st.integers(2, 400))
def test_qt_monotone_and_bounded(q, alpha, t):
    s = gwma_qt_series(GwmaParams(q, alpha), t)
    assert np.all(np.diff(s) >= 0)
    assert s[-1] <= 1.0


def test_q_asymptotic():
    assert gwma_q_asymptotic(GwmaParams(0.75, 1.0)) == approx(1 / 7, abs=1e-10)
    assert gwma_q_asymptotic(GwmaParams(0.75, 0.8)) == approx(Q_ORACLE[0.8][200], rel=1e-13)
    Q = gwma_q_asymptotic(GwmaParams(0.75, 0.8))
    assert 2 * Q / (1 + Q) == approx(0.206, abs=5e-4)
    Q = gwma_q_asymptotic(GwmaParams(0.75, 0.5))
    assert 2 * Q / (1 + Q) == approx(0.152, abs=5e-4)


def test_q_asymptotic_early_stop_is_harmless():
    p = GwmaParams(0.05, 2.0)
    assert gwma_q_asymptotic(p, 200) == approx(gwma_qt(p, 200), rel=1e-15)


def test_ewma_variance_factor():
    assert ewma_variance_factor(EwmaParams(0.25)) == approx(1 / 7)
    assert ewma_variance_factor(EwmaParams(0.25), 1) == approx(0.0625)
    for t in (1, 7, math.inf):
        assert ewma_variance_factor(EwmaParams(1.0), t) == 1.0


@pytest.mark.parametrize("lam", [0.05, 0.25, 0.7])
def test_ewma_variance_closed_form_matches_sum(lam):
    s = np.cumsum([lam**2 * (1 - lam) ** (2 * (i - 1)) for i in range(1, 201)])
    assert ewma_variance_series(EwmaParams(lam), 200) == approx(s, abs=1e-12)
    assert ewma_variance_factor(EwmaParams(lam), 200) == approx(s[-1], abs=1e-12)


def test_qt_alpha_one_matches_ewma_variance():
    for q in (0.3, 0.75, 0.95):
        assert gwma_qt_series(GwmaParams(q, 1.0), 200) == approx(
            ewma_variance_series(EwmaParams(1 - q), 200), abs=1e-12)


# --- limits and charting ---------------------------------------------------


def test_shewhart_limits():
    spec = ChartSpec(EwmaParams(1.0), 3.0)
    for mode in LimitMode:
        s = ChartSpec(EwmaParams(1.0), 3.0, limit_mode=mode)
        for t in (1, 10):
            assert control_limits(s, t) == approx((-3.0, 3.0))
    assert spec.limit_mode is LimitMode.TIME_VARYING


def test_asymptotic_gwma_limits():
    spec = ChartSpec(GwmaParams(0.75, 1.0), 3.002, limit_mode=LimitMode.ASYMPTOTIC)
    lcl, ucl = control_limits(spec, 5)
    assert ucl == approx(3.002 * math.sqrt(1 / 7), abs=1e-10)
    assert ucl == approx(1.13465, abs=1e-5)
    assert lcl == -ucl


def test_limits_scale_with_process():
    spec = ChartSpec(GwmaParams(0.75, 0.5), 3.0, ProcessModel(10.0, 2.0))
    lcl, ucl = control_limits(spec, 1)
    assert (lcl, ucl) == approx((10 - 6 * 0.25, 10 + 6 * 0.25))


@pytest.mark.parametrize("scheme", [GwmaParams(0.75, 0.5), GwmaParams(0.75, 1.75), EwmaParams(0.1)])
def test_time_varying_limits_widen_to_asymptotic(scheme):
    tv = ChartSpec(scheme, 3.0)
    lcl, ucl = control_limit_series(tv, 2000)
    assert np.all(np.diff(ucl) >= 0)
    asym = control_limits(ChartSpec(scheme, 3.0, limit_mode="asymptotic"), 1)[1]
    # the asymptotic factor is the 200-term proxy for GWMA
    assert ucl[199] == approx(asym, rel=1e-12 if isinstance(scheme, GwmaParams) else 1e-6)
    assert ucl[-1] == approx(asym, rel=1e-4)


def test_apply_chart_no_signal_on_mu0():
    trace = apply_chart(np.full(100, 3.0), ChartSpec(GwmaParams(0.75, 0.5), 3.0,
                                                     ProcessModel(3.0, 1.0)))
    assert trace.signal is None


def test_apply_chart_signal_at_one():
    trace = apply_chart([10.0, 0.0], ChartSpec(EwmaParams(1.0), 3.0))
    assert trace.signal == 1
    rows = list(trace.rows())
    assert rows[0] == (1, 10.0, -3.0, 3.0, 1)


def test_apply_chart_reduction():
    x = np.random.default_rng(5).normal(0.3, 1.0, 300)
    a = apply_chart(x, ChartSpec(GwmaParams(0.75, 1.0), 2.5))
    b = apply_chart(x, ChartSpec(EwmaParams(0.25), 2.5))
    assert a.signal == b.signal
    for col in ("statistic", "lcl", "ucl"):
        assert np.max(np.abs(getattr(a, col) - getattr(b, col))) <= 1e-12


def test_chart_spec_validation():
    with pytest.raises(ParameterError):
        ChartSpec(EwmaParams(0.2), -1.0)
    with pytest.raises(ParameterError):
        ProcessModel(0.0, 0.0)
