"""GWMA and EWMA chart statistics, weights, variance factors and control limits.

Everything here is exact (non-stochastic) arithmetic in float64.  Weights are
indexed from the newest observation: ``weights[0]`` multiplies ``X_t``,
``weights[1]`` multiplies ``X_{t-1}`` and so on, while ``head`` is the residual
weight placed on the in-control mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .errors import ParameterError

# Terms of the Q_t series below this are treated as saturated.
Q_TERM_EPS = 1e-16


@dataclass(frozen=True)
class GwmaParams:
    """GWMA design: ``0 < q < 1`` and ``alpha > 0``."""

    q: float
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.q < 1.0) or not math.isfinite(self.q):
            raise ParameterError(f"q must lie in (0, 1), got {self.q!r}")
        if not (self.alpha > 0.0) or not math.isfinite(self.alpha):
            raise ParameterError(f"alpha must be positive, got {self.alpha!r}")


@dataclass(frozen=True)
class EwmaParams:
    """EWMA design with smoothing constant ``0 < lam <= 1`` (``lam = 1`` is Shewhart)."""

    lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0) or not math.isfinite(self.lam):
            raise ParameterError(f"lambda must lie in (0, 1], got {self.lam!r}")


Scheme = Union[GwmaParams, EwmaParams]


@dataclass(frozen=True)
class ProcessModel:
    mu0: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if not (self.sigma0 > 0.0) or not math.isfinite(self.sigma0):
            raise ParameterError(f"sigma0 must be positive, got {self.sigma0!r}")
        if not math.isfinite(self.mu0):
            raise ParameterError(f"mu0 must be finite, got {self.mu0!r}")


class LimitMode(str, Enum):
    TIME_VARYING = "time-varying"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class ChartSpec:
    """A fully specified chart: scheme, limit constant ``L`` and limit mode."""

    scheme: Scheme
    L: float
    process: ProcessModel = field(default_factory=ProcessModel)
    limit_mode: LimitMode = LimitMode.TIME_VARYING

    def __post_init__(self):
        if not isinstance(self.scheme, (GwmaParams, EwmaParams)):
            raise ParameterError(f"unknown chart scheme {self.scheme!r}")
        if not (self.L >= 0.0) or not math.isfinite(self.L):
            raise ParameterError(f"L must be a finite nonnegative number, got {self.L!r}")
        object.__setattr__(self, "limit_mode", LimitMode(self.limit_mode))

    @property
    def is_gwma(self) -> bool:
        return isinstance(self.scheme, GwmaParams)

    def with_L(self, L: float) -> "ChartSpec":
        return ChartSpec(self.scheme, L, self.process, self.limit_mode)

    def describe(self) -> dict:
        d = {"L": self.L, "mu0": self.process.mu0, "sigma0": self.process.sigma0,
             "limit_mode": self.limit_mode.value}
        if self.is_gwma:
            d.update(scheme="GWMA", q=self.scheme.q, alpha=self.scheme.alpha)
        else:
            d.update(scheme="EWMA", lam=self.scheme.lam)
        return d


@dataclass(frozen=True)
class WeightProfile:
    t: int
    weights: np.ndarray
    head: float

    def total(self) -> float:
        return float(self.weights.sum() + self.head)


def _check_t(t) -> int:
    if isinstance(t, bool) or int(t) != t or t < 1:
        raise ParameterError(f"time index must be an integer >= 1, got {t!r}")
    return int(t)


def survival_weights(params: GwmaParams, n: int) -> np.ndarray:
    """``q**(i**alpha)`` for ``i = 0..n``, evaluated as ``exp(i**alpha * ln q)``."""
    i = np.arange(n + 1, dtype=np.float64)
    return np.exp(i**params.alpha * math.log(params.q))


def _gwma_weight_array(params: GwmaParams, n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=np.float64)
    logq = math.log(params.q)
    upper = (i - 1.0) ** params.alpha
    # q^a - q^b = q^a * (1 - q^(b-a)); expm1 keeps the small differences accurate
    return np.exp(upper * logq) * -np.expm1((i**params.alpha - upper) * logq)


def gwma_weights(params: GwmaParams, t: int) -> WeightProfile:
    """Weights on ``X_t, X_{t-1}, ..., X_1`` (newest first) plus the head on ``mu0``."""
    t = _check_t(t)
    w = _gwma_weight_array(params, t)
    head = math.exp(t**params.alpha * math.log(params.q))
    return WeightProfile(t, w, head)


def ewma_weights(params: EwmaParams, t: int) -> WeightProfile:
    t = _check_t(t)
    lam = params.lam
    w = lam * (1.0 - lam) ** np.arange(t, dtype=np.float64)
    return WeightProfile(t, w, (1.0 - lam) ** t)


def _series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise ParameterError("series must be nonempty")
    return x


def gwma_statistic(series, params: GwmaParams, mu0: float = 0.0) -> np.ndarray:
    """GWMA statistics ``G_1..G_n``.

    There is no recursion for ``alpha != 1``: each ``G_t`` is a fresh weighted
    sum over the entire history, so the cost is quadratic in the series length.
    """
    x = _series(series)
    w = _gwma_weight_array(params, x.size)
    # sum(w[:t]) + head_t = 1, so centering on mu0 absorbs the head weight
    return np.convolve(x - mu0, w)[: x.size] + mu0


def ewma_statistic(series, params: EwmaParams, mu0: float = 0.0) -> np.ndarray:
    x = _series(series)
    lam = params.lam
    out = np.empty_like(x)
    z = float(mu0)
    for k, xk in enumerate(x):
        z = (1.0 - lam) * z + lam * xk
        out[k] = z
    return out


def chart_statistic(series, spec: ChartSpec) -> np.ndarray:
    if spec.is_gwma:
        return gwma_statistic(series, spec.scheme, spec.process.mu0)
    return ewma_statistic(series, spec.scheme, spec.process.mu0)


def gwma_qt_series(params: GwmaParams, t_max: int) -> np.ndarray:
    """``Q_1, ..., Q_{t_max}`` as a cumulative sum of squared weights."""
    t_max = _check_t(t_max)
    return np.cumsum(_gwma_weight_array(params, t_max) ** 2)


def gwma_qt(params: GwmaParams, t: int) -> float:
    return float(gwma_qt_series(params, t)[-1])


def gwma_q_asymptotic(params: GwmaParams, horizon: int = 200) -> float:
    """``Q_horizon`` as a stand-in for the limit of ``Q_t`` (no closed form exists).

    The sum stops early once the squared weights are past their peak and below
    ``1e-16``.
    """
    horizon = _check_t(horizon)
    terms = _gwma_weight_array(params, horizon) ** 2
    peak = int(np.argmax(terms))
    small = np.nonzero(terms[peak:] < Q_TERM_EPS)[0]
    if small.size:
        terms = terms[: peak + small[0]]
    return float(terms.sum())


def ewma_variance_factor(params: EwmaParams, t: float = math.inf) -> float:
    """``Var(Z_t) / sigma0**2``; pass ``t=math.inf`` (the default) for ``lam / (2 - lam)``."""
    lam = params.lam
    qe = lam / (2.0 - lam)
    if t == math.inf:
        return qe
    t = _check_t(t)
    return qe * -math.expm1(2.0 * t * math.log1p(-lam)) if lam < 1.0 else 1.0


def ewma_variance_series(params: EwmaParams, t_max: int) -> np.ndarray:
    t_max = _check_t(t_max)
    lam = params.lam
    if lam == 1.0:
        return np.ones(t_max)
    t = np.arange(1, t_max + 1, dtype=np.float64)
    return lam / (2.0 - lam) * -np.expm1(2.0 * t * math.log1p(-lam))


def asymptotic_variance(spec: ChartSpec, horizon: int = 200) -> float:
    if spec.is_gwma:
        return gwma_q_asymptotic(spec.scheme, horizon)
    return ewma_variance_factor(spec.scheme)


def variance_series(spec: ChartSpec, t_max: int) -> np.ndarray:
    """Variance factors that set the limits for ``t = 1..t_max`` under the spec's limit mode."""
    t_max = _check_t(t_max)
    if spec.limit_mode is LimitMode.ASYMPTOTIC:
        return np.full(t_max, asymptotic_variance(spec))
    if spec.is_gwma:
        return gwma_qt_series(spec.scheme, t_max)
    return ewma_variance_series(spec.scheme, t_max)


def control_limits(spec: ChartSpec, t: int) -> tuple[float, float]:
    t = _check_t(t)
    if spec.limit_mode is LimitMode.ASYMPTOTIC:
        v = asymptotic_variance(spec)
    elif spec.is_gwma:
        v = gwma_qt(spec.scheme, t)
    else:
        v = ewma_variance_factor(spec.scheme, t)
    half = spec.L * math.sqrt(v) * spec.process.sigma0
    return spec.process.mu0 - half, spec.process.mu0 + half


def control_limit_series(spec: ChartSpec, t_max: int) -> tuple[np.ndarray, np.ndarray]:
    half = spec.L * np.sqrt(variance_series(spec, t_max)) * spec.process.sigma0
    return spec.process.mu0 - half, spec.process.mu0 + half


@dataclass
class ChartTrace:
    statistic: np.ndarray
    lcl: np.ndarray
    ucl: np.ndarray
    signal: int | None

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.statistic.size + 1)

    @property
    def out_of_control(self) -> np.ndarray:
        return (self.statistic < self.lcl) | (self.statistic > self.ucl)

    def rows(self):
        flags = self.out_of_control
        for k in range(self.statistic.size):
            yield (k + 1, float(self.statistic[k]), float(self.lcl[k]), float(self.ucl[k]),
                   int(flags[k]))


def apply_chart(series, spec: ChartSpec) -> ChartTrace:
    """Run a chart over ``series``; ``signal`` is the first 1-based time outside the limits."""
    stat = chart_statistic(series, spec)
    lcl, ucl = control_limit_series(spec, stat.size)
    out = np.nonzero((stat < lcl) | (stat > ucl))[0]
    signal = int(out[0]) + 1 if out.size else None
    return ChartTrace(stat, lcl, ucl, signal)
