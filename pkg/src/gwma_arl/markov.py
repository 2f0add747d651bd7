"""Markov-chain run-length computations for the EWMA chart.

The in-control region at each time step is cut into ``states`` equal cells and
the statistic is represented by the cell midpoints (Brook-Evans style).  With
time-varying limits the grid is rebuilt every step; probability mass is moved
between consecutive grids by Gaussian CDF differences.  Once the limits have
converged to their asymptotic width, the remaining sum is closed off with the
fundamental-matrix solve of the stationary chain.

Everything is in standardized units: ``Z`` is measured in ``sigma0`` from
``mu0`` and the shift ``delta`` in ``sigma0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .chart import EwmaParams, LimitMode
from .errors import ConditioningError, HorizonError, ParameterError, ResolutionError

# Relative gap below which time-varying limits are treated as asymptotic.
LIMIT_CONVERGED_RTOL = 1e-12

STEADY_STATE_TAU = 100


@dataclass(frozen=True)
class MarkovConfig:
    states: int = 201
    max_t: int = 10_000
    tail_eps: float = 1e-12

    def __post_init__(self):
        if self.states < 3 or self.states % 2 == 0:
            raise ParameterError(f"states must be odd and >= 3, got {self.states}")
        if not (0.0 < self.tail_eps < 1.0):
            raise ParameterError(f"tail_eps must lie in (0, 1), got {self.tail_eps}")
        if self.max_t < 1:
            raise ParameterError(f"max_t must be >= 1, got {self.max_t}")


class _Chain:
    """Grids and one-step transitions for a fixed (lam, L) design."""

    def __init__(self, params: EwmaParams, L: float, limit_mode, cfg: MarkovConfig):
        if not L > 0:
            raise ParameterError(f"L must be positive, got {L}")
        if params.lam * cfg.states < 2:
            raise ResolutionError(
                f"lambda * states = {params.lam * cfg.states:.3g} < 2; increase states")
        self.lam = params.lam
        self.L = L
        self.mode = LimitMode(limit_mode)
        self.cfg = cfg
        self.c_inf = L * math.sqrt(self.lam / (2.0 - self.lam))
        self._stationary: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def half_width(self, t: int) -> float:
        if self.mode is LimitMode.ASYMPTOTIC or self.lam == 1.0:
            return self.c_inf
        v = -math.expm1(2.0 * t * math.log1p(-self.lam))
        return self.c_inf * math.sqrt(v)

    def converged(self, t: int) -> bool:
        return abs(self.half_width(t) - self.c_inf) <= LIMIT_CONVERGED_RTOL * self.c_inf

    def _edges(self, c: float) -> np.ndarray:
        return np.linspace(-c, c, self.cfg.states + 1)

    def transition(self, src: np.ndarray, c_dst: float, delta: float) -> np.ndarray:
        """Rows: source values; columns: probability of landing in each destination cell."""
        edges = self._edges(c_dst)
        z = (edges[None, :] - (1.0 - self.lam) * src[:, None]) / self.lam - delta
        return np.diff(ndtr(z), axis=1)

    def midpoints(self, c: float) -> np.ndarray:
        e = self._edges(c)
        return 0.5 * (e[:-1] + e[1:])

    def stationary(self, delta: float) -> tuple[np.ndarray, np.ndarray]:
        """Transition matrix on the asymptotic grid and its ARL vector ``(I - P)^-1 1``."""
        if delta not in self._stationary:
            P = self.transition(self.midpoints(self.c_inf), self.c_inf, delta)
            arl = np.linalg.solve(np.eye(P.shape[0]) - P, np.ones(P.shape[0]))
            self._stationary[delta] = (P, arl)
        return self._stationary[delta]

    def step(self, values: np.ndarray, mass: np.ndarray, t: int, delta: float):
        c = self.half_width(t)
        return self.midpoints(c), mass @ self.transition(values, c, delta)

    def in_control_start(self, tau: int):
        """Conditional state distribution at time ``tau - 1`` given no signal so far.

        Returns ``(values, mass, survival)`` where ``mass`` is normalized and
        ``survival`` is ``P(RL >= tau)`` in control.
        """
        values, mass = np.zeros(1), np.ones(1)
        log_surv = 0.0
        for t in range(1, tau):
            values, mass = self.step(values, mass, t, 0.0)
            s = mass.sum()
            if not s > 0.0:
                raise ConditioningError(f"no in-control mass survives to time {t}")
            log_surv += math.log(s)
            mass = mass / s
        return values, mass, math.exp(log_surv)

    def expected_delay(self, values, mass, t0: int, delta: float) -> float:
        """``1 + sum_k P(no signal in k shifted steps)`` starting from ``mass`` at ``t0 - 1``."""
        d = 1.0
        t = t0
        while True:
            if t - t0 >= self.cfg.max_t:
                raise HorizonError(
                    f"survival mass {mass.sum():.3g} above tail_eps after {self.cfg.max_t} steps")
            if self.converged(t):
                P, arl = self.stationary(delta)
                # one step onto the asymptotic grid, then the stationary solve
                mass = mass @ self.transition(values, self.c_inf, delta)
                return d + float(mass @ arl)
            values, mass = self.step(values, mass, t, delta)
            s = float(mass.sum())
            d += s
            if s < self.cfg.tail_eps:
                return d
            t += 1


def _check_tau(tau) -> int:
    if isinstance(tau, bool) or int(tau) != tau or tau < 1:
        raise ParameterError(f"tau must be an integer >= 1, got {tau!r}")
    return int(tau)


def ewma_ced(params: EwmaParams, L: float, shift: float, tau: int,
             limit_mode=LimitMode.TIME_VARYING, cfg: MarkovConfig = MarkovConfig()) -> float:
    """Conditional expected delay ``E(RL - tau + 1 | RL >= tau)`` for a shift starting at ``tau``."""
    tau = _check_tau(tau)
    chain = _Chain(params, L, limit_mode, cfg)
    values, mass, _ = chain.in_control_start(tau)
    return chain.expected_delay(values, mass, tau, float(shift))


def ewma_arl(params: EwmaParams, L: float, shift: float = 0.0,
             limit_mode=LimitMode.TIME_VARYING, cfg: MarkovConfig = MarkovConfig()) -> float:
    """Zero-state ARL for a sustained shift of ``shift`` sigma0 present from ``t = 1``."""
    return ewma_ced(params, L, shift, 1, limit_mode, cfg)


def ewma_steady_state_arl(params: EwmaParams, L: float, shift: float = 0.0,
                          limit_mode=LimitMode.TIME_VARYING,
                          cfg: MarkovConfig = MarkovConfig()) -> float:
    """Steady-state ARL, approximated by the conditional delay at ``tau = 100``."""
    return ewma_ced(params, L, shift, STEADY_STATE_TAU, limit_mode, cfg)


def ewma_ced_profile(params: EwmaParams, L: float, shift: float, tau_max: int,
                     limit_mode=LimitMode.TIME_VARYING,
                     cfg: MarkovConfig = MarkovConfig()) -> np.ndarray:
    """``D_1, ..., D_tau_max`` reusing the in-control propagation across change points."""
    tau_max = _check_tau(tau_max)
    chain = _Chain(params, L, limit_mode, cfg)
    out = np.empty(tau_max)
    values, mass = np.zeros(1), np.ones(1)
    for tau in range(1, tau_max + 1):
        if tau > 1:
            values, mass = chain.step(values, mass, tau - 1, 0.0)
            s = mass.sum()
            if not s > 0.0:
                raise ConditioningError(f"no in-control mass survives to time {tau - 1}")
            mass = mass / s
        out[tau - 1] = chain.expected_delay(values, mass, tau, float(shift))
    return out


def ewma_in_control_survival(params: EwmaParams, L: float, tau: int,
                             limit_mode=LimitMode.TIME_VARYING,
                             cfg: MarkovConfig = MarkovConfig()) -> float:
    """``P(RL >= tau)`` for the in-control chart."""
    tau = _check_tau(tau)
    return _Chain(params, L, limit_mode, cfg).in_control_start(tau)[2]
