"""Seeded Monte Carlo run-length estimation for GWMA and EWMA charts.

All simulation is done in standardized units, ``Y_t = (X_t - mu0) / sigma0``.
Each replicate draws one in-control noise path from its own counter-based
stream and evaluates the in-control statistic ``g_t`` on it.  A mean shift of
``delta`` starting at change point ``tau`` enters linearly, so the shifted
statistic at time ``t >= tau`` is ``g_t + delta * c_{t - tau + 1}`` where
``c_k`` is the total weight on the ``k`` newest observations.  This lets one
noise path serve every change point of a CED profile (the single-pass scheme);
the zero-state ARL is the ``tau = 1`` special case of the same computation.

GWMA statistics are dot products of a precomputed weight vector with a ring
buffer of the last ``window`` observations.  Weights beyond the window (or
below ``1e-15`` past their peak) are dropped and their mass goes to the head
weight on ``mu0``, which is zero in standardized units.

Replicates are grouped into fixed blocks of ``BLOCK`` indices.  Blocks are
summarized by exact integer moments, so the result is bit-identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numba as nb
import numpy as np

from . import __version__
from .chart import (ChartSpec, EwmaParams, GwmaParams, LimitMode, _gwma_weight_array,
                    asymptotic_variance)
from .errors import ConditioningError, EstimationError, ParameterError
from .rng import RNG_ID, ReplicateStream, normal_at, stream_key

BLOCK = 4096
WEIGHT_EPS = 1e-15
STEADY_STATE_TAU = 100
CED_SCHEME = "single-pass: one in-control noise path per replicate shared by all change points"


@dataclass(frozen=True)
class ShiftModel:
    """Mean shift of ``delta`` sigma0 affecting observations at ``t >= tau``."""

    delta: float = 0.0
    tau: int = 1

    def __post_init__(self):
        if isinstance(self.tau, bool) or int(self.tau) != self.tau or self.tau < 1:
            raise ParameterError(f"tau must be an integer >= 1, got {self.tau!r}")
        if not math.isfinite(self.delta):
            raise ParameterError(f"delta must be finite, got {self.delta!r}")


@dataclass(frozen=True)
class SimConfig:
    seed: int
    reps: int = 100_000
    window_cap: int = 10_000
    rl_cap: int = 1_000_000
    workers: int = 1

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.reps < 1:
            raise ParameterError(f"reps must be >= 1, got {self.reps}")
        if self.window_cap < 1:
            raise ParameterError(f"window_cap must be >= 1, got {self.window_cap}")
        if self.rl_cap < 2:
            raise ParameterError(f"rl_cap must be >= 2, got {self.rl_cap}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")

    def replace(self, **kw) -> "SimConfig":
        return SimConfig(**{**asdict(self), **kw})


@dataclass
class RunLengthSummary:
    estimate: float
    std_error: float
    reps_total: int
    reps_retained: int
    capped: int
    settings: dict = field(default_factory=dict)

    @property
    def biased(self) -> bool:
        """True when some replicates hit ``rl_cap`` and were counted at the cap."""
        return self.capped > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["biased"] = self.biased
        return d


# --------------------------------------------------------------------------
# numerical kernels


@nb.njit(fastmath=True, nogil=True)
def _dot(a, b):
    s = 0.0
    for j in range(a.shape[0]):
        s += a[j] * b[j]
    return s


@nb.njit(nogil=True)
def _run_block(lam, wrev, drift, lim, seed, r0, r1, taus, delta, rl_cap, codes, ic_signal):
    """Simulate replicates ``r0..r1-1`` for every change point in ``taus`` (ascending).

    ``codes[r, j]``: detection delay for ``taus[j]``; 0 if the in-control path
    signalled before the change point; ``-delay`` if ``rl_cap`` was reached.
    ``ic_signal[r]``: first in-control signal time found, 0 if none was needed.
    A positive ``lam`` selects the EWMA recursion, otherwise the GWMA window.
    """
    W = wrev.shape[0]
    buf = np.zeros(2 * W)
    g = np.empty(rl_cap)
    nlim = lim.shape[0]
    ndrift = drift.shape[0]
    ntau = taus.shape[0]
    ewma = lam > 0.0
    for r in range(r0, r1):
        key = stream_key(seed, r)
        row = r - r0
        n_g = 0
        z = 0.0
        clear = 0
        ic_signal[row] = 0
        for j in range(ntau):
            tau = taus[j]
            if ic_signal[row] == 0:
                while clear < tau - 1:
                    t = clear + 1
                    while n_g < t:
                        y = normal_at(key, n_g + 1)
                        if ewma:
                            z = (1.0 - lam) * z + lam * y
                            g[n_g] = z
                        else:
                            idx = n_g % W
                            buf[idx] = y
                            buf[idx + W] = y
                            n = min(n_g + 1, W)
                            g[n_g] = _dot(buf[idx + W - n + 1: idx + W + 1], wrev[W - n:])
                        n_g += 1
                    if abs(g[t - 1]) > lim[min(t, nlim) - 1]:
                        ic_signal[row] = t
                        break
                    clear = t
            if ic_signal[row] != 0:
                codes[row, j] = 0
                continue
            t = tau
            while True:
                while n_g < t:
                    y = normal_at(key, n_g + 1)
                    if ewma:
                        z = (1.0 - lam) * z + lam * y
                        g[n_g] = z
                    else:
                        idx = n_g % W
                        buf[idx] = y
                        buf[idx + W] = y
                        n = min(n_g + 1, W)
                        g[n_g] = _dot(buf[idx + W - n + 1: idx + W + 1], wrev[W - n:])
                    n_g += 1
                k = t - tau + 1
                v = g[t - 1] + delta * drift[min(k, ndrift) - 1]
                if abs(v) > lim[min(t, nlim) - 1]:
                    codes[row, j] = k
                    break
                if t >= rl_cap:
                    codes[row, j] = -k
                    break
                t += 1


# --------------------------------------------------------------------------
# precomputed chart arrays


def _saturation_length(params: GwmaParams, cap: int) -> tuple[np.ndarray, int]:
    """Weights up to the first index past the peak with weight < WEIGHT_EPS (at most ``cap``)."""
    n = min(cap, 1024)
    while True:
        w = _gwma_weight_array(params, n)
        peak = int(np.argmax(w))
        small = np.nonzero(w[peak:] < WEIGHT_EPS)[0]
        if small.size:
            return w, peak + int(small[0])
        if n >= cap:
            return w, n
        n = min(cap, 4 * n)


@dataclass(frozen=True)
class _Arrays:
    lam: float
    wrev: np.ndarray
    drift: np.ndarray
    lim: np.ndarray
    window: int


def chart_arrays(spec: ChartSpec, window_cap: int, rl_cap: int) -> _Arrays:
    """Reversed weights, cumulative shift weights and standardized limits for the kernel."""
    if spec.is_gwma:
        w, n_sat = _saturation_length(spec.scheme, rl_cap)
        window = max(1, min(window_cap, n_sat))
        wt = w[:window]
        wrev = wt[::-1].copy()
        drift = np.cumsum(wt)
        if spec.limit_mode is LimitMode.TIME_VARYING:
            var = np.cumsum(w[: max(n_sat, 1)] ** 2)
        else:
            var = np.array([asymptotic_variance(spec)])
        lam = 0.0
    else:
        lam = spec.scheme.lam
        if lam < 1.0:
            # (1 - lam)^k below 1e-17 is invisible next to 1
            n_sat = min(rl_cap, int(math.ceil(-40.0 / math.log1p(-lam))) + 1)
            k = np.arange(1, n_sat + 1, dtype=np.float64)
            drift = -np.expm1(k * math.log1p(-lam))
            var = lam / (2.0 - lam) * -np.expm1(2.0 * k * math.log1p(-lam))
        else:
            drift = np.ones(1)
            var = np.ones(1)
        if spec.limit_mode is LimitMode.ASYMPTOTIC:
            var = np.array([asymptotic_variance(spec)])
        wrev = np.zeros(1)
        window = 0
    lim = spec.L * np.sqrt(var)
    return _Arrays(lam, wrev, drift, lim, window)


# --------------------------------------------------------------------------
# drivers


def _check_taus(taus, rl_cap) -> np.ndarray:
    taus = np.asarray(taus, dtype=np.int64)
    if taus.size == 0 or taus[0] < 1 or np.any(np.diff(taus) <= 0):
        raise ParameterError("change points must be ascending integers >= 1")
    if taus[-1] >= rl_cap:
        raise ParameterError(f"rl_cap ({rl_cap}) must exceed every change point")
    return taus


def _codes(spec, delta, taus, cfg, r0, r1):
    arr = chart_arrays(spec, cfg.window_cap, cfg.rl_cap)
    codes = np.empty((r1 - r0, taus.size), dtype=np.int64)
    ic = np.empty(r1 - r0, dtype=np.int64)
    _run_block(arr.lam, arr.wrev, arr.drift, arr.lim, np.uint64(cfg.seed), r0, r1, taus,
               float(delta), cfg.rl_cap, codes, ic)
    return codes, ic


def simulate_delays(spec: ChartSpec, shift: ShiftModel, cfg: SimConfig,
                    start: int = 0, stop: int | None = None) -> np.ndarray:
    """Per-replicate detection codes for replicates ``start..stop-1`` (see ``_run_block``)."""
    stop = cfg.reps if stop is None else stop
    taus = _check_taus([shift.tau], cfg.rl_cap)
    return _codes(spec, shift.delta, taus, cfg, start, stop)[0][:, 0]


def simulate_run_length(spec: ChartSpec, shift: ShiftModel, stream: ReplicateStream,
                        rl_cap: int = 1_000_000, window_cap: int = 10_000) -> int:
    """Run length of one replicate; ``rl_cap`` is returned when no signal occurred."""
    cfg = SimConfig(seed=stream.seed, reps=1, window_cap=window_cap, rl_cap=rl_cap)
    taus = _check_taus([shift.tau], rl_cap)
    codes, ic = _codes(spec, shift.delta, taus, cfg, stream.replicate, stream.replicate + 1)
    c = int(codes[0, 0])
    if c == 0:
        return int(ic[0])
    if c < 0:
        return rl_cap
    return shift.tau - 1 + c


def _block_moments(arr, delta, taus, cfg, r0, r1):
    codes = np.empty((r1 - r0, taus.size), dtype=np.int64)
    ic = np.empty(r1 - r0, dtype=np.int64)
    _run_block(arr.lam, arr.wrev, arr.drift, arr.lim, np.uint64(cfg.seed), r0, r1, taus,
               float(delta), cfg.rl_cap, codes, ic)
    retained = codes != 0
    d = np.abs(codes)
    return np.stack([retained.sum(axis=0), d.sum(axis=0), (d * d).sum(axis=0),
                     (codes < 0).sum(axis=0)])


def _moments(spec, delta, taus, cfg):
    """Exact integer (n, sum, sum of squares, capped) per change point."""
    arr = chart_arrays(spec, cfg.window_cap, cfg.rl_cap)
    bounds = [(r0, min(r0 + BLOCK, cfg.reps)) for r0 in range(0, cfg.reps, BLOCK)]

    def work(b):
        return _block_moments(arr, delta, taus, cfg, *b)

    if cfg.workers == 1 or len(bounds) == 1:
        blocks = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            blocks = list(pool.map(work, bounds))
    total = [[0] * taus.size for _ in range(4)]
    for blk in blocks:
        for i in range(4):
            for j in range(taus.size):
                total[i][j] += int(blk[i, j])
    return total, arr.window


def _summary(n, s1, s2, capped, reps, settings, conditioned) -> RunLengthSummary:
    if n == 0:
        exc = ConditioningError if conditioned else EstimationError
        raise exc("no replicate survived to the change point")
    if capped == n:
        raise EstimationError("every replicate reached rl_cap; increase rl_cap")
    mean = Fraction(s1, n)
    if n > 1:
        var = Fraction(n * s2 - s1 * s1, n * (n - 1))
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return RunLengthSummary(float(mean), se, reps, n, capped, settings)


def _settings(spec, cfg, window, **extra) -> dict:
    d = {**spec.describe(), "engine": "monte-carlo", "seed": cfg.seed, "reps": cfg.reps,
         "window_cap": cfg.window_cap, "window_used": window, "rl_cap": cfg.rl_cap,
         "rng": RNG_ID, "version": __version__}
    d.update(extra)
    return d


def ced_profile(spec: ChartSpec, delta: float, tau_max: int, cfg: SimConfig,
                taus=None) -> list[RunLengthSummary]:
    """One ``RunLengthSummary`` per change point ``1..tau_max`` (or the given ``taus``)."""
    taus = np.arange(1, tau_max + 1) if taus is None else taus
    taus = _check_taus(taus, cfg.rl_cap)
    total, window = _moments(spec, delta, taus, cfg)
    out = []
    for j, tau in enumerate(taus):
        settings = _settings(spec, cfg, window, delta=float(delta), tau=int(tau),
                             ced_scheme=CED_SCHEME)
        out.append(_summary(total[0][j], total[1][j], total[2][j], total[3][j], cfg.reps,
                            settings, conditioned=tau > 1))
    return out


def ced_mc(spec: ChartSpec, shift: ShiftModel, cfg: SimConfig) -> RunLengthSummary:
    """Conditional expected delay ``E(RL - tau + 1 | RL >= tau)``."""
    return ced_profile(spec, shift.delta, shift.tau, cfg, taus=[shift.tau])[0]


def zero_state_arl_mc(spec: ChartSpec, delta: float, cfg: SimConfig) -> RunLengthSummary:
    return ced_mc(spec, ShiftModel(delta, 1), cfg)


def steady_state_arl_mc(spec: ChartSpec, delta: float, cfg: SimConfig) -> RunLengthSummary:
    """Steady-state ARL proxy: the conditional expected delay at ``tau = 100``."""
    res = ced_mc(spec, ShiftModel(delta, STEADY_STATE_TAU), cfg)
    res.settings["proxy"] = f"D_{STEADY_STATE_TAU}"
    return res
