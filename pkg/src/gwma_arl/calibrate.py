"""Inverse problems: variance-matched EWMA designs and control-limit calibration."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .chart import ChartSpec, EwmaParams, GwmaParams, LimitMode, gwma_q_asymptotic
from .errors import CalibrationError, ParameterError
from .markov import MarkovConfig, ewma_arl
from .simulate import SimConfig, zero_state_arl_mc

log = logging.getLogger(__name__)

ANALYTIC = "analytic"
MONTE_CARLO = "monte-carlo"
ENGINES = (ANALYTIC, MONTE_CARLO)

# staged sign tests: replicate counts grow by this factor up to cfg.reps
STAGE_GROWTH = 10
FIRST_STAGE_REPS = 500
EARLY_RL_CAP_FACTOR = 4
SIGN_Z = 4.0
MIN_BRACKET_WIDTH = 1e-6


def match_lambda(params: GwmaParams, horizon: int = 200) -> float:
    """EWMA ``lam`` whose asymptotic variance ``lam / (2 - lam)`` equals the GWMA ``Q``."""
    Q = gwma_q_asymptotic(params, horizon)
    return 2.0 * Q / (1.0 + Q)


def match_lambda_curve(q: float, alpha_range: tuple[float, float], steps: int,
                       horizon: int = 200) -> list[tuple[float, float, float]]:
    """Rows ``(alpha, Q, lam)`` on an evenly spaced alpha grid including both ends."""
    lo, hi = alpha_range
    if steps < 1 or not (0 < lo <= hi):
        raise ParameterError("alpha_range must satisfy 0 < lo <= hi and steps >= 1")
    alphas = np.linspace(lo, hi, steps + 1) if steps > 1 or lo != hi else np.array([lo])
    rows = []
    for a in alphas:
        p = GwmaParams(q, float(a))
        Q = gwma_q_asymptotic(p, horizon)
        rows.append((float(a), Q, 2.0 * Q / (1.0 + Q)))
    return rows


@dataclass
class CalibrationResult:
    L: float
    achieved_arl0: float
    achieved_std_error: float
    iterations: int
    bracket: tuple[float, float]
    target_arl0: float = math.nan
    tolerance: float = math.nan
    engine: str = ANALYTIC
    history: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        return d


def _analytic_spec(spec: ChartSpec) -> EwmaParams:
    if isinstance(spec.scheme, EwmaParams):
        return spec.scheme
    if spec.scheme.alpha == 1.0:
        return EwmaParams(1.0 - spec.scheme.q)
    raise ParameterError("the analytic engine covers EWMA (or GWMA with alpha = 1) only")


def _expand(sign, lo, hi, max_expand=8):
    """Widen ``[lo, hi]`` until ``sign(lo) < 0 < sign(hi)``; returns the bracket and signs."""
    s_lo, s_hi = sign(lo), sign(hi)
    for _ in range(max_expand):
        if s_lo < 0 < s_hi:
            return lo, hi
        width = hi - lo
        if s_lo >= 0:
            lo = max(lo - width, lo / 2.0)
            s_lo = sign(lo)
        if s_hi <= 0:
            hi = hi + width
            s_hi = sign(hi)
    if s_lo < 0 < s_hi:
        return lo, hi
    raise CalibrationError(f"could not bracket the target ARL; last bracket [{lo}, {hi}]")


def calibrate_limit(spec: ChartSpec, target_arl0: float, engine: str = ANALYTIC,
                    tol: float = 0.5, cfg: SimConfig | None = None,
                    markov_cfg: MarkovConfig = MarkovConfig(), bracket=(2.0, 4.0),
                    max_iter: int = 60, confirm_reps: int | None = 1_000_000) -> CalibrationResult:
    """Bisection on ``L`` so the in-control zero-state ARL of ``spec`` hits ``target_arl0``.

    The ``L`` stored in ``spec`` is ignored.  ``tol`` is in ARL units.  With the
    Monte Carlo engine every iterate reuses the same replicate streams, the
    stopping rule is ``|ARL - target| <= max(tol, 2 * std_error)`` at
    ``cfg.reps`` replicates, and a confirmation run with ``confirm_reps``
    replicates (skipped if ``None``) supplies the reported ARL.
    """
    if not target_arl0 > 1:
        raise ParameterError("target_arl0 must exceed 1")
    if engine not in ENGINES:
        raise ParameterError(f"engine must be one of {ENGINES}")
    if engine == ANALYTIC:
        return _calibrate_analytic(spec, target_arl0, tol, markov_cfg, bracket, max_iter)
    if cfg is None:
        raise ParameterError("the Monte Carlo engine needs a SimConfig (seeded)")
    return _calibrate_mc(spec, target_arl0, tol, cfg, bracket, max_iter, confirm_reps)


def _calibrate_analytic(spec, target, tol, mcfg, bracket, max_iter):
    params = _analytic_spec(spec)
    mode = spec.limit_mode
    history = []

    def arl(L):
        a = ewma_arl(params, L, 0.0, mode, mcfg)
        history.append((L, a))
        return a

    lo, hi = _expand(lambda L: arl(L) - target, *bracket)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        a = arl(mid)
        if abs(a - target) <= tol:
            return CalibrationResult(mid, a, 0.0, it, (lo, hi), target, tol, ANALYTIC, history,
                                     {**spec.with_L(mid).describe(), "states": mcfg.states})
        if a < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"no convergence in {max_iter} iterations; bracket [{lo}, {hi}]")


def _calibrate_mc(spec, target, tol, cfg, bracket, max_iter, confirm_reps):
    history = []
    stages = []
    n = min(FIRST_STAGE_REPS, cfg.reps)
    while n < cfg.reps:
        stages.append(n)
        n *= STAGE_GROWTH
    stages.append(cfg.reps)
    early_cap = max(2, min(cfg.rl_cap, int(math.ceil(EARLY_RL_CAP_FACTOR * target))))

    def evaluate(L):
        """Staged estimate; returns (sign, summary, final) with sign 0 meaning 'within tolerance'."""
        s = spec.with_L(L)
        for k, reps in enumerate(stages):
            final = reps == cfg.reps
            c = cfg.replace(reps=reps, rl_cap=cfg.rl_cap if final else early_cap)
            res = zero_state_arl_mc(s, 0.0, c)
            history.append((L, reps, res.estimate, res.std_error, res.capped))
            log.debug("L=%.6f reps=%d ARL=%.3f se=%.3f capped=%d", L, reps, res.estimate,
                      res.std_error, res.capped)
            if final:
                if abs(res.estimate - target) <= max(tol, 2.0 * res.std_error):
                    return 0, res
                return (1 if res.estimate > target else -1), res
            # a capped estimate is a lower bound on the ARL
            if res.estimate - SIGN_Z * res.std_error > target:
                return 1, res
            if res.capped == 0 and res.estimate + SIGN_Z * res.std_error < target:
                return -1, res
        raise AssertionError("unreachable")

    lo, hi = _expand(lambda L: evaluate(L)[0] or 1, *bracket)
    best = None
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        sign, res = evaluate(mid)
        if sign == 0:
            best = (mid, res, it)
            break
        if sign < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < MIN_BRACKET_WIDTH:
            err = CalibrationError(
                f"Monte Carlo noise floor: ARL {res.estimate:.3f} (se {res.std_error:.3f}) at "
                f"L={mid:.6f} cannot reach target {target} within tol {tol}")
            err.history = history
            raise err
    if best is None:
        raise CalibrationError(f"no convergence in {max_iter} iterations; bracket [{lo}, {hi}]")
    L, res, it = best
    tolerance = max(tol, 2.0 * res.std_error)
    if confirm_reps:
        res = zero_state_arl_mc(spec.with_L(L), 0.0, cfg.replace(reps=confirm_reps))
    settings = {**res.settings, "search_reps": cfg.reps, "confirm_reps": confirm_reps}
    return CalibrationResult(L, res.estimate, res.std_error, it, (lo, hi), target, tolerance,
                             MONTE_CARLO, history, settings)
