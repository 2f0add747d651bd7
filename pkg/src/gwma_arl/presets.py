"""Named chart designs and the table/figure datasets built from them.

Each preset maps to one exhibit.  Figures 6 and 7 sample shifts on a 0.25
grid from 0 to 4; Figure 1 uses alpha in {0.5, 0.75, 1, 1.25, 1.75} with
q = 0.75 and t = 20.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import (ChartSpec, EwmaParams, GwmaParams, LimitMode, ewma_variance_series,
                    gwma_qt_series, gwma_weights)
from .calibrate import match_lambda_curve
from .markov import MarkovConfig, ewma_arl, ewma_ced_profile, ewma_steady_state_arl
from .simulate import SimConfig, ced_profile, steady_state_arl_mc, zero_state_arl_mc

Q_PAPER = 0.75
TABLE_DELTAS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0)
FIGURE_DELTAS = tuple(np.round(np.arange(0.0, 4.0001, 0.25), 2))
FIGURE1_ALPHAS = (0.5, 0.75, 1.0, 1.25, 1.75)
FIGURE2_ALPHAS = (0.8, 1.0, 1.2)
TAU_MAX = 100


@dataclass(frozen=True)
class Design:
    name: str
    spec: ChartSpec

    @property
    def engine(self) -> str:
        # EWMA (and GWMA with alpha = 1) have a Markov solution
        s = self.spec.scheme
        return "analytic" if isinstance(s, EwmaParams) else "monte-carlo"


def gwma(alpha: float, L: float, q: float = Q_PAPER) -> Design:
    return Design(f"GWMA(q={q},alpha={alpha})", ChartSpec(GwmaParams(q, alpha), L))


def ewma(lam: float, L: float) -> Design:
    return Design(f"EWMA(lambda={lam})", ChartSpec(EwmaParams(lam), L))


GWMA_050 = gwma(0.5, 3.063)
GWMA_075 = gwma(0.75, 3.028)
GWMA_080 = gwma(0.8, 3.021)
GWMA_090 = gwma(0.9, 3.001)
EWMA_025 = ewma(0.25, 3.002)
EWMA_0206 = ewma(0.206, 2.971)
EWMA_0152 = ewma(0.152, 2.915)

TABLE1 = (GWMA_050, GWMA_075, GWMA_080, GWMA_090, EWMA_025)
TABLE2 = (GWMA_050, GWMA_075, GWMA_080, GWMA_090, EWMA_0206, EWMA_0152)
CED_DESIGNS = (GWMA_080, GWMA_050, EWMA_025, EWMA_0206, EWMA_0152)
FIGURE6 = (GWMA_080, EWMA_0206)
FIGURE7 = (GWMA_050, EWMA_0152)

# exhibit -> (kind, description)
PRESETS = {
    "table-1": ("arl", "zero-state ARL, GWMA q=0.75 and EWMA lambda=0.25"),
    "table-2": ("arl", "zero-state ARL, GWMA q=0.75 and variance-matched EWMA"),
    "figure-1": ("weights", "GWMA weights, q=0.75, t=20"),
    "figure-2": ("variance", "Q_t for t=1..100, q=0.75, alpha in {0.8, 1, 1.2}"),
    "figure-3": ("match", "asymptotic Q and matching lambda, q=0.75, alpha in [0.5, 1.5]"),
    "figure-4": ("ced", "D_tau profiles, delta in {0.5, 1}"),
    "figure-5": ("ced", "D_tau profiles, delta in {2, 3}"),
    "figure-6": ("arl-ss", "zero-state and steady-state ARL, alpha=0.8 vs lambda=0.206"),
    "figure-7": ("arl-ss", "zero-state and steady-state ARL, alpha=0.5 vs lambda=0.152"),
}


def arl_rows(design: Design, deltas, engine: str | None, cfg: SimConfig | None,
             markov_cfg: MarkovConfig = MarkovConfig()):
    """Rows ``(design, delta, arl, std_error, reps_retained, engine)``."""
    engine = engine or design.engine
    spec = design.spec
    for d in deltas:
        if engine == "analytic":
            p = spec.scheme if isinstance(spec.scheme, EwmaParams) else EwmaParams(1 - spec.scheme.q)
            yield design.name, float(d), ewma_arl(p, spec.L, d, spec.limit_mode, markov_cfg), 0.0, "", engine
        else:
            r = zero_state_arl_mc(spec, d, cfg)
            yield design.name, float(d), r.estimate, r.std_error, r.reps_retained, engine


def steady_rows(design: Design, deltas, engine, cfg, markov_cfg=MarkovConfig()):
    engine = engine or design.engine
    spec = design.spec
    for d in deltas:
        if engine == "analytic":
            p = spec.scheme if isinstance(spec.scheme, EwmaParams) else EwmaParams(1 - spec.scheme.q)
            yield (design.name, float(d),
                   ewma_steady_state_arl(p, spec.L, d, spec.limit_mode, markov_cfg), 0.0, "", engine)
        else:
            r = steady_state_arl_mc(spec, d, cfg)
            yield design.name, float(d), r.estimate, r.std_error, r.reps_retained, engine


def ced_rows(design: Design, delta: float, tau_max: int, engine, cfg,
             markov_cfg=MarkovConfig()):
    """Rows ``(design, delta, tau, d_tau, std_error, reps_retained, engine)``."""
    engine = engine or design.engine
    spec = design.spec
    if engine == "analytic":
        p = spec.scheme if isinstance(spec.scheme, EwmaParams) else EwmaParams(1 - spec.scheme.q)
        prof = ewma_ced_profile(p, spec.L, delta, tau_max, spec.limit_mode, markov_cfg)
        for tau, v in enumerate(prof, start=1):
            yield design.name, float(delta), tau, float(v), 0.0, "", engine
    else:
        for tau, r in enumerate(ced_profile(spec, delta, tau_max, cfg), start=1):
            yield design.name, float(delta), tau, r.estimate, r.std_error, r.reps_retained, engine


def weight_rows(q: float, alpha: float, t: int):
    """Rows ``(index_from_newest, weight)``; the head weight on mu0 is labelled ``head``."""
    prof = gwma_weights(GwmaParams(q, alpha), t)
    for i, w in enumerate(prof.weights, start=1):
        yield i, float(w)
    yield "head", prof.head


def variance_rows(q: float, alpha: float, t_max: int):
    """Rows ``(t, Q_t)`` plus the closed-form EWMA factor when ``alpha == 1``."""
    qt = gwma_qt_series(GwmaParams(q, alpha), t_max)
    closed = ewma_variance_series(EwmaParams(1 - q), t_max) if alpha == 1.0 else None
    for t in range(1, t_max + 1):
        row = (t, float(qt[t - 1]))
        yield row + ((float(closed[t - 1]),) if closed is not None else ())


def match_rows(q: float, alpha_range, steps: int, horizon: int = 200):
    return match_lambda_curve(q, alpha_range, steps, horizon)
