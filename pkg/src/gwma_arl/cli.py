"""Command-line front end: ``gwma-arl <command> ...``.

CSV output carries ``#``-prefixed metadata lines (including the exact command
line) ahead of a header row; scalar results are JSON.  Randomized commands
require ``--seed``.  Worker count defaults to ``$GWMA_ARL_WORKERS`` or 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shlex
import sys

from . import __version__
from . import presets as P
from .calibrate import ANALYTIC, MONTE_CARLO, calibrate_limit
from .chart import ChartSpec, EwmaParams, GwmaParams, LimitMode, ProcessModel, apply_chart
from .errors import ParameterError
from .markov import MarkovConfig
from .rng import RNG_ID
from .simulate import CED_SCHEME, SimConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SIGNAL = 2
WORKERS_ENV = "GWMA_ARL_WORKERS"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for "signal" in `monitor`
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# output


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def write_csv(path, meta: dict, header, rows):
    fh, close = _open_out(path)
    try:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    finally:
        if close:
            fh.close()


def write_json(path, meta: dict, payload: dict):
    text = json.dumps({"metadata": meta, "result": payload}, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _meta(args, mc: bool = False, **extra) -> dict:
    """Run metadata; simulation settings are recorded only when a simulation ran."""
    argv = getattr(args, "argv", None) or []
    m = {"command": "gwma-arl " + shlex.join(argv), "version": __version__}
    keys = ("engine", "limit_mode", "states")
    if mc:
        m["rng"] = RNG_ID
        keys = ("seed", "reps", "window_cap", "rl_cap") + keys
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            m[k] = v
    m.update(extra)
    return m


# --------------------------------------------------------------------------
# argument helpers


def _add_chart_args(p, need_L=True):
    p.add_argument("--scheme", choices=["gwma", "ewma"], help="chart type")
    p.add_argument("--q", type=float, help="GWMA q in (0, 1)")
    p.add_argument("--alpha", type=float, help="GWMA alpha > 0")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, help="EWMA lambda in (0, 1]")
    if need_L:
        p.add_argument("--L", dest="L", type=float, help="control limit constant")
    p.add_argument("--mu0", type=float, default=0.0)
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--limit-mode", dest="limit_mode", default=LimitMode.TIME_VARYING.value,
                   choices=[m.value for m in LimitMode])


def _add_sim_args(p):
    p.add_argument("--seed", type=int, help="master seed (required for Monte Carlo)")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--window-cap", dest="window_cap", type=int, default=10_000)
    p.add_argument("--rl-cap", dest="rl_cap", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--states", type=int, default=201, help="Markov grid size (odd)")


def _chart_spec(args, L=None) -> ChartSpec:
    if args.scheme == "gwma":
        if args.q is None or args.alpha is None:
            raise CliError("--scheme gwma needs --q and --alpha")
        scheme = GwmaParams(args.q, args.alpha)
    elif args.scheme == "ewma":
        if args.lam is None:
            raise CliError("--scheme ewma needs --lam")
        scheme = EwmaParams(args.lam)
    else:
        raise CliError("--scheme is required")
    L = args.L if L is None else L
    if L is None:
        raise CliError("--L is required")
    return ChartSpec(scheme, L, ProcessModel(args.mu0, args.sigma0), LimitMode(args.limit_mode))


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def _sim_cfg(args, needed: bool) -> SimConfig | None:
    if not needed:
        return None
    if args.seed is None:
        raise CliError("Monte Carlo output requires an explicit --seed")
    return SimConfig(seed=args.seed, reps=args.reps, window_cap=args.window_cap,
                     rl_cap=args.rl_cap, workers=_workers(args))


def _engine(args, designs) -> str | None:
    e = getattr(args, "engine", "auto")
    if e == "auto":
        return None
    if e == ANALYTIC:
        for d in designs:
            s = d.spec.scheme
            if isinstance(s, GwmaParams) and s.alpha != 1.0:
                raise CliError("the analytic engine does not cover GWMA with alpha != 1")
    return e


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise CliError(f"bad number list {text!r}") from exc


def _custom_design(args) -> P.Design:
    spec = _chart_spec(args)
    s = spec.scheme
    name = (f"GWMA(q={s.q},alpha={s.alpha})" if isinstance(s, GwmaParams)
            else f"EWMA(lambda={s.lam})")
    return P.Design(name, spec)


def _needs_mc(designs, engine):
    return any((engine or d.engine) == MONTE_CARLO for d in designs)


# --------------------------------------------------------------------------
# commands


def cmd_weights(args):
    if args.preset:
        _expect(args.preset, "figure-1")
        rows = ((P.Q_PAPER, a, t, i, w) for a in P.FIGURE1_ALPHAS
                for t in [20] for i, w in P.weight_rows(P.Q_PAPER, a, 20))
        meta = _meta(args, preset="figure-1", index_order="1 = newest observation X_t; head = weight on mu0")
        write_csv(args.out, meta, ["q", "alpha", "t", "index_from_newest", "weight"], rows)
        return EXIT_OK
    _need(args, "q", "alpha", "t")
    meta = _meta(args, q=args.q, alpha=args.alpha, t=args.t,
                 index_order="1 = newest observation X_t; head = weight on mu0")
    write_csv(args.out, meta, ["index_from_newest", "weight"],
              list(P.weight_rows(args.q, args.alpha, args.t)))
    return EXIT_OK


def cmd_variance(args):
    if args.preset:
        _expect(args.preset, "figure-2")
        rows = [(a,) + r[:2] for a in P.FIGURE2_ALPHAS for r in P.variance_rows(P.Q_PAPER, a, 100)]
        write_csv(args.out, _meta(args, preset="figure-2", q=P.Q_PAPER), ["alpha", "t", "Q_t"], rows)
        return EXIT_OK
    _need(args, "q", "alpha", "t_max")
    header = ["t", "Q_t"] + (["ewma_closed_form"] if args.alpha == 1.0 else [])
    write_csv(args.out, _meta(args, q=args.q, alpha=args.alpha, t_max=args.t_max), header,
              list(P.variance_rows(args.q, args.alpha, args.t_max)))
    return EXIT_OK


def cmd_match(args):
    if args.preset:
        _expect(args.preset, "figure-3")
        q, rng, steps = P.Q_PAPER, (0.5, 1.5), 100
    else:
        _need(args, "q")
        q = args.q
        if args.alpha is not None:
            rng, steps = (args.alpha, args.alpha), 1
        elif args.alpha_range:
            rng, steps = tuple(args.alpha_range), args.steps
        else:
            raise CliError("give --alpha or --alpha-range")
    rows = P.match_rows(q, rng, steps, args.horizon)
    write_csv(args.out, _meta(args, q=q, alpha_range=list(rng), steps=steps, horizon=args.horizon),
              ["alpha", "Q", "lambda"], rows)
    return EXIT_OK


def _arl_designs(args):
    if args.preset:
        return {"table-1": P.TABLE1, "table-2": P.TABLE2, "figure-6": P.FIGURE6,
                "figure-7": P.FIGURE7}[_expect(args.preset, "table-1", "table-2", "figure-6",
                                               "figure-7")]
    return (_custom_design(args),)


def cmd_arl(args):
    designs = _arl_designs(args)
    engine = _engine(args, designs)
    if args.deltas is not None:
        deltas = _floats(args.deltas)
    elif args.preset in ("figure-6", "figure-7"):
        deltas = P.FIGURE_DELTAS
    elif args.preset:
        deltas = P.TABLE_DELTAS
    else:
        raise CliError("--deltas is required")
    cfg = _sim_cfg(args, _needs_mc(designs, engine))
    mcfg = MarkovConfig(states=args.states)
    steady = args.preset in ("figure-6", "figure-7") or args.steady_state
    rows = []
    for d in designs:
        for r in P.arl_rows(d, deltas, engine, cfg, mcfg):
            rows.append(("zero-state",) + r)
        if steady:
            for r in P.steady_rows(d, deltas, engine, cfg, mcfg):
                rows.append(("steady-state(D_100)",) + r)
    meta = _meta(args, cfg is not None, preset=args.preset or "", designs="; ".join(
        f"{d.name} L={d.spec.L}" for d in designs), deltas=",".join(map(str, deltas)))
    write_csv(args.out, meta, ["measure", "design", "delta", "arl", "std_error", "reps_retained",
                               "engine"], rows)
    return EXIT_OK


def cmd_ced(args):
    if args.preset:
        designs = P.CED_DESIGNS
        deltas = {"figure-4": (0.5, 1.0), "figure-5": (2.0, 3.0)}[
            _expect(args.preset, "figure-4", "figure-5")]
    else:
        designs = (_custom_design(args),)
        if args.delta is None:
            raise CliError("--delta is required")
        deltas = (args.delta,)
    engine = _engine(args, designs)
    cfg = _sim_cfg(args, _needs_mc(designs, engine))
    mcfg = MarkovConfig(states=args.states)
    rows = [r for d in designs for delta in deltas
            for r in P.ced_rows(d, delta, args.tau_max, engine, cfg, mcfg)]
    extra = {"ced_scheme": CED_SCHEME} if cfg is not None else {}
    meta = _meta(args, cfg is not None, preset=args.preset or "", tau_max=args.tau_max, **extra,
                 designs="; ".join(f"{d.name} L={d.spec.L}" for d in designs))
    write_csv(args.out, meta, ["design", "delta", "tau", "d_tau", "std_error", "reps_retained",
                               "engine"], rows)
    return EXIT_OK


def cmd_calibrate(args):
    spec = _chart_spec(args, L=1.0)
    engine = args.engine
    if engine == "auto":
        s = spec.scheme
        engine = ANALYTIC if isinstance(s, EwmaParams) or s.alpha == 1.0 else MONTE_CARLO
    cfg = _sim_cfg(args, engine == MONTE_CARLO)
    res = calibrate_limit(spec, args.target, engine, args.tol, cfg, MarkovConfig(states=args.states),
                          confirm_reps=args.confirm_reps or None)
    payload = res.to_dict()
    payload["history"] = [list(h) for h in payload["history"]]
    write_json(args.out, _meta(args, cfg is not None, engine=engine, target=args.target), payload)
    return EXIT_OK


def _read_series(path, column):
    values = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    col_idx = None
    start = 0
    if column is not None:
        try:
            col_idx = int(column)
        except ValueError:
            header = next(csv.reader([lines[0]])) if lines else []
            if column not in header:
                raise CliError(f"column {column!r} not in header {header}")
            col_idx = header.index(column)
            start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if col_idx is not None:
            fields = next(csv.reader([text]))
            if col_idx >= len(fields):
                raise CliError(f"line {lineno}: no column {col_idx}")
            text = fields[col_idx].strip()
        try:
            values.append(float(text))
        except ValueError:
            if col_idx is not None and start == 0 and not values:
                start = -1  # header row above an index-selected column
                continue
            raise CliError(f"line {lineno}: cannot parse {text!r} as a number") from None
    if not values:
        raise CliError("input contains no observations")
    return values


def cmd_monitor(args):
    spec = _chart_spec(args)
    series = _read_series(args.input, args.column)
    trace = apply_chart(series, spec)
    if args.trace:
        write_csv(args.trace, _meta(args, **spec.describe()), ["t", "statistic", "lcl", "ucl", "signal"],
                  trace.rows())
    if trace.signal is None:
        print("no signal")
        return EXIT_OK
    print(trace.signal)
    return EXIT_SIGNAL


def cmd_reproduce(args):
    kind = P.PRESETS[args.name][0]
    args.preset = args.name
    for k, v in {"deltas": None, "steady_state": False, "engine": "auto", "tau_max": P.TAU_MAX,
                 "horizon": 200}.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    return {"arl": cmd_arl, "arl-ss": cmd_arl, "ced": cmd_ced, "weights": cmd_weights,
            "variance": cmd_variance, "match": cmd_match}[kind](args)


def _expect(preset, *allowed):
    if preset not in allowed:
        raise CliError(f"preset {preset!r} not valid here; choose from {', '.join(allowed)}")
    return preset


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise CliError("missing " + ", ".join(missing))


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwma-arl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weights", help="GWMA weights (newest first) and head weight")
    p.add_argument("--q", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--preset", help="figure-1")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("variance", help="Q_t series")
    p.add_argument("--q", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--preset", help="figure-2")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("match", help="variance-matched EWMA lambda")
    p.add_argument("--q", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-range", dest="alpha_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--preset", help="figure-3")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("arl", help="zero-state (and optionally steady-state) ARL")
    _add_chart_args(p)
    _add_sim_args(p)
    p.add_argument("--deltas", help="comma-separated shifts in sigma0 units")
    p.add_argument("--engine", choices=["auto", ANALYTIC, MONTE_CARLO], default="auto")
    p.add_argument("--steady-state", dest="steady_state", action="store_true",
                   help="also emit the D_100 steady-state proxy")
    p.add_argument("--preset", help="table-1, table-2, figure-6, figure-7")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_arl)

    p = sub.add_parser("ced", help="conditional expected delay profile")
    _add_chart_args(p)
    _add_sim_args(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--tau-max", dest="tau_max", type=int, default=P.TAU_MAX)
    p.add_argument("--engine", choices=["auto", ANALYTIC, MONTE_CARLO], default="auto")
    p.add_argument("--preset", help="figure-4, figure-5")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ced)

    p = sub.add_parser("calibrate", help="control-limit constant for a target ARL0 (JSON)")
    _add_chart_args(p, need_L=False)
    _add_sim_args(p)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--engine", choices=["auto", ANALYTIC, MONTE_CARLO], default="auto")
    p.add_argument("--tol", type=float, default=0.5)
    p.add_argument("--confirm-reps", dest="confirm_reps", type=int, default=1_000_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_calibrate, L=None)

    p = sub.add_parser("monitor", help="apply a chart to observations; exit 2 on signal")
    p.add_argument("input", help="one observation per line, or CSV with --column")
    p.add_argument("--column", help="CSV column name or 0-based index")
    _add_chart_args(p)
    p.add_argument("--trace", help="write the (t, statistic, lcl, ucl, signal) trace here")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("reproduce", help="run a table/figure preset")
    p.add_argument("name", choices=sorted(P.PRESETS))
    _add_sim_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_reproduce, q=None, alpha=None, t=None, t_max=None, alpha_range=None,
                   steps=100)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (CliError, ParameterError, ValueError, RuntimeError, OSError) as exc:
        print(f"gwma-arl: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
