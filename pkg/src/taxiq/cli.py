"""Command-line front end.

Exit codes: 0 success, 2 invalid parameters, 3 numerical failure
(instability or a degenerate intensity), 4 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import experiments, observable, partial_obs, sim, strategy
from .model import (
    OBSERVABLE,
    PARAM_NAMES,
    PARTIAL,
    REGIMES,
    ModelParams,
    NumericalError,
    ValidationError,
    ModelError,
    intensity_warnings,
    load_config,
    validate,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 4
SEED_ENV = "TAXIQ_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- serialization ------------------------------------------------------------

def _clean(obj):
    """Round floats to 12 significant digits; non-finite values become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([experiments.fmt(v) for v in row])
    return buf.getvalue()


def _record_csv(record: dict) -> str:
    flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
    return to_csv(list(flat), [list(flat.values())])


# -- argument handling ----------------------------------------------------------

def _param_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters (override --config)")
    g.add_argument("--config", help="flat 'name = value' parameter file")
    for name in PARAM_NAMES:
        g.add_argument(f"--{name}", dest=f"p_{name}", metavar="X")


def _regime_args(p: argparse.ArgumentParser, control: bool = True) -> None:
    p.add_argument("--regime", choices=REGIMES, default=PARTIAL)
    if control:
        p.add_argument("--q", type=float, help="joining probability (partial regime)")
        p.add_argument("--threshold", type=int, help="joining threshold (observable regime)")


def _grid(text: str) -> tuple[float, float, int]:
    try:
        start, stop, num = text.split(":")
        return float(start), float(stop), int(num)
    except ValueError:
        raise UsageError(f"grid must look like start:stop:num, got {text!r}") from None


def _given_params(args) -> dict:
    values = dict(load_config(args.config)) if args.config else {}
    for name in PARAM_NAMES:
        v = getattr(args, f"p_{name}")
        if v is not None:
            values[name] = v
    return values


def _params(args) -> ModelParams:
    return ModelParams.from_mapping(_given_params(args))


def _control(args):
    if args.regime == PARTIAL:
        if args.q is None:
            raise UsageError("--q is required for the partial regime")
        return args.q
    if args.threshold is None:
        raise UsageError("--threshold is required for the observable regime")
    return args.threshold


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return sim.SimConfig.seed


# -- commands -------------------------------------------------------------------

def cmd_validate(args):
    params = validate(_params(args), args.regime, warn=False)
    record = {"valid": True, "regime": args.regime, "rho0": params.rho0, "rho2": params.rho2,
              "warnings": intensity_warnings(params), "params": params.to_dict()}
    if args.format == "csv":
        return _record_csv({**record, "warnings": "; ".join(record["warnings"])})
    return to_json(record)


def cmd_stationary(args):
    params = validate(_params(args), args.regime)
    control = _control(args)
    if args.regime == PARTIAL:
        dist = partial_obs.stationary(params, control)
        extra = {"q": control, "tail_ratio": dist.tail_ratio, "tail_mass": dist.tail_mass()}
    else:
        dist = observable.stationary_observable(params, control)
        extra = {"threshold": control}
    states = [int(s) for s in dist.states]
    probs = list(dist.probabilities)
    if args.format == "csv":
        return to_csv(["state", "probability"], list(zip(states, probs)))
    return to_json({"regime": args.regime, **extra, "pi_minus_n": dist.pi_minus_n,
                    "states": states, "probabilities": probs})


def cmd_measures(args):
    params = validate(_params(args), args.regime)
    control = _control(args)
    if args.regime == PARTIAL:
        m = partial_obs.performance(params, control)
        w = partial_obs.welfare(params, control)
        record = {"regime": PARTIAL, "q": control, **dataclasses.asdict(m),
                  "utility": partial_obs.utility(params, control),
                  "welfare": w.total, "welfare_s1": w.s1, "welfare_s2": w.s2, "welfare_sm": w.sm}
    else:
        m = observable.performance_observable(params, control)
        record = {"regime": OBSERVABLE, "threshold": control, **dataclasses.asdict(m),
                  "welfare": observable.welfare_observable(params, control)}
    return _record_csv(record) if args.format == "csv" else to_json(record)


def cmd_equilibrium(args):
    params = validate(_params(args), args.regime)
    if args.regime == PARTIAL:
        record = dataclasses.asdict(strategy.equilibrium_q(params))
    else:
        record = {"regime": OBSERVABLE, "n_e": observable.equilibrium_threshold(params)}
    return _record_csv(record) if args.format == "csv" else to_json(record)


def cmd_social(args):
    params = validate(_params(args), args.regime)
    out = strategy.social_q(params) if args.regime == PARTIAL else strategy.social_n(params)
    record = {k: v for k, v in dataclasses.asdict(out).items() if v is not None}
    if args.format == "csv":
        return _record_csv({**record, "diagnostics": "; ".join(out.diagnostics)})
    return to_json(record)


def cmd_simulate(args):
    params = validate(_params(args), args.regime)
    control = _control(args)
    config = sim.SimConfig(horizon_events=args.events, warmup_events=args.warmup,
                           seed=_seed(args), replications=args.replications)
    result = sim.simulate(params, args.regime, control, config)
    if args.format == "csv":
        return to_csv(["measure", "mean", "half_width_95", "replications"],
                      [[k, e.mean, e.half_width_95, e.replications] for k, e in result.estimates.items()])
    return to_json({"regime": args.regime, "control": control, "seed": config.seed,
                    "events": config.horizon_events, "warmup": config.warmup_events,
                    "estimates": {k: e.to_dict() for k, e in result.estimates.items()},
                    "lower_bound": result.lower_bound, "frequencies": result.frequencies})


def cmd_figure(args):
    overrides = _given_params(args)
    grid = _grid(args.grid) if args.grid else None
    series = [float(s) for s in args.series.split(",")] if args.series else None
    result = experiments.run_figure(args.figure, overrides, grid=grid, series=series,
                                    seed=_seed(args))
    if args.format == "csv":
        for t in result.trends:
            print(f"trend {'PASS' if t.passed else 'FAIL'}: {t.claim} {t.detail}".rstrip(),
                  file=sys.stderr)
        return result.to_csv()
    return to_json({"figure": result.figure, "columns": result.columns,
                    "rows": [[row.get(c) for c in result.columns] for row in result.rows],
                    "trends": [dataclasses.asdict(t) for t in result.trends]})


def cmd_compare(args):
    start, stop, num = _grid(args.grid)
    # the swept parameter need not be given
    params = ModelParams.from_mapping({args.axis: start, **_given_params(args)})
    rows = strategy.compare_welfare(params, args.axis, np.linspace(start, stop, num))
    header = [args.axis, "s_partial", "s_observable", "q_star", "n_star", "error"]
    table = [[r.x, r.s_partial, r.s_observable, r.q_star, r.n_star, r.error] for r in rows]
    if args.format == "csv":
        return to_csv(header, table)
    return to_json({"axis": args.axis, "columns": header, "rows": table})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="taxiq", description="Passenger-taxi double-ended queue: strategies and welfare.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, control=True, regime=True):
        p = sub.add_parser(name, help=help_)
        _param_args(p)
        if regime:
            _regime_args(p, control)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check parameters and report warnings", control=False)
    add("stationary", cmd_stationary, "stationary distribution")
    add("measures", cmd_measures, "performance measures and welfare")
    add("equilibrium", cmd_equilibrium, "equilibrium joining strategy", control=False)
    add("social", cmd_social, "socially optimal strategy", control=False)
    p = add("simulate", cmd_simulate, "Monte Carlo estimates of the measures")
    p.add_argument("--events", type=int, default=sim.SimConfig.horizon_events)
    p.add_argument("--warmup", type=int, default=sim.SimConfig.warmup_events)
    p.add_argument("--replications", type=int, default=sim.SimConfig.replications)
    p.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV})")
    p = add("figure", cmd_figure, "sweep behind one numerical figure", regime=False)
    p.add_argument("figure", choices=experiments.FIGURES)
    p.add_argument("--grid", help="x axis as start:stop:num")
    p.add_argument("--series", help="comma-separated legend values")
    p.add_argument("--seed", type=int)
    p = add("compare", cmd_compare, "optimal welfare under both information levels", regime=False)
    p.add_argument("--axis", choices=("lambda", "alpha"), required=True)
    p.add_argument("--grid", required=True, help="start:stop:num")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            text = args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid parameters [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ModelError) as exc:
        print(f"numerical failure [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
