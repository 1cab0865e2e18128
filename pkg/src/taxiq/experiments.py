"""Parameter sweeps behind the numerical figures, and random parameter draws."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import observable as obs
from . import strategy
from .model import OBSERVABLE, PARAM_NAMES, ModelError, ModelParams, StabilityWarning, ValidationError, validate

FIGURES = ("5a", "5b", "6a", "6b", "7a", "7b", "8a", "8b", "9", "10")
INTEGER_AXES = {"capacity_n", "k1", "k2"}
FLOAT_TREND_TOL = 1e-6

_COLUMNS = {
    "q_e": ["q_e", "regime", "l_po", "v_po"],
    "q_star": ["q_star", "welfare_at_opt", "boundary"],
    "n_e": ["n_e"],
    "n_star": ["n_star", "welfare_at_opt", "boundary"],
    "welfare": ["s_partial", "s_observable", "q_star", "n_star"],
}


def load_manifest() -> dict:
    text = resources.files("taxiq").joinpath("data/figures.json").read_text()
    data = json.loads(text)
    data.pop("_doc", None)
    return data


def fmt(value) -> str:
    """Text form used in every table: floats at 12 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def grid_values(name: str, start: float, stop: float, num: int) -> list:
    if num < 1:
        raise ValidationError("grid needs at least one point", "bad_grid")
    xs = np.linspace(float(start), float(stop), int(num))
    if name in INTEGER_AXES:
        return sorted({int(round(x)) for x in xs})
    return [float(x) for x in xs]


@dataclass(frozen=True)
class TrendCheck:
    claim: str
    passed: bool
    detail: str = ""


@dataclass
class FigureResult:
    figure: str
    columns: list[str]
    rows: list[dict]
    trends: list[TrendCheck] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    @property
    def all_passed(self) -> bool:
        return all(t.passed for t in self.trends)


def _base_params(spec: dict, overrides: dict) -> dict:
    unknown = set(overrides) - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"unknown override(s): {', '.join(sorted(unknown))}", "unknown_parameter")
    values = {name: entry["value"] for name, entry in spec["params"].items()}
    values.update(overrides)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise ValidationError(f"figure needs a value for: {', '.join(missing)}", "missing_parameter")
    return values


def _point(quantity: str, params: ModelParams) -> dict:
    if quantity == "q_e":
        out = strategy.equilibrium_q(params)
        return {"q_e": out.q_e, "regime": out.regime, "l_po": out.l_po, "v_po": out.v_po}
    if quantity == "q_star":
        out = strategy.social_q(params)
        return {"q_star": out.q_star, "welfare_at_opt": out.welfare_at_opt, "boundary": out.boundary}
    if quantity == "n_e":
        validate(params, OBSERVABLE, warn=False)
        return {"n_e": obs.equilibrium_threshold(params)}
    if quantity == "n_star":
        out = strategy.social_n(params)
        return {"n_star": out.n_star, "welfare_at_opt": out.welfare_at_opt, "boundary": out.boundary}
    row = strategy.compare_welfare(params, "lambda", [params.lam])[0]
    if row.error:
        raise ModelError(row.error, "point_failed")
    return {"s_partial": row.s_partial, "s_observable": row.s_observable,
            "q_star": row.q_star, "n_star": row.n_star}


def _monotone(values: list, direction: str) -> tuple[bool, str]:
    pts = [(i, v) for i, v in enumerate(values) if v is not None]
    for (i, a), (j, b) in zip(pts, pts[1:]):
        tol = 0 if isinstance(a, int) and isinstance(b, int) else FLOAT_TREND_TOL
        if direction == "nondecreasing" and b < a - tol:
            return False, f"drops from {fmt(a)} to {fmt(b)} at index {j}"
        if direction == "nonincreasing" and b > a + tol:
            return False, f"rises from {fmt(a)} to {fmt(b)} at index {j}"
    return True, ""


def _check_trends(spec: dict, rows: list[dict], x_name: str, series_name: str | None) -> list[TrendCheck]:
    checks = []
    for trend in spec["trends"]:
        if trend.get("kind") == "crossing":
            ok_rows = [r for r in rows if not r["error"]]
            above = [r[x_name] for r in ok_rows if r["s_observable"] > r["s_partial"]]
            below = [r[x_name] for r in ok_rows if r["s_observable"] < r["s_partial"]]
            passed = bool(above and below and min(above) < max(below))
            detail = (f"observable ahead at {fmt(min(above))}, behind at {fmt(max(below))}"
                      if passed else "no crossing in the sweep")
            checks.append(TrendCheck(trend["claim"], passed, detail))
            continue
        col, direction = trend["column"], trend["direction"]

        def value(r):
            return None if r["error"] else r.get(col)

        groups: dict = {}
        if trend["along"] == "x":
            for r in rows:
                groups.setdefault(r.get(series_name) if series_name else None, []).append(value(r))
        else:
            for r in rows:
                groups.setdefault(r[x_name], []).append(value(r))
        passed, detail = True, ""
        for key, vals in groups.items():
            ok, why = _monotone(vals, direction)
            if not ok:
                passed = False
                detail = f"{why} ({'series' if trend['along'] == 'x' else x_name} = {fmt(key)})"
                break
        checks.append(TrendCheck(trend["claim"], passed, detail))
    return checks


def run_figure(figure: str, overrides: dict | None = None, *, grid: tuple | None = None,
               series: list | None = None, seed: int | None = None) -> FigureResult:
    """Sweep one figure's axis (and legend series) and check its stated trends.

    ``overrides`` replaces caption values by external parameter name, ``grid``
    is ``(start, stop, num)`` for the x axis and ``series`` replaces the legend
    values. The sweeps are deterministic; ``seed`` is accepted for interface
    symmetry with the simulator and does not change any value.
    """
    figure = str(figure)
    manifest = load_manifest()
    if figure not in manifest:
        raise ValidationError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}",
                              "unknown_figure")
    spec = manifest[figure]
    values = _base_params(spec, dict(overrides or {}))
    xs = spec["x"]
    x_name = xs["name"]
    start, stop, num = grid if grid is not None else (xs["start"], xs["stop"], xs["num"])
    x_values = grid_values(x_name, start, stop, num)
    series_name = spec["series"]["name"] if "series" in spec else None
    series_values = [None]
    if series_name:
        series_values = list(series) if series is not None else spec["series"]["values"]
        if series_name in INTEGER_AXES:
            series_values = [int(v) for v in series_values]

    quantity = spec["quantity"]
    columns = ([series_name] if series_name else []) + [x_name] + _COLUMNS[quantity] + ["error"]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        for sv in series_values:
            for x in x_values:
                point = dict(values)
                if series_name:
                    point[series_name] = sv
                point[x_name] = x
                row = {series_name: sv} if series_name else {}
                row[x_name] = x
                row["error"] = ""
                try:
                    row.update(_point(quantity, ModelParams.from_mapping(point)))
                except ModelError as exc:
                    row["error"] = exc.code
                rows.append(row)
    return FigureResult(figure, columns, rows, _check_trends(spec, rows, x_name, series_name))


# -- random draws -------------------------------------------------------------

def random_params(rng: np.random.Generator, *, rho0_above_one: bool = False,
                  margin: float = 1e-3) -> ModelParams:
    """Draw a valid parameter set with ``rho2 < 1``.

    ``rho0`` lands below or above 1 as requested, never within ``margin`` of 1.
    """
    while True:
        mu1 = rng.uniform(0.5, 5.0)
        mu2 = mu1 + rng.uniform(0.2, 4.0)
        alpha = rng.uniform(0.1, 5.0)
        if rho0_above_one:
            lam = mu1 * rng.uniform(1.0 + margin, 3.0)
        else:
            lam = mu1 * rng.uniform(0.05, 1.0 - margin)
        if lam / (alpha + mu2) >= 1.0 - margin:
            continue
        k1 = int(rng.integers(1, 5))
        price = rng.uniform(1.0, 10.0)
        return ModelParams(
            lam=lam, mu1=mu1, mu2=mu2, alpha=alpha,
            capacity_n=int(rng.integers(1, 41)),
            k1=k1, k2=k1 + int(rng.integers(1, 5)),
            reward_r=price + rng.uniform(0.5, 25.0), price_p=price,
            cost_cp=rng.uniform(0.2, 6.0), cost_ct=rng.uniform(0.2, 6.0),
            cost_cmp=rng.uniform(0.05, 3.0), cost_cmt=rng.uniform(0.05, 3.0),
        )


def random_draws(count: int, seed: int, **kwargs) -> list[ModelParams]:
    rng = np.random.default_rng(seed)
    return [random_params(rng, **kwargs) for _ in range(count)]
