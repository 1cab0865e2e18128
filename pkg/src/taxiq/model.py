"""Model parameters, validation and the shared transition structure.

The system state ``n`` is the signed queue difference: ``n < 0`` means ``-n``
taxis are waiting, ``n > 0`` means ``n`` passengers are waiting. Taxis are
capped at ``capacity_n`` so the state space starts at ``-N``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Mapping

PARTIAL = "partial"
OBSERVABLE = "observable"
REGIMES = (PARTIAL, OBSERVABLE)


class ModelError(Exception):
    """Base class for all model errors. ``code`` is a stable machine tag."""

    code = "model_error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ValidationError(ModelError, ValueError):
    code = "invalid_params"


class NumericalError(ModelError, ArithmeticError):
    code = "numerical_failure"


class UnstableError(NumericalError):
    code = "unstable"


class DegenerateIntensityError(NumericalError):
    code = "degenerate_intensity"


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelParams:
    lam: float
    mu1: float
    mu2: float
    alpha: float
    capacity_n: int
    k1: float
    k2: float
    reward_r: float
    price_p: float
    cost_cp: float
    cost_ct: float
    cost_cmp: float
    cost_cmt: float

    @property
    def rho0(self) -> float:
        return self.lam / self.mu1

    @property
    def rho2(self) -> float:
        return self.lam / (self.alpha + self.mu2)

    def rho1(self, q: float) -> float:
        return q * self.lam / (self.alpha + self.mu2)

    @property
    def intensities(self) -> "TrafficIntensities":
        return TrafficIntensities(self.rho0, self.rho2)

    @property
    def matching(self) -> "MatchingTimeDistribution":
        return MatchingTimeDistribution(self.k1, self.k2)

    def with_(self, **changes) -> "ModelParams":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {name: d[name] for name in PARAM_NAMES}

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ModelParams":
        """Build from a mapping keyed by external names (``lambda``, ``mu1``, ...)."""
        unknown = set(values) - set(PARAM_NAMES) - {"lam"}
        if unknown:
            raise ValidationError(f"unknown parameter(s): {', '.join(sorted(unknown))}",
                                  "unknown_parameter")
        kwargs = {}
        for name in PARAM_NAMES:
            key = name if name in values else ("lam" if name == "lambda" else None)
            if key is None or key not in values:
                raise ValidationError(f"missing parameter: {name}", "missing_parameter")
            raw = values[key]
            try:
                value = float(raw)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                raise ValidationError(f"parameter {name} is not a number: {raw!r}",
                                      "not_a_number") from None
            if name == "capacity_n":
                if not value.is_integer():
                    raise ValidationError("capacity_n must be an integer", "capacity_not_integer")
                value = int(value)
            kwargs["lam" if name == "lambda" else name] = value
        return cls(**kwargs)


# External (config / CLI) names, in canonical order.
PARAM_NAMES = (
    "lambda", "mu1", "mu2", "alpha", "capacity_n", "k1", "k2",
    "reward_r", "price_p", "cost_cp", "cost_ct", "cost_cmp", "cost_cmt",
)
assert len(PARAM_NAMES) == len(fields(ModelParams))


@dataclass(frozen=True)
class TrafficIntensities:
    rho0: float
    rho2: float

    def rho1(self, q: float) -> float:
        return q * self.rho2


@dataclass(frozen=True)
class MatchingTimeDistribution:
    k1: float
    k2: float

    def expected(self, state: int) -> float:
        return self.k1 if state <= 0 else self.k2


def _degenerate(x: float) -> bool:
    return math.isclose(x, 1.0, rel_tol=0.0, abs_tol=1e-12)


def intensity_warnings(params: ModelParams) -> list[str]:
    out = []
    if params.rho0 >= 1.0:
        out.append("rho0 >= 1")
    return out


def validate(params: ModelParams, regime: str = PARTIAL, *, warn: bool = True) -> ModelParams:
    """Check the parameter invariants for ``regime`` and return ``params``.

    ``rho0 >= 1`` is allowed (the taxi side is finite) but triggers a
    :class:`StabilityWarning`. ``rho0 == 1`` and ``rho2 == 1`` are rejected
    because the closed forms divide by ``1 - rho``.
    """
    if regime not in REGIMES:
        raise ValidationError(f"unknown regime {regime!r}", "unknown_regime")
    p = params
    for name in ("lam", "mu1", "mu2", "alpha", "k1", "k2", "reward_r", "price_p",
                 "cost_cp", "cost_ct", "cost_cmp", "cost_cmt"):
        v = getattr(p, name)
        if not (math.isfinite(v) and v > 0):
            ext = "lambda" if name == "lam" else name
            raise ValidationError(f"{ext} must be positive and finite, got {v}",
                                  f"{ext}_not_positive")
    if int(p.capacity_n) != p.capacity_n or p.capacity_n < 1:
        raise ValidationError("capacity_n must be an integer >= 1", "capacity_invalid")
    if not p.mu1 < p.mu2:
        raise ValidationError("mu1 must be strictly less than mu2", "mu1_not_less_than_mu2")
    if not (float(p.k1).is_integer() and float(p.k2).is_integer()):
        raise ValidationError("k1 and k2 must be positive integers", "k_not_integer")
    if not p.k1 < p.k2:
        raise ValidationError("k1 must be strictly less than k2", "k1_not_less_than_k2")
    if not p.reward_r > p.price_p:
        raise ValidationError("reward_r must exceed price_p", "reward_not_above_price")
    if _degenerate(p.rho0):
        raise DegenerateIntensityError("rho0 = lambda/mu1 equals 1")
    if _degenerate(p.rho2):
        raise DegenerateIntensityError("rho2 = lambda/(alpha+mu2) equals 1")
    if regime == PARTIAL and p.rho2 >= 1.0:
        raise UnstableError(f"rho2 = {p.rho2:.6g} >= 1: passenger queue unstable at q = 1")
    if warn:
        for msg in intensity_warnings(p):
            warnings.warn(msg, StabilityWarning, stacklevel=2)
    return p


def transition_rates(
    params: ModelParams,
    state: int,
    regime: str = PARTIAL,
    *,
    q: float | None = None,
    threshold: int | None = None,
) -> list[tuple[int, float]]:
    """Outgoing transitions ``(target, rate)`` of ``state``; zero rates are omitted.

    Partial observability uses joining probability ``q``; the observable regime
    uses ``threshold`` (passengers join iff the passenger queue is below it).
    """
    n_cap = params.capacity_n
    if regime == PARTIAL:
        if q is None or not 0.0 <= q <= 1.0:
            raise ValidationError("partial regime needs q in [0, 1]", "q_out_of_range")
        top = None
        join = q
    elif regime == OBSERVABLE:
        if threshold is None or threshold < 0:
            raise ValidationError("observable regime needs a threshold >= 0",
                                  "threshold_out_of_range")
        top = threshold
        join = 1.0
    else:
        raise ValidationError(f"unknown regime {regime!r}", "unknown_regime")
    if state < -n_cap or (top is not None and state > top):
        raise ValidationError(f"state {state} outside the state space", "state_out_of_range")

    up = params.lam if state < 0 else params.lam * join
    if top is not None and state >= top:
        up = 0.0
    if state > 0:
        down = params.alpha + params.mu2
    elif state > -n_cap:
        down = params.mu1
    else:
        down = 0.0

    out = []
    if up > 0:
        out.append((state + 1, up))
    if down > 0:
        out.append((state - 1, down))
    return out


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``name = value`` lines. ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'name = value'",
                                  "config_syntax")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValidationError(f"config line {lineno}: empty name", "config_syntax")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def format_config(params: ModelParams, extra: Iterable[tuple[str, object]] = ()) -> str:
    lines = [f"{k} = {v!r}" for k, v in params.to_dict().items()]
    lines += [f"{k} = {v}" for k, v in extra]
    return "\n".join(lines) + "\n"
