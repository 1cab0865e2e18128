"""Event-driven CTMC simulation of the passenger-taxi queue.

The simulator is an oracle for the closed forms, so it shares nothing with
them except the transition rates. Impatience is an aggregate exit rate
``alpha`` whenever passengers wait (not ``n * alpha``), because that is the
generator the analytic results are built on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .model import OBSERVABLE, PARTIAL, ModelParams, UnstableError, ValidationError

CHUNK = 1 << 16

# accumulator slots
_T, _ADMIT, _TAXI, _RENEGE, _AREA_LP, _AREA_LT, _AREA_M, _T_GE0, _ADMIT_K = range(9)
_N_ACC = 9


@dataclass(frozen=True)
class SimConfig:
    horizon_events: int = 1_000_000
    warmup_events: int = 10_000
    seed: int = 12345
    replications: int = 5

    def __post_init__(self):
        if not self.horizon_events > self.warmup_events >= 0:
            raise ValidationError("need horizon_events > warmup_events >= 0", "bad_sim_config")
        if self.replications < 1:
            raise ValidationError("need replications >= 1", "bad_sim_config")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer", "bad_sim_config")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    half_width_95: float
    replications: int

    def covers(self, value: float, widths: float = 2.0) -> bool:
        return abs(value - self.mean) <= widths * self.half_width_95

    def to_dict(self) -> dict:
        return {"mean": self.mean, "half_width_95": self.half_width_95,
                "replications": self.replications}


def estimate(samples) -> SimEstimate:
    x = np.asarray(samples, dtype=float)
    r = len(x)
    if r < 2:
        return SimEstimate(float(x.mean()), math.inf, r)
    hw = stats.t.ppf(0.975, r - 1) * x.std(ddof=1) / math.sqrt(r)
    return SimEstimate(float(x.mean()), float(hw), r)


@dataclass
class SimResult:
    estimates: dict[str, SimEstimate]
    lower_bound: int
    frequencies: np.ndarray  # time-weighted, pooled over replications
    occupancy: np.ndarray  # pooled time in each state
    exits: np.ndarray  # pooled jumps out of each state
    per_replication: dict[str, list[float]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> SimEstimate:
        return self.estimates[name]

    def freq(self, n: int) -> float:
        i = n - self.lower_bound
        return float(self.frequencies[i]) if 0 <= i < len(self.frequencies) else 0.0


@njit(cache=True)
def _run_chunk(state, lam, mu1, mu2, alpha, n_cap, q, top, k1, k2,
               expo, u, v, record_from, occupancy, exits, acc):
    # returns the new state, or a value below -n_cap on overflow
    size = occupancy.shape[0]
    for i in range(expo.shape[0]):
        if state < 0:
            up = lam
        elif top >= 0:
            up = lam if state < top else 0.0
        else:
            up = lam * q
        if state > 0:
            down = alpha + mu2
        elif state > -n_cap:
            down = mu1
        else:
            down = 0.0
        total = up + down
        dt = expo[i] / total
        if i >= record_from:
            acc[0] += dt
            occupancy[state + n_cap] += dt
            if state > 0:
                acc[4] += state * dt
                acc[6] += k2 * dt
            else:
                acc[5] += -state * dt
                acc[6] += k1 * dt
            if state >= 0:
                acc[7] += dt
        if i >= record_from:
            exits[state + n_cap] += 1.0
        if u[i] * total < up:
            state += 1
            if i >= record_from:
                acc[1] += 1.0
                acc[8] += k2 if state > 0 else k1
            if state + n_cap >= size:
                return -n_cap - 1
        else:
            if state > 0:
                if v[i] * (alpha + mu2) < mu2:
                    if i >= record_from:
                        acc[2] += 1.0
                elif i >= record_from:
                    acc[3] += 1.0
            elif i >= record_from:
                acc[2] += 1.0
            state -= 1
    return state


def _passenger_room(params: ModelParams, regime: str, control: float) -> tuple[float, int, int]:
    """(q, top, allocated passenger states) for the kernel."""
    if regime == PARTIAL:
        q = float(control)
        if not 0.0 <= q <= 1.0:
            raise ValidationError("q must lie in [0, 1]", "q_out_of_range")
        r1 = params.rho1(q)
        if r1 >= 1.0:
            raise UnstableError(f"rho1 = {r1:.6g} >= 1")
        room = 64 if r1 == 0.0 else int(min(2_000_000, 64 + math.ceil(-40.0 / math.log(r1))))
        return q, -1, room
    if regime == OBSERVABLE:
        if int(control) != control or control < 0:
            raise ValidationError("threshold must be a nonnegative integer", "threshold_out_of_range")
        return 1.0, int(control), int(control) + 1
    raise ValidationError(f"unknown regime {regime!r}", "unknown_regime")


def _replicate(params, q, top, room, config, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_cap = params.capacity_n
    occupancy = np.zeros(n_cap + 1 + room)
    exits = np.zeros_like(occupancy)
    acc = np.zeros(_N_ACC)
    state = 0
    done = 0
    while done < config.horizon_events:
        m = min(CHUNK, config.horizon_events - done)
        expo = rng.standard_exponential(m)
        u = rng.random(m)
        v = rng.random(m)
        record_from = max(0, min(m, config.warmup_events - done))
        state = _run_chunk(state, params.lam, params.mu1, params.mu2, params.alpha, n_cap,
                           q, top, params.k1, params.k2, expo, u, v, record_from, occupancy, exits, acc)
        if state < -n_cap:
            raise UnstableError("simulated passenger queue outgrew its allocation")
        done += m
    return occupancy, exits, acc


def _measures(params: ModelParams, q: float, regime: str, acc: np.ndarray) -> dict[str, float]:
    t = acc[_T]
    lp = acc[_ADMIT] / t
    lt = acc[_TAXI] / t
    el_p = acc[_AREA_LP] / t
    el_t = acc[_AREA_LT] / t
    em = acc[_AREA_M] / t
    p = params.price_p
    out = {
        "lambda_p_eff": lp,
        "lambda_t_eff": lt,
        "el_p": el_p,
        "el_t": el_t,
        "ew_p": el_p / lp if lp > 0 else 0.0,
        "ew_t": el_t / lt if lt > 0 else 0.0,
        "em": em,
        "welfare": (lp * (params.reward_r - p) + lt * p
                    - params.cost_cp * el_p - params.cost_ct * el_t
                    - em * (params.cost_cmp * lp + params.cost_cmt * lt)),
        "reneging_rate": acc[_RENEGE] / t,
        "admission_matching_time": acc[_ADMIT_K] / acc[_ADMIT] if acc[_ADMIT] else 0.0,
    }
    if regime == PARTIAL:
        p_ge0 = acc[_T_GE0] / t
        denom = params.lam * q * p_ge0
        out["conditional_wait"] = el_p / denom if denom > 0 else math.nan
    return out


def simulate(params: ModelParams, regime: str, control: float, config: SimConfig | None = None) -> SimResult:
    """Simulate ``config.replications`` independent runs.

    ``control`` is the joining probability (partial regime) or the threshold
    (observable regime). Each replication draws from its own child of
    ``SeedSequence(config.seed)``, so results depend only on the inputs.
    """
    config = config or SimConfig()
    q, top, room = _passenger_room(params, regime, control)
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    per: dict[str, list[float]] = {}
    pooled = pooled_exits = None
    for child in children:
        occupancy, exits, acc = _replicate(params, q, top, room, config, np.random.default_rng(child))
        pooled = occupancy if pooled is None else pooled + occupancy
        pooled_exits = exits if pooled_exits is None else pooled_exits + exits
        for name, value in _measures(params, q, regime, acc).items():
            per.setdefault(name, []).append(value)
    last = np.max(np.nonzero(pooled)[0]) if pooled.any() else 0
    freqs = pooled[: last + 1] / pooled.sum()
    return SimResult(
        estimates={name: estimate(vals) for name, vals in per.items()},
        lower_bound=-params.capacity_n,
        frequencies=freqs,
        occupancy=pooled[: last + 1],
        exits=pooled_exits[: last + 1],
        per_replication=per,
    )


def estimate_conditional_wait(params: ModelParams, q: float, config: SimConfig | None = None) -> SimEstimate:
    """Little's-law estimate of the wait of a passenger who finds no taxi."""
    if q <= 0.0:
        raise ValidationError("conditional wait needs q > 0", "q_out_of_range")
    return simulate(params, PARTIAL, q, config)["conditional_wait"]


def total_variation(p: np.ndarray, p_lower: int, r: np.ndarray, r_lower: int) -> float:
    lo = min(p_lower, r_lower)
    hi = max(p_lower + len(p), r_lower + len(r))
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p_lower - lo: p_lower - lo + len(p)] = p
    b[r_lower - lo: r_lower - lo + len(r)] = r
    return 0.5 * float(np.abs(a - b).sum())
