"""Stationary analysis of the fully observable regime.

Passengers see both queues and join iff the passenger queue is shorter than
the threshold ``n_s``, so the state space is ``{-N, ..., n_s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .model import DegenerateIntensityError, ModelParams, ValidationError
from .partial_obs import PerformanceMeasures, taxi_weights

DECREASING = "decreasing"
INCREASING = "increasing"
DECREASING_HIGH = "decreasing_high"


def _check_degenerate(params: ModelParams) -> None:
    if params.rho0 == 1.0:
        raise DegenerateIntensityError("rho0 = lambda/mu1 equals 1")
    if params.rho2 == 1.0:
        raise DegenerateIntensityError("rho2 = lambda/(alpha+mu2) equals 1")


def _check_threshold(n_s: int) -> None:
    if int(n_s) != n_s or n_s < 0:
        raise ValidationError(f"threshold must be a nonnegative integer, got {n_s}",
                              "threshold_out_of_range")


def utility_observable(params: ModelParams, n: int) -> float:
    """Net benefit of joining behind ``n`` waiting passengers."""
    return (params.reward_r - params.price_p
            - params.cost_cp * (n + 1) / params.mu2
            - params.cost_cmp * params.k2)


def equilibrium_threshold(params: ModelParams) -> int:
    """Largest ``n`` such that joining behind ``n - 1`` passengers is worthwhile.

    Returns 0 when the net reward after matching cost is not positive.
    """
    surplus = params.reward_r - params.price_p - params.cost_cmp * params.k2
    x = surplus * params.mu2 / params.cost_cp
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        x = float(nearest)
    return max(0, math.floor(x))


@dataclass(frozen=True)
class ObservableStationary:
    lower_bound: int
    probabilities: np.ndarray
    pi_minus_n: float
    threshold: int

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.lower_bound, self.threshold + 1)

    def prob(self, n: int) -> float:
        if n < self.lower_bound or n > self.threshold:
            return 0.0
        return float(self.probabilities[n - self.lower_bound])

    def total_mass(self) -> float:
        return math.fsum(self.probabilities)


def _weights(params: ModelParams, n_s: int) -> np.ndarray:
    w, c0 = taxi_weights(params.rho0, params.capacity_n)
    r2 = params.rho2
    k = np.arange(1, n_s + 1, dtype=float)
    if r2 <= 1.0 or n_s == 0:
        return np.concatenate([w, c0 * r2 ** k])
    # rho2 > 1 forces rho0 > 1, so c0 = 1; rescale so the top state has mass 1
    shift = n_s * math.log(r2)
    return np.concatenate([w * math.exp(-shift), np.exp(k * math.log(r2) - shift)])


def stationary_observable(params: ModelParams, n_s: int) -> ObservableStationary:
    _check_threshold(n_s)
    _check_degenerate(params)
    w = _weights(params, n_s)
    probs = w / w.sum()
    return ObservableStationary(lower_bound=-params.capacity_n, probabilities=probs,
                                pi_minus_n=float(probs[0]), threshold=int(n_s))


def pi_minus_n_closed_form(params: ModelParams, n_s: int) -> float:
    r0, r2, n = params.rho0, params.rho2, params.capacity_n
    return (1 - r0) * (1 - r2) / (1 - r2 - r0 ** (n + 1) + r0 ** n * r2
                                  - r0 ** n * r2 ** (n_s + 1) + r0 ** (n + 1) * r2 ** (n_s + 1))


def performance_observable(params: ModelParams, n_s: int) -> PerformanceMeasures:
    dist = stationary_observable(params, n_s)
    p = dist.probabilities
    n_cap = params.capacity_n
    states = dist.states
    lp = params.lam * math.fsum(p[:-1])
    lt = params.mu1 * math.fsum(p[1:n_cap + 1]) + params.mu2 * math.fsum(p[n_cap + 1:])
    el_p = math.fsum(np.clip(states, 0, None) * p)
    el_t = math.fsum(np.clip(-states, 0, None) * p)
    em = params.k1 * math.fsum(p[:n_cap + 1]) + params.k2 * math.fsum(p[n_cap + 1:])
    return PerformanceMeasures(
        lambda_p_eff=lp, lambda_t_eff=lt, el_p=el_p, el_t=el_t,
        ew_p=el_p / lp, ew_t=el_t / lt, em=em, passenger_flow=n_s > 0,
    )


def closed_form_measures_observable(params: ModelParams, n_s: int) -> dict[str, float]:
    """Geometric-sum closed forms, for cross-checking only."""
    lam, mu2 = params.lam, params.mu2
    r0, r2, n = params.rho0, params.rho2, params.capacity_n
    k1, k2 = params.k1, params.k2
    pi = pi_minus_n_closed_form(params, n_s)
    up = r2 * (1 - r2 ** n_s) / (1 - r2)
    return {
        "pi_minus_n": pi,
        "lambda_p_eff": lam * pi * ((1 - r0 ** n) / (1 - r0) + r0 ** n * (1 - r2 ** n_s) / (1 - r2)),
        "lambda_t_eff": pi * (lam * (1 - r0 ** n) / (1 - r0) + mu2 * r0 ** n * up),
        "el_p": pi * r0 ** n * (r2 + r2 ** (n_s + 1) * (n_s * r2 - n_s - 1)) / (1 - r2) ** 2,
        "el_t": pi * (r0 ** (n + 1) - r0 + n - n * r0) / (1 - r0) ** 2,
        "em": pi * (k1 + k1 * r0 * (1 - r0 ** n) / (1 - r0) + k2 * r0 ** n * up),
    }


def welfare_observable(params: ModelParams, n_s: int) -> float:
    m = performance_observable(params, n_s)
    p = params.price_p
    return (m.lambda_p_eff * (params.reward_r - p) + m.lambda_t_eff * p
            - params.cost_cp * m.el_p - params.cost_ct * m.el_t
            - m.em * (params.cost_cmp * m.lambda_p_eff + params.cost_cmt * m.lambda_t_eff))


def welfare_observable_by_waits(params: ModelParams, n_s: int) -> float:
    m = performance_observable(params, n_s)
    p = params.price_p
    return (m.lambda_p_eff * (params.reward_r - p - params.cost_cp * m.ew_p - params.cost_cmp * m.em)
            + m.lambda_t_eff * (p - params.cost_ct * m.ew_t - params.cost_cmt * m.em))


def welfare_increments(params: ModelParams, n_max: int) -> tuple[float, np.ndarray, np.ndarray]:
    """``S(1)`` and the forward differences ``S(n+1) - S(n)`` for ``n = 1..n_max-1``.

    Raising the threshold from ``n`` to ``n+1`` adds one state of relative
    mass ``omega``; every measure moves by a convex update, so the difference
    is ``omega * bracket`` with no cancellation between nearly equal welfare
    values. Also returns the brackets, whose sign is the sign of the
    difference even after ``omega`` underflows.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1", "threshold_out_of_range")
    _check_degenerate(params)
    lam, mu2, a = params.lam, params.mu2, params.alpha
    r, p = params.reward_r, params.price_p
    cp, ct, cmp_, cmt, k2 = params.cost_cp, params.cost_ct, params.cost_cmp, params.cost_cmt, params.k2
    m = performance_observable(params, 1)
    lp, lt, elp, elt, em = m.lambda_p_eff, m.lambda_t_eff, m.el_p, m.el_t, m.em
    s1 = welfare_observable(params, 1)

    dist = stationary_observable(params, 1)
    ratio = 1.0 / dist.probabilities[-1]  # W(n) / w_n at n = 1
    r2 = params.rho2
    d = cmp_ * (a + mu2) + cmt * mu2
    diffs = np.empty(max(n_max - 1, 0))
    brackets = np.empty_like(diffs)
    for i, n in enumerate(range(1, n_max)):
        with np.errstate(over="ignore"):  # omega underflowing to 0 is harmless
            ratio = ratio / r2 + 1.0
        omega = 1.0 / ratio
        lin = (r - p) * lp + p * lt - cp * elp - ct * elt
        f = cmp_ * lp + cmt * lt
        c = (r - p) * (a + mu2) + p * mu2 - cp * (n + 1)
        br = c - lin - em * (d - f) - f * (k2 - em) - omega * (k2 - em) * (d - f)
        brackets[i] = br
        diffs[i] = omega * br
        keep = 1.0 - omega
        lp = keep * lp + omega * (a + mu2)
        lt = keep * lt + omega * mu2
        elp = keep * elp + omega * (n + 1)
        elt = keep * elt
        em = keep * em + omega * k2
    return s1, diffs, brackets


def welfare_profile(params: ModelParams, n_max: int) -> np.ndarray:
    """``S(n)`` for ``n = 1..n_max`` built from accurate increments."""
    s1, diffs, _ = welfare_increments(params, n_max)
    return s1 + np.concatenate([[0.0], np.cumsum(diffs)])


@dataclass(frozen=True)
class ThresholdInequalityTerms:
    a5: float
    e1: float
    e2: float
    e3: float
    m1: float
    d2: float
    rho0: float
    rho2: float
    rho0_pow_n: float
    cost_cp: float

    def g(self, x: float) -> float:
        r0, r2 = self.rho0, self.rho2
        return (self.cost_cp * r2 * self.a5 * (1 - r2) * x
                - self.cost_cp * r2 * self.rho0_pow_n * r2 * (1 - r0) * (1 - r2 ** x)
                + self.e2 * r2 ** (2 * x))


def threshold_terms(params: ModelParams) -> ThresholdInequalityTerms:
    """Constants of the closed-form optimal-threshold condition ``g(n) = M1``."""
    _check_degenerate(params)
    lam, mu2, a = params.lam, params.mu2, params.alpha
    r0, r2, n = params.rho0, params.rho2, params.capacity_n
    r, p = params.reward_r, params.price_p
    cp, ct, cmp_, cmt = params.cost_cp, params.cost_ct, params.cost_cmp, params.cost_cmt
    k1, k2 = params.k1, params.k2
    r0n = r0 ** n
    a5 = 1 - r2 - r0 ** (n + 1) + r0n * r2
    e1 = (mu2 * r0n * (1 - r0) * r2 * p
          - cmp_ * (k2 * lam * r0n * (1 - r0n) * r2 + k1 * lam * r0n * (1 - r0)
                    + k1 * lam * r0 ** (n + 1) * (1 - r0n))
          - cmt * (k2 * lam * r0n * (1 - r0n) * r2 + k1 * mu2 * r0n * r2 * (1 - r0)
                   + k1 * mu2 * r0 ** (n + 1) * r2 * (1 - r0n)))
    e2 = cmp_ * k2 * lam * r0 ** (2 * n) * r2 * (1 - r0) + cmt * k2 * mu2 * r0 ** (2 * n) * r2 ** 2 * (1 - r0)
    k1_block = k1 * lam * (1 - r0n) * (1 - r2) + k1 * lam * r0 * (1 - r0n) ** 2 * (1 - r2) / (1 - r0)
    e3 = (lam * (1 - r0n) * (1 - r2) * p
          - ct * (1 - r2) * (n - r0 * (1 - r0n) / (1 - r0))
          - cmp_ * k1_block - cmt * k1_block)
    d2 = a * r0n * (r0 ** (n + 1) - r0 + n - n * r0)
    tail = r0n * (r0 - 1)
    m1 = ((r - p) * lam * a5 * (1 - r2) ** 2 + e3 * r2 * (r2 - 1)
          - e1 * ((1 - r2) * r2 + a5 * (1 - r2) / tail)
          + e2 * r2 + 2 * a5 * d2 / tail - a5 * d2 * (1 + r2) / tail)
    return ThresholdInequalityTerms(a5=a5, e1=e1, e2=e2, e3=e3, m1=m1, d2=d2,
                                    rho0=r0, rho2=r2, rho0_pow_n=r0n, cost_cp=cp)


def g_monotonicity_class(params: ModelParams) -> str:
    """Claimed shape of ``g`` by the region of ``(rho0, rho2)``."""
    _check_degenerate(params)
    r0, r2 = params.rho0, params.rho2
    if r0 < 1.0:
        return DECREASING
    if r2 < 1.0:
        return INCREASING
    return DECREASING_HIGH


def inequality_existence(params: ModelParams) -> tuple[str, str]:
    """``(case, verdict)`` for the equation ``g(n) = M1``.

    ``verdict`` is ``none``, ``unique_gt1`` or ``unique_eq1``.
    """
    terms = threshold_terms(params)
    cls = g_monotonicity_class(params)
    g1, m1 = terms.g(1.0), terms.m1
    if math.isclose(g1, m1, rel_tol=1e-12, abs_tol=1e-300):
        return cls, "unique_eq1"
    above = g1 > m1
    if cls == INCREASING:
        return cls, "none" if above else "unique_gt1"
    return cls, "unique_gt1" if above else "none"


def solve_threshold_equation(params: ModelParams, n_limit: int = 1 << 20) -> int | None:
    """Integer ``n`` with ``M1`` between ``g(n)`` and ``g(n+1)``, via bisection.

    Returns ``None`` when no sign change of ``g - M1`` is found up to ``n_limit``.
    """
    terms = threshold_terms(params)

    def h(n):
        return terms.g(float(n)) - terms.m1

    h1 = h(1)
    if h1 == 0.0:
        return 1
    hi = 2
    while h(hi) * h1 > 0:
        if hi >= n_limit:
            return None
        hi *= 2
    lo = 1
    # invariant: h(lo) has the sign of h1, h(hi) does not
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if h(mid) * h1 > 0:
            lo = mid
        else:
            hi = mid
    return lo if h(hi) != 0.0 else hi
