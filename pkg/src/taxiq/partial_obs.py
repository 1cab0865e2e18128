"""Stationary analysis of the partially observable regime.

Arriving passengers see the taxi queue only. With taxis waiting they always
join; otherwise they join with probability ``q``. The chain is birth-death on
``{-N, -N+1, ...}`` with a geometric passenger tail of ratio ``rho1 = q*rho2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DegenerateIntensityError,
    ModelParams,
    UnstableError,
    ValidationError,
)

TAIL_EPS = 1e-16


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise ValidationError(f"q must lie in [0, 1], got {q}", "q_out_of_range")


def taxi_weights(rho0: float, n_cap: int) -> tuple[np.ndarray, float]:
    """Unnormalised masses of states ``-N..0`` and the mass of state 0.

    The anchor is the heaviest state so nothing overflows: ``-N`` when
    ``rho0 <= 1``, state 0 otherwise.
    """
    k = np.arange(n_cap + 1, dtype=float)
    if rho0 <= 1.0:
        w = rho0 ** k
    else:
        w = (1.0 / rho0) ** k[::-1]
    return w, float(w[-1])


@dataclass(frozen=True)
class _Segments:
    # every field is unnormalised; divide by ``z`` for a probability
    w: np.ndarray  # taxi side, states -N..0
    c0: float  # weight of state 0
    t: float  # rho1
    wt: float  # sum over n <= 0
    wn: float  # sum over n < 0
    wm: float  # sum over -N < n <= 0 (taxi arrivals allowed)
    lt: float  # sum of -n * w_n
    tail: float  # sum over n >= 1
    z: float


def _segments(params: ModelParams, q: float) -> _Segments:
    _check_q(q)
    t = params.rho1(q)
    if t >= 1.0:
        raise UnstableError(f"rho1 = {t:.6g} >= 1 at q = {q}")
    w, c0 = taxi_weights(params.rho0, params.capacity_n)
    wt = float(w.sum())
    depth = np.arange(params.capacity_n, -1, -1, dtype=float)
    tail = c0 * t / (1.0 - t)
    return _Segments(
        w=w, c0=c0, t=t, wt=wt, wn=wt - c0, wm=wt - float(w[0]),
        lt=float(depth @ w), tail=tail, z=wt + tail,
    )


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law on ``{-N, ...}``: explicit masses up to ``upper`` plus a
    geometric tail of ratio ``tail_ratio`` beyond it."""

    lower_bound: int
    probabilities: np.ndarray
    tail_ratio: float | None
    pi_minus_n: float

    @property
    def upper(self) -> int:
        return self.lower_bound + len(self.probabilities) - 1

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.lower_bound, self.upper + 1)

    def prob(self, n: int) -> float:
        if n < self.lower_bound:
            return 0.0
        if n <= self.upper:
            return float(self.probabilities[n - self.lower_bound])
        if not self.tail_ratio:
            return 0.0
        return float(self.probabilities[-1]) * self.tail_ratio ** (n - self.upper)

    def tail_mass(self) -> float:
        """Mass strictly above ``upper``."""
        r = self.tail_ratio
        if not r or self.upper < 1:
            return 0.0
        return float(self.probabilities[-1]) * r / (1.0 - r)

    def total_mass(self) -> float:
        return math.fsum(self.probabilities) + self.tail_mass()

    def truncated(self, upper: int) -> np.ndarray:
        return np.array([self.prob(n) for n in range(self.lower_bound, upper + 1)])


def stationary(params: ModelParams, q: float, *, tail_eps: float = TAIL_EPS) -> StationaryDistribution:
    """Stationary distribution for joining probability ``q``.

    Masses are normalised directly (finite taxi sum plus geometric tail); the
    explicit part extends until the remaining tail mass is below ``tail_eps``.
    """
    seg = _segments(params, q)
    taxi = seg.w / seg.z
    pi0 = seg.c0 / seg.z
    t = seg.t
    extra = []
    if t > 0.0 and pi0 > 0.0:
        # tail beyond m is pi0 * t^(m+1) / (1-t)
        m = math.ceil(math.log(tail_eps * (1.0 - t) / pi0) / math.log(t)) if pi0 > tail_eps else 0
        m = max(m, 1)
        extra = pi0 * t ** np.arange(1, m + 1, dtype=float)
    probs = np.concatenate([taxi, extra]) if len(extra) else taxi
    return StationaryDistribution(
        lower_bound=-params.capacity_n,
        probabilities=probs,
        tail_ratio=t if len(extra) else None,
        pi_minus_n=float(taxi[0]),
    )


def pi_minus_n_closed_form(params: ModelParams, q: float) -> float:
    r0, r1, n = params.rho0, params.rho1(q), params.capacity_n
    if r0 == 1.0:
        raise DegenerateIntensityError("rho0 = 1")
    return (1 - r0) * (1 - r1) / (1 - r1 - r0 ** (n + 1) + r0 ** n * r1)


@dataclass(frozen=True)
class PerformanceMeasures:
    lambda_p_eff: float
    lambda_t_eff: float
    el_p: float
    el_t: float
    ew_p: float
    ew_t: float
    em: float
    # False when no passenger ever queues (q = 0 or threshold 0); ew_p is then 0
    passenger_flow: bool = True


def performance(params: ModelParams, q: float) -> PerformanceMeasures:
    s = _segments(params, q)
    lam, z = params.lam, s.z
    p_ge0 = s.c0 / (1.0 - s.t) / z if s.t > 0 else s.c0 / z
    lp_eff = lam * s.wn / z + lam * q * p_ge0
    lt_eff = (params.mu1 * s.wm + params.mu2 * s.tail) / z
    el_p = s.c0 * s.t / (1.0 - s.t) ** 2 / z
    el_t = s.lt / z
    em = (params.k1 * s.wt + params.k2 * s.tail) / z
    return PerformanceMeasures(
        lambda_p_eff=lp_eff,
        lambda_t_eff=lt_eff,
        el_p=el_p,
        el_t=el_t,
        ew_p=el_p / lp_eff,
        ew_t=el_t / lt_eff,
        em=em,
        passenger_flow=q > 0.0,
    )


def closed_form_measures(params: ModelParams, q: float) -> dict[str, float]:
    """The textbook closed forms, used only as a cross-check (needs rho0 != 1)."""
    lam, mu1, mu2, a = params.lam, params.mu1, params.mu2, params.alpha
    r0, r1, n = params.rho0, params.rho1(q), params.capacity_n
    k1, k2 = params.k1, params.k2
    pi = pi_minus_n_closed_form(params, q)
    lp = lam * pi * ((1 - r0 ** n) / (1 - r0) + q * r0 ** n / (1 - r1))
    lt = pi * (lam * (1 - r0 ** n) / (1 - r0) + mu2 * r1 * r0 ** n / (1 - r1))
    el_p = pi * r0 ** n * r1 / (1 - r1) ** 2
    el_t = pi * (r0 ** (n + 1) - r0 + n - n * r0) / (1 - r0) ** 2
    em = pi * r0 ** n * (k1 * lam * (1 - r0 ** (-n - 1)) / (lam - mu1)
                         + k2 * lam * q / ((a + mu2) - lam * q))
    return {
        "pi_minus_n": pi,
        "lambda_p_eff": lp,
        "lambda_t_eff": lt,
        "el_p": el_p,
        "el_t": el_t,
        "ew_p": el_p / lp,
        "ew_t": el_t / lt,
        "em": em,
        "flow_gap": a * r0 ** n * r1 / (1 - r1) * pi,
    }


def expected_wait_conditional(params: ModelParams, q: float) -> float:
    """Mean wait of a passenger who joins when no taxi is waiting."""
    _check_q(q)
    gap = (params.alpha + params.mu2) - params.lam * q
    if gap <= 0.0:
        raise UnstableError(f"lambda*q = {params.lam * q:.6g} >= alpha + mu2")
    return 1.0 / gap


def expected_matching_time(params: ModelParams, q: float) -> float:
    s = _segments(params, q)
    return (params.k1 * s.wt + params.k2 * s.tail) / s.z


def utility(params: ModelParams, q: float) -> float:
    """Expected net benefit of a passenger who joins with no taxi in sight."""
    return (params.reward_r - params.price_p
            - params.cost_cp * expected_wait_conditional(params, q)
            - params.cost_cmp * expected_matching_time(params, q))


def regime_bounds(params: ModelParams) -> tuple[float, float]:
    """``(L, V)``: the joining cost ``R - P - U(q)`` at ``q = 0`` and ``q = 1``.

    Passengers balk when ``R - P < L`` and always join when ``R - P > V``.
    """
    lam, mu1, mu2, a = params.lam, params.mu1, params.mu2, params.alpha
    r0, n = params.rho0, params.capacity_n
    cp, cmp_, k1, k2 = params.cost_cp, params.cost_cmp, params.k1, params.k2
    if r0 == 1.0:
        raise DegenerateIntensityError("rho0 = 1")
    if lam >= a + mu2:
        raise UnstableError("lambda >= alpha + mu2")
    l_po = cp / (a + mu2) + cmp_ * k1 * mu1 * (1 - r0) / (mu1 - lam)
    den = (a + mu2) * (1 - r0 ** (n + 1)) - lam * (1 - r0 ** n)
    v_po = (cp / ((a + mu2) - lam)
            + cmp_ * k1 * mu1 * (1 - r0 ** (n + 1)) * (1 - r0) * (a + mu2 - lam) / ((mu1 - lam) * den)
            + cmp_ * k2 * lam * r0 ** n * (1 - r0) / den)
    return l_po, v_po


@dataclass(frozen=True)
class WelfareDecomposition:
    s1: float
    s2: float
    sm: float
    total: float
    cbar: float


def _cbar(params: ModelParams) -> float:
    r0, n = params.rho0, params.capacity_n
    if r0 == 1.0:
        return params.cost_ct * n * (n + 1) / 2.0
    return params.cost_ct * (r0 ** (n + 1) - r0 + n - n * r0) / (1 - r0) ** 2


def welfare(params: ModelParams, q: float) -> WelfareDecomposition:
    """Social welfare rate split into the no-matching part (``s1 + s2``) and
    the matching-time part ``sm``."""
    m = performance(params, q)
    p, r = params.price_p, params.reward_r
    s = _segments(params, q)
    reneging = params.alpha * s.tail / s.z  # lambda_p_eff - lambda_t_eff
    taxi_net = p - params.cost_ct * m.ew_t
    s1 = m.lambda_p_eff * (r - p - params.cost_cp * m.ew_p) + m.lambda_p_eff * taxi_net
    s2 = -reneging * taxi_net
    sm = m.em * (-m.lambda_p_eff * params.cost_cmp - m.lambda_t_eff * params.cost_cmt)
    return WelfareDecomposition(s1=s1, s2=s2, sm=sm, total=s1 + s2 + sm, cbar=_cbar(params))


def welfare_direct(params: ModelParams, q: float) -> float:
    """Welfare as passenger surplus flow plus taxi surplus flow."""
    m = performance(params, q)
    p = params.price_p
    return (m.lambda_p_eff * (params.reward_r - p - params.cost_cp * m.ew_p - params.cost_cmp * m.em)
            + m.lambda_t_eff * (p - params.cost_ct * m.ew_t - params.cost_cmt * m.em))


@dataclass(frozen=True)
class DerivativeTerms:
    s1_prime: float
    s2_prime: float
    sm_prime: float
    d1: float
    d2: float
    d3: float
    d4: float
    a1: float
    a2: float
    a3: float
    a4: float
    b1: float
    quad_a: float
    quad_b: float
    discriminant: float
    qbar: float
    # qbar - 1 and discriminant minus its lower bound, free of cancellation
    qbar_excess: float
    discriminant_excess: float

    @property
    def total(self) -> float:
        return self.s1_prime + self.s2_prime + self.sm_prime


def _quadratic_constants(params: ModelParams, q: float) -> dict[str, float]:
    lam, mu1, mu2, a = params.lam, params.mu1, params.mu2, params.alpha
    r0, r2, n = params.rho0, params.rho2, params.capacity_n
    r1 = q * r2
    cp, k1, k2 = params.cost_cp, params.k1, params.k2
    den = 1 - r1 - r0 ** (n + 1) + r0 ** n * r1
    geo_t = r0 ** (n + 1) - r0 + n - n * r0
    d1 = a * r0 ** n * (1 - r0) * r2 * (den + (1 - r0) * (1 - r0 ** n))
    d2 = a * r0 ** n * geo_t
    d3 = (lam * (1 - r0 ** n) * r2 * (1 - r1) ** 2 * (1 - r0 ** (n + 1))
          + mu2 * r0 ** (2 * n) * (1 - r0) ** 2 * r2 * r1 ** 2)
    d4 = lam * (1 - r0 ** n) * (1 - r1) + mu2 * r0 ** n * (1 - r0) * r1
    a1 = (2 * k1 * mu1 * lam * r2 * (1 - r0) * (1 - r0 ** n) * (1 - r0 ** (n + 1))
          * (r0 ** (n + 1) + r0 ** n) * (1 - r1))
    a2 = k1 * mu1 * r0 ** n * r2 * (1 - r0) ** 2 * (1 - r0 ** (n + 1))
    a3 = k2 * mu1 * r2 * (1 - r0) * r0 ** n * (1 - r0 ** n)
    a4 = 2 * k2 * r1 * r2 * (1 - r0) ** 2 * r0 ** (2 * n - 1) * (1 - r0 ** (n + 1))
    b1 = r1 * (r0 ** (n + 1) + r0 ** n) + (1 - r0 ** (n + 1)) * (1 - r1)
    kk = params.reward_r * (mu2 * (1 - r0 ** (n + 1)) - lam * (1 - r0 ** n)) / (1 - r0) + _cbar(params)
    quad_a = kk + cp * (1 - r0 ** n) / (1 - r0)
    quad_b = -2 * kk
    disc = 4 * cp * r0 ** n * kk + 4 * cp ** 2 * (1 - r0 ** n) * (1 - r0 ** (n + 1)) / (1 - r0) ** 2
    qbar = (-quad_b + math.sqrt(disc)) / (2 * quad_a) if disc >= 0 and quad_a != 0 else math.nan
    # disc - bound collapses to 4 C_P rho0^N A, so qbar - 1 needs no subtraction
    bound = discriminant_lower_bound(params)
    disc_excess = 4 * cp * r0 ** n * quad_a
    qbar_excess = (2 * cp * r0 ** n / (math.sqrt(disc) + math.sqrt(bound))
                   if disc >= 0 and quad_a != 0 else math.nan)
    return dict(d1=d1, d2=d2, d3=d3, d4=d4, a1=a1, a2=a2, a3=a3, a4=a4, b1=b1,
                quad_a=quad_a, quad_b=quad_b, discriminant=disc, qbar=qbar,
                qbar_excess=qbar_excess, discriminant_excess=disc_excess)


def discriminant_lower_bound(params: ModelParams) -> float:
    r0, n = params.rho0, params.capacity_n
    return 4 * params.cost_cp ** 2 * (1 - r0 ** n) ** 2 / (1 - r0) ** 2


def welfare_derivative(params: ModelParams, q: float) -> DerivativeTerms:
    """d/dq of each welfare component, by the chain rule through ``rho1``.

    Every stationary quantity is ``x(t)/z(t)`` with ``t = rho1``, so its
    derivative is ``(x' - X z') / z``.
    """
    if not 0.0 < q < 1.0:
        raise ValidationError(f"q must lie in (0, 1), got {q}", "q_out_of_range")
    if params.rho0 == 1.0:
        raise DegenerateIntensityError("rho0 = 1")
    s = _segments(params, q)
    t, c0, z = s.t, s.c0, s.z
    lam, mu1, mu2, a = params.lam, params.mu1, params.mu2, params.alpha
    r, p = params.reward_r, params.price_p
    cp, ct, cmp_, cmt = params.cost_cp, params.cost_ct, params.cost_cmp, params.cost_cmt
    g = 1.0 / (1.0 - t)
    du = c0 * g * g  # d(tail)/dt; also d(c0/(1-t))/dt
    dz = du

    def ratio(x: float, dx: float) -> tuple[float, float]:
        val = x / z
        return val, (dx - val * dz) / z

    lp, dlp = ratio(lam * s.wn + (a + mu2) * s.tail, (a + mu2) * du)
    lt, dlt = ratio(mu1 * s.wm + mu2 * s.tail, mu2 * du)
    elp, delp = ratio(c0 * t * g * g, c0 * (1 + t) * g ** 3)
    elt, delt = ratio(s.lt, 0.0)
    em, dem = ratio(params.k1 * s.wt + params.k2 * s.tail, params.k2 * du)
    ren, dren = ratio(a * s.tail, a * du)

    wt = elt / lt
    dwt = delt / lt - elt * dlt / lt ** 2
    ds1 = r * dlp - cp * delp - ct * (dwt * lp + wt * dlp)
    ds2 = -dren * (p - ct * wt) + ren * ct * dwt
    dsm = -dem * (cmp_ * lp + cmt * lt) - em * (cmp_ * dlp + cmt * dlt)

    scale = params.rho2  # dt/dq
    return DerivativeTerms(s1_prime=ds1 * scale, s2_prime=ds2 * scale, sm_prime=dsm * scale,
                           **_quadratic_constants(params, q))
