"""Equilibrium and socially optimal strategies for both information levels."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import observable as obs
from . import partial_obs as po
from .model import (
    OBSERVABLE,
    PARTIAL,
    ModelError,
    ModelParams,
    StabilityWarning,
    validate,
)

BALK = "balk"
MIXED = "mixed"
JOIN = "join"

GRID_POINTS = 2001
GOLDEN_WIDTH = 1e-8
N_CAP = 500
N_CAP_MAX = 200_000
DESCENT_RUN = 20


@dataclass(frozen=True)
class EquilibriumOutcome:
    regime: str
    q_e: float
    l_po: float
    v_po: float


def equilibrium_q(params: ModelParams) -> EquilibriumOutcome:
    """Symmetric equilibrium joining probability when no taxi is waiting.

    ``U`` is strictly decreasing in ``q``, so the regime follows from its
    values at the endpoints and the mixed root is found by bisection.
    """
    validate(params, PARTIAL, warn=False)
    l_po, v_po = po.regime_bounds(params)
    surplus = params.reward_r - params.price_p
    if surplus < l_po:
        return EquilibriumOutcome(BALK, 0.0, l_po, v_po)
    if surplus > v_po:
        return EquilibriumOutcome(JOIN, 1.0, l_po, v_po)

    def u(q):
        return po.utility(params, q)

    u0, u1 = u(0.0), u(1.0)
    if u0 <= 0.0:
        q_e = 0.0
    elif u1 >= 0.0:
        q_e = 1.0
    else:
        q_e = optimize.bisect(u, 0.0, 1.0, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return EquilibriumOutcome(MIXED, float(q_e), l_po, v_po)


@dataclass(frozen=True)
class SocialOutcome:
    welfare_at_opt: float
    boundary: bool
    q_star: float | None = None
    n_star: int | None = None
    derivative_root: float | None = None
    # observable only: the closed-form inequality route and whether it agrees
    inequality_case: str | None = None
    inequality_n: int | None = None
    diagnostics: list[str] = field(default_factory=list)


def golden_section_max(f, lo: float, hi: float, width: float = GOLDEN_WIDTH) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    # the endpoints of the original bracket may beat the interior
    best = max(((c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))), key=lambda t: t[1])
    return best


def welfare_derivative_root(params: ModelParams, points: int = 401) -> float | None:
    """First zero of ``dS/dq`` in ``(0, 1)``, if the derivative changes sign."""
    qs = np.linspace(0.0, 1.0, points)[1:-1]
    vals = [po.welfare_derivative(params, q).total for q in qs]
    for i in range(len(qs) - 1):
        if vals[i] == 0.0:
            return float(qs[i])
        if vals[i] * vals[i + 1] < 0:
            return float(optimize.brentq(lambda q: po.welfare_derivative(params, q).total,
                                         qs[i], qs[i + 1], xtol=1e-12))
    return None


def _plateau(s: np.ndarray, i: int) -> tuple[int, int]:
    """Grid indices around ``i`` whose welfare ties the maximum to rounding."""
    tol = 1e-12 * max(1.0, abs(s[i]))
    a = b = i
    while a > 0 and s[a - 1] >= s[i] - tol:
        a -= 1
    while b < len(s) - 1 and s[b + 1] >= s[i] - tol:
        b += 1
    return max(a - 1, 0), min(b + 1, len(s) - 1)


def _polish(params: ModelParams, qs: np.ndarray, a: int, b: int, q_star: float,
            best: float) -> tuple[float, float]:
    """Settle the optimum on grid points ``a..b`` from the sign of ``dS/dq``.

    When few taxis ever run out, ``S`` changes by less than its rounding error
    across many cells and the grid cannot rank them; the derivative keeps full
    relative precision there.
    """
    edge = 1e-12

    def slope(q):
        return po.welfare_derivative(params, min(max(q, edge), 1.0 - edge)).total

    pts = qs[a:b + 1]
    d = np.array([slope(q) for q in pts])
    cand = None
    for j in range(len(pts) - 1):
        if d[j] > 0 > d[j + 1]:
            lo, hi = max(pts[j], edge), min(pts[j + 1], 1.0 - edge)
            cand = optimize.brentq(slope, lo, hi, xtol=1e-14)
            break
    if cand is None:
        if np.all(d >= 0) and pts[-1] == 1.0:
            cand = 1.0
        elif np.all(d <= 0) and pts[0] == 0.0:
            cand = 0.0
        else:
            return q_star, best
    value = po.welfare(params, cand).total
    if value >= best - 1e-12 * max(1.0, abs(best)):
        return float(cand), max(value, best) if cand == q_star else value
    return q_star, best


def social_q(params: ModelParams) -> SocialOutcome:
    """Welfare-maximising joining probability on ``[0, 1]``.

    A 2001-point grid locates the best cell, golden-section search refines it.
    """
    validate(params, PARTIAL, warn=False)
    qs = np.linspace(0.0, 1.0, GRID_POINTS)
    s = np.array([po.welfare(params, q).total for q in qs])
    i = int(np.argmax(s))
    lo, hi = qs[max(i - 1, 0)], qs[min(i + 1, GRID_POINTS - 1)]
    q_star, best = golden_section_max(lambda q: po.welfare(params, q).total, lo, hi)
    if s[i] > best:
        q_star, best = float(qs[i]), float(s[i])
    q_star, best = _polish(params, qs, *_plateau(s, i), q_star, best)
    boundary = q_star in (0.0, 1.0)
    root = welfare_derivative_root(params)
    diagnostics = []
    if root is not None and abs(root - q_star) > 1e-4:
        diagnostics.append(f"derivative root {root:.8g} differs from argmax {q_star:.8g}")
    return SocialOutcome(welfare_at_opt=float(best), boundary=boundary, q_star=float(q_star),
                         derivative_root=root, diagnostics=diagnostics)


# -- observable case -------------------------------------------------------

def _refine_argmax(gains, diffs) -> int:
    """Argmax of ``gains`` that survives saturation of the running sum.

    Increments far below the running total vanish in ``cumsum``; re-summing
    from the current candidate compares them against each other instead.
    """
    k = int(np.argmax(gains))
    while k < len(diffs):
        local = np.cumsum(diffs[k:])
        j = int(np.argmax(local))
        if local[j] <= 0:
            break
        k += j + 1
    return k


def social_n(params: ModelParams, n_cap: int = N_CAP) -> SocialOutcome:
    """Welfare-maximising threshold by brute force over ``1..n_cap``.

    The cap doubles until welfare falls for ``DESCENT_RUN`` consecutive
    thresholds past the maximiser.
    """
    validate(params, OBSERVABLE, warn=False)
    cap = n_cap
    while True:
        s1, diffs, brackets = obs.welfare_increments(params, cap)
        # argmax on the increments alone; adding S(1) first would swamp them
        gains = np.concatenate([[0.0], np.cumsum(diffs)])
        k = _refine_argmax(gains, diffs)
        settled = k + DESCENT_RUN < cap and bool(np.all(brackets[k:k + DESCENT_RUN] < 0))
        if settled or cap >= N_CAP_MAX:
            break
        cap *= 2
    n_star = k + 1
    diagnostics = []
    case = n_ineq = None
    try:
        case, verdict = obs.inequality_existence(params)
        case = f"{case}:{verdict}"
        if verdict != "none":
            n_ineq = obs.solve_threshold_equation(params)
            if n_ineq != n_star:
                diagnostics.append(f"inequality route gives {n_ineq}, brute force {n_star}")
    except (ModelError, ArithmeticError, OverflowError) as exc:
        diagnostics.append(f"inequality route failed: {exc}")
    return SocialOutcome(welfare_at_opt=float(s1 + gains[k]), boundary=not settled, n_star=n_star,
                         inequality_case=case, inequality_n=n_ineq, diagnostics=diagnostics)


# -- comparison -------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    x: float
    s_partial: float | None
    s_observable: float | None
    q_star: float | None
    n_star: int | None
    error: str = ""


def compare_welfare(params: ModelParams, axis: str, grid) -> list[ComparisonRow]:
    """Optimal welfare under both information levels along ``axis``."""
    name = {"lambda": "lam", "lam": "lam", "alpha": "alpha"}.get(axis)
    if name is None:
        raise ValueError(f"axis must be 'lambda' or 'alpha', got {axis!r}")
    rows = []
    for x in grid:
        p = params.with_(**{name: float(x)})
        errors = []
        sp = so = q_star = n_star = None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StabilityWarning)
            try:
                out = social_q(p)
                sp, q_star = out.welfare_at_opt, out.q_star
            except ModelError as exc:
                errors.append(f"partial: {exc.code}")
            try:
                out = social_n(p)
                so, n_star = out.welfare_at_opt, out.n_star
            except ModelError as exc:
                errors.append(f"observable: {exc.code}")
        rows.append(ComparisonRow(float(x), sp, so, q_star, n_star, "; ".join(errors)))
    return rows
