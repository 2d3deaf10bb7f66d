"""Independent reference calculations used by the tests.

Everything here is deliberately written without the package's model
builders or solver: merit-order dispatch by sorting, window optima by
exhaustive enumeration over mode strings and a coarse dispatch grid,
and special functions by bisection.  Slow and obvious on purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

MODES = ("off", "gen", "pump")
EPS = 1e-6


def merit_order_cost(
    segments: Sequence[tuple[float, float]],
    no_load: float,
    net_load: float,
    voll: float,
) -> float:
    """Cost of serving one hour with a committed convex unit plus slack.

    Negative net load means forced surplus, charged at the slack price.
    """
    if net_load <= 0.0:
        return no_load + voll * (-net_load)
    cost = no_load
    remaining = net_load
    for mw, price in sorted(segments, key=lambda sp: sp[1]):
        take = min(remaining, mw)
        cost += take * price
        remaining -= take
        if remaining <= 0.0:
            return cost
    return cost + voll * remaining


@dataclass
class ToyWindow:
    """Self-contained description of a one-unit window problem."""

    hours_in: tuple[int, ...]
    hours_post: tuple[int, ...]
    net_load: Mapping[int, float]               # in-window residual demand
    prices: Mapping[tuple[int, int], float]     # (scenario, hour) -> price
    weights: tuple[float, ...]
    da_net: Mapping[int, float]                 # day-ahead net schedule, all hours
    e_init: float
    e_min: float
    e_max: float
    e_target: float
    end_sense: str = "fix"                      # "fix" (equality) or "relax" (floor)
    eta_gen: float = 1.0
    eta_pump: float = 1.0
    gen_max: float = 20.0
    pump_max: float = 20.0
    trans_cost_gen: float = 0.0
    trans_cost_pump: float = 0.0
    init_mode: str = "off"
    thermal_segments: tuple[tuple[float, float], ...] = ((100.0, 20.0),)
    thermal_no_load: float = 0.0
    voll: float = 3500.0
    grid_step: float = 10.0

    @property
    def last_hour(self) -> int:
        return self.hours_post[-1] if self.hours_post else self.hours_in[-1]


def _dispatch_options(toy: ToyWindow, mode: str) -> list[tuple[float, float]]:
    g = toy.grid_step
    if mode == "gen":
        n = int(round(toy.gen_max / g))
        return [(k * g, 0.0) for k in range(n + 1)]
    if mode == "pump":
        n = int(round(toy.pump_max / g))
        return [(0.0, k * g) for k in range(n + 1)]
    return [(0.0, 0.0)]


def _soc_next(toy: ToyWindow, e: float, qg: float, qp: float) -> float:
    return e + toy.eta_pump * qp - qg / toy.eta_gen


def _soc_ok(toy: ToyWindow, e: float) -> bool:
    return toy.e_min - EPS <= e <= toy.e_max + EPS


def _end_ok(toy: ToyWindow, e: float) -> bool:
    if toy.end_sense == "fix":
        return abs(e - toy.e_target) <= EPS
    return e >= toy.e_target - EPS


def _transition_cost(toy: ToyWindow, prev: str, mode: str) -> float:
    if prev == mode:
        return 0.0
    if mode == "gen":
        return toy.trans_cost_gen
    if mode == "pump":
        return toy.trans_cost_pump
    return 0.0


def _post_best_revenue(toy: ToyWindow, s: int, e_start: float) -> float | None:
    """Best post-window sales for one scenario, or None when no grid path
    respects the storage bounds and the end rule.

    Bounds apply to the state entering each hour up to the day's last
    hour; the state after the last hour answers only to the end rule,
    matching the model rows.
    """
    best: float | None = None
    per_hour = [
        [(m, qg, qp) for m in MODES for (qg, qp) in _dispatch_options(toy, m)]
        for _ in toy.hours_post
    ]
    for path in product(*per_hour):
        e = e_start
        rev = 0.0
        feasible = True
        for (t, (m, qg, qp)) in zip(toy.hours_post, path):
            e = _soc_next(toy, e, qg, qp)
            if t == toy.last_hour:
                feasible = _end_ok(toy, e)
            else:
                feasible = _soc_ok(toy, e)
            if not feasible:
                break
            rev += toy.prices[(s, t)] * (qg - qp)
        if not feasible:
            continue
        if best is None or rev > best:
            best = rev
    return best


def _da_revenue(toy: ToyWindow, s: int) -> float:
    return sum(toy.prices[(s, t)] * toy.da_net[t] for t in toy.hours_post)


def enumerate_objective(toy: ToyWindow, variant: str) -> float:
    """Exhaustive optimum of one window under the named variant.

    ``perfect`` expects ``hours_post`` to be empty (whole day in-window);
    the end rule then applies to the deterministic walk.  Scenario-based
    variants apply the end rule on every scenario path.
    """
    S = len(toy.weights)
    close_det = not toy.hours_post
    best = math.inf
    per_hour = [
        [(m, qg, qp) for m in MODES for (qg, qp) in _dispatch_options(toy, m)]
        for _ in toy.hours_in
    ]
    for path in product(*per_hour):
        e = toy.e_init
        cost = 0.0
        prev = toy.init_mode
        feasible = True
        for (t, (m, qg, qp)) in zip(toy.hours_in, path):
            cost += _transition_cost(toy, prev, m)
            prev = m
            e = _soc_next(toy, e, qg, qp)
            if close_det and t == toy.last_hour:
                feasible = _end_ok(toy, e)
            else:
                feasible = _soc_ok(toy, e)
            if not feasible:
                break
            cost += merit_order_cost(
                toy.thermal_segments, toy.thermal_no_load,
                toy.net_load[t] - qg + qp, toy.voll,
            )
        if not feasible:
            continue
        if close_det:
            best = min(best, cost)
            continue

        revs = []
        for s in range(S):
            r = _post_best_revenue(toy, s, e)
            if r is None:
                break
            revs.append(r)
        if len(revs) < S:
            continue
        if variant in ("stochastic", "deterministic"):
            total = cost - sum(w * r for w, r in zip(toy.weights, revs))
        elif variant == "robust":
            total = cost + max(_da_revenue(toy, s) - revs[s] for s in range(S))
        else:
            raise ValueError(f"variant {variant!r} needs an empty post-window instead")
        best = min(best, total)
    return best


def quantization_bound(toy: ToyWindow) -> float:
    """Crude upper bound on the cost of rounding dispatch to the grid."""
    top_price = max(
        [p for _, p in toy.thermal_segments] + [abs(v) for v in toy.prices.values()]
    )
    n_dec = len(toy.hours_in) + len(toy.hours_post) * len(toy.weights)
    return toy.grid_step * top_price * n_dec


def probit_bisect(u: float, tol: float = 1e-12) -> float:
    """Inverse standard normal CDF by bisection on the erf form."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must be inside (0, 1)")

    def cdf(x: float) -> float:
        return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))

    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def covariance_by_definition(samples: Sequence[Sequence[float]], lam: float) -> list[list[float]]:
    """Forgetting-factor second-moment recursion written out longhand."""
    dim = len(samples[0])
    sigma = [[1.0 if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    for x in samples:
        for i in range(dim):
            for j in range(dim):
                sigma[i][j] = lam * sigma[i][j] + (1.0 - lam) * x[i] * x[j]
    return sigma
