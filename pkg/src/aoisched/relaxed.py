"""Relaxed-problem solver: time-average budget instead of per-slot budget.

With the scheduling constraint relaxed to hold only on time average, the
optimum decouples into per-class threshold policies tied together by a
common subsidy. The solver sweeps the finite set of index values, finds
the critical value w_star and class m where the scheduled fraction
crosses alpha, and randomizes class m between its two optimal thresholds
so the budget binds exactly. The resulting per-user average age c_rp is
a lower bound for every policy that respects the per-slot budget.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, RangeError
from .index import (
    TIE_TOL,
    age_cost,
    optimal_thresholds,
    stationary_distribution,
    whittle_index_table,
)
from .model import NetworkConfig, OccupancyVector, validate_config

BUDGET_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    """Optimum of the relaxed problem.

    Fields
    ------
    w_star : the critical subsidy; always one of the index values.
    m : zero-based id of the critical class, the one that randomizes.
    theta_star : probability of using the lower threshold l2 in class m.
    thresholds : per-class optimal threshold pairs (l1_k, l2_k) at w_star.
    z_star : occupancy fixed point induced by the optimal policy.
    c_rp : per-user average age at the optimum, in [1, l].
    l_star : per-class effective threshold used by the fluid linear
        region: l2 for class m and for lower-indexed classes tied at
        w_star, l1 otherwise (l1 = l2 for untied classes).
    """

    w_star: float
    m: int
    theta_star: float
    thresholds: tuple[tuple[int, int], ...]
    z_star: OccupancyVector
    c_rp: float
    l_star: tuple[int, ...]


def scheduled_fraction(thresholds, cfg: NetworkConfig) -> float:
    """Total stationary fraction of scheduled users under per-class thresholds.

    Each class contributes gamma_k/(l_k*p_k + 1 - p_k), the stationary
    mass at or above its threshold, and 0 when l_k = l+1.
    """
    if len(thresholds) != cfg.k:
        raise RangeError(
            f"expected {cfg.k} thresholds, got {len(thresholds)}"
        )
    total = 0.0
    for cls, n in zip(cfg.classes, thresholds):
        n = int(n)
        if not 1 <= n <= cfg.l + 1:
            raise RangeError(f"threshold {n} outside 1..{cfg.l + 1}")
        if n <= cfg.l:
            total += cls.gamma / (n * cls.p + 1.0 - cls.p)
    return total


def _mixture_z(cfg, thresholds, m, theta, l_star) -> np.ndarray:
    z = np.zeros((cfg.k, cfg.l))
    for k, cls in enumerate(cfg.classes):
        if k == m:
            lo = stationary_distribution(thresholds[k][1], cls.p, cfg.l)
            hi = stationary_distribution(thresholds[k][0], cls.p, cfg.l)
            z[k] = cls.gamma * (theta * lo + (1.0 - theta) * hi)
        else:
            z[k] = cls.gamma * stationary_distribution(l_star[k], cls.p, cfg.l)
    return z


def rp_fixed_point(sol: RelaxedSolution, cfg: NetworkConfig) -> OccupancyVector:
    """Occupancy induced by the relaxed-optimal policy.

    Class m mixes the stationary laws of its two thresholds with weights
    (theta_star, 1 - theta_star); every other class sits at its effective
    threshold.
    """
    z = _mixture_z(cfg, sol.thresholds, sol.m, sol.theta_star, sol.l_star)
    return OccupancyVector(z=z)


def solve_rp(cfg: NetworkConfig) -> RelaxedSolution:
    """Solve the relaxed problem by sweeping the index values.

    Candidate subsidies are the distinct index values in ascending order.
    The scheduled fraction A(w) is a nonincreasing step function of the
    subsidy, equal to A1 (all classes at l1) just after a candidate and
    to A2 (all classes at l2) just before it, so the first candidate with
    A1 <= alpha <= A2 is the critical one. Classes tied at that value are
    then flipped from l1 to l2 in class order; the flip that crosses
    alpha identifies the critical class m and its randomization
    theta_star. Classes flipped before m stay at l2, which the l_star
    field records.
    """
    validate_config(cfg)
    alpha, l = cfg.alpha, cfg.l
    table = whittle_index_table(cfg.p_vector(), l)
    values = np.sort(np.unique(table.ravel()))
    # Group near-identical values so exact ties form one candidate.
    candidates = []
    for v in values:
        if not candidates or v - candidates[-1] > TIE_TOL:
            candidates.append(float(v))

    for w_c in candidates:
        pairs = tuple(
            optimal_thresholds(w_c, cls.p, l) for cls in cfg.classes
        )
        a_hi = scheduled_fraction([p1 for p1, _ in pairs], cfg)
        a_lo = scheduled_fraction([p2 for _, p2 in pairs], cfg)
        if not (a_hi <= alpha + BUDGET_SLACK and alpha <= a_lo + BUDGET_SLACK):
            continue
        # Flip tied classes from l1 to l2 in class order until the
        # scheduled fraction crosses alpha.
        l_star = [p1 for p1, _ in pairs]
        a_cur = a_hi
        for k, (p1, p2) in enumerate(pairs):
            if p1 == p2:
                continue
            delta = scheduled_fraction(
                l_star[:k] + [p2] + l_star[k + 1 :], cfg
            ) - a_cur
            a_next = a_cur + delta
            if a_next + BUDGET_SLACK >= alpha:
                m = k
                theta = 0.0 if delta <= 0.0 else (alpha - a_cur) / delta
                theta = min(max(theta, 0.0), 1.0)
                l_star[k] = p2
                z = _mixture_z(cfg, pairs, m, theta, l_star)
                c_rp = 0.0
                for j, cls in enumerate(cfg.classes):
                    if j == m:
                        c_rp += cls.gamma * (
                            theta * age_cost(pairs[j][1], cls.p, l)
                            + (1.0 - theta) * age_cost(pairs[j][0], cls.p, l)
                        )
                    else:
                        c_rp += cls.gamma * age_cost(l_star[j], cls.p, l)
                return RelaxedSolution(
                    w_star=w_c,
                    m=m,
                    theta_star=float(theta),
                    thresholds=pairs,
                    z_star=OccupancyVector(z=z),
                    c_rp=float(c_rp),
                    l_star=tuple(l_star),
                )
            l_star[k] = p2
            a_cur = a_next
    raise InfeasibleError(
        f"no index candidate brackets the budget alpha={alpha}"
    )
