"""Cross-checks for the relative-value-iteration and joint-MDP oracles."""

import numpy as np
import pytest

from aoisched import ClassSpec, NetworkConfig
from aoisched.errors import RangeError, SizeError
from aoisched.index import cost_pair, optimal_thresholds, whittle_index
from aoisched.oracle import (
    joint_mdp_optimal,
    rvi_one_dim,
    stationary_by_balance,
)
from aoisched.relaxed import solve_rp


def test_rvi_alternating_example():
    # p=0.5, L=3, W=1: optimal is threshold 2, long-run cost 8/3.
    res = rvi_one_dim(0.5, 3, 1.0)
    assert res.threshold == 2
    assert res.avg_cost == pytest.approx(8.0 / 3.0, abs=1e-6)
    assert res.avg_cost == pytest.approx(cost_pair(2, 1.0, 0.5, 3).total, abs=1e-6)


def test_rvi_free_scheduling():
    # W=0 with a sure channel: schedule every slot, age sticks at 1.
    res = rvi_one_dim(1.0, 3, 0.0)
    assert res.threshold == 1
    assert res.avg_cost == pytest.approx(1.0, abs=1e-6)


def test_rvi_tied_thresholds():
    # p=1, W=1: schedule-always and alternate both cost 2 per slot.
    res = rvi_one_dim(1.0, 3, 1.0)
    assert res.threshold in (1, 2)
    assert res.avg_cost == pytest.approx(2.0, abs=1e-6)


def test_rvi_policy_is_threshold_shaped():
    res = rvi_one_dim(0.7, 6, 2.0)
    pol = np.asarray(res.policy, dtype=bool)
    assert pol.shape == (6,)
    # once scheduling starts it never stops at higher ages
    first = int(np.argmax(pol))
    assert pol[first:].all()
    assert not pol[:first].any()
    assert res.threshold == first + 1


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("l", [3, 7, 12])
def test_rvi_matches_best_stationary_threshold(p, l):
    # RVI over the single-user chain must land on the cheapest threshold
    # among all stationary threshold policies, and that threshold must be
    # one of the two closed-form candidates.
    for w in (0.0, 0.4, 1.7, whittle_index(l - 1, p, l)):
        res = rvi_one_dim(p, l, w)
        best = min(cost_pair(n, w, p, l).total for n in range(1, l + 2))
        assert res.avg_cost == pytest.approx(best, abs=1e-6)
        l1, l2 = optimal_thresholds(w, p, l)
        assert res.threshold in (l1, l2)


def test_stationary_balance_agrees_with_closed_form():
    from aoisched.index import stationary_distribution

    for p in (0.3, 0.9):
        for l in (4, 9):
            for n in range(1, l + 2):
                u = stationary_distribution(n, p, l)
                v = stationary_by_balance(n, p, l)
                np.testing.assert_allclose(u, v, atol=1e-10)


def test_joint_mdp_two_user_alternation():
    # Two users, one slot, sure channel: serve them in turn, ages average 1.5.
    cfg = NetworkConfig(
        n=2, alpha=0.5, l=3, classes=(ClassSpec(p=1.0, gamma=1.0),)
    )
    assert joint_mdp_optimal(cfg) == pytest.approx(1.5, abs=1e-6)


def test_joint_mdp_meets_relaxed_bound_on_toy():
    cfg = NetworkConfig(
        n=3, alpha=1.0 / 3.0, l=4, classes=(ClassSpec(p=0.7, gamma=1.0),)
    )
    joint = joint_mdp_optimal(cfg)
    sol = solve_rp(cfg)
    # relaxation can only lower the cost
    assert joint >= sol.c_rp - 1e-9
    assert joint == pytest.approx(sol.c_rp, abs=1e-6)


def test_joint_mdp_rejects_huge_state_space():
    cfg = NetworkConfig(
        n=6, alpha=1.0 / 3.0, l=10, classes=(ClassSpec(p=0.7, gamma=1.0),)
    )
    with pytest.raises(SizeError):
        joint_mdp_optimal(cfg)


def test_rvi_domain_errors():
    with pytest.raises(RangeError):
        rvi_one_dim(0.0, 3, 1.0)
    with pytest.raises(RangeError):
        rvi_one_dim(0.5, 1, 1.0)
    with pytest.raises(RangeError):
        rvi_one_dim(0.5, 3, -0.5)
