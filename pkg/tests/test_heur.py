import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgroute.core import ContractViolation, Tour, validate_routes, validate_tour
from mgroute.gen import GenSpec, generate
from mgroute.heur import (
    farthest_insertion,
    nearest_insertion,
    nearest_neighbor,
    nearest_neighbor_cvrp,
    scalarized_sweep,
    tour_scalar_cost,
    two_opt_multigraph,
    two_opt_routes,
)
from mgroute.problems import brute_force_scalarized, evaluate, exhaustive_pareto, iter_tour_blocks
from mgroute.prune import lift_tour, prune_linear
from mgroute.scalarize import preference_grid


def fix(n=8, x=3, seed=0, dist="fix"):
    return generate(GenSpec(dist, n, x=x, problem="mgmotsp", seed=seed), 1)[0]


def random_tour(inst, rng):
    order = rng.permutation(inst.n)
    slots = [rng.integers(inst.counts[a, b]) for a, b in zip(order, np.roll(order, -1))]
    return Tour.from_order(order, slots)


@given(st.integers(0, 5000), st.floats(0, 1))
def test_two_opt_never_increases_cost(seed, w):
    inst = fix(8, 3, seed, "flex")
    rng = np.random.default_rng(seed)
    pref = (w, 1 - w)
    t = random_tour(inst, rng)
    hist = []
    out = two_opt_multigraph(inst, t, pref, history=hist)
    assert validate_tour(inst, out) == []
    # history starts at the input cost and decreases strictly afterwards
    assert hist[0] == pytest.approx(tour_scalar_cost(inst, t, pref))
    assert all(b < a for a, b in zip(hist, hist[1:]))
    assert tour_scalar_cost(inst, out, pref) <= tour_scalar_cost(inst, t, pref) + 1e-12
    assert hist[-1] == pytest.approx(tour_scalar_cost(inst, out, pref))


def test_exhaustive_optimum_is_fixpoint():
    for seed in range(5):
        inst = fix(6, 2, seed)
        for w in (0.2, 0.5, 0.8):
            pref = np.array([w, 1 - w])
            best, tour = np.inf, None
            for orders, slots, legs in iter_tour_blocks(inst):
                F = legs.sum(axis=2) @ pref
                k = np.unravel_index(np.argmin(F), F.shape)
                if F[k] < best:
                    best, tour = F[k], Tour.from_order(orders[k[0]], slots[k[1]])
            hist = []
            out = two_opt_multigraph(inst, tour, pref, history=hist)
            assert len(hist) == 1
            assert tour_scalar_cost(inst, out, pref) == pytest.approx(best, abs=1e-12)


def test_max_moves_limits_work():
    inst = fix(12, 3)
    t = random_tour(inst, np.random.default_rng(1))
    hist = []
    two_opt_multigraph(inst, t, (0.5, 0.5), max_moves=2, history=hist)
    assert len(hist) <= 3


def test_reslotting_uses_cheapest_slot():
    inst = fix(7, 4, 3, "flex")
    pref = (0.3, 0.7)
    _, smap = prune_linear(inst, pref)
    order = np.random.default_rng(3).permutation(7)
    start = Tour.from_order(order, smap[order, np.roll(order, -1)])
    out = two_opt_multigraph(inst, start, pref)
    # starting from cheapest slots, every rewired pair is re-slotted to its cheapest too
    for s in out.steps:
        vals = inst.slot_costs(s.src, s.dst) @ np.asarray(pref)
        assert vals[s.slot] == pytest.approx(vals.min())


@pytest.mark.parametrize("builder", [nearest_neighbor, nearest_insertion, farthest_insertion])
def test_constructors_give_valid_tours(builder):
    for seed in range(10):
        inst = fix(9, 3, seed, "flex")
        for w in (0.0, 0.5, 1.0):
            pruned, smap = prune_linear(inst, (w, 1 - w))
            t = lift_tour(builder(pruned, (w, 1 - w)), smap)
            assert validate_tour(inst, t) == []


def test_constructors_need_simple_graph():
    with pytest.raises(ContractViolation):
        nearest_neighbor(fix(5, 2), (0.5, 0.5))


def test_nearest_neighbor_all_starts_not_worse():
    inst, pref = fix(10, 2, 4), (0.4, 0.6)
    pruned, _ = prune_linear(inst, pref)
    a = tour_scalar_cost(pruned, nearest_neighbor(pruned, pref), pref)
    b = tour_scalar_cost(pruned, nearest_neighbor(pruned, pref, all_starts=True), pref)
    assert b <= a + 1e-12


def test_cvrp_constructor_and_two_opt_feasible():
    for seed in range(5):
        inst = generate(GenSpec("xasy", 12, m=1, problem="mocvrp", seed=seed), 1)[0]
        rs = nearest_neighbor_cvrp(inst, (0.5, 0.5))
        assert validate_routes(inst, rs) == []
        better = two_opt_routes(inst, rs, (0.5, 0.5))
        assert validate_routes(inst, better) == []
        assert evaluate(inst, better)[0] <= evaluate(inst, rs)[0] + 1e-12


def test_sweep_archives_true_costs():
    inst = fix(7, 2, 1)
    arch = scalarized_sweep(inst, None, preference_grid(2, 11), two_opt=True)
    for cost, sol in arch:
        np.testing.assert_allclose(evaluate(inst, sol), cost)


def test_sweep_extreme_preferences_are_optimal_on_small_graphs():
    inst = fix(6, 2, 2)
    arch = scalarized_sweep(inst, None, preference_grid(2, 5), two_opt=True, all_starts=True)
    exact = exhaustive_pareto(inst).costs()
    # sweep points are feasible, so none strictly dominates an exact front point
    for c in arch.costs():
        assert not any(np.all(c <= e) and np.any(c < e) for e in exact)
    best = brute_force_scalarized(inst, [(1, 0), (0, 1)])
    assert arch.costs()[:, 0].min() >= best[0] - 1e-12


def test_sweep_tw_and_errors():
    inst = generate(GenSpec("fix", 8, x=2, problem="mgmotsptw", seed=1), 1)[0]
    arch = scalarized_sweep(inst, None, preference_grid(2, 5))
    for cost, sol in arch:
        assert sol.steps[0].src == 0
        np.testing.assert_allclose(evaluate(inst, sol), cost)
    with pytest.raises(ContractViolation):
        scalarized_sweep(inst, None, preference_grid(2, 5), inner="fi")
    with pytest.raises(ContractViolation):
        scalarized_sweep(inst, None, preference_grid(2, 5), inner="bogus")
