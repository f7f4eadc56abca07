import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mgroute.core import MultiGraphInstance, Tour
from mgroute.gen import GenSpec, generate
from mgroute.problems import evaluate
from mgroute.prune import check_prop1, edge_scalar_costs, lift_tour, prune_linear


def test_prune_keeps_cheapest_slot():
    pc = {(0, 1): [[1, 5], [3, 1]], (1, 0): [[2, 2]], (0, 2): [[1, 1]], (2, 0): [[1, 1]], (1, 2): [[1, 1]], (2, 1): [[1, 1]]}
    inst = MultiGraphInstance.from_pair_costs(3, pc)
    pruned, smap = prune_linear(inst, (0.5, 0.5))
    assert smap[0, 1] == 1 and pruned.is_simple
    np.testing.assert_array_equal(pruned.slot_costs(0, 1), [[3, 1]])
    pruned, smap = prune_linear(inst, (1.0, 0.0))
    assert smap[0, 1] == 0


def test_ties_pick_lowest_slot():
    pc = {(i, j): [[1, 2], [2, 1]] for i in range(3) for j in range(3) if i != j}
    inst = MultiGraphInstance.from_pair_costs(3, pc)
    _, smap = prune_linear(inst, (0.5, 0.5))
    assert smap[0, 1] == 0 and smap[2, 1] == 0


@given(st.integers(0, 10_000), st.floats(0, 1))
def test_pruned_edges_are_segment_minima(seed, w):
    inst = generate(GenSpec("flex", 5, x=4, problem="mgmotsp", seed=seed), 1)[0]
    pruned, smap = prune_linear(inst, (w, 1 - w))
    vals = edge_scalar_costs(inst, (w, 1 - w))
    for i in range(5):
        for j in range(5):
            if i != j:
                lo, hi = inst.pair_ptr[i * 5 + j], inst.pair_ptr[i * 5 + j + 1]
                assert vals[lo + smap[i, j]] == vals[lo:hi].min()


@given(st.integers(0, 10_000), st.floats(0, 1), st.randoms())
def test_lifted_tour_costs_agree(seed, w, r):
    inst = generate(GenSpec("fix", 5, x=3, problem="mgmotsp", seed=seed), 1)[0]
    pruned, smap = prune_linear(inst, (w, 1 - w))
    order = [0, 1, 2, 3, 4]
    r.shuffle(order)
    t = Tour.from_order(order)
    np.testing.assert_allclose(evaluate(pruned, t), evaluate(inst, lift_tour(t, smap)))


@pytest.mark.parametrize("dist,x", [("fix", 2), ("flex", 2), ("flex", 5)])
def test_prop1_small(dist, x):
    for inst in generate(GenSpec(dist, 5, x=x, problem="mgmotsp", seed=2), 3):
        for w in (0.0, 0.25, 0.5, 1.0):
            assert check_prop1(inst, (w, 1 - w))


def test_prop1_against_independent_oracle():
    inst = generate(GenSpec("flex", 5, x=3, problem="mgmotsp", seed=8), 1)[0]
    for w in (0.1, 0.6):
        pruned, _ = prune_linear(inst, (w, 1 - w))
        assert oracles.min_linear(inst, (w, 1 - w)) == pytest.approx(oracles.min_linear(pruned, (w, 1 - w)), abs=1e-12)


def test_single_feature_prune_uses_distance():
    inst = MultiGraphInstance.from_dense(np.random.default_rng(0).random((5, 5, 3, 1)))
    pruned, smap = prune_linear(inst, (0.5, 0.5))
    for i in range(5):
        for j in range(5):
            if i != j:
                assert pruned.slot_costs(i, j)[0, 0] == inst.slot_costs(i, j)[:, 0].min()
