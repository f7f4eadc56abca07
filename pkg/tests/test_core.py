import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mgroute.core import (
    leg_sum,
    ContractViolation,
    InstanceError,
    MultiGraphInstance,
    ParetoArchive,
    Tour,
    archive_insert,
    dominates,
    nondominated_mask,
    pareto_filter,
    validate_tour,
)

vec2 = st.tuples(st.integers(0, 6), st.integers(0, 6))
vec3 = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))


def tri(n, m=2, x=1, seed=0):
    rng = np.random.default_rng(seed)
    return MultiGraphInstance.from_dense(rng.random((n, n, x, m)))


@pytest.mark.parametrize(
    "a,b,expected",
    [((1, 2), (2, 3), True), ((1, 2), (1, 2), False), ((1, 3), (3, 1), False), ((1, 2), (1, 3), True)],
)
def test_dominates_cases(a, b, expected):
    assert dominates(a, b) is expected


def test_dominates_dimension_mismatch():
    with pytest.raises(ContractViolation):
        dominates((1, 2), (1, 2, 3))


@given(vec3)
def test_dominance_irreflexive(a):
    assert not dominates(a, a)


@given(vec3, vec3)
def test_dominance_antisymmetric(a, b):
    assert not (dominates(a, b) and dominates(b, a))


@given(vec3, vec3, vec3)
def test_dominance_transitive(a, b, c):
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_pareto_filter_examples():
    assert pareto_filter([(1, 3), (3, 1), (2, 2), (4, 4)]) == [(1, 3), (3, 1), (2, 2)]
    assert pareto_filter([]) == []
    assert pareto_filter([(5, 5)]) == [(5, 5)]


def test_pareto_filter_keeps_duplicates():
    out = pareto_filter([(1, 1), (1, 1), (2, 2)])
    assert out == [(1, 1), (1, 1)]


@given(st.lists(vec2, max_size=64))
def test_pareto_filter_matches_oracle_2d(pts):
    got = [tuple(map(float, p)) for p in pareto_filter(pts)]
    assert got == oracles.pareto(pts)


@given(st.lists(vec3, max_size=40))
def test_pareto_filter_matches_oracle_3d(pts):
    got = [tuple(map(float, p)) for p in pareto_filter(pts)]
    assert got == oracles.pareto(pts)


@given(st.lists(vec2, max_size=64))
def test_pareto_filter_idempotent_and_sound(pts):
    f = pareto_filter(pts)
    assert pareto_filter(f) == f
    for p in f:
        assert not any(dominates(q, p) for q in pts)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), max_size=64))
def test_nondominated_mask_floats(pts):
    mask = nondominated_mask(np.array(pts).reshape(-1, 2))
    expected = [not any(dominates(q, p) for q in pts) for p in pts]
    assert list(mask) == expected


def test_archive_insert_examples():
    a = ParetoArchive(entries=[((1, 3), None), ((3, 1), None)])
    assert archive_insert(a, (2, 2)) is True
    assert a.value_set() == {(1.0, 3.0), (3.0, 1.0), (2.0, 2.0)}
    b = ParetoArchive(entries=[((1, 3), "x")])
    assert archive_insert(b, (1, 3), "y") is True
    assert len(b) == 2
    c = ParetoArchive(entries=[((2, 2), None)])
    assert archive_insert(c, (5, 5)) is False
    assert c.value_set() == {(2.0, 2.0)}


def test_archive_insert_evicts_dominated():
    a = ParetoArchive(entries=[((3, 3), None), ((1, 5), None)])
    assert a.insert((2, 2))
    assert a.value_set() == {(2.0, 2.0), (1.0, 5.0)}


def test_archive_dimension_checked():
    a = ParetoArchive(m=2)
    with pytest.raises(ContractViolation):
        a.insert((1, 2, 3))


@given(st.lists(vec2, max_size=30), st.randoms())
def test_archive_order_independent(pts, r):
    perm = list(pts)
    r.shuffle(perm)
    a = ParetoArchive(m=2)
    for p in perm:
        a.insert(p)
    assert sorted(map(tuple, a.costs().tolist())) == sorted(oracles.pareto(pts))


def test_validate_tour_ok_and_violations():
    inst = tri(4)
    assert validate_tour(inst, Tour.from_order([0, 1, 2, 3])) == []
    skip = Tour.from_order([0, 1, 3])
    assert any("coverage" in v for v in validate_tour(inst, skip))
    bad_slot = Tour.from_order([0, 1, 2, 3], [0, 1, 0, 0])
    assert any("slot" in v for v in validate_tour(inst, bad_slot))
    broken = Tour(((0, 1, 0), (2, 3, 0), (3, 0, 0), (1, 2, 0)))
    assert any("chain" in v for v in validate_tour(inst, broken))


def test_instance_invariants():
    with pytest.raises(InstanceError):
        MultiGraphInstance.from_pair_costs(3, {(0, 1): [[1, 1]]})
    with pytest.raises(InstanceError):
        MultiGraphInstance.from_dense(-np.ones((3, 3, 2)))
    with pytest.raises(InstanceError):
        MultiGraphInstance.from_dense(np.ones((3, 3, 2)), capacity=10)
    inst = tri(4, x=3)
    assert inst.counts[0, 1] == 3 and inst.counts[1, 1] == 0
    assert inst.edge_id(0, 1, 2) == 2
    with pytest.raises(ContractViolation):
        inst.edge_id(0, 1, 3)


def test_slot_costs_layout():
    pc = {(i, j): [[i, j], [j, i]] for i, j in itertools.permutations(range(3), 2)}
    inst = MultiGraphInstance.from_pair_costs(3, pc)
    np.testing.assert_array_equal(inst.slot_costs(2, 1), [[2, 1], [1, 2]])
    assert not inst.is_simple


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12), st.randoms(use_true_random=False))
def test_leg_sum_ignores_leg_order(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert leg_sum(values) == leg_sum(shuffled)
    assert leg_sum(values[::-1]) == leg_sum(values)
