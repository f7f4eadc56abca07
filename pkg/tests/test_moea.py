import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mgroute.core import ContractViolation, Tour, validate_routes, validate_tour
from mgroute.gen import GenSpec, generate
from mgroute.metrics import hypervolume
from mgroute.moea import (
    DecodeError,
    MoeaConfig,
    crowding_distance,
    decode,
    decode_routes,
    edge_recombination,
    encode,
    lacomme_weights,
    mutate,
    nondominated_rank,
    nsga2_run,
    random_chromosome,
    random_search,
)


def flex(n=7, x=3, seed=0):
    return generate(GenSpec("flex", n, x=x, problem="mgmotsp", seed=seed), 1)[0]


def test_gene_layout():
    # node 3 leaving on slot 1 is gene 302, slot 0 is gene 301
    np.testing.assert_array_equal(encode(Tour.from_order([3, 0, 1], [1, 0, 0])), [302, 1, 101])


@given(st.integers(0, 2000))
def test_encode_decode_roundtrip(seed):
    inst = flex(seed=seed)
    g = random_chromosome(inst, np.random.default_rng(seed))
    t = decode(inst, g)
    assert validate_tour(inst, t) == []
    np.testing.assert_array_equal(encode(t), g)


def test_decode_rejects_bad_genes():
    inst = flex(5, 2)
    with pytest.raises(DecodeError):
        decode(inst, [1, 101, 201, 301, 301])
    with pytest.raises(DecodeError):
        decode(inst, [1, 101, 201, 301, 499])


@given(st.integers(0, 2000))
def test_variation_operators_keep_validity(seed):
    inst = flex(8, 4, seed)
    rng = np.random.default_rng(seed)
    a, b = random_chromosome(inst, rng), random_chromosome(inst, rng)
    for _ in range(5):
        a = mutate(inst, a, rng)
        assert validate_tour(inst, decode(inst, a)) == []
    c = edge_recombination(inst, a, b, rng)
    assert validate_tour(inst, decode(inst, c)) == []


def test_recombination_of_identical_parents_is_identity():
    inst = flex(8, 3, 1)
    rng = np.random.default_rng(1)
    a = random_chromosome(inst, rng)
    np.testing.assert_array_equal(edge_recombination(inst, a, a, rng), a)


@given(st.integers(0, 2000))
def test_cvrp_chromosomes_decode_feasibly(seed):
    inst = generate(GenSpec("xasy", 9, m=1, problem="mocvrp", seed=seed), 1)[0]
    rng = np.random.default_rng(seed)
    a, b = random_chromosome(inst, rng), random_chromosome(inst, rng)
    c = mutate(inst, edge_recombination(inst, a, b, rng), rng)
    assert validate_routes(inst, decode_routes(inst, c)) == []


def test_lacomme_weights():
    W = lacomme_weights([[0, 10], [5, 5], [10, 0]])
    np.testing.assert_allclose(W, [[0, 1], [0.5, 0.5], [1, 0]])
    np.testing.assert_allclose(lacomme_weights([[1, 1], [1, 1]]), 0.5)
    np.testing.assert_allclose(lacomme_weights([[0, 3], [2, 3]]), [[0.5, 0.5], [1, 0]])
    with pytest.raises(ContractViolation):
        lacomme_weights([[1, 2]])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=30))
def test_rank_zero_is_pareto_set(pts):
    F = np.array(pts, dtype=float)
    rank = nondominated_rank(F)
    front = {tuple(p) for p in oracles.pareto(pts)}
    assert {tuple(F[i]) for i in np.flatnonzero(rank == 0)} == front
    for r in range(1, rank.max() + 1):
        for i in np.flatnonzero(rank == r):
            assert any(oracles.dominates(F[j], F[i]) for j in np.flatnonzero(rank == r - 1))


def test_crowding_boundaries_infinite():
    d = crowding_distance(np.array([[0, 3], [1, 2], [2, 1], [3, 0]], dtype=float))
    assert np.isinf(d[0]) and np.isinf(d[3])
    np.testing.assert_allclose(d[1:3], [4 / 3, 4 / 3])


def test_config_validation():
    for bad in (dict(pop_size=3), dict(pop_size=5), dict(mutation_rate=2.0), dict(generations=-1)):
        with pytest.raises(ContractViolation):
            MoeaConfig(**bad)


def test_nsga2_deterministic_and_monotone():
    inst = flex(9, 3, 2)
    hist = []
    cfg = MoeaConfig(pop_size=10, generations=8, seed=5)
    a = nsga2_run(inst, None, cfg, history=hist)
    b = nsga2_run(inst, None, cfg)
    assert a.value_set() == b.value_set()
    assert len(hist) == 9
    ref = np.max(np.vstack(hist), axis=0) + 1
    hv = [hypervolume(h, ref) for h in hist]
    assert all(y >= x * (1 - 1e-12) for x, y in zip(hv, hv[1:]))


def test_nsga2_archive_costs_true():
    from mgroute.problems import evaluate

    inst = generate(GenSpec("fix", 7, x=2, problem="mgmotsptw", seed=2), 1)[0]
    stats = {}
    arch = nsga2_run(inst, None, MoeaConfig(pop_size=8, generations=4), stats=stats)
    for cost, sol in arch:
        np.testing.assert_allclose(evaluate(inst, sol), cost)
    assert stats["evaluations"] >= stats["full_evaluations"] > 0


def test_random_search_deterministic():
    inst = flex(8, 2, 3)
    assert random_search(inst, None, 500, seed=1).value_set() == random_search(inst, None, 500, seed=1).value_set()
