import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgroute.core import ContractViolation, dominates
from mgroute.gen import GenSpec, generate
from mgroute.problems import iter_tour_blocks
from mgroute.scalarize import (
    chebyshev_scalarize,
    linear_scalarize,
    preference_grid,
    reward,
    sample_preference,
    simplex_lattice,
)

pos = st.floats(0, 10, allow_nan=False)


def test_linear_examples():
    assert linear_scalarize((10, 0), (0.3, 0.7)) == pytest.approx(3.0)
    assert linear_scalarize((4, 9), (1, 0)) == 4.0
    assert linear_scalarize((0, 0), (0.5, 0.5)) == 0.0


def test_chebyshev_examples():
    assert chebyshev_scalarize((2, 4), (0.5, 0.5), (0, 0)) == 2.0
    assert chebyshev_scalarize((1, 2), (0.5, 0.5), (1, 2)) == 0.0
    assert chebyshev_scalarize((3, 9), (1, 0), (0, 0)) == 3.0


def test_reward_examples():
    assert reward((2, 4), (0.5, 0.5), (0, 0), "chebyshev") == -2.0
    assert reward((0, 0), (0.5, 0.5), (0, 0), "chebyshev") == 0.0
    assert reward((10, 0), (0.3, 0.7), None, "linear") == pytest.approx(-3.0)


def test_dimension_mismatch():
    with pytest.raises(ContractViolation):
        linear_scalarize((1, 2, 3), (0.5, 0.5))
    with pytest.raises(ContractViolation):
        chebyshev_scalarize((1, 2), (0.5, 0.5), (0, 0, 0))


def test_grid_examples():
    np.testing.assert_array_equal(preference_grid(2, 3), [[1, 0], [0.5, 0.5], [0, 1]])
    g = preference_grid(2, 101)
    assert tuple(g[0]) == (1.0, 0.0) and tuple(g[-1]) == (0.0, 1.0)
    np.testing.assert_allclose(np.diff(g[:, 0]), -0.01, atol=1e-12)
    np.testing.assert_array_equal(preference_grid(2, 2), [[1, 0], [0, 1]])
    with pytest.raises(ContractViolation):
        preference_grid(2, 1)


@given(st.integers(2, 300))
def test_grid_valid_and_symmetric(count):
    g = preference_grid(2, count)
    assert np.all(g >= 0)
    np.testing.assert_allclose(g.sum(1), 1.0, atol=1e-12)
    np.testing.assert_allclose(g[::-1, ::-1], g, atol=1e-12)


def test_simplex_lattice_sizes():
    assert len(preference_grid(3, 105)) == 105
    assert len(preference_grid(3, 1035)) == 1035
    L = simplex_lattice(3, 13)
    np.testing.assert_allclose(L.sum(1), 1.0)
    assert len({tuple(r) for r in L}) == len(L)
    with pytest.raises(ContractViolation):
        preference_grid(3, 100)


def test_sample_preference():
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = sample_preference(2, rng)
        assert w.min() >= 0 and abs(w.sum() - 1) < 1e-12
    draws = np.array([sample_preference(2, rng)[0] for _ in range(100_000)])
    assert 0.49 <= draws.mean() <= 0.51
    w3 = sample_preference(3, rng)
    assert abs(w3.sum() - 1) < 1e-12 and w3.min() >= 0


def test_sample_preference_boundary():
    class Zero:
        def random(self):
            return 0.0

    np.testing.assert_array_equal(sample_preference(2, Zero()), [0.0, 1.0])


@given(st.tuples(pos, pos), st.tuples(pos, pos), st.floats(0.01, 0.99))
def test_scalarizations_monotone(a, b, w):
    lam = (w, 1 - w)
    if dominates(a, b):
        assert linear_scalarize(a, lam) < linear_scalarize(b, lam) + 1e-12
        assert chebyshev_scalarize(a, lam, (0, 0)) <= chebyshev_scalarize(b, lam, (0, 0))


@given(st.tuples(pos, pos), st.floats(0, 1))
def test_chebyshev_zero_iff_all_terms_zero(f, w):
    lam = (w, 1 - w)
    zero = all(l * abs(x) == 0 for l, x in zip(lam, f))
    assert (chebyshev_scalarize(f, lam, (0, 0)) == 0) == zero


@pytest.mark.parametrize("seed", range(4))
def test_positive_weight_minimizers_are_nondominated(seed):
    inst = generate(GenSpec("fix", 6, x=2, problem="mgmotsp", seed=seed), 1)[0]
    F = np.concatenate([legs.sum(axis=2).reshape(-1, 2) for _, _, legs in iter_tour_blocks(inst)])
    for w in (0.1, 0.37, 0.5, 0.9):
        k = int(np.argmin(F @ np.array([w, 1 - w])))
        dominated = np.all(F <= F[k], axis=1) & np.any(F < F[k], axis=1)
        assert not dominated.any()
