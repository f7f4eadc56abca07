import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mgroute.core import ContractViolation
from mgroute.metrics import clip_count, hv_gap, hypervolume, normalized_hv, reference_point

pt2 = st.tuples(st.floats(0, 1), st.floats(0, 1))


def test_hand_cases():
    assert hypervolume([(1, 1)], (2, 2)) == 1.0
    assert abs(hypervolume([(1, 2), (2, 1)], (3, 3)) - 3.0) < 1e-12
    assert hypervolume([(2, 2)], (2, 2)) == 0.0
    assert hypervolume([], (2, 2)) == 0.0


def test_normalized_cases():
    assert normalized_hv([(0, 0)], (2, 2)) == 1.0
    assert normalized_hv([(1, 1)], (2, 2)) == 0.25
    assert normalized_hv([], (2, 2)) == 0.0


def test_gap_cases():
    assert hv_gap(0.58, 0.58) == 0.0
    assert hv_gap(0.57, 0.58) == pytest.approx(1.724, abs=1e-3)
    assert hv_gap(0.0, 0.5) == 100.0
    with pytest.raises(ContractViolation):
        hv_gap(0.1, 0.0)


def test_dimension_mismatch():
    with pytest.raises(ContractViolation):
        hypervolume([(1, 2, 3)], (4, 4))


def test_points_beyond_reference_are_clipped():
    clip_count(reset=True)
    with pytest.warns(RuntimeWarning):
        v = hypervolume([(1, 1), (3, 0.5)], (2, 2))
    assert v == 1.0
    assert clip_count(reset=True) == 1


@given(st.lists(pt2, max_size=25))
def test_sweep_matches_grid_oracle(pts):
    assert hypervolume(pts, (1, 1)) == pytest.approx(oracles.hv2d_grid(pts, (1, 1)), abs=1e-12)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), max_size=7))
def test_3d_matches_inclusion_exclusion(pts):
    assert hypervolume(pts, (1, 1, 1)) == pytest.approx(oracles.hv_inclusion_exclusion(pts, (1, 1, 1)), abs=1e-12)


@given(st.lists(pt2, max_size=20), pt2)
def test_monotone_in_points(pts, extra):
    assert hypervolume(pts + [extra], (1, 1)) >= hypervolume(pts, (1, 1)) - 1e-15


@given(st.lists(pt2, min_size=1, max_size=20))
def test_dominated_point_changes_nothing(pts):
    p = pts[0]
    q = (min(1.0, p[0] + 0.1), min(1.0, p[1] + 0.1))
    assert hypervolume(pts + [q], (1, 1)) == pytest.approx(hypervolume(pts, (1, 1)), abs=1e-15)


@given(st.lists(pt2, max_size=20), st.floats(0, 1), st.randoms())
def test_reference_and_permutation(pts, extra, r):
    assert hypervolume(pts, (1 + extra, 1 + extra)) >= hypervolume(pts, (1, 1))
    perm = list(pts)
    r.shuffle(perm)
    assert hypervolume(perm, (1, 1)) == hypervolume(pts, (1, 1))


def test_frozen_cases(frozen):
    for case in frozen["hv_cases"]:
        assert hypervolume(case["points"], case["ref"]) == pytest.approx(case["hv"], abs=1e-12)


def test_reference_presets():
    np.testing.assert_array_equal(reference_point("motsp", 20), (15, 15))
    np.testing.assert_array_equal(reference_point("motsp", 50), (30, 30))
    np.testing.assert_array_equal(reference_point("fix-n", 10), (10, 10))
    assert reference_point("tsptw-fix", 20)[0] == 25
    np.testing.assert_array_equal(reference_point("3,4", 10), (3, 4))
    with pytest.raises(ContractViolation):
        reference_point("nope", 10)
