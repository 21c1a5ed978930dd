"""Pooling relaxation: ordering, case selection, plane soundness, touch corners."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilin import (
    endpoint_ordering,
    maxpool_lower,
    maxpool_upper,
    relax_pool,
    verify_plane_sound,
)


def brute_force_plane_gap(coeffs, intercept, l, u):
    """Most negative value of plane(v) - max(v) over all vertices (independent)."""
    worst = np.inf
    for choice in itertools.product(*[(lo, hi) for lo, hi in zip(l, u)]):
        v = np.array(choice)
        worst = min(worst, float(v @ coeffs + intercept - v.max()))
    return worst


def random_boxes(rng, n, count, tie_share=0.2):
    for _ in range(count):
        lo = rng.uniform(-5, 5, n)
        hi = lo + rng.uniform(0, 4, n)
        if rng.random() < tie_share and n >= 2:
            # force endpoint collisions: shared uppers and zero-width slots
            hi[1] = hi[0]
            lo[1] = min(lo[1], hi[1])
            if rng.random() < 0.5:
                lo[0] = hi[0]
        yield lo, hi


class TestOrdering:
    def test_descending_with_tags(self):
        q = endpoint_ordering(np.array([0.0, -1.0]), np.array([2.0, 1.5]))
        assert [(t.value, t.is_upper, t.neuron) for t in q] == [
            (2.0, True, 0),
            (1.5, True, 1),
            (0.0, False, 0),
            (-1.0, False, 1),
        ]

    def test_ties_put_uppers_first_then_low_index(self):
        q = endpoint_ordering(np.array([2.0, 0.0]), np.array([2.0, 2.0]))
        assert [(t.is_upper, t.neuron) for t in q] == [
            (True, 0),
            (True, 1),
            (False, 0),
            (False, 1),
        ]


class TestUpperPlaneCases:
    def test_case1_dominating_neuron(self):
        # neuron 0's lower endpoint beats neuron 1's upper: plane is x_0
        coeffs, intercept, case, touch = maxpool_upper([1.0, -1.0], [2.0, 0.5])
        assert case == 1 and touch == (0,)
        np.testing.assert_allclose(coeffs, [1.0, 0.0])
        assert intercept == 0.0

    def test_case2_anchor_and_fraction(self):
        # order: u0=2, u1=1.5, l0=0 -> anchor neuron 0, fraction on neuron 1
        coeffs, intercept, case, touch = maxpool_upper([0.0, -1.0], [2.0, 1.5])
        assert case == 2 and touch == (0, 1)
        np.testing.assert_allclose(coeffs, [1.0, 0.6])
        assert intercept == pytest.approx(0.6)

    def test_case2_lower_of_largest_neuron(self):
        # order: u0=3, u1=2, l0=1, l1=0 -> third entry is l of the top neuron
        coeffs, intercept, case, touch = maxpool_upper([1.0, 0.0], [3.0, 2.0])
        assert case == 2 and touch == (0, 1)
        # anchor neuron 0 (slope 1), neuron 1 gets (u1 - l0)/(u1 - l1) = 1/2
        np.testing.assert_allclose(coeffs, [1.0, 0.5])
        assert intercept == pytest.approx(1.0 - (1.0 * 1.0 + 0.5 * 0.0))

    def test_case3_third_upper_pivots(self):
        coeffs, intercept, case, touch = maxpool_upper(
            [-1.0, -1.0, -1.0], [3.0, 2.0, 1.0]
        )
        assert case == 3 and touch == (0, 1, 2)
        np.testing.assert_allclose(coeffs, [0.5, 1.0 / 3.0, 0.0])
        assert intercept == pytest.approx(1.0 + 0.5 + 1.0 / 3.0)

    def test_single_coordinate_is_identity(self):
        coeffs, intercept, case, _ = maxpool_upper([-2.0], [5.0])
        assert case == 1
        np.testing.assert_allclose(coeffs, [1.0])
        assert intercept == 0.0

    def test_all_pinned_box(self):
        coeffs, intercept, case, _ = maxpool_upper([1.0, 1.0], [1.0, 1.0])
        assert brute_force_plane_gap(coeffs, intercept, [1.0, 1.0], [1.0, 1.0]) >= -1e-12
        assert case in (1, 2)

    def test_empty_window_raises(self):
        with pytest.raises(ValueError):
            maxpool_upper([], [])


class TestVertexCheck:
    def test_accepts_sound_plane(self):
        assert verify_plane_sound(np.array([0.0, 0.0]), 10.0, [0.0, 0.0], [1.0, 2.0])

    def test_rejects_unsound_plane(self):
        # constant below the top upper endpoint misses the all-upper vertex
        assert not verify_plane_sound(np.array([0.0, 0.0]), 1.5, [0.0, 0.0], [1.0, 2.0])

    def test_window_size_limit(self):
        with pytest.raises(ValueError):
            verify_plane_sound(np.zeros(21), 0.0, np.zeros(21), np.ones(21))

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(5)
        for lo, hi in random_boxes(rng, 3, 50):
            coeffs = rng.uniform(-0.5, 1.0, 3)
            intercept = float(rng.uniform(-1, 4))
            got = verify_plane_sound(coeffs, intercept, lo, hi)
            want = brute_force_plane_gap(coeffs, intercept, lo, hi) >= -1e-9
            assert got == want


class TestLowerSelector:
    def test_picks_largest_midpoint(self):
        assert maxpool_lower([0.0, 1.0, -2.0], [2.0, 2.0, 8.0]) == 2

    def test_tie_takes_lowest_index(self):
        assert maxpool_lower([0.0, -1.0], [2.0, 3.0]) == 0


class TestRelaxPool:
    @pytest.mark.parametrize("n", [2, 4, 9])
    def test_sound_and_touching_on_random_boxes(self, n):
        rng = np.random.default_rng(200 + n)
        for lo, hi in random_boxes(rng, n, 120):
            rel = relax_pool(lo, hi)
            assert brute_force_plane_gap(rel.upper_coeffs, rel.upper_intercept, lo, hi) >= -1e-9
            assert 0 <= rel.lower_index < n
            assert np.all(rel.upper_coeffs >= -1e-15)
            assert np.all(rel.upper_coeffs <= 1.0 + 1e-15)
            self._check_touch_corners(rel, lo, hi)

    @staticmethod
    def _check_touch_corners(rel, lo, hi):
        """The plane meets max(x) exactly at the case's diagonal corners."""

        def plane(v):
            return float(v @ rel.upper_coeffs + rel.upper_intercept)

        if rel.case == 1:
            v = hi.copy()
            assert abs(plane(v) - v.max()) <= 1e-12
            return
        if rel.case == 2:
            anchor, other = rel.touch
            pairs = [(anchor, other), (other, anchor)]
        elif rel.case == 3:
            i, j, k = rel.touch
            pairs = [(i, j), (j, i)]
            v = lo.copy()
            v[k] = hi[k]
            assert abs(plane(v) - v.max()) <= 1e-12
        else:  # constant fallback: exact at the all-upper corner's top neuron
            v = hi.copy()
            assert plane(v) >= v.max() - 1e-12
            return
        for up, down in pairs:
            v = lo.copy()
            v[up] = hi[up]
            v[down] = lo[down]
            assert abs(plane(v) - v.max()) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(1, 5),
    data=st.data(),
)
def test_plane_dominates_interior_points(n, data):
    """Independent check on non-vertex points: plane >= max everywhere in the box."""
    lo = np.array([data.draw(st.floats(-10, 10)) for _ in range(n)])
    width = np.array([data.draw(st.floats(0, 5)) for _ in range(n)])
    hi = lo + width
    rel = relax_pool(lo, hi)
    rng = np.random.default_rng(42)
    pts = rng.uniform(lo, hi, size=(64, n))
    vals = pts @ rel.upper_coeffs + rel.upper_intercept
    assert np.all(vals >= pts.max(axis=1) - 1e-9)
    # the lower selector is always a sound lower bound on the max
    assert np.all(pts[:, rel.lower_index] <= pts.max(axis=1) + 1e-12)
