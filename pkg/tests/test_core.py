import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loggas.core import (
    Config1D,
    Config2D,
    GameParams,
    inv_sq_circumdiameter,
    pair_sums_1d,
    pair_sums_2d,
    spiral_key,
    spiral_less,
    spiral_sort,
    wasserstein_1d,
)


def separated_points_1d(n_min=2, n_max=12):
    return (
        st.lists(st.floats(-10, 10), min_size=n_min, max_size=n_max, unique=True)
        .map(sorted)
        .filter(lambda xs: min(b - a for a, b in zip(xs, xs[1:])) > 1e-3)
    )


class TestConfig1D:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            Config1D([1.0, 0.0])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Config1D([0.0, 0.0, 1.0])

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            Config1D([0.0])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Config1D([0.0, float("nan")])

    def test_immutable(self):
        c = Config1D([0.0, 1.0])
        with pytest.raises(AttributeError):
            c.points = np.array([0.0, 2.0])
        with pytest.raises(ValueError):
            c.points[0] = 5.0

    def test_json_roundtrip(self):
        c = Config1D([-1.5, 0.25, 3.0])
        assert Config1D.from_json(c.to_json()).points.tolist() == c.points.tolist()

    def test_csv_roundtrip(self, tmp_path):
        c = Config1D([-1.0, 0.1, 2.7])
        p = tmp_path / "c.csv"
        c.write_csv(p)
        assert Config1D.read_csv(p).points.tolist() == c.points.tolist()


class TestConfig2D:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Config2D([[0, 0], [0, 0], [1, 1]])

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            Config2D([[0, 0, 0], [1, 1, 1]])

    def test_ordered_flag_validated(self):
        pts = [[1.0, 0.0], [0.0, 0.0]]  # origin must come first in the spiral
        with pytest.raises(ValueError):
            Config2D(pts, ordered_flag=True)
        Config2D(pts[::-1], ordered_flag=True)

    def test_csv_roundtrip(self, tmp_path):
        c = Config2D([[0.0, 1.0], [2.0, -1.5]])
        p = tmp_path / "c.csv"
        c.write_csv(p)
        assert Config2D.read_csv(p).points.tolist() == c.points.tolist()


class TestGameParams:
    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            GameParams(n_players=1, beta=2.0)

    def test_rejects_zero_sigma(self):
        with pytest.raises(ValueError):
            GameParams(n_players=3, beta=2.0, sigma=0.0)

    def test_consistency_predicates(self):
        b, s = 2.0, 1.0
        assert GameParams(5, b, s, c2=b * (1.5 * b - 2 * s * s) / 4).closed_loop_1d_consistent()
        assert GameParams(5, b, s, c2=b * (b - 2 * s * s) / 4).open_loop_1d_consistent()
        assert GameParams(5, b, s, c1=b * b / 8, c2=3 * b * b / 8).closed_loop_2d_consistent()
        assert GameParams(5, b, s, c1=b * b / 8, c2=b * b / 4).open_loop_2d_consistent()
        assert not GameParams(5, b, s, c2=0.0).closed_loop_1d_consistent()


class TestPairSums1D:
    def test_symmetric_center(self):
        c = Config1D([-1.0, 0.0, 1.0])
        ps = pair_sums_1d(c, 2)
        assert ps.h1 == pytest.approx(0.0, abs=1e-15)
        assert ps.h2 == pytest.approx(1.0)
        assert ps.h0 == pytest.approx(0.0, abs=1e-15)

    def test_right_endpoint(self):
        ps = pair_sums_1d(Config1D([-1.0, 0.0, 1.0]), 3)
        assert ps.h1 == pytest.approx(0.75)
        assert ps.h2 == pytest.approx(0.625)
        assert ps.h0 == pytest.approx(math.log(2) / 2)

    def test_weighted_h1_sum_small_case(self):
        c = Config1D([-1.0, 0.0, 1.0])
        total = sum(c.points[i - 1] * pair_sums_1d(c, i).h1 for i in (1, 2, 3))
        assert total == pytest.approx(1.5)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            pair_sums_1d(Config1D([0.0, 1.0]), 3)

    def test_antisymmetry_two_players(self):
        c = Config1D([0.3, 1.7])
        assert pair_sums_1d(c, 1).h1 == pytest.approx(-pair_sums_1d(c, 2).h1)

    @given(separated_points_1d())
    @settings(max_examples=60, deadline=None)
    def test_weighted_h1_sum_property(self, xs):
        c = Config1D(xs)
        n = len(xs)
        total = sum(c.points[i - 1] * pair_sums_1d(c, i).h1 for i in range(1, n + 1))
        assert abs(total - n / 2) / (n / 2) < 1e-12

    @given(separated_points_1d())
    @settings(max_examples=60, deadline=None)
    def test_h2_matches_squared_h1_sum(self, xs):
        c = Config1D(xs)
        n = len(xs)
        lhs = sum(pair_sums_1d(c, i).h2 / (n - 1) for i in range(1, n + 1))
        rhs = sum(pair_sums_1d(c, i).h1 ** 2 for i in range(1, n + 1))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1.0)


class TestPairSums2D:
    def test_corner(self):
        c = Config2D([[0, 0], [1, 0], [0, 1]])
        ps = pair_sums_2d(c, 1)
        assert ps.h1 == pytest.approx([-0.5, -0.5])
        assert ps.h2 == pytest.approx(1.0)

    def test_antipodal_cancellation(self):
        ps = pair_sums_2d(Config2D([[0, 0], [1, 0], [-1, 0]]), 1)
        assert np.allclose(ps.h1, [0.0, 0.0])

    def test_antisymmetry_two_players(self):
        c = Config2D([[0.0, 0.0], [1.0, 2.0]])
        assert np.allclose(pair_sums_2d(c, 1).h1, -pair_sums_2d(c, 2).h1)


class TestCircumdiameter:
    def test_right_triangle(self):
        assert inv_sq_circumdiameter([1, 0], [0, 1]) == pytest.approx(1.0)

    def test_collinear(self):
        assert inv_sq_circumdiameter([1, 0], [2, 0]) == 0.0

    def test_equilateral(self):
        assert inv_sq_circumdiameter([1, 0], [0.5, math.sqrt(3) / 2]) == pytest.approx(1.5)

    def test_degenerate_raises(self):
        with pytest.raises(ValueError):
            inv_sq_circumdiameter([0, 0], [1, 0])
        with pytest.raises(ValueError):
            inv_sq_circumdiameter([1, 0], [1, 0])

    def test_symmetry_in_arguments(self):
        a, b = [0.3, 1.1], [-0.7, 0.2]
        assert inv_sq_circumdiameter(a, b) == pytest.approx(inv_sq_circumdiameter(b, a))


class TestSpiralOrder:
    def test_origin_smallest(self):
        assert spiral_less((0, 0), (1, 0), 4)
        assert not spiral_less((1, 0), (0, 0), 4)

    def test_shell_comparison(self):
        assert spiral_less((0.3, 0), (0.9, 0), 4)

    def test_irreflexive(self):
        assert not spiral_less((1, 0), (1, 0), 4)

    def test_equal_angle_larger_modulus_first(self):
        # same shell, same argument: the farther point precedes
        n = 2
        w, z = (0.9, 0.0), (0.8, 0.0)
        assert spiral_less(w, z, n)
        assert not spiral_less(z, w, n)

    def test_positive_axis_angle_is_two_pi(self):
        # (r, 0) has the largest angle in its shell, so anything strictly
        # above the axis in the same shell precedes it
        assert spiral_less((0.5, 0.1), (0.5, -0.1), 1)

    @given(
        st.lists(
            st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
            min_size=2,
            max_size=8,
            unique=True,
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_strict_total_order(self, pts):
        n = len(pts)
        for a in pts:
            assert not spiral_less(a, a, n)
        for a in pts:
            for b in pts:
                if a != b:
                    assert spiral_less(a, b, n) != spiral_less(b, a, n)
        for a in pts:
            for b in pts:
                for c in pts:
                    if spiral_less(a, b, n) and spiral_less(b, c, n):
                        assert spiral_less(a, c, n)

    @given(
        st.lists(
            st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
            min_size=2,
            max_size=8,
            unique=True,
        )
    )
    @settings(max_examples=40, deadline=None)
    def test_sort_key_agrees_with_comparison(self, pts):
        n = len(pts)
        ordered = sorted(pts, key=lambda p: spiral_key(p, n))
        for a, b in zip(ordered, ordered[1:]):
            assert spiral_less(a, b, n)

    def test_spiral_sort_sets_flag(self):
        rng = np.random.default_rng(5)
        c = spiral_sort(rng.normal(size=(9, 2)))
        assert c.ordered_flag
        for k in range(len(c) - 1):
            assert spiral_less(c.points[k], c.points[k + 1], len(c))


class TestWasserstein:
    def test_identical(self):
        assert wasserstein_1d(2, [-1, 0, 1], [-1, 0, 1]) == 0.0

    def test_translation(self):
        assert wasserstein_1d(1, [0, 0], [1, 1]) == pytest.approx(1.0)

    def test_dilation(self):
        assert wasserstein_1d(2, [-1, 1], [-2, 2]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wasserstein_1d(1, [0, 1], [0, 1, 2])

    def test_order_below_one_rejected(self):
        with pytest.raises(ValueError):
            wasserstein_1d(0.5, [0, 1], [1, 2])

    @given(
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
    )
    @settings(max_examples=60, deadline=None)
    def test_metric_axioms(self, a, b, c):
        a, b, c = sorted(a), sorted(b), sorted(c)
        dab = wasserstein_1d(2, a, b)
        assert dab == pytest.approx(wasserstein_1d(2, b, a))
        assert dab >= 0
        if a == b:
            assert dab == 0
        assert dab <= wasserstein_1d(2, a, c) + wasserstein_1d(2, c, b) + 1e-9
