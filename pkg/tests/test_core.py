import numpy as np
import pytest
from hypothesis import given, strategies as st

from moco.core import (InvalidInputError, RngStream, matvec, project_ball,
                       project_simplex)


def grid_simplex_2(resolution):
    """Dense grid over the 2-simplex, used as an independent projection oracle."""
    t = np.arange(0.0, 1.0 + resolution, resolution)
    return np.column_stack([t, 1.0 - t])


class TestProjectSimplex:
    def test_fixed_point_on_simplex(self):
        np.testing.assert_array_equal(project_simplex([0.2, 0.8]), [0.2, 0.8])

    def test_symmetric_input(self):
        np.testing.assert_allclose(project_simplex([0.5, 0.5, 0.5]),
                                   np.full(3, 1 / 3), atol=1e-15)

    def test_against_grid_search(self):
        # independent oracle: brute-force nearest point on a 1e-4 grid
        v = np.array([2.0, -1.0])
        grid = grid_simplex_2(1e-4)
        best = grid[np.argmin(np.sum((grid - v) ** 2, axis=1))]
        w = project_simplex(v)
        assert np.linalg.norm(w - best) <= 2e-4
        np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            project_simplex([np.nan, 0.0])
        with pytest.raises(InvalidInputError):
            project_simplex([np.inf, 0.0, 0.0])

    def test_fuzz_invariants_bulk(self):
        rng = np.random.default_rng(12345)
        for _ in range(100_000):
            m = rng.integers(1, 7)
            v = rng.normal(size=m) * 10.0 ** rng.integers(-3, 4)
            w = project_simplex(v)
            assert np.min(w) >= -1e-12
            assert abs(w.sum() - 1.0) <= 1e-10

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(5000):
            v = rng.normal(size=rng.integers(1, 8)) * 5
            w = project_simplex(v)
            np.testing.assert_array_equal(project_simplex(w), w)

    def test_optimality_against_sampled_competitors(self):
        rng = np.random.default_rng(99)
        for _ in range(2000):
            m = rng.integers(2, 6)
            v = rng.normal(size=m) * 3
            w = project_simplex(v)
            competitors = rng.dirichlet(np.ones(m), size=20)
            dist_w = np.linalg.norm(w - v)
            for c in competitors:
                assert dist_w <= np.linalg.norm(c - v) + 1e-9

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=10))
    def test_fuzz_invariants_hypothesis(self, vals):
        w = project_simplex(np.array(vals))
        assert np.min(w) >= -1e-12
        assert abs(w.sum() - 1.0) <= 1e-10


class TestProjectBall:
    def test_inside_unchanged(self):
        np.testing.assert_array_equal(project_ball([3.0, 4.0], 5.0), [3.0, 4.0])

    def test_rescaled(self):
        np.testing.assert_allclose(project_ball([6.0, 8.0], 5.0), [3.0, 4.0])

    def test_origin(self):
        np.testing.assert_array_equal(project_ball([0.0, 0.0], 1.0), [0.0, 0.0])

    def test_negative_radius(self):
        with pytest.raises(InvalidInputError):
            project_ball([1.0], -0.5)

    @given(st.lists(st.floats(-1e8, 1e8), min_size=1, max_size=6),
           st.floats(0, 1e6))
    def test_never_increases_norm(self, vals, radius):
        y = np.array(vals)
        out = project_ball(y, radius)
        assert np.linalg.norm(out) <= radius * (1 + 1e-14) + 1e-12
        if np.linalg.norm(y) <= radius:
            np.testing.assert_array_equal(out, y)


class TestMatvec:
    def test_basis_selection(self):
        J = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(matvec(J, [1.0, 0.0]), [1.0, 0.0])

    def test_average(self):
        J = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(matvec(J, [0.5, 0.5]), [0.5, 0.5])

    def test_weighted_sum_by_hand(self):
        # 0.2 * (2, 0) + 0.8 * (0, 1) = (0.4, 0.8)
        J = np.array([[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(matvec(J, [0.2, 0.8]), [0.4, 0.8])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            matvec(np.eye(2), [1.0, 0.0, 0.0])


class TestRngStream:
    def test_replay_identical(self):
        a = RngStream(2024).normal(10_000)
        b = RngStream(2024).normal(10_000)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        assert not np.array_equal(RngStream(1).normal(16), RngStream(2).normal(16))

    def test_substreams_independent_and_reproducible(self):
        master = RngStream(5)
        s1 = master.substream(1).normal(100)
        s2 = master.substream(2).normal(100)
        assert not np.array_equal(s1, s2)
        np.testing.assert_array_equal(s1, RngStream(5).substream(1).normal(100))

    def test_permutation_replay(self):
        np.testing.assert_array_equal(RngStream(9).permutation(50),
                                      RngStream(9).permutation(50))
