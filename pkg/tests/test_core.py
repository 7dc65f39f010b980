import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reluspline.core import RngStream, as_matrix, matmul, relu, standard_normal, uniform


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_hand_arithmetic(self):
        assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).tolist() == [[11.0]]

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"2x3 times 4x2"):
            matmul(np.ones((2, 3)), np.ones((4, 2)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            matmul([[math.nan]], [[1.0]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32))
    def test_associativity(self, n, k, m, p, seed):
        g = np.random.default_rng(seed)
        a, b, c = g.normal(size=(n, k)), g.normal(size=(k, m)), g.normal(size=(m, p))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        scale = np.abs(a) @ np.abs(b) @ np.abs(c)
        assert np.all(np.abs(left - right) <= 1e-9 * scale)


class TestRelu:
    def test_example(self):
        assert relu([[-1.0, 0.0, 2.0]]).tolist() == [[0.0, 0.0, 2.0]]

    def test_all_negative_gives_exact_zeros(self):
        out = relu(-np.abs(np.random.default_rng(0).normal(size=(5, 4))) - 1e-300)
        assert np.all(out == 0.0)
        # no negative zeros either
        assert not np.any(np.signbit(out))

    def test_idempotent(self):
        m = np.random.default_rng(1).normal(size=(7, 3))
        np.testing.assert_array_equal(relu(relu(m)), relu(m))


class TestRng:
    def test_same_seed_same_normals(self):
        a = standard_normal(RngStream(7), 5, 3)
        b = standard_normal(RngStream(7), 5, 3)
        np.testing.assert_array_equal(a, b)

    def test_normal_moments(self):
        z = standard_normal(RngStream(2024), 1000, 1000)
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1.0) < 0.01

    def test_odd_count(self):
        z = standard_normal(RngStream(3), 3, 3)
        assert z.shape == (3, 3)
        assert np.all(np.isfinite(z))
        # the first eight values match the even-count stream
        even = standard_normal(RngStream(3), 2, 5).reshape(-1)
        np.testing.assert_array_equal(z.reshape(-1)[:8], even[:8])

    def test_box_muller_from_uniforms(self):
        # the Gaussian stream is a fixed transform of the uniform stream
        u = RngStream(11).random((2, 2))
        r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        expected = np.column_stack([r * np.cos(2 * np.pi * u[:, 1]), r * np.sin(2 * np.pi * u[:, 1])])
        np.testing.assert_allclose(standard_normal(RngStream(11), 1, 4).reshape(2, 2), expected, rtol=1e-12)

    def test_uniform_bounds(self):
        u = uniform(RngStream(5), -2.0, 3.0, 200, 50)
        assert u.min() >= -2.0 and u.max() < 3.0

    def test_uniform_mean(self):
        u = uniform(RngStream(6), -1.0, 1.0, 1000, 1000)
        assert abs(u.mean()) < 0.005

    def test_uniform_reproducible(self):
        np.testing.assert_array_equal(uniform(RngStream(9), 0, 1, 4, 4), uniform(RngStream(9), 0, 1, 4, 4))

    def test_uniform_rejects_bad_bounds(self):
        with pytest.raises(ValueError, match="lo < hi"):
            uniform(RngStream(0), 1.0, 1.0, 2, 2)

    def test_distinct_seeds_distinct_prefixes(self):
        prefixes = {tuple(standard_normal(RngStream(s), 1, 16).reshape(-1)) for s in range(200)}
        assert len(prefixes) == 200

    def test_child_streams(self):
        base = RngStream(100)
        np.testing.assert_array_equal(base.child(3).random(4), RngStream(103).random(4))

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngStream(-1)


def test_as_matrix_promotes_rows():
    assert as_matrix([1.0, 2.0]).shape == (1, 2)
    with pytest.raises(ValueError, match="2-D"):
        as_matrix(np.ones((2, 2, 2)))
