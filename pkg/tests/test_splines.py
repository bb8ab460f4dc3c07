"""B-spline helper tests against a naive Cox-de Boor oracle."""

import numpy as np
import pytest

from degkit import splines

from oracles import bspline_basis_oracle


def test_knot_vector_uniform_and_dim():
    k = splines.knot_vector(0.0, 1.0, 3, 2, "uniform")
    assert len(k) == splines.basis_dim(3, 2) + 3 + 1
    assert np.allclose(k[:4], 0.0) and np.allclose(k[-4:], 1.0)
    assert np.allclose(k[4:6], [1 / 3, 2 / 3])


def test_knot_vector_quantile_uses_values():
    vals = np.concatenate([np.zeros(90), np.linspace(0, 10, 10)])
    k = splines.knot_vector(0.0, 10.0, 3, 3, "quantile", vals)
    interior = k[4:-4]
    assert np.all(np.diff(interior) >= 0)
    assert np.all(interior < 5.0)  # knots follow the data mass near zero
    with pytest.raises(ValueError):
        splines.knot_vector(0.0, 10.0, 3, 3, "quantile")
    with pytest.raises(ValueError):
        splines.knot_vector(1.0, 1.0, 3, 3, "uniform")


def test_design_matrix_matches_de_boor_oracle():
    rng = np.random.default_rng(4)
    for degree, n_int in [(1, 3), (2, 0), (3, 5)]:
        knots = splines.knot_vector(-1.0, 2.0, degree, n_int, "uniform")
        x = rng.uniform(-1.0, 2.0, size=40)
        B = splines.design_matrix(x, knots, degree)
        O = bspline_basis_oracle(x, knots, degree)
        assert np.allclose(B, O, atol=1e-12)


def test_design_matrix_partition_of_unity_and_clamping():
    knots = splines.knot_vector(0.0, 1.0, 3, 4, "uniform")
    x = np.linspace(0.0, 1.0, 101)
    B = splines.design_matrix(x, knots, 3)
    assert np.allclose(B.sum(axis=1), 1.0)
    out = splines.design_matrix([-5.0, 7.0], knots, 3)
    ends = splines.design_matrix([0.0, 1.0], knots, 3)
    assert np.allclose(out, ends)


def test_second_difference_penalty():
    P = splines.second_difference_penalty(6)
    lin = 2.0 + 0.5 * np.arange(6)
    assert np.allclose(P @ lin, 0.0)           # linear trends unpenalized
    assert np.allclose(P, P.T)
    assert np.all(np.linalg.eigvalsh(P) >= -1e-12)
    assert np.array_equal(splines.second_difference_penalty(2), np.zeros((2, 2)))
