import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diraclimit.clifford import (ALPHA, BETA, GAMMA5, I4, SIGMA, alpha_dot,
                                 anticommutator, bracket, commutator,
                                 dirac_matrix, exp_i_alpha_dot)

vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def test_pauli_algebra():
    for j, k in itertools.product(range(3), repeat=2):
        assert np.allclose(anticommutator(SIGMA[j], SIGMA[k]), 2 * (j == k) * np.eye(2))


def test_clifford_anticommutation():
    gens = list(ALPHA) + [BETA]
    for a, b in itertools.product(range(4), repeat=2):
        assert np.allclose(anticommutator(gens[a], gens[b]), 2 * (a == b) * I4, atol=1e-15)


def test_gamma5():
    assert np.allclose(GAMMA5 @ GAMMA5, I4)
    assert np.allclose(GAMMA5, GAMMA5.conj().T)
    for k in range(3):
        assert np.allclose(commutator(GAMMA5, ALPHA[k]), 0)
    assert np.allclose(anticommutator(GAMMA5, BETA), 0)


def test_constants_read_only():
    with pytest.raises(ValueError):
        ALPHA[0, 0, 0] = 1.0


def test_dirac_matrix_lookup():
    assert np.array_equal(dirac_matrix("beta"), BETA)
    assert np.array_equal(dirac_matrix("alpha3"), ALPHA[2])
    with pytest.raises(ValueError):
        dirac_matrix("alpha4")


def test_bracket_sign():
    with pytest.raises(ValueError):
        bracket(BETA, BETA, sign="plus")
    assert np.allclose(bracket(ALPHA[0], BETA, "anticommutator"), 0)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_product_rule(a, b):
    lhs = alpha_dot(a) @ alpha_dot(b)
    rhs = np.dot(a, b) * I4 + 1j * GAMMA5 @ alpha_dot(np.cross(a, b))
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(a).max() * np.abs(b).max()))


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_gamma5_cross_identity(a, b):
    lhs = commutator(alpha_dot(a), alpha_dot(b))
    rhs = 2j * GAMMA5 @ alpha_dot(np.cross(a, b))
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_exp_i_alpha_dot(rng):
    from scipy.linalg import expm
    for _ in range(20):
        a = rng.normal(size=3)
        th = rng.normal()
        assert np.allclose(exp_i_alpha_dot(th, a), expm(1j * th * alpha_dot(a)), atol=1e-13)
    assert np.allclose(exp_i_alpha_dot(0.3, np.zeros(3)), I4)


def test_alpha_dot_stacks():
    a = np.arange(12.0).reshape(4, 3)
    assert alpha_dot(a).shape == (4, 4, 4)
