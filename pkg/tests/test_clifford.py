import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from indexlab.clifford import (
    build_clifford,
    clifford_c,
    clifford_c_batch,
    clifford_residuals,
    graded_lex_basis,
    identity_residuals,
)


def test_n1_matrices():
    rep = build_clifford(1)
    assert rep.basis == ((), (1,))
    assert np.array_equal(rep.d[0], [[0, 0], [1, 0]])
    assert np.array_equal(rep.epsilon, np.diag([1.0, -1.0]))


def test_basis_order():
    assert graded_lex_basis(3) == ((), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3))


def _wedge(j, S):
    # brute force: e_j ^ e_S = sign * e_{S+j}
    if j in S:
        return 0, None
    lst = [j] + list(S)
    # sort by adjacent swaps, counting the sign
    sign = 1
    for i in range(len(lst) - 1):
        if lst[i] > lst[i + 1]:
            lst[i], lst[i + 1] = lst[i + 1], lst[i]
            sign = -sign
    return sign, tuple(lst)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exterior_multiplication_brute_force(n):
    rep = build_clifford(n)
    idx = {S: i for i, S in enumerate(rep.basis)}
    for j in range(1, n + 1):
        want = np.zeros((rep.dim, rep.dim))
        for S in rep.basis:
            s, T = _wedge(j, S)
            if T is not None:
                want[idx[T], idx[S]] = s
        assert np.array_equal(rep.d[j - 1], want)


def test_n2_anticommutators_exact():
    rep = build_clifford(2)
    I = np.eye(4)
    ac = lambda a, b: a @ b + b @ a
    assert np.array_equal(ac(rep.d[0], rep.dstar[1]), np.zeros((4, 4)))
    assert np.array_equal(ac(rep.d[0], rep.dstar[0]), I)


@pytest.mark.parametrize("n", range(1, 7))
def test_identities_exact(n):
    assert all(v == 0 for v in identity_residuals(build_clifford(n)).values())


@pytest.mark.parametrize("bad", [0, 7, 2.0, "3"])
def test_build_rejects(bad):
    with pytest.raises(ValueError):
        build_clifford(bad)


def test_c_examples():
    rep = build_clifford(2)
    assert np.array_equal(clifford_c(rep, [0, 0], [0, 0]), np.zeros((4, 4)))
    c = clifford_c(build_clifford(1), [1.0], [0.0])
    assert np.array_equal(c, [[0, 1], [1, 0]])
    assert np.array_equal(c @ c, np.eye(2))
    with pytest.raises(ValueError):
        clifford_c(rep, [1.0], [0.0, 0.0])


vec = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False))


@given(st.integers(1, 4), vec, vec)
def test_clifford_relations(n, v, xi):
    rep = build_clifford(n)
    res = clifford_residuals(rep, v[:n], xi[:n])
    scale = 1 + np.dot(v[:n], v[:n]) + np.dot(xi[:n], xi[:n])
    assert res["selfadjoint"] <= 1e-12
    assert res["anticommute"] <= 1e-12
    assert res["square"] <= 1e-12 * scale


def test_batch_matches_single(rng):
    rep = build_clifford(3)
    v, xi = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    batch = clifford_c_batch(rep, v, xi)
    for i in range(5):
        assert np.allclose(batch[i], clifford_c(rep, v[i], xi[i]))
