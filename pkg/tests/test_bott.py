import numpy as np
import pytest
from hypothesis import given, strategies as st

from indexlab.bott import (
    OscillatorConfig,
    alpha_isometry,
    bott_index,
    bott_spectrum,
    build_bott,
    closure_profile,
    compact_bump,
    exact_levels,
    fit_gaussian_width,
    frozen_symbol,
    kernel_homotopy,
    kernel_homotopy_dense,
    near_zero_counts,
    positive_levels,
    thom_point_map,
    total_symbol,
    zero_form_weight,
)
from indexlab.clifford import build_clifford, clifford_c
from indexlab.linalg_core import fourier_diff_matrix


@pytest.fixture(scope="module")
def b1():
    return build_bott(OscillatorConfig(n=1, t=1.0, N=256, L=10.0))


@pytest.fixture(scope="module")
def b4():
    return build_bott(OscillatorConfig(n=1, t=4.0, N=256, L=6.0))


@pytest.mark.parametrize(
    "kw",
    [dict(n=3), dict(t=0.0), dict(N=100), dict(N=8), dict(n=2, N=64), dict(t=1.0, L=5.0), dict(sign=2)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OscillatorConfig(**kw)


def test_n1_block_structure(b1):
    # basis (1, e1): the even -> odd block is D/t + x, the odd -> even block is -D/t + x
    cfg = b1.config
    D = fourier_diff_matrix(cfg.N, 2 * cfg.L)
    phi = closure_profile(cfg.grid(), cfg.L, cfg.width, cfg.kappa)
    M = b1.matrix
    assert np.abs(M[1::2, 0::2] - (D / cfg.t + np.diag(phi))).max() < 1e-12
    assert np.abs(M[0::2, 1::2] - (-D / cfg.t + np.diag(phi))).max() < 1e-12
    assert np.abs(M[0::2, 0::2]).max() == 0 and np.abs(M[1::2, 1::2]).max() == 0


def test_profile_is_coordinate_in_bulk(b1):
    cfg = b1.config
    x = cfg.grid()
    phi = closure_profile(x, cfg.L, cfg.width, cfg.kappa)
    bulk = np.abs(x) <= cfg.L - cfg.width
    assert np.array_equal(phi[bulk], x[bulk])


def test_odd_and_hermitian(b1):
    M, e = b1.matrix, b1.eps_diag
    assert np.abs(e[:, None] * M + M * e[None, :]).max() <= 1e-10
    assert np.abs(M - M.conj().T).max() == 0


def test_gaussian_is_annihilated(b1):
    x = b1.config.grid()
    g = np.zeros(b1.dim, complex)
    g[0::2] = np.exp(-(x**2) / 2)
    g /= np.linalg.norm(g)
    assert abs(np.vdot(g, b1.matrix @ g)) < 1e-12
    assert np.linalg.norm(b1.matrix @ g) < 1e-8


def test_levels_t1(b1):
    lv = positive_levels(b1, 6)
    assert np.abs(lv - exact_levels(1.0, 6)).max() <= 1e-6
    assert np.allclose(lv[:3], [np.sqrt(2), 2, np.sqrt(6)], atol=1e-6)


def test_levels_t4(b4):
    assert abs(positive_levels(b4, 1)[0] - np.sqrt(0.5)) <= 1e-6


def test_single_eigenvalue_near_zero(b1):
    spec = bott_spectrum(b1, 5)
    delta = 0.5 * np.sqrt(2.0)
    assert np.count_nonzero(np.abs(spec) < delta) == 1
    nz = near_zero_counts(b1)
    assert nz["physical"] == 1 and nz["raw"] == nz["physical"] + nz["artifacts"]


def test_index_and_kernel(b1):
    assert bott_index(b1) == 1
    assert zero_form_weight(b1) >= 1 - 1e-8
    fit = fit_gaussian_width(b1)
    assert abs(fit["gamma_over_t"] - 0.5) < 1e-6


def test_negated_coordinate_moves_kernel_to_odd_part():
    op = build_bott(OscillatorConfig(n=1, t=1.0, N=256, L=10.0, sign=-1))
    assert bott_index(op) == -1


def test_t_scaling_of_width(b4):
    assert abs(fit_gaussian_width(b4)["gamma"] - 2.0) < 1e-5


def test_n2_small_grid():
    op = build_bott(OscillatorConfig(n=2, t=1.0, N=16, L=6.0))
    assert bott_index(op) == 1


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.25, 4))
def test_symbol_matches_clifford(v, xi, t):
    cfg = OscillatorConfig(n=1, t=t, N=16, L=12.0)
    op = build_bott(cfg)
    assert np.abs(frozen_symbol(op, [v], [xi]) - total_symbol(cfg, [v], [xi])).max() < 1e-12


def test_thom_point_map_examples():
    rep = build_clifford(2)
    f = lambda y: 1 / (1 + y**2)
    out = thom_point_map(rep, f, [0.0], np.zeros((1, 4)))
    assert np.allclose(out[0, 0], np.eye(4))
    zero = thom_point_map(rep, lambda y: 0 * y, [0.3, 1.0], np.ones((2, 4)))
    assert np.all(zero == 0)
    with pytest.raises(ValueError):
        thom_point_map(rep, lambda y: np.ones_like(y), [0.0], np.zeros((1, 4)))


@given(st.floats(-3, 3), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_thom_eigenvalues(x, ph):
    # f(y) = exp(-y^2) sees only |y|, and eps x + c(v, xi) squares to r^2
    rep = build_clifford(2)
    r = np.sqrt(x**2 + np.dot(ph, ph))
    out = thom_point_map(rep, lambda y: np.exp(-(y**2)), [x], np.array([ph]))[0, 0]
    assert np.abs(out - np.exp(-(r**2)) * np.eye(4)).max() < 1e-10
    H = x * rep.epsilon + clifford_c(rep, ph[:2], ph[2:])
    assert np.allclose(np.abs(np.linalg.eigvalsh(H)), r, atol=1e-10)


def test_homotopy_zero_and_nontrivial(b1):
    x = np.linspace(-2, 2, 201)
    s_list = [0.1, 0.5, 1.0]
    vals = kernel_homotopy(b1, compact_bump(1.0), x, s_list)
    assert vals.max() <= 1e-8
    assert kernel_homotopy(b1, compact_bump(10.0), x, [1.0])[0] > 0.5


def test_homotopy_monotone_in_s(b1):
    x = np.linspace(-3, 3, 121)
    s_list = [2.0, 1.5, 1.0, 0.7, 0.5, 0.3]
    vals = kernel_homotopy(b1, compact_bump(3.0), x, s_list)
    assert np.all(np.diff(vals) <= 1e-12)


def test_homotopy_closed_form_matches_dense():
    op = build_bott(OscillatorConfig(n=1, t=1.0, N=64, L=8.0))
    k = op.kernel()
    H, eps = k.deflated_operator()
    vecs = np.zeros((H.shape[0], 1), complex)
    ne = int(np.count_nonzero(eps > 0))
    Qe, _ = k.deflation()
    vecs[:ne, 0] = Qe.conj().T @ k.phys_plus[:, 0]
    f = compact_bump(3.0)
    x = np.linspace(-1, 1, 5)
    fast = kernel_homotopy(op, f, x, [1.0, 2.0])
    dense = kernel_homotopy_dense(H, eps, vecs, f, x, [1.0, 2.0])
    assert np.allclose(fast, dense, atol=1e-8)


@pytest.mark.parametrize("t,n", [(0.5, 1), (1.0, 1), (4.0, 1), (0.5, 2), (1.0, 2), (4.0, 2)])
def test_alpha_isometry(t, n):
    assert abs(alpha_isometry(t, n) - 1) <= 1e-8


@pytest.mark.parametrize("t,n", [(1.0, 1), (4.0, 2)])
def test_alpha_without_prefactor(t, n):
    assert abs(alpha_isometry(t, n, prefactor=False) - (np.pi / (2 * t)) ** (n / 4)) <= 1e-10
