import numpy as np
import pytest

from indexlab.bott import OscillatorConfig, build_bott
from indexlab.cstar_k0 import Algebra
from indexlab.elliptic import (
    DoubledBlock,
    DoubledOp,
    EllipticityError,
    SelfAdjointnessError,
    analytic_index,
    bump,
    cayley,
    chirality_pairing_residual,
    commutator_bound_check,
    constant_op,
    discretize,
    doubled_from_operator,
    freeze_compare,
    hermiticity_residual,
    landau_gap,
    local_decay,
    make_first_order_op,
    morphism_index,
    quantization_convergence,
    random_order_zero_perturbation,
    scalar_circle_op,
    symbol_resolvent_decay,
    topological_index_torus,
    torus_quantization_defect,
    twisted_dirac_torus,
)
from indexlab.quantize import QuantizationGrid, resolvent

lorentz = lambda y: 1 / (1 + np.asarray(y) ** 2)


@pytest.fixture(scope="module")
def c64():
    return QuantizationGrid.circle(64)


@pytest.fixture(scope="module")
def c256():
    return QuantizationGrid.circle(256)


def h_op(grid):
    return scalar_circle_op(grid, lambda x: 2 + np.sin(x), np.cos)


def test_h_operator_is_valid(c64):
    op = h_op(c64)
    x = c64.axis_points
    assert np.allclose(op.symbol(0, [1.5])[:, 0, 0], 1.5 * (2 + np.sin(x)))
    assert abs(op.c0 - 1.0) < 1e-3


def test_coefficient_errors(c64):
    P = c64.size
    with pytest.raises(SelfAdjointnessError):
        make_first_order_op(c64, Algebra((1,)), 1, [[np.ones(P)]], [np.zeros(P)])
    with pytest.raises(SelfAdjointnessError):
        make_first_order_op(c64, Algebra((1,)), 1, [[-1j * (2 + np.sin(c64.axis_points))]], [np.zeros(P)])
    with pytest.raises(EllipticityError):
        make_first_order_op(c64, Algebra((1,)), 1, [[-1j * np.sin(c64.axis_points)]], [-0.5j * np.cos(c64.axis_points)])


def test_symmetrize_repairs_b(c64):
    h = 2 + np.sin(c64.axis_points)
    op = make_first_order_op(c64, Algebra((1,)), 1, [[-1j * h]], [np.zeros(c64.size)], symmetrize=True)
    assert np.allclose(op.b[0][:, 0, 0], -0.5j * np.cos(c64.axis_points), atol=1e-12)


def test_constant_operator_spectrum(c64):
    w = np.linalg.eigvalsh(discretize(constant_op(c64)))
    assert np.abs(w - np.arange(-32, 32)).max() <= 1e-9


def test_zero_coefficients_give_zero_matrix(c64):
    # ellipticity is what rejects this operator; the discretization itself is zero
    P = c64.size
    op = make_first_order_op(c64, Algebra((1,)), 1, [[np.zeros(P)]], [np.zeros(P)], c0=-1.0)
    assert np.all(discretize(op) == 0)


def test_h_operator_hermitian(c256):
    assert hermiticity_residual(discretize(h_op(c256))) <= 1e-8


def test_matrix_valued_block(c64):
    # D = -i d/dx (x) 1 on C^2 over M_2
    P = c64.size
    a = -1j * np.ones((P, 2, 2)) * np.eye(2)
    op = make_first_order_op(c64, Algebra((2,)), 1, [[a]], [np.zeros((P, 2, 2))])
    w = np.linalg.eigvalsh(discretize(op))
    assert np.allclose(w, np.repeat(np.arange(-32, 32), 2), atol=1e-9)


def test_commutator_bound_examples(c256):
    r = commutator_bound_check(constant_op(c256), lambda x: np.ones_like(x))
    assert r["lhs"] < 1e-12
    r = commutator_bound_check(constant_op(c256), np.sin)
    assert abs(r["lhs"] - 1) <= 1e-3 and abs(r["rhs"] - 1) <= 1e-3
    r = commutator_bound_check(h_op(c256), np.cos)
    assert r["holds"] and r["lhs"] <= r["rhs"] * (1 + 1e-3)


def test_unresolved_phi_is_rejected(c64):
    with pytest.raises(ValueError):
        commutator_bound_check(constant_op(c64), lambda x: np.abs(np.sin(x)))


def test_local_decay_parts(c256):
    ts = [4, 16, 64, 128]
    c = constant_op(c256)
    one = local_decay(c, c, np.sin, resolvent(1), ts)["part1"]
    for r in one:
        assert r["resolvent"] <= r["bound"] + 1e-8
    h = h_op(c256)
    h2 = make_first_order_op(c256, h.algebra, 1, [[h.a[0][0]]], [h.b[0][:, 0, 0] + bump(1.0, 0.5)(c256.axis_points)])
    h3 = scalar_circle_op(c256, lambda x: 2 + np.sin(x) + 0.5 * bump(np.pi + 1, 0.8)(x))
    two = local_decay(h, h2, bump(1.0, 0.6), lorentz, ts)["part2"]
    three = local_decay(h, h3, bump(1.0, 0.6), lorentz, ts)["part3"]
    assert two[-1]["norm"] < 0.05 and three[-1]["norm"] < 0.05
    assert two[-1]["norm"] < two[0]["norm"] and three[-1]["norm"] < three[0]["norm"]


def test_freeze_examples(c256):
    c = constant_op(c256)
    for x0 in (0.3, 2.0, 5.0):
        assert freeze_compare(c, x0, bump(x0, 0.5), lorentz, 16.0, how="full")["norm"] <= 1e-10
    h = h_op(c256)
    wide = freeze_compare(h, 1.0, bump(1.0, np.pi / 2), lorentz, 64.0)
    narrow = freeze_compare(h, 1.0, bump(1.0, np.pi / 8), lorentz, 64.0)
    tiny = freeze_compare(h, 1.0, bump(1.0, np.pi / 16), lorentz, 64.0)
    assert narrow["norm"] < wide["norm"] and narrow["delta"] < wide["delta"]
    assert tiny["norm"] < 0.1
    with pytest.raises(ValueError):
        freeze_compare(h, 1.0, bump(3.0, 0.5), lorentz, 64.0)


def test_quantization_convergence(c256):
    ctrl = quantization_convergence(constant_op(c256), lorentz, [4, 32, 128], how="full")
    assert max(r["norm"] for r in ctrl) <= 1e-8
    rows = quantization_convergence(h_op(c256), lorentz, [8, 16, 32, 64])
    norms = [r["norm"] for r in rows]
    assert all(b <= a for a, b in zip(norms, norms[1:])) and norms[-1] < 0.05


def test_quantization_rejects_non_decaying_f(c256):
    with pytest.raises(ValueError):
        quantization_convergence(h_op(c256), lambda y: np.cos(y), [4])


def test_symbol_resolvent(c64):
    rep = symbol_resolvent_decay(h_op(c64))
    rows = {r["R"]: r["sup"] for r in rep["rows"]}
    assert rows[0.0] <= 1 + 1e-12
    assert abs(rows[16.0] / rows[32.0] - 2) < 0.2
    assert abs(rep["C"] - 1.0) < 1e-3  # 1 / min h


def test_cayley_examples(rng):
    H = np.zeros((3, 3))
    assert np.allclose(cayley(H, 1.0), -np.eye(3))
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    H = A + A.conj().T
    U = cayley(H, 0.7)
    assert np.abs(U.conj().T @ U - np.eye(6)).max() <= 1e-10
    lam, V = np.linalg.eigh(H / 0.7)
    assert np.allclose(V.conj().T @ U @ V, np.diag((lam + 1j) / (lam - 1j)), atol=1e-10)


def test_invertible_operator_has_zero_index(rng):
    D = np.diag([1.0, -2.0, 3.0]) + 0.1 * rng.normal(size=(3, 3))
    dop = doubled_from_operator(D)
    assert analytic_index(dop).ranks == (0,)
    assert morphism_index(dop)[0].ranks == (0,)


def test_bott_operator_as_doubled_operator():
    op = build_bott(OscillatorConfig(n=1, t=1.0, N=128, L=8.0))
    mask = op.bulk_mask()
    ev = op.eps_diag > 0
    mp, mm = mask[ev].astype(float), mask[~ev].astype(float)
    loc = lambda: (lambda v: mp[:, None] * v, lambda v: mm[:, None] * v)
    dop = DoubledOp(Algebra((1,)), [DoubledBlock(op.matrix, op.eps_diag, 1, loc, op.config.gap)])
    assert analytic_index(dop).ranks == (1,)
    cls, det = morphism_index(dop)
    assert cls.ranks == (1,) and det[0]["involution"] <= 1e-10


def test_torus_flux_zero_and_one():
    d0 = twisted_dirac_torus([0], 16)
    k = d0.blocks[0].kernel(0.05)
    assert k.counts == (1, 1) and analytic_index(d0).ranks == (0,)
    d1 = twisted_dirac_torus([1], 16)
    assert d1.blocks[0].kernel(0.05).counts == (1, 0)
    assert morphism_index(d1)[0].ranks == (1,)


def test_torus_two_blocks():
    dop = twisted_dirac_torus([2, -1], 16)
    assert analytic_index(dop).ranks == (2, -1)
    assert morphism_index(dop)[0].ranks == (2, -1)
    assert topological_index_torus([2, -1]).ranks == (2, -1)


def test_topological_index_examples():
    assert topological_index_torus([0]).ranks == (0,)
    assert topological_index_torus([3]).ranks == (3,)
    assert topological_index_torus([1, -2]).ranks == (1, -2)
    assert topological_index_torus([2], Algebra((2,))).ranks == (4,)
    with pytest.raises(ValueError):
        topological_index_torus([1], Algebra((1, 1)))


def test_torus_grid_too_small():
    with pytest.raises(ValueError):
        twisted_dirac_torus([3], 16)


def test_landau_gap_matches_spectrum():
    dop = twisted_dirac_torus([2], 16)
    s = dop.blocks[0].kernel(0.05).physical_singular_values()
    assert abs(s[s > 0.05].min() - landau_gap(2)) < 1e-3


def test_odd_and_paired_spectrum():
    dop = twisted_dirac_torus([1], 16)
    assert dop.odd_residual() == 0 and dop.hermitian_residual() < 1e-12
    blk = dop.blocks[0]
    assert chirality_pairing_residual(blk.matrix, blk.eps, count=10) < 1e-6


def test_index_stable_under_order_zero_perturbation(rng):
    dop = twisted_dirac_torus([2], 16)
    blk = random_order_zero_perturbation(dop.blocks[0], 0.02, rng)
    pert = DoubledOp(dop.algebra, [blk])
    assert analytic_index(pert, gap_tol=0.06).ranks == (2,)
    assert morphism_index(pert, gap_tol=0.06)[0].ranks == (2,)


def test_torus_quantization_defect_decays():
    blk = twisted_dirac_torus([1], 16).blocks[0]
    rows = torus_quantization_defect(blk, lorentz, [4, 16, 64])
    norms = [r["norm"] for r in rows]
    assert norms[2] < norms[1] < norms[0] and norms[2] < 0.1
