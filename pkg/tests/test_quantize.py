import numpy as np
import pytest
from hypothesis import given, strategies as st

from indexlab.cstar_k0 import Algebra
from indexlab.linalg_core import operator_norm
from indexlab.quantize import (
    Arc,
    PhaseFunction,
    QuantizationGrid,
    check_partition,
    commutator_decay,
    conv_A_op,
    conv_op,
    diffeo_covariance,
    glued_phi,
    interpolation_matrix,
    is_nonincreasing,
    morphism_defects,
    mult_A_op,
    mult_op,
    multiplier_eigenvalues,
    phi_A_t,
    phi_t,
    phi_t_kernel,
    range_support_violation,
    resolved_norm,
    restriction_defects,
    two_arc_partition,
)

lorentz = lambda y: 1 / (1 + np.asarray(y) ** 2)


@pytest.fixture(scope="module")
def line():
    return QuantizationGrid.line(128, 10.0)


@pytest.fixture(scope="module")
def circle():
    return QuantizationGrid.circle(128)


def test_grid_validation():
    with pytest.raises(ValueError):
        QuantizationGrid.line(2, 5.0)
    with pytest.raises(ValueError):
        QuantizationGrid(1, 16, 3.0, "circle")
    with pytest.raises(ValueError):
        QuantizationGrid(1, 16, np.pi, "sphere")


def test_grid_layouts(circle):
    assert circle.axis_points[0] == 0 and np.isclose(circle.dx, 2 * np.pi / 128)
    tor = QuantizationGrid.torus(8)
    assert tor.points.shape == (64, 2)
    # first axis is the slowest
    assert tor.points[1, 0] == tor.points[0, 0] and tor.points[8, 0] > tor.points[0, 0]
    F = tor.F
    assert np.abs(F.conj().T @ F - np.eye(64)).max() < 1e-12


def test_mult_op_examples(line):
    x = line.axis_points
    assert np.array_equal(mult_op(line, np.ones(line.size)), np.eye(line.size))
    b = np.exp(-(x**2))
    assert np.isclose(operator_norm(mult_op(line, b)), b.max())
    f, g = np.sin(x), np.cos(x)
    assert np.array_equal(mult_op(line, f) @ mult_op(line, g), mult_op(line, f * g))


def test_conv_op_examples(line):
    assert np.abs(conv_op(line, lambda xi: np.ones_like(xi), 3.0) - np.eye(line.size)).max() < 1e-12
    C = conv_op(line, lorentz, 2.0)
    w = np.sort(np.linalg.eigvalsh((C + C.conj().T) / 2))
    assert np.allclose(w, np.sort(multiplier_eigenvalues(line, lorentz, 2.0)), atol=1e-12)
    gaps = [operator_norm(conv_op(line, lorentz, t) - np.eye(line.size)) for t in (10, 100, 1000)]
    assert gaps[2] < gaps[1] < gaps[0] and gaps[2] < 1e-2


def test_elementary_tensor_and_kernel(line):
    f = lambda x: np.exp(-(x**2) / 4)
    F = PhaseFunction.tensor(f, lorentz)
    for t in (1.0, 8.0):
        A = phi_t(F, line, t)
        B = mult_op(line, f(line.axis_points)) @ conv_op(line, lorentz, t)
        assert np.abs(A - B).max() <= 1e-10
        assert np.abs(A - phi_t_kernel(line, f, lorentz, t)).max() <= 1e-10


def test_zero_symbol(line):
    assert np.all(phi_t(PhaseFunction(lambda x, xi: 0 * x * xi), line, 2.0) == 0)


@given(st.floats(0.5, 50.0))
def test_module_property_exact(t):
    grid = QuantizationGrid.circle(64)
    F = PhaseFunction(lambda x, xi: np.cos(x) / (1 + (xi - np.sin(x)) ** 2))
    rho = lambda x: 2 + np.sin(3 * x)
    lhs = phi_t(F.times_x(rho), grid, t)
    rhs = mult_op(grid, rho(grid.axis_points)) @ phi_t(F, grid, t)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_phi_A_t_blocks(circle):
    A = Algebra((1, 2))
    f = lambda x: np.exp(np.cos(x))
    F1 = PhaseFunction.tensor(f, lorentz)
    F2 = PhaseFunction(lambda x, xi: f(x) * lorentz(xi), fiber=2)
    Q = phi_A_t([F1, F2], A, circle, 4.0)
    assert np.abs(Q.blocks[0] - phi_t(F1, circle, 4.0)).max() < 1e-12
    ref = mult_A_op(f(circle.axis_points), A, circle) @ conv_A_op([lorentz, lorentz], A, circle, 4.0)
    assert (Q - ref).norm() <= 1e-10
    with pytest.raises(ValueError):
        phi_A_t([F1], A, circle, 4.0)


def test_scalar_algebra_matches_phi_t(circle):
    F = PhaseFunction(lambda x, xi: np.sin(x) / (1 + xi**2))
    Q = phi_A_t([F], Algebra((1,)), circle, 3.0)
    assert np.array_equal(Q.blocks[0], phi_t(F, circle, 3.0))


def test_c0_check(line):
    PhaseFunction(lambda x, xi: np.exp(-(x**2)) / (1 + xi**2) ** 2).check_c0(line)
    with pytest.raises(ValueError):
        PhaseFunction(lambda x, xi: np.exp(-(x**2)) + 0 * xi).check_c0(line)


def test_commutator_with_constant_is_zero(line):
    out = commutator_decay(line, np.full(line.size, 3.0), lorentz, [1, 2, 3, 4])
    assert max(r["norm"] for r in out["rows"]) < 1e-12


def test_commutator_bound_and_decay():
    grid = QuantizationGrid.line(256, 16.0)
    out = commutator_decay(grid, lorentz, lorentz, list(range(1, 33)))
    assert out["bound_holds"]
    norms = [r["norm"] for r in out["rows"]]
    assert norms[-1] < norms[0] / 5


def test_morphism_defects_shrink():
    grid = QuantizationGrid.line(128, 10.0)
    Fa = PhaseFunction(lambda x, xi: np.exp(-(x**2) / 2) / (xi + 1j))
    Fb = PhaseFunction(lambda x, xi: np.exp(-((x - 0.5) ** 2)) / (1 + xi**2))
    rows = morphism_defects(Fa, Fb, grid, [4, 16, 64])
    assert is_nonincreasing([r["mult"] for r in rows]) and is_nonincreasing([r["star"] for r in rows])
    assert rows[-1]["mult"] < 0.05


def test_restriction_to_open_set(line):
    U = np.abs(line.axis_points) < 3
    F = PhaseFunction(lambda x, xi: np.where(np.abs(x) < 2.5, np.cos(x * np.pi / 5) ** 2, 0) * np.exp(-(xi**2)))
    rows = restriction_defects(F, line, U, [1, 4, 16])
    assert is_nonincreasing([r["norm"] for r in rows]) and rows[-1]["norm"] < 1e-3
    assert range_support_violation(phi_t(F, line, 2.0), U) == 0


def test_interpolation_reproduces_band_limited(circle):
    y = np.linspace(0, 2 * np.pi, 37)
    f = np.cos(5 * circle.axis_points) + np.sin(2 * circle.axis_points)
    assert np.abs(interpolation_matrix(circle, y) @ f - (np.cos(5 * y) + np.sin(2 * y))).max() < 1e-12


def _bump_symbol():
    return PhaseFunction(lambda x, xi: np.exp(-((x - np.pi) ** 2) / (2 * 0.5**2)) / (1 + xi**2))


def test_identity_diffeo_is_exact(circle):
    rows = diffeo_covariance(circle, _bump_symbol(), lambda x: x, np.ones_like, [2.0, 8.0])
    assert max(r["full"] for r in rows) < 1e-12


def test_grid_shift_is_exact(circle):
    h = circle.dx
    rows = diffeo_covariance(circle, _bump_symbol(), lambda x: x + h, np.ones_like, [4.0, 64.0])
    assert max(r["full"] for r in rows) < 1e-8


def test_warp_covariance_decays():
    grid = QuantizationGrid.circle(256)
    psi = lambda x: x + 0.3 * np.sin(x)
    dpsi = lambda x: 1 + 0.3 * np.cos(x)
    rows = diffeo_covariance(grid, _bump_symbol(), psi, dpsi, [4.0, 64.0])
    assert rows[1]["norm"] < 0.1 and rows[1]["norm"] < 0.5 * rows[0]["norm"]


def test_partition_and_whole_cover(circle):
    arcs, rhos = two_arc_partition(0.3)
    assert check_partition(circle, rhos) < 1e-12
    F = PhaseFunction(lambda x, xi: (1 + 0.5 * np.cos(x)) / (1 + xi**2))
    whole = (Arc(0.0, np.pi),)
    G = glued_phi(circle, whole, (lambda x: np.ones_like(x),), F, 4.0)
    assert np.abs(G - phi_t(F, circle, 4.0)).max() == 0


def test_gluing_independence_and_support():
    grid = QuantizationGrid.circle(128)
    F = PhaseFunction(lambda x, xi: (1 + 0.5 * np.cos(x)) / (1 + xi**2))
    a1, r1 = two_arc_partition(0.0)
    a2, r2 = two_arc_partition(grid.axis_points[16])
    d = [resolved_norm(glued_phi(grid, a1, r1, F, t) - glued_phi(grid, a2, r2, F, t), grid) for t in (4.0, 32.0)]
    assert d[1] < 0.5 * d[0]
    # symbol supported inside one arc: the range stays in that arc
    arc = a1[0]
    inner = lambda x: np.exp(-(np.angle(np.exp(1j * x)) / 0.4) ** 2) * (np.abs(np.angle(np.exp(1j * x))) < 1.5)
    G = glued_phi(grid, a1, r1, PhaseFunction(lambda x, xi: inner(x) / (1 + xi**2)), 8.0)
    assert range_support_violation(G, arc.contains(grid.axis_points)) == 0
