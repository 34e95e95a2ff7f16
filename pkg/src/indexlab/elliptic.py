"""First-order elliptic operators over A = M_k1 + ... + M_kr on periodic grids.

D = sum_j a_j(x) d/dx_j + b(x) with a_j anti-Hermitian and b - b* = sum_j d_j a_j
(formal self-adjointness).  Principal symbol sigma(x, xi) = i sum_j a_j(x) xi_j.
Coefficients are stored per algebra block as arrays of shape (P, m, m) with
m = k * k_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .chiral import ChiralKernel, SpectralGapError, chiral_kernel
from .cstar_k0 import Algebra, AMatrix, K0Class, block_rank
from .linalg_core import (
    SpectralData,
    apply_function,
    hermitian_eig,
    hermitize,
    operator_norm,
)
from .quantize import (
    PhaseFunction,
    QuantizationGrid,
    apply_F,
    conv_op,
    mult_op,
    phi_t,
    resolved_norm,
    resolvent,
)


class EllipticityError(ValueError):
    pass


class SelfAdjointnessError(ValueError):
    pass


def spectral_derivative_samples(grid: QuantizationGrid, vals, axis: int) -> np.ndarray:
    """d/dx_axis of grid samples (leading axis of length P) by FFT."""
    vals = np.asarray(vals)
    shape = vals.shape
    arr = vals.reshape((grid.N,) * grid.n + shape[1:])
    k = grid.axis_frequencies
    ft = np.fft.fft(arr, axis=axis)
    bshape = [1] * arr.ndim
    bshape[axis] = grid.N
    kk = k.copy()
    if grid.N % 2 == 0:
        kk[grid.N // 2] = 0.0  # derivative of real samples stays real
    out = np.fft.ifft(1j * kk.reshape(bshape) * ft, axis=axis)
    return out.reshape(shape)


def derivative_matrix(grid: QuantizationGrid, axis: int) -> np.ndarray:
    """Spectral d/dx_axis on the grid (Nyquist kept, so -i times it has integer spectrum on 2pi grids)."""
    return 1j * conv_op(grid, lambda xi: xi if grid.n == 1 else xi[:, axis], 1.0)


@dataclass
class FirstOrderOp:
    grid: QuantizationGrid
    algebra: Algebra
    k: int
    a: list  # per block: array (n, P, m, m)
    b: list  # per block: array (P, m, m)
    c0: float = 0.0

    def fiber(self, i: int) -> int:
        return self.k * self.algebra.blocks[i]

    def b_sym(self, i: int) -> np.ndarray:
        """b - (1/2) sum_j d_j a_j, the Hermitian zeroth-order part."""
        out = np.array(self.b[i], dtype=complex)
        for j in range(self.grid.n):
            out -= 0.5 * spectral_derivative_samples(self.grid, self.a[i][j], 0 if self.grid.n == 1 else j)
        return out

    def symbol(self, i: int, xi) -> np.ndarray:
        """sigma(x, xi) = i sum_j a_j(x) xi_j for every grid x; xi an n-vector."""
        xi = np.atleast_1d(np.asarray(xi, float))
        return 1j * np.einsum("j,jpab->pab", xi, self.a[i])

    def total_symbol(self, i: int, xi) -> np.ndarray:
        return self.symbol(i, xi) + self.b[i]

    def prop(self, i: int = 0, n_dirs: int = 64) -> np.ndarray:
        """Prop(D, x) = sup over unit xi of ||sigma(x, xi)||, per grid point."""
        worst = np.zeros(self.grid.size)
        for xi in unit_directions(self.grid.n, n_dirs):
            s = np.linalg.norm(self.symbol(i, xi), ord=2, axis=(1, 2))
            worst = np.maximum(worst, s)
        return worst


def unit_directions(n: int, count: int = 64) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    th = np.linspace(0, 2 * np.pi, count, endpoint=False)
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def _blocks_input(vals, P, m, name):
    vals = np.asarray(vals, dtype=complex)
    if vals.shape == (P,):
        vals = vals[:, None, None] * np.eye(m)
    if vals.shape != (P, m, m):
        raise ValueError(f"{name} samples have shape {vals.shape}, expected {(P, m, m)}")
    return vals


def make_first_order_op(
    grid: QuantizationGrid,
    algebra: Algebra,
    k: int,
    a_samples: Sequence,
    b_samples: Sequence,
    symmetrize: bool = False,
    c0: float | None = None,
) -> FirstOrderOp:
    """Validate and package coefficients.

    a_samples[i][j] and b_samples[i] are per-block grid samples (scalars per
    point broadcast to multiples of the identity, or (P, m, m) arrays).
    With ``symmetrize`` the Hermitian part of b is kept and (1/2) sum d_j a_j
    added, which enforces formal self-adjointness.
    """
    P = grid.size
    if len(a_samples) != algebra.r or len(b_samples) != algebra.r:
        raise ValueError("one coefficient set per algebra block is required")
    a_all, b_all = [], []
    for i, ki in enumerate(algebra.blocks):
        m = k * ki
        if len(a_samples[i]) != grid.n:
            raise ValueError(f"block {i}: need {grid.n} derivative coefficients")
        a = np.stack([_blocks_input(aj, P, m, "a") for aj in a_samples[i]])
        b = _blocks_input(b_samples[i], P, m, "b")
        herm = np.abs(a + np.conj(np.swapaxes(a, -1, -2))).max()
        if herm > tol.get("coefficient_selfadjoint"):
            raise SelfAdjointnessError(f"block {i}: a_j is not anti-Hermitian (residual {herm:.3g})")
        da = sum(spectral_derivative_samples(grid, a[j], 0 if grid.n == 1 else j) for j in range(grid.n))
        if symmetrize:
            b = 0.5 * (b + np.conj(np.swapaxes(b, -1, -2))) + 0.5 * da
        resid = np.abs(b - np.conj(np.swapaxes(b, -1, -2)) - da).max()
        if resid > tol.get("coefficient_selfadjoint"):
            raise SelfAdjointnessError(f"block {i}: b - b* != sum d_j a_j (residual {resid:.3g})")
        a_all.append(a)
        b_all.append(b)
    op = FirstOrderOp(grid, algebra, k, a_all, b_all)
    op.c0 = check_ellipticity(op, c0)
    return op


def check_ellipticity(op: FirstOrderOp, c0: float | None = None) -> float:
    """Smallest singular value of sigma(x, xi) over grid x and unit xi."""
    c0 = 1e-6 if c0 is None else c0
    best = np.inf
    worst_at = None
    for i in range(op.algebra.r):
        for xi in unit_directions(op.grid.n):
            s = np.linalg.svd(op.symbol(i, xi), compute_uv=False)[:, -1]
            j = int(np.argmin(s))
            if s[j] < best:
                best, worst_at = float(s[j]), (i, op.grid.points[j].tolist(), xi.tolist())
    if best < c0:
        raise EllipticityError(f"symbol not elliptic: smallest singular value {best:.3g} at block/x/xi {worst_at}")
    return best


def scalar_circle_op(grid: QuantizationGrid, h: Callable, dh: Callable | None = None) -> FirstOrderOp:
    """D = -i(h d/dx + h'/2) on the circle: a = -i h, b = -(i/2) h'."""
    x = grid.axis_points
    hv = np.asarray(h(x), float)
    dhv = np.asarray(dh(x), float) if dh is not None else spectral_derivative_samples(grid, hv, 0).real
    return make_first_order_op(grid, Algebra((1,)), 1, [[-1j * hv]], [-0.5j * dhv])


def constant_op(grid: QuantizationGrid) -> FirstOrderOp:
    """D = -i d/dx."""
    P = grid.size
    return make_first_order_op(grid, Algebra((1,)), 1, [[-1j * np.ones(P)] * grid.n], [np.zeros(P)])


def discretize(op: FirstOrderOp, block: int = 0) -> np.ndarray:
    """sum_j (1/2)(M_{a_j} d_j + d_j M_{a_j}) + M_{b - (1/2) sum d_j a_j}."""
    grid, m = op.grid, op.fiber(block)
    out = mult_op(grid, op.b_sym(block), fiber=m).astype(complex)
    for j in range(grid.n):
        Dj = np.kron(derivative_matrix(grid, j), np.eye(m)) if m > 1 else derivative_matrix(grid, j)
        Ma = mult_op(grid, op.a[block][j], fiber=m)
        out += 0.5 * (Ma @ Dj + Dj @ Ma)
    return out


def hermiticity_residual(M) -> float:
    return float(np.abs(M - M.conj().T).max())


# --- commutator bounds ----------------------------------------------------------


def gibbs_tail(grid: QuantizationGrid, phi_vals) -> float:
    """Relative Fourier mass of phi beyond the resolved band."""
    c = np.abs(np.fft.fftn(np.asarray(phi_vals).reshape((grid.N,) * grid.n)).ravel())
    mask = grid.resolved_mask()
    return float(c[~mask].max(initial=0.0) / max(c.max(), 1e-300))


def commutator_bound_check(op: FirstOrderOp, phi: Callable, block: int = 0) -> dict:
    """lhs = ||Pi [D, M_phi] Pi|| on the resolved band, rhs = sup ||d phi|| Prop(D, x).

    The full-grid commutator is dominated by the wrap coupling of the two
    band edges (size about N/2) and carries no information about the
    continuum, so it is reported separately.
    """
    grid = op.grid
    pv = np.asarray(phi(grid.x_arg()), dtype=complex)
    tail = gibbs_tail(grid, pv)
    if tail > tol.get("gibbs"):
        raise ValueError(f"phi is not resolved on the grid (Fourier tail {tail:.3g})")
    D = discretize(op, block)
    m = op.fiber(block)
    Mp = mult_op(grid, pv, fiber=m)
    C = D @ Mp - Mp @ D
    lhs = resolved_norm(C, grid, fiber=m)
    grad = np.zeros(grid.size)
    for j in range(grid.n):
        grad = grad + np.abs(spectral_derivative_samples(grid, pv, 0 if grid.n == 1 else j)) ** 2
    rhs = float(np.max(np.sqrt(grad) * op.prop(block)))
    return {"lhs": lhs, "rhs": rhs, "full": operator_norm(C), "holds": lhs <= rhs * (1 + 1e-3) + 1e-12}


# --- functional calculus of discretized operators ---------------------------------


@dataclass
class DiscreteOp:
    """Discretized operator with a cached eigendecomposition."""

    matrix: np.ndarray
    grid: QuantizationGrid
    fiber: int = 1
    _spec: SpectralData | None = field(default=None, repr=False)

    @classmethod
    def of(cls, op: FirstOrderOp, block: int = 0) -> "DiscreteOp":
        return cls(discretize(op, block), op.grid, op.fiber(block))

    @property
    def spec(self) -> SpectralData:
        if self._spec is None:
            self._spec = hermitian_eig(self.matrix)
        return self._spec

    def f(self, f: Callable, t: float) -> np.ndarray:
        return apply_function(self.spec, lambda w: f(w / t))


def local_decay(op1: FirstOrderOp, op2: FirstOrderOp, phi: Callable, f: Callable, t_list, how: str = "resolved") -> dict:
    """Three decay tables.

    part1: ||[M_phi, f(D1/t)]|| and the exact resolvent bound
           ||[M_phi, r(D1/t)]|| <= ||[D1, M_phi]|| / t (full grid).
    part2: ||f(D1/t) - f(D2/t)|| (D2 - D1 of order zero).
    part3: ||M_phi f(D1/t) - f(D2/t) M_phi|| (D1 = D2 near supp phi).
    """
    grid = op1.grid
    m = op1.fiber(0)
    A1, A2 = DiscreteOp.of(op1), DiscreteOp.of(op2)
    Mp = mult_op(grid, phi(grid.x_arg()), fiber=m)
    comm_D = operator_norm(A1.matrix @ Mp - Mp @ A1.matrix)
    nrm = (lambda X: resolved_norm(X, grid, fiber=m)) if how == "resolved" else operator_norm
    p1, p2, p3 = [], [], []
    for t in t_list:
        F1, F2 = A1.f(f, t), A2.f(f, t)
        rb = max(operator_norm(Mp @ R - R @ Mp) for R in (A1.f(resolvent(1), t), A1.f(resolvent(-1), t)))
        p1.append({"t": float(t), "norm": nrm(Mp @ F1 - F1 @ Mp), "resolvent": rb, "bound": comm_D / t})
        p2.append({"t": float(t), "norm": nrm(F1 - F2)})
        p3.append({"t": float(t), "norm": nrm(Mp @ F1 - F2 @ Mp)})
    return {"part1": p1, "part2": p2, "part3": p3, "commutator_DM": comm_D}


def bump(center: float, half_width: float, periodic: bool = True) -> Callable:
    """Smooth bump exp(1 - 1/(1 - s^2)), s = (x - center)/half_width."""

    def f(x):
        d = np.asarray(x, float) - center
        if periodic:
            d = (d + np.pi) % (2 * np.pi) - np.pi
        s2 = (d / half_width) ** 2
        out = np.zeros_like(d)
        inside = s2 < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    return f


def frozen_op(op: FirstOrderOp, x0_index: int) -> FirstOrderOp:
    """Constant-coefficient operator with a(x0) and the Hermitian b_sym(x0)."""
    P = op.grid.size
    a = [[np.broadcast_to(op.a[i][j][x0_index], (P,) + op.a[i][j].shape[1:]).copy() for j in range(op.grid.n)] for i in range(op.algebra.r)]
    b = [np.broadcast_to(op.b_sym(i)[x0_index], (P,) + op.b[i].shape[1:]).copy() for i in range(op.algebra.r)]
    return make_first_order_op(op.grid, op.algebra, op.k, a, b)


def freeze_compare(op: FirstOrderOp, x0: float, phi: Callable, f: Callable, t: float, how: str = "resolved") -> dict:
    """||M_phi f(D/t) - M_phi f(D^{x0}/t)|| and the coefficient spread delta on supp phi."""
    grid = op.grid
    x = grid.axis_points
    i0 = int(np.argmin(np.abs(((x - x0) + np.pi) % (2 * np.pi) - np.pi)))
    pv = np.asarray(phi(grid.x_arg()))
    if abs(pv[i0]) <= 0:
        raise ValueError("phi does not contain x0 in its support")
    fr = frozen_op(op, i0)
    m = op.fiber(0)
    Mp = mult_op(grid, pv, fiber=m)
    A, B = DiscreteOp.of(op), DiscreteOp.of(fr)
    X = Mp @ (A.f(f, t) - B.f(f, t))
    supp = np.abs(pv) > 0
    delta = float(np.abs(op.a[0][:, supp] - fr.a[0][:, supp]).max())
    val = resolved_norm(X, grid, fiber=m) if how == "resolved" else operator_norm(X)
    return {"norm": val, "delta": delta, "x0": float(x[i0])}


def symbol_phase_function(op: FirstOrderOp, f: Callable, phi: Callable | None = None, block: int = 0) -> PhaseFunction:
    """phi(x) f(sigma(D)(x, xi)) via fiberwise functional calculus."""
    grid = op.grid
    a = op.a[block]
    m = op.fiber(block)
    pv = np.ones(grid.size) if phi is None else np.asarray(phi(grid.x_arg()), float)

    def func(x, xi):
        # x is the grid (P, ...) as sampled; xi (1, K[, n])
        xi = np.asarray(xi)
        if grid.n == 1:
            sig = 1j * a[0][:, None] * xi[0][None, :, None, None]
        else:
            sig = 1j * np.einsum("jpab,kj->pkab", a, xi[0])
        if m == 1:
            return pv[:, None] * f(sig[..., 0, 0].real)
        w, V = np.linalg.eigh(sig)
        return pv[:, None, None, None] * np.einsum("...ik,...k,...jk->...ij", V, f(w), V.conj())

    return PhaseFunction(func, m, selfadjoint=False)


def quantization_convergence(op: FirstOrderOp, f: Callable, t_list, phi: Callable | None = None, how: str = "resolved") -> list:
    """||Phi_t(phi f(sigma(D))) - M_phi f(D/t)|| along t_list (block 0)."""
    grid = op.grid
    m = op.fiber(0)
    F = symbol_phase_function(op, f, phi)
    F.check_c0(grid, 1.0)
    A = DiscreteOp.of(op)
    pv = np.ones(grid.size) if phi is None else phi(grid.x_arg())
    Mp = mult_op(grid, pv, fiber=m)
    rows = []
    for t in t_list:
        X = phi_t(F, grid, t) - Mp @ A.f(f, t)
        rows.append({"t": float(t), "norm": resolved_norm(X, grid, fiber=m) if how == "resolved" else operator_norm(X), "full": operator_norm(X)})
    return rows


def symbol_resolvent_decay(op: FirstOrderOp, radii=(0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0), block: int = 0) -> dict:
    """sup_x ||(sigma(x, xi) +- i)^-1|| on shells |xi| = R."""
    rows = []
    for R in radii:
        worst = 0.0
        for u in unit_directions(op.grid.n):
            S = op.symbol(block, R * u)
            for sgn in (1, -1):
                inv = np.linalg.inv(S + sgn * 1j * np.eye(S.shape[-1]))
                worst = max(worst, float(np.linalg.norm(inv, ord=2, axis=(1, 2)).max()))
        rows.append({"R": float(R), "sup": worst, "bound": 1.0 / np.sqrt(1.0 + (op.c0 * R) ** 2)})
    # decay constant: sup_x ||(sigma +- i)^-1|| <= C / |xi|, and the shifted
    # form C' / (1 + c0 |xi|) which also covers xi = 0
    C = max((r["sup"] * r["R"] for r in rows if r["R"] > 0), default=float("nan"))
    C_shift = max(r["sup"] * (1 + op.c0 * r["R"]) for r in rows)
    return {"rows": rows, "C": C, "C_shifted": C_shift, "c0": op.c0}


# --- doubled operators, Cayley transform and indices -------------------------------


@dataclass
class DoubledBlock:
    """Odd Hermitian matrix [[0, D*], [D, 0]] for one algebra block.

    The operator on the block is matrix (x) 1_mult, so K_0 ranks are
    multiplied by mult.  ``localizer`` returns (R_plus, R_minus) callables
    used to separate physical zero modes from grid partners.
    """

    matrix: np.ndarray
    eps: np.ndarray
    mult: int = 1
    localizer: Callable | None = None
    gap: float | None = None  # smallest nonzero exact |eigenvalue|
    meta: dict = field(default_factory=dict)
    _kernel: ChiralKernel | None = field(default=None, repr=False)

    def kernel(self, gap_tol: float) -> ChiralKernel:
        if self._kernel is not None and self._kernel.delta == gap_tol:
            return self._kernel
        lp, lm = self.localizer() if self.localizer is not None else (None, None)
        self._kernel = chiral_kernel(self.matrix, self.eps, gap_tol, lp, lm)
        return self._kernel


@dataclass
class DoubledOp:
    algebra: Algebra
    blocks: list

    def odd_residual(self) -> float:
        return max(float(np.abs(b.eps[:, None] * b.matrix + b.matrix * b.eps[None, :]).max()) for b in self.blocks)

    def hermitian_residual(self) -> float:
        return max(hermiticity_residual(b.matrix) for b in self.blocks)


def doubled_from_block(Dplus: np.ndarray) -> tuple:
    """[[0, D*], [D, 0]] with grading diag(1, -1) from D : even -> odd."""
    no, ne = Dplus.shape
    H = np.zeros((ne + no, ne + no), dtype=complex)
    H[ne:, :ne] = Dplus
    H[:ne, ne:] = Dplus.conj().T
    eps = np.concatenate([np.ones(ne), -np.ones(no)])
    return H, eps


def doubled_from_operator(D: np.ndarray, algebra: Algebra | None = None, mult: int = 1, gap: float | None = None) -> DoubledOp:
    H, eps = doubled_from_block(D)
    algebra = Algebra((1,)) if algebra is None else algebra
    return DoubledOp(algebra, [DoubledBlock(H, eps, mult, gap=gap)])


def cayley(H: np.ndarray, t: float) -> np.ndarray:
    """U_t = (H/t + i)(H/t - i)^-1 = I + 2i (H/t - i)^-1."""
    n = H.shape[0]
    I = np.eye(n)
    return I + 2j * np.linalg.inv(H / t - 1j * I)


def p_of(X: np.ndarray) -> np.ndarray:
    """p(x) = (x + 1)/2."""
    return 0.5 * (X + np.eye(X.shape[0]))


def _physical(block: DoubledBlock, gap_tol: float) -> tuple:
    k = block.kernel(gap_tol)
    if block.localizer is None and k.raw_index == 0 and (k.plus.shape[1] or k.minus.shape[1]):
        # no way to tell physical modes from partners: use the operator as is
        return block.matrix, block.eps, k
    H, eps = k.deflated_operator()
    return H, eps, k


def analytic_index(dop: DoubledOp, gap_tol: float | None = None) -> K0Class:
    """Per block dim ker D - dim ker D*, times the block multiplicity."""
    gap_tol = tol.get("gap_tol_torus") if gap_tol is None else gap_tol
    ranks = []
    for b in dop.blocks:
        ranks.append(b.kernel(gap_tol).index * b.mult)
    return K0Class(dop.algebra, tuple(ranks))


def morphism_index(dop: DoubledOp, t_small: float | None = None, gap_tol: float | None = None, rank_tol: float | None = None) -> tuple:
    """[p(eps)] - [p(eps U_t)] on the physical subspace, per block.

    Returns (K0Class, details).  The default t_small is 0.1 * gap of each
    block, which places every nonzero eigenvalue of H/t at distance >= 10
    from zero.
    """
    gap_tol = tol.get("gap_tol_torus") if gap_tol is None else gap_tol
    ranks, details = [], []
    for b in dop.blocks:
        H, eps, k = _physical(b, gap_tol)
        if H.shape[0] == 0:
            ranks.append(0)
            continue
        s = k.physical_singular_values()
        nonzero = s[s >= gap_tol]
        gap = float(nonzero.min()) if nonzero.size else 1.0
        t = tol.get("t_small_factor") * gap if t_small is None else t_small
        if t / gap > tol.get("t_small_factor") * (1 + 1e-12):
            raise SpectralGapError(f"t_small/gap = {t / gap:.3g} exceeds {tol.get('t_small_factor')}")
        U = cayley(H, t)
        E = np.diag(eps)
        eU = E @ U
        involution = float(np.abs(eU @ eU - np.eye(H.shape[0])).max())
        unitarity = float(np.abs(U.conj().T @ U - np.eye(H.shape[0])).max())
        r_eps = block_rank(p_of(E), rank_tol)
        r_eU = block_rank(hermitize(p_of(eU)), rank_tol)
        ranks.append((r_eps - r_eU) * b.mult)
        details.append({"t": t, "gap": gap, "rank_p_eps": r_eps, "rank_p_epsU": r_eU, "involution": involution, "unitarity": unitarity})
    return K0Class(dop.algebra, tuple(ranks)), details


def random_order_zero_perturbation(block: DoubledBlock, norm: float, rng: np.random.Generator) -> DoubledBlock:
    """Add an odd, self-adjoint perturbation of the given norm to the physical operator."""
    k = block.kernel(tol.get("gap_tol_torus"))
    H, eps = k.deflated_operator()
    ne = int(np.count_nonzero(eps > 0))
    no = H.shape[0] - ne
    X = rng.normal(size=(no, ne)) + 1j * rng.normal(size=(no, ne))
    X *= norm / np.linalg.norm(X, 2)
    H2 = H.copy()
    H2[ne:, :ne] += X
    H2[:ne, ne:] += X.conj().T
    return DoubledBlock(H2, eps, block.mult, None, block.gap)


# --- flux-twisted Dirac operator on the torus -----------------------------------------


def torus_dplus(d: int, N: int) -> dict:
    """D+ for the flat 2pi-torus Dirac operator twisted by a degree-d line bundle.

    Sections satisfy psi(x + 2pi, y) = e^{i d y} psi(x, y) and are periodic in
    y.  Connection: grad_x = d/dx (in the frame e^{i q(y) x}, q = d y / 2pi),
    grad_y = d/dy - i B x with B = d / 2pi.  D+ = -i grad_x + grad_y.
    Vector index = i * N + j (i: x index, j: y index).
    """
    ell = 2 * np.pi
    x = np.arange(N) * ell / N
    B = 2 * np.pi * d / ell**2
    n = np.fft.fftfreq(N, 1.0 / N)
    grid = QuantizationGrid.circle(N)
    F = grid.F
    Dy = (F.conj().T * (1j * n)) @ F
    Dx = np.zeros((N * N, N * N), dtype=complex)
    rows = []
    for j in range(N):
        q = d * x[j] / (2 * np.pi)
        E = np.exp(1j * q * x)
        row = (E[:, None] * ((F.conj().T * (1j * (n + q))) @ F)) * E.conj()[None, :]
        idx = np.arange(N) * N + j
        Dx[np.ix_(idx, idx)] = row
        rows.append(q)
    I = np.eye(N)
    X = np.kron(np.diag(x), I)
    DyF = np.kron(I, Dy)
    Dplus = -1j * Dx + (DyF - 1j * B * X)
    return {"Dplus": Dplus, "Dx": Dx, "Dy": DyF, "X": X, "B": B, "q": np.array(rows), "x": x, "N": N}


def torus_localizers(parts: dict, fraction: float | None = None) -> Callable:
    """Spectral projection of the magnetic Laplacian below (fraction * N/2)^2.

    Physical zero modes are lowest Landau level states with energy B; their
    grid partners sit at the top of the discrete band.
    """
    fraction = tol.get("resolved_fraction") if fraction is None else fraction
    cut = (fraction * parts["N"] / 2) ** 2

    def build():
        Ny = parts["Dy"] - 1j * parts["B"] * parts["X"]
        Lap = -(parts["Dx"] @ parts["Dx"]) - Ny @ Ny
        w, V = np.linalg.eigh(hermitize(Lap))
        Q = V[:, w < cut]
        R = lambda v: Q @ (Q.conj().T @ v)
        return R, R

    return build


def landau_gap(d: int) -> float:
    """Smallest nonzero |eigenvalue|: sqrt(2B) = sqrt(|d|/pi) for d != 0, 1 for d = 0."""
    return float(np.sqrt(abs(d) / np.pi)) if d != 0 else 1.0


def twisted_dirac_torus(flux: Sequence[int], N: int, algebra: Algebra | None = None, k: int = 1) -> DoubledOp:
    """Flux-twisted T^2 Dirac operator over A, one degree per algebra block.

    Block i acts as the scalar twisted operator tensored with 1 on C^{k k_i}.
    """
    flux = [int(d) for d in np.atleast_1d(flux)]
    algebra = Algebra(tuple([1] * len(flux))) if algebra is None else algebra
    if len(flux) != algebra.r:
        raise ValueError(f"flux vector has length {len(flux)}, algebra has {algebra.r} blocks")
    need = 8 * max((abs(d) for d in flux), default=0)
    if N < max(need, 8):
        raise ValueError(f"N={N} too small for flux {flux}: need N >= 8*max|d|")
    key = (tol.get("gap_tol_torus"), tol.get("localizer_low"), tol.get("localizer_high"))
    blocks = [replace(_scalar_torus_block(d, N, *key), mult=k * ki) for d, ki in zip(flux, algebra.blocks)]
    return DoubledOp(algebra, blocks)


@lru_cache(maxsize=32)
def _scalar_torus_block(d: int, N: int, gap_tol: float, low: float, high: float) -> DoubledBlock:
    # blocks with the same flux share the matrix and the kernel, computed
    # here under the tolerances that form the cache key
    parts = torus_dplus(d, N)
    H, eps = doubled_from_block(parts["Dplus"])
    blk = DoubledBlock(H, eps, 1, torus_localizers(parts), landau_gap(d), meta={"flux": d, "parts": parts})
    blk.kernel(gap_tol)
    return blk


def topological_index_torus(flux: Sequence[int], algebra: Algebra | None = None, k: int = 1) -> K0Class:
    """d_i times the class of the module A^k in block i (rank k * k_i)."""
    flux = [int(d) for d in np.atleast_1d(flux)]
    algebra = Algebra(tuple([1] * len(flux))) if algebra is None else algebra
    if len(flux) != algebra.r:
        raise ValueError("flux vector length does not match the algebra")
    return K0Class(algebra, tuple(d * k * ki for d, ki in zip(flux, algebra.blocks)))


def chirality_pairing_residual(H: np.ndarray, eps: np.ndarray, count: int = 20) -> float:
    """Distance of eps psi_l from the -l eigenspace, over the lowest positive l."""
    w, V = np.linalg.eigh(H)
    out = 0.0
    pos = np.flatnonzero(w > 1e-6)[:count]
    for i in pos:
        lam = w[i]
        j = np.argmin(np.abs(w + lam))
        if abs(w[j] + lam) > 1e-8 * max(1, lam):
            return float("inf")
        # eigenspace of -lam may be degenerate: project
        sel = np.abs(w + lam) < 1e-8 * max(1, lam)
        Q = V[:, sel]
        e = eps * V[:, i]
        out = max(out, float(np.linalg.norm(e - Q @ (Q.conj().T @ e))))
    return out


def torus_quantization_defect(dop_block: DoubledBlock, f: Callable, t_list) -> list:
    """|| f(c(P)/t) - f(H/t) || with P the frame momenta (no gauge term).

    The principal symbol of the twisted Dirac operator is c(xi); in the
    frames of the bundle its quantization is the functional calculus of
    c(P) with P = (-i grad_x, -i d/dy).  The gauge term -iBx of grad_y is of
    order zero and is what the defect measures.
    """
    parts = dop_block.meta["parts"]
    H0, _ = doubled_from_block(-1j * parts["Dx"] + parts["Dy"])
    H = dop_block.matrix
    S0, S = hermitian_eig(H0), hermitian_eig(H)
    rows = []
    for t in t_list:
        X = apply_function(S0, lambda w: f(w / t)) - apply_function(S, lambda w: f(w / t))
        rows.append({"t": float(t), "norm": operator_norm(X)})
    return rows
