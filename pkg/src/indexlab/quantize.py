"""Quantization of phase-space functions on periodic grids.

M_f multiplies by f, C_t(g) = g(t^-1 D) is a Fourier multiplier and
Phi_t(F) has the scaled Kohn-Nirenberg kernel

    Phi_t(F)[x, y] = sum_k F(x, xi_k / t) e^{i xi_k (x - y)} / N^n,

which reduces to M_f C_t(g) on elementary tensors F = f (x) g.

Difference norms of operators that only agree asymptotically are measured
on the resolved band |k| < N/4 per axis (``resolved_norm``).  On a
collocation grid the modes near the Nyquist frequency couple through
aliasing, and that wrap-around error does not decay with t.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .cstar_k0 import Algebra, AMatrix
from .linalg_core import dft_matrix, integer_frequencies, loglog_slope, operator_norm

TOPOLOGIES = ("periodized-line", "circle", "torus")


@dataclass(frozen=True)
class QuantizationGrid:
    n: int
    N: int
    L: float
    topology: str

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.N < 4:
            raise ValueError("N must be >= 4")
        if self.topology == "torus" and self.n != 2:
            raise ValueError("torus grids are two dimensional")
        if self.topology == "circle" and self.n != 1:
            raise ValueError("circle grids are one dimensional")
        if self.topology in ("circle", "torus") and not np.isclose(self.L, np.pi):
            raise ValueError("circle/torus grids have period 2*pi (L = pi)")

    @classmethod
    def line(cls, N: int, L: float) -> "QuantizationGrid":
        return cls(1, N, float(L), "periodized-line")

    @classmethod
    def circle(cls, N: int) -> "QuantizationGrid":
        return cls(1, N, np.pi, "circle")

    @classmethod
    def torus(cls, N: int) -> "QuantizationGrid":
        return cls(2, N, np.pi, "torus")

    @property
    def period(self) -> float:
        return 2 * self.L

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N

    @property
    def size(self) -> int:
        return self.N**self.n

    @cached_property
    def axis_points(self) -> np.ndarray:
        start = -self.L if self.topology == "periodized-line" else 0.0
        return start + self.dx * np.arange(self.N)

    @cached_property
    def axis_frequencies(self) -> np.ndarray:
        return integer_frequencies(self.N) * (2 * np.pi / self.period)

    @cached_property
    def points(self) -> np.ndarray:
        """(N^n, n) array, flattened with the first axis slowest."""
        return _mesh(self.axis_points, self.n)

    @cached_property
    def frequencies(self) -> np.ndarray:
        return _mesh(self.axis_frequencies, self.n)

    @cached_property
    def F(self) -> np.ndarray:
        """Unitary n-dimensional DFT matrix in the flattened ordering."""
        F1 = dft_matrix(self.N)
        out = F1
        for _ in range(self.n - 1):
            out = np.kron(out, F1)
        return out

    def resolved_mask(self, fraction: float | None = None) -> np.ndarray:
        fraction = tol.get("resolved_fraction") if fraction is None else fraction
        k = np.abs(integer_frequencies(self.N))
        m1 = k < fraction * self.N / 2
        out = m1
        for _ in range(self.n - 1):
            out = np.logical_and.outer(out, m1).ravel()
        return out

    def x_arg(self):
        """Spatial samples in the shape handed to user callables."""
        return self.points[:, 0] if self.n == 1 else self.points

    def xi_arg(self, t: float = 1.0):
        xi = self.frequencies / t
        return xi[:, 0] if self.n == 1 else xi


def _mesh(axis, n):
    if n == 1:
        return axis[:, None]
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _as_blocks(vals, P, m):
    vals = np.asarray(vals)
    if vals.ndim == 1:
        if m != 1 and vals.shape[0] == P:
            vals = vals[:, None, None] * np.eye(m)
        else:
            vals = vals[:, None, None]
    if vals.shape != (P, m, m):
        raise ValueError(f"samples have shape {vals.shape}, expected {(P, m, m)}")
    return vals


def block_diag_samples(vals) -> np.ndarray:
    vals = np.asarray(vals)
    P, m, _ = vals.shape
    out = np.zeros((P * m, P * m), dtype=vals.dtype)
    for a in range(m):
        for b in range(m):
            out[a::m, b::m] = np.diag(vals[:, a, b])
    return out


def mult_op(grid: QuantizationGrid, f, fiber: int = 1) -> np.ndarray:
    """M_f on grid (x) C^fiber; f is a vector of samples, (P, m, m) blocks, or a callable."""
    if callable(f):
        f = f(grid.x_arg())
    f = np.asarray(f)
    if f.shape[0] != grid.size:
        raise ValueError(f"expected {grid.size} samples, got {f.shape[0]}")
    if f.ndim == 1:
        return np.kron(np.diag(f), np.eye(fiber)) if fiber > 1 else np.diag(f)
    return block_diag_samples(_as_blocks(f, grid.size, fiber))


def apply_F(grid: QuantizationGrid, X, inverse: bool = False, fiber: int = 1) -> np.ndarray:
    """(F (x) I_fiber) @ X by FFT, X of shape (size * fiber, cols)."""
    X = np.asarray(X)
    cols = X.shape[1]
    Y = X.reshape((grid.N,) * grid.n + (fiber, cols))
    axes = tuple(range(grid.n))
    Y = np.fft.ifftn(Y, axes=axes, norm="ortho") if inverse else np.fft.fftn(Y, axes=axes, norm="ortho")
    return Y.reshape(grid.size * fiber, cols)


def conv_op(grid: QuantizationGrid, g: Callable, t: float, fiber: int = 1) -> np.ndarray:
    """C_t(g) = F* diag(g(xi_k / t)) F  (blockwise for matrix-valued g)."""
    vals = np.asarray(g(grid.xi_arg(t)))
    if vals.ndim == 1 and fiber == 1:
        FI = np.fft.fftn(np.eye(grid.size).reshape((grid.N,) * grid.n + (grid.size,)), axes=tuple(range(grid.n)), norm="ortho")
        FI = FI.reshape(grid.size, grid.size)
        return apply_F(grid, vals[:, None] * FI, inverse=True)
    vals = _as_blocks(vals, grid.size, fiber)
    Fm = np.kron(grid.F, np.eye(fiber))
    return Fm.conj().T @ block_diag_samples(vals) @ Fm


def multiplier_eigenvalues(grid: QuantizationGrid, g: Callable, t: float) -> np.ndarray:
    return np.asarray(g(grid.xi_arg(t)))


@dataclass
class PhaseFunction:
    """F(x, xi) given as a callable on broadcast arrays.

    For n = 1 the callable receives x of shape (P, 1) and xi of shape
    (1, K); for n = 2 the shapes are (P, 1, 2) and (1, K, 2).  It returns
    (P, K) scalars or (P, K, m, m) blocks.
    """

    func: Callable
    fiber: int = 1
    selfadjoint: bool = False

    def sample(self, grid: QuantizationGrid, t: float = 1.0) -> np.ndarray:
        if grid.n == 1:
            X = grid.points[:, 0][:, None]
            XI = (grid.frequencies[:, 0] / t)[None, :]
        else:
            X = grid.points[:, None, :]
            XI = (grid.frequencies / t)[None, :, :]
        V = np.asarray(self.func(X, XI))
        P = K = grid.size
        if V.shape == (P, K) and self.fiber == 1:
            V = V[:, :, None, None]
        elif V.shape == (P, K) and self.fiber > 1:
            V = V[:, :, None, None] * np.eye(self.fiber)
        if V.shape != (P, K, self.fiber, self.fiber):
            raise ValueError(f"phase function returned shape {V.shape}")
        if not np.all(np.isfinite(V)):
            raise ValueError("phase function has non-finite samples")
        if self.selfadjoint:
            err = np.abs(V - np.conj(np.swapaxes(V, -1, -2))).max()
            if err > tol.get("symbol_selfadjoint"):
                raise ValueError(f"phase function flagged self-adjoint but off by {err:.3g}")
        return V

    def boundary_shell(self, grid: QuantizationGrid, t: float = 1.0) -> float:
        """sup |F| over the outer shells of the sampled phase space."""
        V = self.sample(grid, t)
        mag = np.abs(V).max(axis=(-1, -2))
        k = np.abs(integer_frequencies(grid.N))
        edge_k = k >= grid.N // 2 - 1
        if grid.n == 2:
            edge_k = np.logical_or.outer(edge_k, edge_k).ravel()
        out = mag[:, edge_k].max()
        if grid.topology == "periodized-line":
            xa = np.abs(grid.axis_points)
            edge_x = xa >= xa.max() - grid.dx
            if grid.n == 2:
                edge_x = np.logical_or.outer(edge_x, edge_x).ravel()
            out = max(out, mag[edge_x, :].max())
        return float(out)

    def check_c0(self, grid: QuantizationGrid, t: float = 1.0, eta: float | None = None):
        eta = tol.get("c0_decay") if eta is None else eta
        b = self.boundary_shell(grid, t)
        if b > eta:
            raise ValueError(f"phase function does not decay: boundary shell sup {b:.3g} > {eta}")
        return b

    def __mul__(self, other: "PhaseFunction") -> "PhaseFunction":
        f, g = self.func, other.func
        if self.fiber == 1 and other.fiber == 1:
            return PhaseFunction(lambda x, xi: np.asarray(f(x, xi)) * np.asarray(g(x, xi)))
        return PhaseFunction(lambda x, xi: _blocks(f(x, xi), self.fiber) @ _blocks(g(x, xi), other.fiber), self.fiber)

    def conj(self) -> "PhaseFunction":
        f = self.func
        if self.fiber == 1:
            return PhaseFunction(lambda x, xi: np.conj(f(x, xi)))
        return PhaseFunction(lambda x, xi: np.conj(np.swapaxes(_blocks(f(x, xi), self.fiber), -1, -2)), self.fiber)

    def times_x(self, rho: Callable) -> "PhaseFunction":
        """(rho F)(x, xi) = rho(x) F(x, xi); rho receives x in the callable's shape."""
        f = self.func

        def func(x, xi):
            r = np.asarray(rho(x))
            v = np.asarray(f(x, xi))
            return r.reshape(r.shape + (1,) * (v.ndim - r.ndim)) * v

        return PhaseFunction(func, self.fiber, self.selfadjoint)

    @classmethod
    def tensor(cls, f: Callable, g: Callable) -> "PhaseFunction":
        """Elementary tensor f(x) g(xi) (scalar callables of x and xi)."""
        return cls(lambda x, xi: np.asarray(f(x)) * np.asarray(g(xi)))


def _blocks(v, m):
    v = np.asarray(v)
    if v.ndim == 2:
        v = v[:, :, None, None] * np.eye(m)
    return v


def phi_t_samples(grid: QuantizationGrid, V, t: float | None = None) -> np.ndarray:
    """Kohn-Nirenberg matrix from samples V[x, k, a, b] = F(x, xi_k / t)."""
    V = np.asarray(V)
    P, K, m, _ = V.shape
    F = grid.F
    # W[x, a, k, b] = V[x, k, a, b] * conj(F[k, x])
    W = np.transpose(V, (0, 2, 1, 3)) * F.T.conj()[:, None, :, None]
    W = W.reshape(P * m, K * m)
    if m == 1:
        return W @ F
    return W @ np.kron(F, np.eye(m))


def phi_t(Fun: PhaseFunction, grid: QuantizationGrid, t: float) -> np.ndarray:
    return phi_t_samples(grid, Fun.sample(grid, t))


def phi_t_kernel(grid: QuantizationGrid, f: Callable, g: Callable, t: float) -> np.ndarray:
    """Row-by-row evaluation of k_t(x, y) = f(x) sum_k g(xi_k/t) e^{i xi_k (x-y)} / N^n."""
    x = grid.points
    xi = grid.frequencies
    gv = np.asarray(g(grid.xi_arg(t)))
    fv = np.asarray(f(grid.x_arg()))
    out = np.zeros((grid.size, grid.size), dtype=complex)
    for i in range(grid.size):
        phase = np.exp(1j * (xi @ (x[i] - x).T))  # (K, P)
        out[i] = fv[i] * (gv @ phase) / grid.size
    return out


def phi_A_t(Funs: Sequence[PhaseFunction], algebra: Algebra, grid: QuantizationGrid, t: float, k: int = 1) -> AMatrix:
    """Blockwise quantization over A = M_k1 + ... + M_kr.

    Block i of the phase function acts on C^{k * k_i}; the result lies in
    M_m(A) with m = grid.size * k.
    """
    if len(Funs) != algebra.r:
        raise ValueError("one phase function per algebra block is required")
    blocks = []
    for F_i, ki in zip(Funs, algebra.blocks):
        if F_i.fiber != k * ki:
            raise ValueError(f"block fiber {F_i.fiber} != k*k_i = {k * ki}")
        blocks.append(phi_t(F_i, grid, t))
    return AMatrix(algebra, grid.size * k, blocks)


def conv_A_op(gs: Sequence[Callable], algebra: Algebra, grid: QuantizationGrid, t: float, k: int = 1) -> AMatrix:
    blocks = [conv_op(grid, g, t, fiber=k * ki) for g, ki in zip(gs, algebra.blocks)]
    return AMatrix(algebra, grid.size * k, blocks)


def mult_A_op(phi, algebra: Algebra, grid: QuantizationGrid, k: int = 1) -> AMatrix:
    blocks = [mult_op(grid, phi, fiber=k * ki) for ki in algebra.blocks]
    return AMatrix(algebra, grid.size * k, blocks)


# --- norms -------------------------------------------------------------------


def resolved_norm(M, grid: QuantizationGrid, fiber: int = 1, fraction: float | None = None) -> float:
    """|| Pi M Pi || with Pi the projection onto the resolved Fourier band."""
    mask = grid.resolved_mask(fraction)
    Fr = grid.F[mask]
    if fiber > 1:
        Fr = np.kron(Fr, np.eye(fiber))
    return operator_norm(Fr @ M @ Fr.conj().T)


def measure(M, grid: QuantizationGrid, fiber: int = 1, how: str = "resolved") -> float:
    if how == "full":
        return operator_norm(M)
    if how == "resolved":
        return resolved_norm(M, grid, fiber)
    raise ValueError(how)


def derivative_op(grid: QuantizationGrid, axis: int = 0) -> np.ndarray:
    """D_j = -i d/dx_j as a Fourier multiplier (Hermitian)."""
    return conv_op(grid, lambda xi: xi if grid.n == 1 else xi[:, axis], 1.0)


def resolvent(sign: int) -> Callable:
    """r_+(x) = (x + i)^-1, r_-(x) = (x - i)^-1."""
    return lambda x: 1.0 / (np.asarray(x) + sign * 1j)


# --- asymptotic properties ----------------------------------------------------


def fourier_conjugate(grid: QuantizationGrid, M) -> np.ndarray:
    """F M F* (the matrix of M in the Fourier basis)."""
    A = apply_F(grid, M)
    return apply_F(grid, A.conj().T).conj().T


def commutator_decay(grid: QuantizationGrid, f, g: Callable, t_list: Sequence[float]) -> dict:
    """Table of ||[M_f, C_t(g)]|| with a log-log fit, plus the resolvent bound.

    Works in the Fourier basis, where C_t(g) is diagonal and a commutator
    with it is an entrywise product: [M, diag(v)][k, l] = M[k, l] (v_l - v_k).
    """
    if len(t_list) < 4:
        raise ValueError("need at least 4 t values to fit a slope")
    if callable(f):
        f = f(grid.x_arg())
    Mhat = fourier_conjugate(grid, np.diag(np.asarray(f, dtype=complex)))
    xi = grid.frequencies[:, 0] if grid.n == 1 else np.linalg.norm(grid.frequencies, axis=1)
    cDM = operator_norm(Mhat * (xi[:, None] - xi[None, :]))
    rows = []
    for t in t_list:
        v = np.asarray(g(grid.xi_arg(t)))
        norm = operator_norm(Mhat * (v[None, :] - v[:, None]))
        rb = {}
        for name, sgn in (("resolvent_plus", 1), ("resolvent_minus", -1)):
            r = resolvent(sgn)(xi / t)
            rb[name] = operator_norm(Mhat * (r[None, :] - r[:, None]))
        rows.append({"t": float(t), "norm": norm, **rb, "bound": cDM / t})
    norms = np.array([r["norm"] for r in rows])
    out = {"rows": rows, "commutator_DM": cDM}
    if np.all(norms > 0):
        slope, intercept, r2 = loglog_slope(t_list, norms)
        out.update(slope=slope, intercept=intercept, r2=r2)
    else:
        out.update(slope=float("nan"), intercept=float("nan"), r2=float("nan"))
    out["bound_holds"] = all(max(r["resolvent_plus"], r["resolvent_minus"]) <= r["bound"] + 1e-8 for r in rows)
    return out


def morphism_defects(Fa: PhaseFunction, Fb: PhaseFunction, grid: QuantizationGrid, t_list, how: str = "resolved") -> list:
    """Multiplicativity and *-preservation defects of Phi_t."""
    rows = []
    prod = Fa * Fb
    conj = Fa.conj()
    for t in t_list:
        A = phi_t(Fa, grid, t)
        B = phi_t(Fb, grid, t)
        mult = measure(phi_t(prod, grid, t) - A @ B, grid, Fa.fiber, how)
        star = measure(phi_t(conj, grid, t) - A.conj().T, grid, Fa.fiber, how)
        rows.append({"t": float(t), "mult": mult, "star": star})
    return rows


def restriction_defects(Fun: PhaseFunction, grid: QuantizationGrid, U_mask, t_list, how: str = "resolved") -> list:
    """|| P_U Phi_t(F) P_U - Phi_t(F) || for F supported over U."""
    P = np.diag(np.asarray(U_mask, dtype=float))
    rows = []
    for t in t_list:
        A = phi_t(Fun, grid, t)
        rows.append({"t": float(t), "norm": measure(P @ A @ P - A, grid, Fun.fiber, how)})
    return rows


def range_support_violation(A, U_mask) -> float:
    """Largest entry of A in rows outside U (columns of A live on rows)."""
    outside = ~np.asarray(U_mask, bool)
    return float(np.abs(A[outside]).max(initial=0.0))


def is_nonincreasing(vals, rtol: float = 1e-9) -> bool:
    vals = np.asarray(vals, float)
    return bool(np.all(vals[1:] <= vals[:-1] * (1 + rtol) + 1e-15))


# --- diffeomorphism covariance --------------------------------------------------


def interpolation_matrix(grid: QuantizationGrid, y) -> np.ndarray:
    """Trigonometric interpolation: samples on the grid -> values at points y."""
    if grid.n != 1:
        raise ValueError("interpolation is implemented for one-dimensional grids")
    k = grid.axis_frequencies.copy()
    x0 = grid.axis_points[0]
    E = np.exp(1j * np.outer(np.asarray(y) - x0, k)) / np.sqrt(grid.N)
    F = dft_matrix(grid.N)
    out = E @ F
    N = grid.N
    if N % 2 == 0:
        # split the Nyquist mode symmetrically so real data stay real
        ny = N // 2
        kn = k[ny]
        cos_row = np.cos(kn * (np.asarray(y) - x0)) / np.sqrt(N)
        out += np.outer(cos_row - np.exp(1j * kn * (np.asarray(y) - x0)) / np.sqrt(N), F[ny])
    return out


def transport_operator(grid: QuantizationGrid, psi: Callable, dpsi: Callable) -> np.ndarray:
    """(T_psi u)(x) = J(x)^{1/2} u(psi(x)) with J = psi'."""
    x = grid.axis_points
    J = np.asarray(dpsi(x), float)
    if np.any(J <= 0):
        raise ValueError("psi is not an orientation-preserving diffeomorphism on the grid")
    return np.sqrt(J)[:, None] * interpolation_matrix(grid, psi(x))


def pullback(Fun: PhaseFunction, psi: Callable, dpsi: Callable) -> PhaseFunction:
    """(F o psi_hat)(x, xi) = F(psi(x), xi / psi'(x))."""
    f = Fun.func
    return PhaseFunction(lambda x, xi: f(psi(x), xi / dpsi(x)), Fun.fiber, Fun.selfadjoint)


def invert_diffeo(psi: Callable, dpsi: Callable, y, iters: int = 50) -> np.ndarray:
    """Solve psi(x) = y by Newton's method (psi increasing)."""
    y = np.asarray(y, float)
    x = y.copy()
    for _ in range(iters):
        step = (psi(x) - y) / dpsi(x)
        x = x - step
        if np.abs(step).max() < 1e-15:
            break
    return x


def diffeo_covariance(grid: QuantizationGrid, Fun: PhaseFunction, psi: Callable, dpsi: Callable, t_list, how: str = "resolved") -> list:
    """|| Phi_t(F o psi_hat) - T_psi Phi_t(F) T_psi^-1 || along t_list.

    T_psi^-1 is realized as T_{psi^-1}.  Inverting the sampled matrix of
    T_psi instead is unstable: interpolation at the warped points is nearly
    singular on the top of the band where the warp compresses the grid.
    """
    T = transport_operator(grid, psi, dpsi)
    psi_inv = lambda y: invert_diffeo(psi, dpsi, y)
    dpsi_inv = lambda y: 1.0 / dpsi(psi_inv(y))
    Tinv = transport_operator(grid, psi_inv, dpsi_inv)
    G = pullback(Fun, psi, dpsi)
    rows = []
    for t in t_list:
        A = phi_t(G, grid, t) - T @ phi_t(Fun, grid, t) @ Tinv
        rows.append({"t": float(t), "norm": measure(A, grid, Fun.fiber, how), "full": operator_norm(A)})
    return rows


# --- gluing over a two-arc cover of the circle -----------------------------------


@dataclass(frozen=True)
class Arc:
    """Open arc (center - half, center + half) of the 2pi circle."""

    center: float
    half: float

    @property
    def whole(self) -> bool:
        return self.half >= np.pi

    def contains(self, x) -> np.ndarray:
        if self.whole:
            return np.ones_like(np.asarray(x, float), dtype=bool)
        return np.abs(_wrap(np.asarray(x) - self.center)) < self.half

    def chart(self, x) -> np.ndarray:
        """Chart coordinate in (-half, half)."""
        return _wrap(np.asarray(x) - self.center)


def _wrap(y):
    return (np.asarray(y) + np.pi) % (2 * np.pi) - np.pi


def two_arc_partition(center: float, overlap: float = 0.6) -> tuple:
    """Arcs around `center` and its antipode with rho_1^2 + rho_2^2 = 1.

    rho_1 = cos(theta), rho_2 = sin(theta), theta rising smoothly from 0 to
    pi/2 across each overlap zone.
    """
    from .bott import smooth_step

    arcs = (Arc(center, np.pi / 2 + overlap), Arc(center + np.pi, np.pi / 2 + overlap))
    margin = 0.15 * overlap

    def theta(x):
        d = np.abs(_wrap(np.asarray(x) - center))  # 0 at center, pi at antipode
        lo, hi = np.pi / 2 - overlap + margin, np.pi / 2 + overlap - margin
        return 0.5 * np.pi * smooth_step((d - lo) / (hi - lo))

    rhos = (lambda x: np.cos(theta(x)), lambda x: np.sin(theta(x)))
    return arcs, rhos


def check_partition(grid: QuantizationGrid, rhos) -> float:
    x = grid.axis_points
    err = float(np.abs(sum(np.asarray(r(x)) ** 2 for r in rhos) - 1).max())
    if err > 1e-10:
        raise ValueError(f"partition squares do not sum to one (error {err:.3g})")
    return err


def chart_quantization(grid: QuantizationGrid, arc: Arc, Fun: PhaseFunction, t: float, pad: int = 2) -> np.ndarray:
    """Quantize F in the chart of `arc` and return the operator on the circle grid.

    The arc is identified with an interval of R, which is represented by a
    periodized line with the circle's spacing and `pad` times its length.
    F must vanish over points outside the arc.
    """
    if arc.whole:
        return phi_t(Fun, grid, t)
    xc = grid.axis_points
    inside = np.flatnonzero(arc.contains(xc))
    Nl = pad * grid.N
    line = QuantizationGrid.line(Nl, pad * np.pi)
    # chart coordinates of the arc points, snapped to line grid nodes
    u = arc.chart(xc[inside])
    pos = np.rint((u - line.axis_points[0]) / line.dx).astype(int)
    if np.abs(line.axis_points[pos] - u).max() > 1e-9:
        raise ValueError("arc center must lie on the grid for an exact chart embedding")
    f = Fun.func

    def chart_func(x, xi):
        # the arc is an interval of the line; outside it the chart function is zero
        v = np.asarray(f(arc.center + x, xi))
        keep = (np.abs(x) < arc.half).astype(float)
        return keep.reshape(keep.shape + (1,) * (v.ndim - keep.ndim)) * v

    A = phi_t(PhaseFunction(chart_func, Fun.fiber), line, t)
    m = Fun.fiber
    out = np.zeros((grid.size * m, grid.size * m), dtype=complex)
    ri = (inside[:, None] * m + np.arange(m)).ravel()
    li = (pos[:, None] * m + np.arange(m)).ravel()
    out[np.ix_(ri, ri)] = A[np.ix_(li, li)]
    return out


def glued_phi(grid: QuantizationGrid, arcs, rhos, Fun: PhaseFunction, t: float) -> np.ndarray:
    """sum_a Phi^a(rho_a F) M_{rho_a}."""
    if grid.topology != "circle":
        raise ValueError("gluing is implemented on the circle")
    check_partition(grid, rhos)
    m = Fun.fiber
    out = np.zeros((grid.size * m, grid.size * m), dtype=complex)
    for arc, rho in zip(arcs, rhos):
        A = chart_quantization(grid, arc, Fun.times_x(rho), t)
        out += A @ mult_op(grid, rho, fiber=m)
    return out
