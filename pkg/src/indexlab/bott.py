"""The Bott (supersymmetric oscillator) operator on a periodized box.

B_t = sum_j t^-1 (d_j - d_j*) (x) d/dx_j + c(x) acting on L^2(R^n) (x) Lambda* C^n.
Its spectrum is {+-sqrt(2k/t)} and its kernel is spanned by the 0-form
exp(-t|x|^2/2).

The box [-L, L)^n is periodic, so the coordinate x_j cannot be used as is.
It is replaced by a profile that equals x_j on the bulk and closes up
smoothly and steeply near the wall.  The wall carries a second zero of the
profile with opposite orientation, hence one partner zero mode of opposite
chirality per wall; those are detected with a bulk localizer and deflated.
Wall excitations scale like sqrt(2*slope*k/t) and sit above the bulk levels
that are compared against the exact spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .chiral import ChiralKernel, chiral_kernel, chirality_expectations
from .clifford import CliffordRep, build_clifford
from .linalg_core import fourier_diff_matrix, hermitian_eig, apply_function


@dataclass(frozen=True)
class OscillatorConfig:
    n: int = 1
    t: float = 1.0
    N: int = 1024
    L: float = 10.0
    sign: int = 1  # -1 negates c(x)
    wall_width: float | None = None
    wall_kappa: float | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 16")
        if self.n == 2 and self.N > 48:
            raise ValueError("n=2 is capped at N=48")
        if self.L < 6.0 / np.sqrt(self.t) - 1e-12:
            raise ValueError(f"L={self.L} too small: need L >= 6/sqrt(t) = {6 / np.sqrt(self.t):.4g}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N

    @property
    def width(self) -> float:
        if self.wall_width is not None:
            return self.wall_width
        return max(0.15 * self.L, 6 * self.dx)

    @property
    def kappa(self) -> float:
        if self.wall_kappa is not None:
            return self.wall_kappa
        return min(2.0, 1.0 / (8 * self.dx))

    @property
    def gap(self) -> float:
        """Smallest nonzero exact eigenvalue sqrt(2/t)."""
        return float(np.sqrt(2.0 / self.t))

    def grid(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)

    def h(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    a, b = h(s), h(1.0 - s)
    return a / (a + b)


def closure_profile(x, L: float, width: float, kappa: float) -> np.ndarray:
    """Periodic smooth surrogate of the coordinate x on [-L, L).

    Equal to x for |x| <= L - width; within width of the wall it turns over
    and runs back through zero with slope about kappa*L.
    """
    x = np.asarray(x, dtype=float)
    y = np.where(x >= 0, x - L, x + L)  # signed distance to the wall
    beta = 1.0 - smooth_step((np.abs(y) - width / 2) / (width / 2))
    omega = -(L - width / 2) * np.tanh(kappa * y) / np.tanh(kappa * width / 2)
    return x * (1 - beta) + beta * omega


@dataclass
class OscillatorOperator:
    config: OscillatorConfig
    matrix: np.ndarray  # index = grid * 2^n + fiber; grid = i1*N + i2
    clifford: CliffordRep
    eps_diag: np.ndarray
    grid: np.ndarray
    _kernel: ChiralKernel | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def bulk_mask(self) -> np.ndarray:
        """Grid points at distance >= wall width from the wall, per full index."""
        cfg = self.config
        inside1 = np.abs(self.grid) <= cfg.L - cfg.width
        if cfg.n == 1:
            inside = inside1
        else:
            inside = (inside1[:, None] & inside1[None, :]).ravel()
        return np.repeat(inside, 2**cfg.n)

    def kernel(self, delta: float | None = None) -> ChiralKernel:
        if delta is None and self._kernel is not None:
            return self._kernel
        d = 0.05 * self.config.gap if delta is None else delta
        mask = self.bulk_mask()
        ev = self.eps_diag > 0
        mp, mm = mask[ev].astype(float), mask[~ev].astype(float)
        k = chiral_kernel(
            self.matrix,
            self.eps_diag,
            d,
            localizer_plus=lambda v: mp[:, None] * v,
            localizer_minus=lambda v: mm[:, None] * v,
        )
        if delta is None:
            self._kernel = k
        return k


def build_bott(config: OscillatorConfig) -> OscillatorOperator:
    rep = build_clifford(config.n)
    N, n = config.N, config.n
    x = config.grid()
    # keeping the Nyquist mode avoids a doubler: with it zeroed the symbol
    # of d/dx vanishes at the band edge and binds a spurious zero mode
    D = fourier_diff_matrix(N, 2 * config.L, nyquist="keep")
    phi = config.sign * closure_profile(x, config.L, config.width, config.kappa)
    f = 2**n
    I = np.eye(N)
    if n == 1:
        derivs = [D]
        coords = [phi]
    else:
        derivs = [np.kron(D, I), np.kron(I, D)]
        coords = [np.repeat(phi, N), np.tile(phi, N)]
    M = np.zeros((N**n * f, N**n * f), dtype=complex)
    for j in range(n):
        odd_part = (rep.d[j] - rep.dstar[j]).real
        M += np.kron(derivs[j], odd_part) / config.t
        M += np.kron(np.diag(coords[j]), rep.gamma(j).real)
    M = 0.5 * (M + M.conj().T)
    eps = np.tile(np.diag(rep.epsilon), N**n)
    return OscillatorOperator(config, M, rep, eps, x)


def total_symbol(config: OscillatorConfig, v, xi) -> np.ndarray:
    """sym(B_t)(v, xi) = c(v, xi/t) for the operator with D replaced by i*xi."""
    from .clifford import clifford_c

    rep = build_clifford(config.n)
    return clifford_c(rep, config.sign * np.asarray(v, float), np.asarray(xi, float) / config.t)


def frozen_symbol(op: OscillatorOperator, v, xi) -> np.ndarray:
    """Symbol read off the assembled matrix: replace d/dx by i*xi and x by v."""
    rep, t = op.clifford, op.config.t
    v = np.atleast_1d(np.asarray(v, float))
    xi = np.atleast_1d(np.asarray(xi, float))
    out = np.zeros((rep.dim, rep.dim), complex)
    for j in range(rep.n):
        out += (rep.d[j] - rep.dstar[j]) * (1j * xi[j]) / t
        out += op.config.sign * v[j] * rep.gamma(j)
    return out


def bott_spectrum(op: OscillatorOperator, count: int) -> np.ndarray:
    """The `count` smallest-magnitude eigenvalues of the physical operator.

    Eigenvalues of the deflated operator are +-(singular values of the
    deflated D+) together with |rows - cols| zeros.
    """
    if count > op.dim:
        raise ValueError(f"count {count} exceeds dimension {op.dim}")
    k = op.kernel()
    Dp = k.deflated_block()
    s = k.physical_singular_values()
    zeros = abs(Dp.shape[0] - Dp.shape[1])
    eig = np.concatenate([-s, s, np.zeros(zeros)])
    eig = eig[np.argsort(np.abs(eig), kind="stable")][:count]
    return np.sort(eig)


def positive_levels(op: OscillatorOperator, count: int) -> np.ndarray:
    """First `count` positive eigenvalues above the kernel."""
    s = op.kernel().physical_singular_values()
    s = s[s > 0.5 * op.config.gap]
    return s[:count]


def exact_levels(t: float, count: int) -> np.ndarray:
    k = np.arange(1, count + 1)
    return np.sqrt(2 * k / t)


def near_zero_counts(op: OscillatorOperator) -> dict:
    """Eigenvalues in (-delta, delta), delta = sqrt(2/t)/2.

    ``raw`` counts them for the assembled periodic matrix (each small
    singular value of D+ is a +-sigma pair), ``physical`` for the deflated
    operator.
    """
    delta = 0.5 * op.config.gap
    k = op.kernel()
    unpaired = abs(len(k.even_idx) - len(k.odd_idx))
    raw = 2 * int(np.count_nonzero(k.singular_values < delta)) + unpaired
    spec = bott_spectrum(op, min(op.dim - 2, 8))
    phys = int(np.count_nonzero(np.abs(spec) < delta))
    return {"raw": raw, "physical": phys, "artifacts": raw - phys}


def bott_index(op: OscillatorOperator, gap_tol: float | None = None) -> int:
    """dim ker B+ - dim ker B- over physical (bulk-localized) kernel vectors."""
    k = op.kernel(gap_tol)
    vecs, chir = k.physical_kernel_full()
    expect = chirality_expectations(vecs, op.eps_diag)
    if np.any(np.abs(np.abs(expect) - 1) > tol.get("chirality")):
        from .chiral import ChiralityError

        raise ChiralityError(f"chirality expectations {expect}")
    return k.index


def kernel_vector(op: OscillatorOperator) -> np.ndarray:
    vecs, chir = op.kernel().physical_kernel_full()
    if vecs.shape[1] != 1:
        raise ValueError(f"expected a one-dimensional physical kernel, got {vecs.shape[1]}")
    v = vecs[:, 0]
    # fix the global phase so the largest entry is real positive
    i = np.argmax(np.abs(v))
    return v * np.exp(-1j * np.angle(v[i]))


def zero_form_weight(op: OscillatorOperator, v=None) -> float:
    if v is None:
        v = kernel_vector(op)
    f = 2**op.config.n
    comp = v.reshape(-1, f)[:, 0]  # basis element 0 is the empty set (0-form)
    return float(np.vdot(comp, comp).real / np.vdot(v, v).real)


def fit_gaussian_width(op: OscillatorOperator, v=None, floor: float = 1e-6) -> dict:
    """Fit |psi_0(x)| = A exp(-gamma |x|^2) on the bulk grid."""
    if v is None:
        v = kernel_vector(op)
    cfg = op.config
    f = 2**cfg.n
    comp = np.abs(v.reshape(-1, f)[:, 0])
    x = op.grid
    if cfg.n == 1:
        r2 = x**2
    else:
        r2 = (x[:, None] ** 2 + x[None, :] ** 2).ravel()
    bulk = op.bulk_mask()[::f]
    use = bulk & (comp > floor * comp.max())
    A = np.vstack([np.ones(use.sum()), -r2[use]]).T
    coef, *_ = np.linalg.lstsq(A, np.log(comp[use]), rcond=None)
    gamma = float(coef[1])
    return {"gamma": gamma, "gamma_over_t": gamma / cfg.t, "amplitude": float(np.exp(coef[0])), "points": int(use.sum())}


# --- point-case Thom map -------------------------------------------------


def thom_point_map(rep: CliffordRep, f: Callable, x_samples, phase_samples) -> np.ndarray:
    """Values f(eps*x + c(v, xi)) for x in x_samples and (v, xi) in phase_samples.

    phase_samples has shape (M, 2n) holding (v, xi).  Returns an array of
    shape (len(x), M, 2^n, 2^n).
    """
    from .clifford import clifford_c_batch

    x = np.atleast_1d(np.asarray(x_samples, float))
    P = np.atleast_2d(np.asarray(phase_samples, float))
    if P.shape[1] != 2 * rep.n:
        raise ValueError(f"phase samples must have 2n = {2 * rep.n} columns")
    tail = np.abs(f(np.array([1e3, -1e3, 1e6, -1e6])))
    if tail[2:].max() > tol.get("c0_decay") or tail[2:].max() > tail[:2].max() + 1e-15:
        raise ValueError("f does not vanish at infinity")
    c = clifford_c_batch(rep, P[:, : rep.n], P[:, rep.n:])
    ops = x[:, None, None, None] * rep.epsilon[None, None] + c[None]
    w, V = np.linalg.eigh(ops)
    fw = f(w)
    return np.einsum("...ik,...k,...jk->...ij", V, fw, V.conj())


# --- homotopy to f(x) P_t -------------------------------------------------


def compact_bump(a: float) -> Callable:
    """exp(1 - 1/(1 - (y/a)^2)) on |y| < a, zero outside (max 1 at y=0)."""

    def f(y):
        y = np.asarray(y, dtype=float)
        u = (y / a) ** 2
        out = np.zeros_like(y)
        inside = u < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside]))
        return out

    f.support = a
    return f


def kernel_homotopy(op: OscillatorOperator, f: Callable, x_samples, s_list) -> np.ndarray:
    """sup_x || f(eps x + B/s) - f(x) P || for each s.

    Uses the exact block structure: eps x + B/s preserves each plane spanned
    by a +-lambda pair of B and has eigenvalues +-sqrt(x^2 + lambda^2/s^2)
    there; on a kernel vector of chirality c it acts as c*x.  All quantities
    come from the deflated (physical) operator.
    """
    a = getattr(f, "support", None)
    if a is None or not np.isfinite(a):
        raise ValueError("f must carry a finite `support` half-width a")
    k = op.kernel()
    s_vals = k.physical_singular_values()
    gap = 0.5 * op.config.gap
    lam = s_vals[s_vals >= gap]
    _, chir = k.physical_kernel_full()
    x = np.asarray(x_samples, float)
    out = []
    for s in s_list:
        r = np.sqrt(x[:, None] ** 2 + (lam[None, :] / s) ** 2)
        pair = np.maximum(np.abs(f(r)), np.abs(f(-r))).max(initial=0.0)
        ker = 0.0
        if len(chir):
            ker = np.abs(f(np.outer(x, chir)) - f(x)[:, None]).max()
        out.append(max(pair, ker))
    return np.array(out)


def kernel_homotopy_dense(op_matrix, eps_diag, kernel_vecs, f: Callable, x_samples, s_list) -> np.ndarray:
    """Reference evaluation of the same sup-norm by dense functional calculus."""
    P = kernel_vecs @ kernel_vecs.conj().T
    out = []
    for s in s_list:
        worst = 0.0
        for x in x_samples:
            H = np.diag(eps_diag * x) + op_matrix / s
            fH = apply_function(hermitian_eig(H), f)
            worst = max(worst, np.linalg.norm(fH - f(np.array([x]))[0] * P, 2))
        out.append(worst)
    return np.array(out)


# --- alpha_t isometry -------------------------------------------------------


def alpha_isometry(t: float, n: int, L: float | None = None, num: int = 257, prefactor: bool = True) -> float:
    """L^2 norm of v -> (2t/pi)^{n/4} exp(-t|v|^2) by trapezoid quadrature."""
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    if L is None:
        L = 7.0 / np.sqrt(t)
    if np.exp(-2 * t * L**2) > 1e-14:
        raise ValueError(f"quadrature box [-{L}, {L}] too small for t={t}")
    v = np.linspace(-L, L, num)
    w = np.full(num, v[1] - v[0])
    w[0] = w[-1] = 0.5 * (v[1] - v[0])
    g = np.exp(-2 * t * v**2)  # |exp(-t v^2)|^2 per axis
    one_axis = float(np.sum(w * g))
    integral = one_axis**n
    c = (2 * t / np.pi) ** (n / 2) if prefactor else 1.0
    return float(np.sqrt(c * integral))


# --- continuity in t ---------------------------------------------------------


def continuity_constant(ts: Sequence[float], N: int = 256, L: float = 10.0, f: Callable | None = None) -> dict:
    """Empirical C with ||f(B_t) - f(B_s)|| <= C |t - s| over consecutive mesh points."""
    if f is None:
        f = lambda y: 1.0 / (1.0 + y**2)
    mats = []
    for t in ts:
        op = build_bott(OscillatorConfig(n=1, t=t, N=N, L=L))
        mats.append(apply_function(hermitian_eig(op.matrix), f))
    ratios = []
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            d = np.linalg.norm(mats[i] - mats[j], 2)
            ratios.append(d / abs(ts[i] - ts[j]))
    return {"C": float(max(ratios)), "ratios": ratios}
