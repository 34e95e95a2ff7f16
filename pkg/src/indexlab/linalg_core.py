"""Dense complex linear algebra shared by all other modules.

Hermitian eigendecomposition, functional calculus, operator norms and the
unitary discrete Fourier transform.  Production paths use LAPACK (through
numpy/scipy) and numpy's FFT; a cyclic Jacobi eigensolver is kept as an
independent reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as la

from . import tolerances as tol


class ConvergenceError(RuntimeError):
    pass


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def as_matrix(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def is_hermitian(M, rtol: float | None = None) -> bool:
    M = np.asarray(M)
    rtol = tol.get("hermitian") if rtol is None else rtol
    scale = max(np.abs(M).max(initial=0.0), 1.0)
    return bool(np.abs(M - M.conj().T).max(initial=0.0) <= rtol * scale * max(M.shape[0], 1))


def hermitize(M) -> np.ndarray:
    M = np.asarray(M)
    H = 0.5 * (M + M.conj().T)
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real
    return H


def _check_square(M):
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")


def hermitian_eig(M, method: str = "lapack") -> SpectralData:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as (M + M*)/2 first.  ``method='jacobi'`` uses
    the in-repo cyclic Jacobi solver (slow, used as a reference).
    """
    M = as_matrix(M)
    _check_square(M)
    H = hermitize(M)
    if H.shape[0] == 0:
        return SpectralData(np.zeros(0), np.zeros((0, 0), dtype=H.dtype))
    if method == "jacobi":
        w, V = jacobi_eigh(H)
    elif method == "lapack":
        try:
            w, V = la.eigh(H, check_finite=False)
        except la.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from exc
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralData(np.asarray(w, dtype=float), V)


def _offdiag(A) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(H, max_sweeps: int | None = None, offdiag_tol: float | None = None):
    """Cyclic complex Jacobi method for a Hermitian matrix.

    Each 2x2 rotation is computed in closed form.  The sweep order is fixed
    (row-major over p < q), so results are reproducible.
    """
    A = np.array(H, dtype=complex)
    n = A.shape[0]
    max_sweeps = int(tol.get("jacobi_max_sweeps")) if max_sweeps is None else max_sweeps
    offdiag_tol = tol.get("jacobi_offdiag") if offdiag_tol is None else offdiag_tol
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        if _offdiag(A) <= offdiag_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                # remove the phase, then a real symmetric rotation
                phase = apq / mag
                app, aqq = A[p, p].real, A[q, q].real
                theta = 0.5 * np.arctan2(2 * mag, aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                # G acts on columns p, q
                g_pp, g_pq = c, s
                g_qp, g_qq = -s * np.conj(phase), c * np.conj(phase)
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = colp * g_pp + colq * g_qp
                A[:, q] = colp * g_pq + colq * g_qq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = np.conj(g_pp) * rowp + np.conj(g_qp) * rowq
                A[q, :] = np.conj(g_pq) * rowp + np.conj(g_qq) * rowq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = vp * g_pp + vq * g_qp
                V[:, q] = vp * g_pq + vq * g_qq
    else:
        if _offdiag(A) > offdiag_tol * scale * 10:
            raise ConvergenceError(f"Jacobi did not converge after {max_sweeps} sweeps")
    w = np.diag(A).real
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def apply_function(S: SpectralData, f: Callable) -> np.ndarray:
    """V f(Lambda) V*."""
    vals = np.asarray(f(S.eigenvalues))
    if vals.shape == ():
        vals = np.full(S.dim, vals)
    if not np.all(np.isfinite(vals)):
        bad = S.eigenvalues[~np.isfinite(vals)]
        raise ValueError(f"function undefined at eigenvalue(s) {bad[:5]}")
    V = S.eigenvectors
    out = (V * vals) @ V.conj().T
    if np.isrealobj(vals):
        out = hermitize(out)
    return out


def matrix_function(M, f: Callable) -> np.ndarray:
    return apply_function(hermitian_eig(M), f)


def operator_norm(M, method: str = "auto") -> float:
    """Largest singular value.

    Small matrices use a dense SVD.  From 400 rows on, ARPACK (Lanczos
    bidiagonalization) with a fixed start vector is used, which is much
    faster for the structured operators of this package and accurate to
    far better than 1e-8 relative; a dense SVD is the fallback.
    """
    M = np.asarray(M)
    if M.size == 0:
        raise ValueError("empty matrix")
    if M.ndim == 1:
        return float(np.linalg.norm(M))
    if method == "auto":
        method = "arpack" if min(M.shape) >= 400 else "dense"
    if method == "arpack":
        from scipy.sparse.linalg import ArpackNoConvergence, svds

        v0 = np.ones(min(M.shape)) / np.sqrt(min(M.shape))
        if not np.any(M):
            return 0.0
        try:
            s = svds(M, k=1, tol=1e-13, v0=v0, return_singular_vectors=False, maxiter=5000)
            return float(s[0])
        except (ArpackNoConvergence, ValueError):
            method = "dense"
    if method == "dense":
        return float(la.svdvals(M, check_finite=False)[0])
    raise ValueError(f"unknown method {method!r}")


def hermitian_norm(M) -> float:
    """Norm of a Hermitian matrix via eigenvalues (cheaper than an SVD)."""
    w = la.eigvalsh(hermitize(M), check_finite=False)
    return float(max(abs(w[0]), abs(w[-1])))


def dft(values, direction: str = "forward", axis: int = 0) -> np.ndarray:
    """Unitary DFT of samples on a uniform periodic grid (any length)."""
    values = np.asarray(values)
    if values.shape[axis] == 0:
        raise ValueError("empty input")
    if direction == "forward":
        return np.fft.fft(values, axis=axis, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft(values, axis=axis, norm="ortho")
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def dft_matrix(N: int) -> np.ndarray:
    """Unitary DFT matrix, F[k, j] = exp(-2 pi i k j / N) / sqrt(N)."""
    j = np.arange(N)
    return np.exp(-2j * np.pi * (np.outer(j, j) % N) / N) / np.sqrt(N)


def integer_frequencies(N: int) -> np.ndarray:
    """DFT frequencies as integers in numpy order (0, 1, ..., -1)."""
    return np.fft.fftfreq(N, 1.0 / N)


def fourier_multiplier(N: int, symbol_values) -> np.ndarray:
    """Dense matrix F* diag(symbol_values) F."""
    F = dft_matrix(N)
    out = (F.conj().T * np.asarray(symbol_values)) @ F
    if not np.any(np.abs(out.imag) > 1e-14 * max(1.0, np.abs(out).max())):
        out = out.real
    return out


def fourier_diff_matrix(N: int, period: float, nyquist: str = "keep") -> np.ndarray:
    """Spectral first-derivative matrix on N periodic points.

    ``nyquist='keep'`` multiplies the Nyquist mode by i*(-N/2)*(2pi/period)
    (numpy convention), so -i times the matrix has the integer spectrum
    -N/2..N/2-1 on the 2pi circle.  ``nyquist='zero'`` drops that mode and
    gives a real antisymmetric matrix.
    """
    k = integer_frequencies(N) * (2 * np.pi / period)
    if nyquist == "zero" and N % 2 == 0:
        k[N // 2] = 0.0
    elif nyquist not in ("keep", "zero"):
        raise ValueError(nyquist)
    return fourier_multiplier(N, 1j * k)


def commutator(A, B) -> np.ndarray:
    return A @ B - B @ A


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (X + X.conj().T)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(X)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def loglog_slope(ts, values):
    """Least-squares fit of log(values) = slope*log(ts) + intercept."""
    x = np.log(np.asarray(ts, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)
