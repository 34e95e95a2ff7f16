"""Exterior algebra of C^n as a 2^n dimensional Clifford module.

Basis: subsets of {1..n} in graded-lexicographic order (by size, then
lexicographically).  d[j] is exterior multiplication by e_j, dstar[j] its
adjoint (interior multiplication) and epsilon the even/odd grading.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class CliffordRep:
    n: int
    basis: tuple  # tuple of sorted tuples (1-based indices)
    d: tuple  # d[j] for j = 0..n-1 (e_{j+1} wedge)
    dstar: tuple
    epsilon: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def even(self) -> np.ndarray:
        return np.array([len(S) % 2 == 0 for S in self.basis])

    def gamma(self, j: int) -> np.ndarray:
        """d_j + d_j*  (Clifford multiplication by a real spatial vector)."""
        return self.d[j] + self.dstar[j]

    def gamma_xi(self, j: int) -> np.ndarray:
        """i(d_j - d_j*)  (Clifford multiplication by i times a covector)."""
        return 1j * (self.d[j] - self.dstar[j])


def graded_lex_basis(n: int) -> tuple:
    out = []
    for size in range(n + 1):
        out.extend(tuple(c) for c in combinations(range(1, n + 1), size))
    return tuple(out)


def build_clifford(n: int) -> CliffordRep:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 6:
        raise ValueError(f"n must be an integer in [1, 6], got {n!r}")
    basis = graded_lex_basis(n)
    index = {S: i for i, S in enumerate(basis)}
    dim = len(basis)
    ds = []
    for j in range(1, n + 1):
        m = np.zeros((dim, dim), dtype=np.int64)
        for S in basis:
            if j in S:
                continue
            sign = (-1) ** sum(1 for i in S if i < j)
            T = tuple(sorted(S + (j,)))
            m[index[T], index[S]] = sign
        ds.append(m)
    d = tuple(m.astype(float) for m in ds)
    dstar = tuple(m.T.astype(float) for m in ds)
    eps = np.diag([(-1.0) ** len(S) for S in basis])
    return CliffordRep(n, basis, d, dstar, eps)


def _vec(rep: CliffordRep, v, name) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (rep.n,):
        raise ValueError(f"{name} must have length {rep.n}, got shape {v.shape}")
    return v


def clifford_c(rep: CliffordRep, v, xi) -> np.ndarray:
    """c(v, xi) = sum v_j (d_j + d_j*) + i sum xi_j (d_j - d_j*)."""
    v = _vec(rep, v, "v")
    xi = _vec(rep, xi, "xi")
    out = np.zeros((rep.dim, rep.dim), dtype=complex)
    for j in range(rep.n):
        out += v[j] * rep.gamma(j) + xi[j] * rep.gamma_xi(j)
    return out


def clifford_c_batch(rep: CliffordRep, v, xi) -> np.ndarray:
    """c(v, xi) for stacked inputs of shape (..., n); returns (..., 2^n, 2^n)."""
    v = np.asarray(v, dtype=float)
    xi = np.asarray(xi, dtype=float)
    g = np.stack([rep.gamma(j) for j in range(rep.n)])
    gx = np.stack([rep.gamma_xi(j) for j in range(rep.n)])
    return np.einsum("...j,jab->...ab", v, g) + np.einsum("...j,jab->...ab", xi, gx)


def identity_residuals(rep: CliffordRep) -> dict:
    """Max-entry residuals of the defining anticommutation identities."""
    n, I = rep.n, np.eye(rep.dim)
    res = {"dd": 0.0, "ddstar": 0.0, "eps2": 0.0, "eps_d": 0.0}
    for j in range(n):
        for k in range(n):
            dd = rep.d[j] @ rep.d[k] + rep.d[k] @ rep.d[j]
            res["dd"] = max(res["dd"], np.abs(dd).max())
            ac = rep.d[j] @ rep.dstar[k] + rep.dstar[k] @ rep.d[j]
            res["ddstar"] = max(res["ddstar"], np.abs(ac - (j == k) * I).max())
        res["eps_d"] = max(res["eps_d"], np.abs(rep.epsilon @ rep.d[j] + rep.d[j] @ rep.epsilon).max())
    res["eps2"] = np.abs(rep.epsilon @ rep.epsilon - I).max()
    return {k: float(v) for k, v in res.items()}


def clifford_residuals(rep: CliffordRep, v, xi) -> dict:
    c = clifford_c(rep, v, xi)
    nrm2 = float(np.dot(v, v) + np.dot(xi, xi))
    return {
        "selfadjoint": float(np.abs(c - c.conj().T).max()),
        "anticommute": float(np.abs(c @ rep.epsilon + rep.epsilon @ c).max()),
        "square": float(np.abs(c @ c - nrm2 * np.eye(rep.dim)).max()),
    }
