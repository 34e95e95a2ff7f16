"""Finite-dimensional C*-algebras A = M_k1 + ... + M_kr and their K_0 groups.

K_0(A) is Z^r: the class of a projection p in M_m(A) is the vector of
ranks of its blocks, counted in units of a minimal projection of each
block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tolerances as tol
from .linalg_core import hermitize


class AmbiguousProjection(ValueError):
    """An eigenvalue fell inside the forbidden band [rank_tol, 1 - rank_tol]."""


class NotAProjection(ValueError):
    pass


@dataclass(frozen=True)
class Algebra:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if len(blocks) < 1 or any(b < 1 for b in blocks):
            raise ValueError(f"invalid block sizes {self.blocks!r}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def r(self) -> int:
        return len(self.blocks)

    @classmethod
    def from_json(cls, data) -> "Algebra":
        if not isinstance(data, (list, tuple)) or not all(isinstance(b, int) for b in data):
            raise ValueError(f"algebra must be a JSON array of block sizes, got {data!r}")
        return cls(tuple(data))

    def to_json(self) -> list:
        return list(self.blocks)

    def __str__(self):
        return " + ".join("C" if k == 1 else f"M{k}(C)" for k in self.blocks)


@dataclass(frozen=True)
class K0Class:
    algebra: Algebra
    ranks: tuple

    def __post_init__(self):
        ranks = tuple(int(x) for x in self.ranks)
        if len(ranks) != self.algebra.r:
            raise ValueError("rank vector length does not match the algebra")
        object.__setattr__(self, "ranks", ranks)

    def __add__(self, other: "K0Class") -> "K0Class":
        _same_algebra(self.algebra, other.algebra)
        return K0Class(self.algebra, tuple(a + b for a, b in zip(self.ranks, other.ranks)))

    def __sub__(self, other: "K0Class") -> "K0Class":
        _same_algebra(self.algebra, other.algebra)
        return K0Class(self.algebra, tuple(a - b for a, b in zip(self.ranks, other.ranks)))

    def __neg__(self):
        return K0Class(self.algebra, tuple(-a for a in self.ranks))

    def scale(self, m: int) -> "K0Class":
        return K0Class(self.algebra, tuple(m * a for a in self.ranks))

    def to_list(self) -> list:
        return list(self.ranks)

    @classmethod
    def zero(cls, algebra: Algebra) -> "K0Class":
        return cls(algebra, (0,) * algebra.r)


def _same_algebra(a: Algebra, b: Algebra):
    if a != b:
        raise ValueError(f"algebra mismatch: {a} vs {b}")


@dataclass
class AMatrix:
    """Element of M_m(A): block i is an (m*k_i) x (m*k_i) complex matrix."""

    algebra: Algebra
    m: int
    blocks: list = field(default_factory=list)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("amplification must be >= 1")
        if len(self.blocks) != self.algebra.r:
            raise ValueError("block list length does not match the algebra")
        blocks = []
        for k, b in zip(self.algebra.blocks, self.blocks):
            b = np.asarray(b)
            if b.shape != (self.m * k, self.m * k):
                raise ValueError(f"block shape {b.shape} != {(self.m * k,) * 2}")
            blocks.append(b)
        self.blocks = blocks

    @classmethod
    def zeros(cls, algebra: Algebra, m: int) -> "AMatrix":
        return cls(algebra, m, [np.zeros((m * k, m * k), complex) for k in algebra.blocks])

    @classmethod
    def identity(cls, algebra: Algebra, m: int) -> "AMatrix":
        return cls(algebra, m, [np.eye(m * k, dtype=complex) for k in algebra.blocks])

    def __matmul__(self, other: "AMatrix") -> "AMatrix":
        self._check(other)
        return AMatrix(self.algebra, self.m, [a @ b for a, b in zip(self.blocks, other.blocks)])

    def __add__(self, other):
        self._check(other)
        return AMatrix(self.algebra, self.m, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check(other)
        return AMatrix(self.algebra, self.m, [a - b for a, b in zip(self.blocks, other.blocks)])

    def adjoint(self) -> "AMatrix":
        return AMatrix(self.algebra, self.m, [b.conj().T for b in self.blocks])

    def norm(self) -> float:
        return max(float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in self.blocks)

    def direct_sum(self, other: "AMatrix") -> "AMatrix":
        """p + p' in M_{m+m'}(A), laid out block-diagonally per algebra block."""
        _same_algebra(self.algebra, other.algebra)
        out = []
        for a, b in zip(self.blocks, other.blocks):
            z = np.zeros((a.shape[0] + b.shape[0],) * 2, dtype=complex)
            z[: a.shape[0], : a.shape[0]] = a
            z[a.shape[0]:, a.shape[0]:] = b
            out.append(z)
        return AMatrix(self.algebra, self.m + other.m, out)

    def conjugate_by(self, unitaries: Sequence[np.ndarray]) -> "AMatrix":
        return AMatrix(self.algebra, self.m, [u @ b @ u.conj().T for u, b in zip(unitaries, self.blocks)])

    def _check(self, other):
        _same_algebra(self.algebra, other.algebra)
        if self.m != other.m:
            raise ValueError(f"amplification mismatch: {self.m} vs {other.m}")


def projection_defect(p: AMatrix) -> float:
    worst = 0.0
    for b in p.blocks:
        if b.size:
            worst = max(worst, np.abs(b @ b - b).max(), np.abs(b - b.conj().T).max())
    return float(worst)


def block_rank(block, rank_tol: float | None = None) -> int:
    """Rank of a single Hermitian projection block (eigenvalues > 1/2)."""
    rank_tol = tol.get("rank_tol") if rank_tol is None else rank_tol
    block = np.asarray(block)
    if block.size == 0:
        return 0
    if np.abs(block - block.conj().T).max() > tol.get("projection"):
        raise NotAProjection("block is not self-adjoint")
    w = np.linalg.eigvalsh(hermitize(block))
    inside = (w >= rank_tol) & (w <= 1 - rank_tol)
    if np.any(inside):
        raise AmbiguousProjection(f"eigenvalue(s) {w[inside][:4]} inside [{rank_tol}, {1 - rank_tol}]")
    if np.max(np.abs(w * w - w)) > tol.get("projection"):
        raise NotAProjection(f"max |lambda^2 - lambda| = {np.max(np.abs(w * w - w)):.3g}")
    return int(np.count_nonzero(w > 0.5))


def k0_of_projection(p: AMatrix, rank_tol: float | None = None) -> K0Class:
    return K0Class(p.algebra, tuple(block_rank(b, rank_tol) for b in p.blocks))


def difference_class(p: AMatrix, q: AMatrix, rank_tol: float | None = None) -> K0Class:
    p._check(q)
    return k0_of_projection(p, rank_tol) - k0_of_projection(q, rank_tol)


def amplify(x: AMatrix, m_prime: int) -> AMatrix:
    """x tensor 1_{m'}: each block becomes kron(block, I_{m'})."""
    if m_prime < 1:
        raise ValueError("m' must be >= 1")
    return AMatrix(x.algebra, x.m * m_prime, [np.kron(b, np.eye(m_prime)) for b in x.blocks])


def random_projection(algebra: Algebra, m: int, rng: np.random.Generator, ranks: Sequence[int] | None = None) -> AMatrix:
    """Projection with the given per-block ranks onto a random subspace."""
    blocks = []
    for i, k in enumerate(algebra.blocks):
        size = m * k
        r = int(rng.integers(0, size + 1)) if ranks is None else int(ranks[i])
        Z = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        Q, _ = np.linalg.qr(Z)
        V = Q[:, :r]
        blocks.append(V @ V.conj().T)
    return AMatrix(algebra, m, blocks)
