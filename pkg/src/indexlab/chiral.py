"""Kernel extraction for graded (odd) Hermitian matrices.

For H odd with respect to a diagonal grading eps, H is determined by its
block D+ : even -> odd.  Near-zero singular vectors of D+ give ker+ (right
vectors) and ker- (left vectors).

On a periodic grid the matrix index of D+ is always zero, so every physical
zero mode comes with a partner mode living where the discretization is
unfaithful (a closure wall, or the top of the frequency band).  A localizer
R (0 <= R <= I) that measures "physical" weight separates the two kinds;
partners are then deflated away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la

from . import tolerances as tol


class SpectralGapError(ValueError):
    pass


class ChiralityError(ValueError):
    pass


class LocalizationError(ValueError):
    """A kernel vector is neither clearly physical nor clearly an artifact."""


def grading_split(eps_diag):
    eps_diag = np.asarray(eps_diag).real
    if not np.all(np.isin(eps_diag, (-1.0, 1.0))):
        raise ValueError("grading must be a diagonal of +-1 entries")
    return np.flatnonzero(eps_diag > 0), np.flatnonzero(eps_diag < 0)


def odd_residual(H, eps_diag) -> float:
    eps_diag = np.asarray(eps_diag)
    anti = eps_diag[:, None] * H + H * eps_diag[None, :]
    return float(np.abs(anti).max())


def chiral_block(H, eps_diag):
    """D+ = H[odd, even] together with the index sets."""
    ev, od = grading_split(eps_diag)
    return H[np.ix_(od, ev)], ev, od


@dataclass
class ChiralKernel:
    even_idx: np.ndarray
    odd_idx: np.ndarray
    singular_values: np.ndarray  # of D+, ascending
    delta: float
    plus: np.ndarray  # columns in even coordinates
    minus: np.ndarray  # columns in odd coordinates
    plus_weights: np.ndarray
    minus_weights: np.ndarray
    Dplus: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.even_idx) + len(self.odd_idx)

    @property
    def raw_counts(self) -> tuple:
        return self.plus.shape[1], self.minus.shape[1]

    @property
    def raw_index(self) -> int:
        return self.plus.shape[1] - self.minus.shape[1]

    def _phys(self, w):
        return w > 0.5

    @property
    def phys_plus(self) -> np.ndarray:
        return self.plus[:, self._phys(self.plus_weights)]

    @property
    def phys_minus(self) -> np.ndarray:
        return self.minus[:, self._phys(self.minus_weights)]

    @property
    def art_plus(self) -> np.ndarray:
        return self.plus[:, ~self._phys(self.plus_weights)]

    @property
    def art_minus(self) -> np.ndarray:
        return self.minus[:, ~self._phys(self.minus_weights)]

    @property
    def counts(self) -> tuple:
        return self.phys_plus.shape[1], self.phys_minus.shape[1]

    @property
    def index(self) -> int:
        a, b = self.counts
        return a - b

    def embed(self, vecs, sector: str) -> np.ndarray:
        out = np.zeros((self.dim, vecs.shape[1]), dtype=complex)
        idx = self.even_idx if sector == "plus" else self.odd_idx
        out[idx] = vecs
        return out

    def physical_kernel_full(self) -> tuple:
        """Physical kernel vectors embedded in the full space, with chiralities."""
        a = self.embed(self.phys_plus, "plus")
        b = self.embed(self.phys_minus, "minus")
        chir = np.concatenate([np.ones(a.shape[1]), -np.ones(b.shape[1])])
        return np.hstack([a, b]), chir

    def deflation(self) -> tuple:
        """Isometries onto the complements of the artifact modes in each sector."""
        Qe = _complement(self.art_plus, len(self.even_idx))
        Qo = _complement(self.art_minus, len(self.odd_idx))
        return Qe, Qo

    def deflated_block(self) -> np.ndarray:
        Qe, Qo = self.deflation()
        return Qo.conj().T @ self.Dplus @ Qe

    def deflated_operator(self) -> tuple:
        """Physical doubled operator [[0, D*], [D, 0]] and its grading diagonal."""
        Dp = self.deflated_block()
        ne, no = Dp.shape[1], Dp.shape[0]
        H = np.zeros((ne + no, ne + no), dtype=Dp.dtype)
        H[ne:, :ne] = Dp
        H[:ne, ne:] = Dp.conj().T
        eps = np.concatenate([np.ones(ne), -np.ones(no)])
        return H, eps

    def physical_singular_values(self) -> np.ndarray:
        return np.sort(la.svdvals(self.deflated_block(), check_finite=False))


def _complement(vecs, dim) -> np.ndarray:
    if vecs.shape[1] == 0:
        return np.eye(dim)
    return la.null_space(vecs.conj().T)


def _classify(vecs, localizer, low, high):
    """Rotate a kernel basis so the compressed localizer is diagonal."""
    if vecs.shape[1] == 0 or localizer is None:
        return vecs, np.ones(vecs.shape[1])
    Rv = localizer(vecs)
    C = vecs.conj().T @ Rv
    C = 0.5 * (C + C.conj().T)
    w, U = np.linalg.eigh(C)
    bad = (w >= low) & (w <= high)
    if np.any(bad):
        raise LocalizationError(f"localizer weight(s) {w[bad]} inside ambiguous band [{low}, {high}]")
    return vecs @ U, w


def chiral_kernel(
    H,
    eps_diag,
    delta: float,
    localizer_plus: Optional[Callable] = None,
    localizer_minus: Optional[Callable] = None,
    check_gap: bool = True,
) -> ChiralKernel:
    """Split the near-zero space of H (|sigma| < delta) by chirality.

    The localizers act on sector coordinates (columns of vectors) and
    return R @ vecs.  Raises SpectralGapError if a singular value of D+
    lies in [delta, 10*delta).
    """
    Dp, ev, od = chiral_block(np.asarray(H), eps_diag)
    U, s, Vh = la.svd(Dp, full_matrices=True, check_finite=False)
    if check_gap:
        in_gap = (s >= delta) & (s < 10 * delta)
        if np.any(in_gap):
            raise SpectralGapError(f"singular value(s) {s[in_gap][:4]} in [{delta:.3g}, {10 * delta:.3g})")
    small = s < delta
    k = len(s)
    plus = np.hstack([Vh[:k][small].conj().T, Vh[k:].conj().T])
    minus = np.hstack([U[:, :k][:, small], U[:, k:]])
    low, high = tol.get("localizer_low"), tol.get("localizer_high")
    plus, wp = _classify(plus, localizer_plus, low, high)
    minus, wm = _classify(minus, localizer_minus, low, high)
    return ChiralKernel(ev, od, np.sort(s), delta, plus, minus, wp, wm, Dp)


def chirality_expectations(vecs, eps_diag) -> np.ndarray:
    eps_diag = np.asarray(eps_diag)
    return np.real(np.einsum("ia,i,ia->a", vecs.conj(), eps_diag, vecs))
