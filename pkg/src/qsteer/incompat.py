"""Commutants, common invariant subspaces and genuine incompatibility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import DEFAULT_TOL, Tolerances, dagger, is_orthonormal, null_space
from .observables import QuditObservable

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class CommutantBasis:
    d: int
    basis: tuple[np.ndarray, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def hermitian_spanning_set(self) -> list[np.ndarray]:
        """Hermitian and anti-Hermitian parts of every basis element, as Hermitian matrices."""
        out = []
        for b in self.basis:
            out.append((b + dagger(b)) / 2)
            out.append((b - dagger(b)) / 2j)
        return out


@dataclass(frozen=True)
class InvariantSubspace:
    d: int
    projector: np.ndarray

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.projector).real))


def _check_set(obs: Sequence[QuditObservable]) -> int:
    if len(obs) == 0:
        raise ValueError("empty observable set")
    dims = {o.dim for o in obs}
    if len(dims) != 1:
        raise ValueError(f"observables act on different dimensions: {sorted(dims)}")
    return dims.pop()


def commutator_system(obs: Sequence[QuditObservable]) -> np.ndarray:
    """Matrix of the map vec(P) -> (vec[P, A_1], ..., vec[P, A_N]) in row-major vec."""
    d = _check_set(obs)
    eye = np.eye(d)
    return np.vstack([np.kron(eye, o.matrix.T) - np.kron(o.matrix, eye) for o in obs])


def commutant(obs: Sequence[QuditObservable]) -> CommutantBasis:
    d = _check_set(obs)
    ns = null_space(commutator_system(obs), RANK_RTOL)
    return CommutantBasis(d, tuple(ns[:, j].reshape(d, d) * np.sqrt(d) for j in range(ns.shape[1])))


def is_genuinely_incompatible(obs: Sequence[QuditObservable]) -> bool:
    return commutant(obs).dimension == 1


def _eigen_clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group sorted real eigenvalue indices whose neighbours differ by less than tol."""
    groups, current = [], [0]
    for j in range(1, len(values)):
        if values[j] - values[j - 1] < tol:
            current.append(j)
        else:
            groups.append(np.array(current))
            current = [j]
    groups.append(np.array(current))
    return groups


def commutant_blocks(obs: Sequence[QuditObservable], seed: int = 0) -> list[np.ndarray]:
    """Orthogonal projectors onto the eigenspaces of a generic Hermitian commutant element.

    With an abelian commutant these are its minimal projections; in general
    each range is a common invariant subspace and together they sum to 1.
    """
    comm = commutant(obs)
    d = comm.d
    if comm.dimension == 1:
        return [np.eye(d, dtype=complex)]
    herm = comm.hermitian_spanning_set()
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(len(herm))
    h = sum(w * m for w, m in zip(weights, herm))
    h = (h + dagger(h)) / 2
    vals, vecs = np.linalg.eigh(h)
    scale = max(1.0, float(np.max(np.abs(vals))))
    projs = []
    for g in _eigen_clusters(vals, 1e-6 * scale):
        v = vecs[:, g]
        projs.append(v @ dagger(v))
    projs.sort(key=lambda p: int(np.argmax(np.abs(np.diag(p)) > 1e-8)))
    return projs


def common_invariant_subspace(obs: Sequence[QuditObservable]) -> InvariantSubspace | None:
    """A nontrivial common invariant subspace, or None if the commutant is trivial."""
    comm = commutant(obs)
    d = comm.d
    if comm.dimension == 1:
        return None
    best, best_norm = None, 0.0
    for h in comm.hermitian_spanning_set():
        h0 = h - np.trace(h) / d * np.eye(d)
        n = np.linalg.norm(h0)
        if n > best_norm + 1e-12:
            best, best_norm = h0, n
    vals, vecs = np.linalg.eigh(best / best_norm)
    group = min(_eigen_clusters(vals, 1e-6), key=len)
    v = vecs[:, group]
    return InvariantSubspace(d, v @ dagger(v))


def is_invariant(obs: Sequence[QuditObservable], projector: np.ndarray, tol: float = 1e-8) -> bool:
    p = np.asarray(projector)
    q = np.eye(p.shape[0]) - p
    return all(np.max(np.abs(q @ o.matrix @ p)) < tol for o in obs)


def _eigenspaces(o: QuditObservable) -> list[np.ndarray]:
    out = []
    for p in o.spectral_projectors():
        vals, vecs = np.linalg.eigh((p + dagger(p)) / 2)
        v = vecs[:, vals > 0.5]
        if v.shape[1]:
            out.append(v)
    return out


def _intersect(s: np.ndarray, e: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of span(s) intersected with span(e) (both orthonormal columns)."""
    m = dagger(s) @ e @ dagger(e) @ s
    vals, vecs = np.linalg.eigh((m + dagger(m)) / 2)
    return s @ vecs[:, vals > 1 - tol]


def shares_common_eigenvector(obs: Sequence[QuditObservable], tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff some vector is an eigenvector of every observable.

    Decided by intersecting eigenspaces, so degenerate spectra are handled exactly.
    """
    _check_set(obs)
    spaces = _eigenspaces(obs[0])
    for o in obs[1:]:
        nxt = []
        for s in spaces:
            for e in _eigenspaces(o):
                inter = _intersect(s, e, tol.spectrum)
                if inter.shape[1]:
                    nxt.append(inter)
        spaces = nxt
        if not spaces:
            return False
    return bool(spaces)


def is_mub_pair(basis_a, basis_b, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Bases given as columns; True iff every |<s_i|t_j>|^2 equals 1/d within 1e-8."""
    a = np.asarray(basis_a, dtype=complex)
    b = np.asarray(basis_b, dtype=complex)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("bases must both be d vectors in C^d")
    if not (is_orthonormal(a, tol.ortho) and is_orthonormal(b, tol.ortho)):
        raise ValueError("input bases must be orthonormal")
    d = a.shape[0]
    overlaps = np.abs(dagger(a) @ b) ** 2
    return bool(np.max(np.abs(overlaps - 1 / d)) < tol.spectrum)
