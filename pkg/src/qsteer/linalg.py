"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain ``numpy`` complex arrays and kets are 1-D complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.stats


@dataclass(frozen=True)
class Tolerances:
    """Single tolerance record threaded through every numerical check."""

    eq: float = 1e-9
    ortho: float = 1e-10
    spectrum: float = 1e-8
    rank: float = 1e-7


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class SchmidtForm:
    """Schmidt decomposition ``psi = sum_i c_i |e_i> (x) |f_i>``.

    ``left`` holds the trusted-side vectors as columns (d x d) and ``right``
    the untrusted-side vectors as columns (D x d). Coefficients are sorted
    in descending order and padded with zeros up to ``d``.
    """

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def dim_left(self) -> int:
        return self.left.shape[0]

    @property
    def dim_right(self) -> int:
        return self.right.shape[0]

    def rank(self, tol: float = DEFAULT_TOL.rank) -> int:
        return int(np.sum(self.coefficients > tol))

    def reconstruct(self) -> np.ndarray:
        return np.einsum("i,ai,bi->ab", self.coefficients, self.left, self.right).reshape(-1)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or min(m.shape) < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def tensor_product(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def matrix_power(a, k: int) -> np.ndarray:
    """Integer power ``a**k`` by repeated multiplication; ``a**0`` is the identity."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_power needs a square matrix, got {m.shape}")
    if k < 0:
        raise ValueError("matrix_power needs k >= 0")
    out = np.eye(m.shape[0], dtype=complex)
    for _ in range(k):
        out = out @ m
    return out


def hs_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=complex), "fro"))


def hs_distance(a, b) -> float:
    """Hilbert-Schmidt distance ``sqrt(Tr[(a-b)^dag (a-b)])``."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return hs_norm(a - b)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def check_normalized(psi, tol: float = DEFAULT_TOL.ortho) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm {np.linalg.norm(psi):.12g})")
    return psi


def is_orthonormal(vectors, tol: float = DEFAULT_TOL.ortho) -> bool:
    """True if the columns of ``vectors`` are orthonormal."""
    v = np.asarray(vectors, dtype=complex)
    gram = dagger(v) @ v
    return bool(np.max(np.abs(gram - np.eye(v.shape[1]))) < tol)


def max_entangled(d: int, dim_right: int | None = None) -> np.ndarray:
    """``|phi_d^+> = sum_i |ii> / sqrt(d)``, optionally embedded in C^d (x) C^D."""
    dim_right = d if dim_right is None else dim_right
    if dim_right < d:
        raise ValueError("right dimension must be at least d")
    psi = np.zeros((d, dim_right), dtype=complex)
    psi[np.arange(d), np.arange(d)] = 1 / np.sqrt(d)
    return psi.reshape(-1)


def schmidt_decompose(psi, d: int, tol: Tolerances = DEFAULT_TOL) -> SchmidtForm:
    """Schmidt form of a normalized ket on C^d (x) C^(dim/d) via SVD.

    Degenerate coefficients leave the basis choice inside the degenerate
    block to the SVD routine; callers must not rely on it.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if d < 1 or psi.size % d:
        raise ValueError(f"state dimension {psi.size} is not divisible by d={d}")
    check_normalized(psi, tol.ortho)
    dim_right = psi.size // d
    u, s, vh = np.linalg.svd(psi.reshape(d, dim_right), full_matrices=True)
    r = min(d, dim_right)
    coeffs = np.zeros(d)
    coeffs[:r] = s[:r]
    right = np.zeros((dim_right, d), dtype=complex)
    # If D < d the missing right vectors carry zero weight; leave them zero.
    right[:, :r] = vh[:r].T
    return SchmidtForm(coefficients=coeffs, left=u, right=right)


def partial_trace_right(psi, d: int) -> np.ndarray:
    m = np.asarray(psi, dtype=complex).reshape(d, -1)
    return m @ dagger(m)


def partial_trace_left(psi, d: int) -> np.ndarray:
    m = np.asarray(psi, dtype=complex).reshape(d, -1)
    return m.T @ np.conj(m)


def null_space(m: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal null-space basis (columns); rank cut relative to the largest singular value."""
    return scipy.linalg.null_space(m, rcond=rel_tol)


def complete_unitary(src, dst, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Unitary on C^dim mapping each column of ``src`` to the matching column of ``dst``.

    Both column sets must be orthonormal. The orthocomplements are matched
    by Gram-Schmidt over the computational basis in index order, so the
    result is deterministic.
    """
    src = np.asarray(src, dtype=complex).reshape(dim, -1)
    dst = np.asarray(dst, dtype=complex).reshape(dim, -1)
    if src.shape != dst.shape:
        raise ValueError("source and target sets differ in size")
    src_full = _extend_basis(src, dim, tol)
    dst_full = _extend_basis(dst, dim, tol)
    return dst_full @ dagger(src_full)


def _extend_basis(vectors: np.ndarray, dim: int, tol: float) -> np.ndarray:
    cols = [vectors[:, j] for j in range(vectors.shape[1])]
    for j in range(dim):
        if len(cols) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[j] = 1.0
        # two passes of modified Gram-Schmidt
        for _ in range(2):
            for c in cols:
                v = v - np.vdot(c, v) * c
        n = np.linalg.norm(v)
        if n > 1e-6:
            cols.append(v / n)
    out = np.column_stack(cols)
    if out.shape[1] != dim or not is_orthonormal(out, max(tol, 1e-9)):
        raise ValueError("could not complete the vectors to an orthonormal basis")
    return out


def haar_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return scipy.stats.unitary_group.rvs(dim, random_state=rng)
