"""d-outcome unitary observables: generalized Paulis, MUB families, spectral assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import DEFAULT_TOL, Tolerances, as_matrix, dagger, is_orthonormal, matrix_power


def roots_of_unity(d: int) -> np.ndarray:
    """omega^j for j = 0..d-1, with quarter-turn values made exact (so Z_2 = diag(1, -1))."""
    r = np.exp(2j * np.pi * np.arange(d) / d)
    re, im = r.real.copy(), r.imag.copy()
    re[np.abs(re) < 1e-15] = 0.0
    im[np.abs(im) < 1e-15] = 0.0
    return re + 1j * im


def omega(d: int) -> complex:
    return complex(roots_of_unity(d)[1 % d])


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


@dataclass(frozen=True)
class ValidationReport:
    unitarity_residual: float
    order_residual: float
    spectrum_residual: float
    ambiguous_labels: bool
    tol: float
    spectrum_tol: float

    @property
    def unitary(self) -> bool:
        return self.unitarity_residual < self.tol

    @property
    def order_ok(self) -> bool:
        return self.order_residual < self.tol

    @property
    def spectrum_ok(self) -> bool:
        return self.spectrum_residual < self.spectrum_tol and not self.ambiguous_labels

    @property
    def passed(self) -> bool:
        return self.unitary and self.order_ok and self.spectrum_ok


def root_labels(eigenvalues, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest d-th root of unity index for each eigenvalue, and the distance to it.

    Ties go to the smaller index.
    """
    ev = np.asarray(eigenvalues, dtype=complex)
    roots = roots_of_unity(d)
    dist = np.abs(ev[:, None] - roots[None, :])
    labels = np.argmin(dist, axis=1)
    return labels, dist[np.arange(ev.size), labels]


def validate_observable(a, d: int, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"observable must be square, got {m.shape}")
    n = m.shape[0]
    eye = np.eye(n)
    unit_res = float(np.max(np.abs(dagger(m) @ m - eye)))
    order_res = float(np.max(np.abs(matrix_power(m, d) - eye)))
    ev = np.linalg.eigvals(m)
    roots = roots_of_unity(d)
    dist = np.sort(np.abs(ev[:, None] - roots[None, :]), axis=1)
    spec_res = float(np.max(dist[:, 0]))
    ambiguous = bool(d > 1 and np.any(dist[:, 1] - dist[:, 0] < tol.spectrum))
    return ValidationReport(unit_res, order_res, spec_res, ambiguous, tol.eq, tol.spectrum)


@dataclass(frozen=True, eq=False)
class QuditObservable:
    """Order-d unitary whose spectrum lies in the d-th roots of unity.

    The matrix may be larger than d x d on the untrusted side.
    """

    d: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        report = validate_observable(m, self.d)
        if not report.passed:
            raise ValueError(
                "not a d-outcome unitary observable: "
                f"unitarity {report.unitarity_residual:.3g}, order {report.order_residual:.3g}, "
                f"spectrum {report.spectrum_residual:.3g}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def power(self, k: int) -> np.ndarray:
        return matrix_power(self.matrix, k % self.d)

    def spectral_projectors(self) -> list[np.ndarray]:
        """Projector onto the eigenvalue omega^a eigenspace, for a = 0..d-1."""
        return spectral_projectors(self.matrix, self.d)

    def conj(self) -> "QuditObservable":
        return conjugate_observable(self)


def spectral_projectors(m: np.ndarray, d: int) -> list[np.ndarray]:
    # m is normal, so a Schur form is diagonal and its vectors orthonormal.
    t, z = scipy.linalg.schur(np.asarray(m, dtype=complex), output="complex")
    labels, _ = root_labels(np.diag(t), d)
    projs = []
    for a in range(d):
        cols = z[:, labels == a]
        projs.append(cols @ dagger(cols))
    return projs


def eigenbasis(obs: QuditObservable) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal eigenvectors (columns) and their root-of-unity labels."""
    t, z = scipy.linalg.schur(obs.matrix, output="complex")
    labels, _ = root_labels(np.diag(t), obs.d)
    order = np.argsort(labels, kind="stable")
    return z[:, order], labels[order]


def generalized_pauli(d: int) -> tuple[QuditObservable, QuditObservable]:
    """Shift ``X|i> = |i+1>`` and clock ``Z|i> = omega^i |i>``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    x = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    z = np.diag(roots_of_unity(d))
    return QuditObservable(d, x), QuditObservable(d, z)


def pauli_x(d: int) -> QuditObservable:
    return generalized_pauli(d)[0]


def pauli_z(d: int) -> QuditObservable:
    return generalized_pauli(d)[1]


def mub_matrix(d: int, k: int) -> np.ndarray:
    """Raw ``omega^(k(k+1)) X Z^k``; not an order-d observable for d = 2, k = 1."""
    if not is_prime(d):
        raise ValueError(f"the MUB family is defined for prime d only, got {d}")
    if not 0 <= k < d:
        raise ValueError(f"k must lie in 0..{d - 1}")
    x, z = generalized_pauli(d)
    return omega(d) ** (k * (k + 1)) * x.matrix @ matrix_power(z.matrix, k)


def mub_observable(d: int, k: int) -> QuditObservable:
    """MUB observable ``omega^(k(k+1)) X Z^k`` for prime d.

    For d = 2 that phase leaves ``XZ`` with spectrum {+i, -i}, so the qubit
    case uses the phase ``i`` instead (giving Pauli Y).
    """
    m = mub_matrix(d, k)
    if d == 2 and k == 1:
        m = 1j * m
    return QuditObservable(d, m)


def shift_clock_power(d: int, l: int) -> QuditObservable:
    """``X Z^l``, times ``exp(i pi / d)`` when d is even and l odd.

    Without that phase ``(X Z^l)^d = -1`` for even d and odd l, so the bare
    product is not a d-outcome observable.
    """
    x, z = generalized_pauli(d)
    m = x.matrix @ matrix_power(z.matrix, l % d)
    if d % 2 == 0 and l % 2 == 1:
        m = np.exp(1j * np.pi / d) * m
    return QuditObservable(d, m)


@dataclass(frozen=True)
class OutcomePermutation:
    image: tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"not a permutation of 0..{len(img) - 1}: {img}")
        object.__setattr__(self, "image", img)

    @property
    def d(self) -> int:
        return len(self.image)

    @classmethod
    def identity(cls, d: int) -> "OutcomePermutation":
        return cls(tuple(range(d)))


def observable_from_basis(basis, perm: OutcomePermutation, tol: Tolerances = DEFAULT_TOL) -> QuditObservable:
    """``sum_i omega^perm(i) |s_i><s_i|`` for an orthonormal basis given as columns."""
    s = np.asarray(basis, dtype=complex)
    d = perm.d
    if s.shape != (d, d):
        raise ValueError(f"basis must be {d} vectors of dimension {d}")
    if not is_orthonormal(s, tol.ortho):
        raise ValueError("basis is not orthonormal")
    phases = roots_of_unity(d)[np.asarray(perm.image)]
    return QuditObservable(d, (s * phases) @ dagger(s))


def conjugate_observable(a: QuditObservable) -> QuditObservable:
    return QuditObservable(a.d, np.conj(a.matrix))


def fourier_basis(d: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return omega(d) ** (j * k) / np.sqrt(d)


def _weaker_d4_pair() -> list[QuditObservable]:
    s = 1 / np.sqrt(2)
    e = np.eye(4)
    plus0, minus0 = s * (e[0] + e[1]), s * (e[0] - e[1])
    plus1, minus1 = s * (e[2] + e[3]), s * (e[2] - e[3])
    a2 = np.zeros((4, 4), dtype=complex)
    for j, (p, m) in enumerate([(plus0, minus0), (plus1, minus1)]):
        a2 += (-1) ** j * (np.outer(p, p) + 1j * np.outer(m, m))
    return [pauli_z(4), QuditObservable(4, a2)]


def _triple_d4() -> list[QuditObservable]:
    i = 1j
    a1 = 0.5 * np.array(
        [[1 + i, 1 - i, 0, 0], [1 - i, 1 + i, 0, 0], [0, 0, -2, 0], [0, 0, 0, -2 * i]]
    )
    a2 = 0.5 * np.array(
        [[2, 0, 0, 0], [0, -1 + i, 1 + i, 0], [0, 1 + i, -1 + i, 0], [0, 0, 0, -2 * i]]
    )
    a3 = 0.5 * np.array(
        [[2, 0, 0, 0], [0, 2 * i, 0, 0], [0, 0, -1 - i, i - 1], [0, 0, i - 1, -1 - i]]
    )
    return [QuditObservable(4, a) for a in (a1, a2, a3)]


BUILTIN_EXAMPLES = {
    "weaker_d4_pair": _weaker_d4_pair,
    "triple_d4": _triple_d4,
}


def builtin_example(name: str) -> list[QuditObservable]:
    try:
        return BUILTIN_EXAMPLES[name]()
    except KeyError:
        raise ValueError(f"unknown builtin example {name!r}; known: {sorted(BUILTIN_EXAMPLES)}") from None
