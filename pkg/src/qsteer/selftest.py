"""Exact self-testing: certify a scenario at maximal violation of B_d.

The pipeline checks the stabilizer relations, extracts the Schmidt operator
P_A, tests its commutation with the trusted observables, builds the
reference unitary U_B and compares the rotated, compressed untrusted
observables with conj(A_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .incompat import commutant, commutant_blocks, is_genuinely_incompatible, shares_common_eigenvector
from .linalg import (
    DEFAULT_TOL,
    SchmidtForm,
    complete_unitary,
    dagger,
    hs_distance,
    hs_norm,
    matrix_power,
    max_entangled,
    schmidt_decompose,
)
from .steering import Scenario, quantum_max, steering_value

CERTIFIED, PARTIAL, FAILED = "certified", "partial", "failed"


class RankDeficientError(ValueError):
    pass


def stabilizer_residuals(s: Scenario) -> np.ndarray:
    """r[i, k-1] = || A_i^k (x) B_i^k |psi> - |psi> || for k = 1..d-1."""
    m = s.state_matrix()
    out = np.empty((s.n_settings, s.d - 1))
    for i, (a, b) in enumerate(zip(s.alice, s.bob)):
        for k in range(1, s.d):
            out[i, k - 1] = np.linalg.norm(a.power(k) @ m @ b.power(k).T - m)
    return out


def extract_PA(schmidt: SchmidtForm) -> np.ndarray:
    """P_A = sum_i sqrt(d) c_i |e_i><e_i|, so that Tr P_A^2 = d."""
    d = schmidt.dim_left
    e = schmidt.left
    return (e * (np.sqrt(d) * schmidt.coefficients)) @ dagger(e)


def reference_unitary(
    schmidt: SchmidtForm, allow_partial: bool = False, rank_tol: float = DEFAULT_TOL.rank
) -> np.ndarray:
    """Unitary on Bob's space with U_B |f_i> = conj|e_i> (embedded in the first d coordinates).

    Only the vectors with coefficient above ``rank_tol`` are mapped; the rest
    of the space is matched deterministically.
    """
    d, D = schmidt.dim_left, schmidt.dim_right
    keep = schmidt.coefficients > rank_tol
    if not allow_partial and keep.sum() < d:
        raise RankDeficientError(f"Schmidt rank {keep.sum()} < d = {d}")
    if D < d:
        raise RankDeficientError(f"Bob's space (dim {D}) is smaller than d = {d}")
    src = schmidt.right[:, keep]
    dst = np.zeros((D, int(keep.sum())), dtype=complex)
    dst[:d] = np.conj(schmidt.left[:, keep])
    return complete_unitary(src, dst, D)


def construct_reference_unitary(schmidt: SchmidtForm) -> np.ndarray:
    return reference_unitary(schmidt)


@dataclass(frozen=True)
class BobBlocks:
    support: np.ndarray
    compressed: tuple[np.ndarray, ...]
    offdiag_upper: np.ndarray
    offdiag_lower: np.ndarray
    rest_residual: np.ndarray

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.support).real))


def bob_blocks(s: Scenario, rank_tol: float = DEFAULT_TOL.rank) -> BobBlocks:
    """Split every B_i against the support of Bob's reduced state.

    ``compressed`` holds Pi B_i Pi as D x D matrices; the off-diagonal blocks
    are measured by || Pi B_i (1 - Pi) ||_2 and || (1 - Pi) B_i Pi ||_2, and
    ``rest_residual`` by || (1 (x) (1 - Pi) B_i Pi) |psi> ||.
    """
    sch = schmidt_decompose(s.state, s.d)
    f = sch.right[:, sch.coefficients > rank_tol]
    pi = f @ dagger(f)
    perp = np.eye(s.bob_dim) - pi
    m = s.state_matrix()
    comp, up, lo, rest = [], [], [], []
    for b in s.bob:
        bm = b.matrix
        comp.append(pi @ bm @ pi)
        up.append(hs_norm(pi @ bm @ perp))
        lo.append(hs_norm(perp @ bm @ pi))
        rest.append(np.linalg.norm(m @ (perp @ bm @ pi).T))
    return BobBlocks(pi, tuple(comp), np.array(up), np.array(lo), np.array(rest))


@dataclass
class BlockCertificate:
    projector: np.ndarray
    dim: int
    weight: float
    coefficient: float
    certified: bool
    state_error: float | None = None
    observables: list[np.ndarray] | None = None
    observable_errors: list[float] | None = None


@dataclass
class PartialReport:
    violation: float
    epsilon: float
    commutant_dim: int
    stabilizer_max: float
    schmidt: SchmidtForm
    P_A: np.ndarray
    P_A_rank: int
    P_A_levels: list[float]
    commutation_residuals: np.ndarray
    blocks: list[BlockCertificate]

    @property
    def certified_blocks(self) -> list[int]:
        return [j for j, b in enumerate(self.blocks) if b.certified]


@dataclass
class CertificationReport:
    violation: float
    epsilon: float
    genuinely_incompatible: bool
    stabilizer_residuals: np.ndarray
    schmidt: SchmidtForm
    P_A: np.ndarray
    schmidt_rank: int
    commutation_residuals: np.ndarray
    P_A_identity_error: float
    blocks: BobBlocks
    U_B: np.ndarray | None
    observable_errors: np.ndarray | None
    state_error: float | None
    verdict: str
    tol: float
    partial: PartialReport | None = field(default=None)

    @property
    def stabilizer_max(self) -> float:
        return float(np.max(self.stabilizer_residuals))


def _levels(values: np.ndarray, tol: float = 1e-7) -> list[float]:
    out: list[float] = []
    for v in sorted(values, reverse=True):
        if not out or abs(out[-1] - v) > tol:
            out.append(float(v))
    return out


def _rotated_compression(s: Scenario, u: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (u @ b @ dagger(u))[: s.d, : s.d]


def certify(s: Scenario, tol: float = 1e-8) -> CertificationReport:
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    d, n = s.d, s.n_settings
    violation = steering_value(s)
    eps = quantum_max(n, d) - violation
    gi = is_genuinely_incompatible(s.alice)
    stab = stabilizer_residuals(s)
    sch = schmidt_decompose(s.state, d)
    rank = sch.rank()
    pa = extract_PA(sch)
    comm = np.array([hs_norm(a.matrix @ pa - pa @ a.matrix) for a in s.alice])
    pa_err = hs_distance(pa, np.eye(d))
    blocks = bob_blocks(s)

    u_b = obs_err = state_err = None
    if rank == d:
        u_b = reference_unitary(sch)
        rotated = (np.kron(np.eye(d), u_b) @ s.state)
        state_err = float(np.linalg.norm(rotated - max_entangled(d, s.bob_dim)))
        obs_err = np.array(
            [hs_distance(_rotated_compression(s, u_b, b.matrix), np.conj(a.matrix)) for a, b in zip(s.alice, s.bob)]
        )

    partial = None
    if not gi:
        if shares_common_eigenvector(s.alice):
            verdict = FAILED
        else:
            verdict = PARTIAL
            partial = partial_certify(s, tol)
    else:
        checks = [
            eps < tol * quantum_max(n, d),
            float(np.max(stab)) < tol,
            rank == d,
            float(np.max(comm)) < tol,
            pa_err < tol,
            float(np.max(blocks.offdiag_upper, initial=0)) < tol,
            float(np.max(blocks.offdiag_lower, initial=0)) < tol,
            state_err is not None and state_err < tol,
            obs_err is not None and float(np.max(obs_err)) < tol,
        ]
        verdict = CERTIFIED if all(checks) else FAILED

    return CertificationReport(
        violation=violation,
        epsilon=eps,
        genuinely_incompatible=gi,
        stabilizer_residuals=stab,
        schmidt=sch,
        P_A=pa,
        schmidt_rank=rank,
        commutation_residuals=comm,
        P_A_identity_error=pa_err,
        blocks=blocks,
        U_B=u_b,
        observable_errors=obs_err,
        state_error=state_err,
        verdict=verdict,
        tol=tol,
        partial=partial,
    )


def partial_certify(s: Scenario, tol: float = 1e-8, rank_tol: float = DEFAULT_TOL.rank) -> PartialReport:
    """Block-wise certification for trusted sets with a nontrivial commutant.

    Each block is a common invariant subspace Q of the trusted observables.
    At maximal violation the state restricted to Q is c_Q * sum_{i in Q} |i>|i*>
    after U_B, and on every block with nonzero weight the rotated untrusted
    observables compress to conj(Q) conj(A_i) conj(Q).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if is_genuinely_incompatible(s.alice):
        raise ValueError("trusted observables are genuinely incompatible; use certify")
    if shares_common_eigenvector(s.alice):
        raise ValueError("trusted observables share an eigenvector; nothing can be certified")
    d, n = s.d, s.n_settings
    violation = steering_value(s)
    eps = quantum_max(n, d) - violation
    stab_max = float(np.max(stabilizer_residuals(s)))
    maximal = eps < tol * quantum_max(n, d) and stab_max < tol
    sch = schmidt_decompose(s.state, d)
    pa = extract_PA(sch)
    comm = np.array([hs_norm(a.matrix @ pa - pa @ a.matrix) for a in s.alice])
    u_b = reference_unitary(sch, allow_partial=True, rank_tol=rank_tol)
    rotated = (np.kron(np.eye(d), u_b) @ s.state).reshape(d, s.bob_dim)
    phi = max_entangled(d, s.bob_dim).reshape(d, s.bob_dim)

    certs = []
    for q in commutant_blocks(s.alice):
        dim = int(round(np.trace(q).real))
        weight = float(np.linalg.norm(q @ s.state_matrix()))
        coeff = weight / np.sqrt(dim)
        cert = BlockCertificate(q, dim, weight, coeff, certified=False)
        if weight > rank_tol and maximal:
            qc = np.conj(q)
            # (Q (x) U_B)|psi> against c_Q sqrt(d) (Q (x) 1)|phi_d^+>
            cert.state_error = float(np.linalg.norm(q @ rotated - coeff * np.sqrt(d) * (q @ phi)))
            cert.observables = [qc @ _rotated_compression(s, u_b, b.matrix) @ qc for b in s.bob]
            target = [qc @ np.conj(a.matrix) @ qc for a in s.alice]
            cert.observable_errors = [hs_distance(o, t) for o, t in zip(cert.observables, target)]
            cert.certified = cert.state_error < tol and max(cert.observable_errors) < tol
        certs.append(cert)

    return PartialReport(
        violation=violation,
        epsilon=eps,
        commutant_dim=commutant(s.alice).dimension,
        stabilizer_max=stab_max,
        schmidt=sch,
        P_A=pa,
        P_A_rank=sch.rank(rank_tol),
        P_A_levels=_levels(np.linalg.eigvalsh((pa + dagger(pa)) / 2)),
        commutation_residuals=comm,
        blocks=certs,
    )


def compressed_power_check(blocks: BobBlocks, d: int) -> float:
    """max_i || (Pi B_i Pi)^d - Pi ||, zero at maximal violation."""
    return max(float(np.max(np.abs(matrix_power(c, d) - blocks.support))) for c in blocks.compressed)
