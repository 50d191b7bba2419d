"""Robust self-testing of the pair (X Z^l, Z) near maximal violation.

``verify_theorem2`` rebuilds the alignment unitary from the untrusted Z-type
observable, measures the distances that the analytic bounds control, and
evaluates every intermediate inequality of the bound derivation on the
actual data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .linalg import complete_unitary, dagger, haar_ket, hs_distance, matrix_power, max_entangled
from .observables import QuditObservable, generalized_pauli, shift_clock_power
from .steering import Scenario, ideal_realization, steering_value

UNDEFINED_TOL = 1e-12
ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class RobustnessBounds:
    d: int
    epsilon: float

    @property
    def state_bound(self) -> float:
        e2 = 2 * self.epsilon
        return float(np.sqrt(e2) + 2 * np.sqrt(self.d) * e2**0.25)

    @property
    def observable_bound(self) -> float:
        r = np.sqrt(self.d) * np.sqrt(2 * self.epsilon)
        return float(r * (1 + 4 * r))


def analytic_bounds(d: int, epsilon: float) -> RobustnessBounds:
    if d < 2:
        raise ValueError("d must be at least 2")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return RobustnessBounds(d, float(epsilon))


@dataclass(frozen=True)
class NoiseSpec:
    theta: float = 0.0
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.theta < np.pi / 2:
            raise ValueError("theta must lie in [0, pi/2)")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class ZBasisDecomposition:
    """psi = sum_i alpha_i |i> (x) |b_i> with alpha_i >= 0; rows of ``kets`` are the b_i."""

    alphas: np.ndarray
    kets: np.ndarray
    defined: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.alphas[:, None] * self.kets).reshape(-1)


def decompose_state_zbasis(psi, d: int) -> ZBasisDecomposition:
    m = np.asarray(psi, dtype=complex).reshape(d, -1)
    alphas = np.linalg.norm(m, axis=1)
    defined = alphas > UNDEFINED_TOL
    kets = np.zeros_like(m)
    kets[defined] = m[defined] / alphas[defined, None]
    return ZBasisDecomposition(alphas, kets, defined)


class AlignmentError(ValueError):
    def __init__(self, indices: Sequence[int], norms: np.ndarray):
        self.indices = list(indices)
        self.norms = norms
        super().__init__(f"vectors v_j vanish for j = {self.indices}; deficit too large for the alignment")


def alignment_vectors(b2: QuditObservable, decomp: ZBasisDecomposition) -> np.ndarray:
    """Rows v_j = P_{-j} |b_j>, with P_a the omega^a eigenprojector of B_2."""
    d = b2.d
    projs = b2.spectral_projectors()
    return np.array([projs[(-j) % d] @ decomp.kets[j] for j in range(d)])


def alignment_unitary(b2: QuditObservable, decomp: ZBasisDecomposition) -> np.ndarray:
    """Unitary with U_B v_j/|v_j| = |j>, completed deterministically.

    With this labelling U_B B_2 U_B^dag = conj(Z) (+) rest, matching the
    ideal untrusted observable conj(A_2).
    """
    v = alignment_vectors(b2, decomp)
    norms = np.linalg.norm(v, axis=1)
    bad = np.flatnonzero(norms < ALIGN_TOL)
    if bad.size:
        raise AlignmentError(bad.tolist(), norms)
    src = (v / norms[:, None]).T
    dim = b2.dim
    dst = np.eye(dim, dtype=complex)[:, : b2.d]
    return complete_unitary(src, dst, dim)


def robust_pair(d: int, l: int) -> tuple[QuditObservable, QuditObservable]:
    if not 0 <= l < d:
        raise ValueError(f"l must lie in 0..{d - 1}")
    return shift_clock_power(d, l), generalized_pauli(d)[1]


def ideal_robust_scenario(d: int, l: int, bob_dim: int | None = None) -> Scenario:
    return ideal_realization(robust_pair(d, l), bob_dim)


def _random_generator(dim: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (h + dagger(h)) / 2
    h *= strength / np.linalg.norm(h, 2)
    return 1j * h


def perturb(ideal: Scenario, spec: NoiseSpec) -> Scenario:
    """Rotate the state by ``theta`` toward a random direction orthogonal to it, and
    conjugate each untrusted observable by exp(G_i) with ||G_i||_op = ``delta``.

    Draw order from ``default_rng(seed)``: state direction, then G_1, G_2, ...
    """
    rng = np.random.default_rng(spec.seed)
    psi = ideal.state
    chi = haar_ket(psi.size, rng)
    chi = chi - np.vdot(psi, chi) * psi
    chi /= np.linalg.norm(chi)
    if spec.theta:
        psi = np.cos(spec.theta) * psi + np.sin(spec.theta) * chi
        psi = psi / np.linalg.norm(psi)
    bob = []
    for b in ideal.bob:
        g = _random_generator(b.dim, spec.delta, rng)
        if spec.delta:
            u = scipy.linalg.expm(g)
            m = u @ b.matrix @ dagger(u)
            bob.append(QuditObservable(b.d, m))
        else:
            bob.append(b)
    return Scenario(ideal.alice, tuple(bob), psi, ideal.max_bob_dim)


@dataclass(frozen=True)
class Check:
    name: str
    index: tuple[int, ...]
    value: float
    bound: float
    kind: str  # "ge" means value >= bound is required, "le" the reverse

    @property
    def margin(self) -> float:
        return self.value - self.bound if self.kind == "ge" else self.bound - self.value

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12


@dataclass
class RobustnessReport:
    d: int
    l: int
    epsilon: float
    bounds: RobustnessBounds
    decomposition: ZBasisDecomposition
    intermediate: list[Check]
    U_B: np.ndarray | None = None
    state_distances: np.ndarray | None = None
    obs_distances_sq: np.ndarray | None = None
    stabilizer_residuals: np.ndarray | None = None
    reference_distance: float | None = None
    bound_checks: list[Check] = field(default_factory=list)
    alignment_error: str | None = None

    @property
    def all_intermediate_pass(self) -> bool:
        return all(c.passed for c in self.intermediate)

    @property
    def all_bounds_pass(self) -> bool:
        return self.alignment_error is None and all(c.passed for c in self.bound_checks)

    @property
    def max_state_distance(self) -> float:
        return float(np.max(self.state_distances)) if self.state_distances is not None else float("nan")

    @property
    def max_obs_distance_sq(self) -> float:
        return float(np.max(self.obs_distances_sq)) if self.obs_distances_sq is not None else float("nan")


def _check_alice(s: Scenario, l: int) -> None:
    if s.n_settings != 2:
        raise ValueError("the robustness statement covers exactly two settings")
    expected = robust_pair(s.d, l)
    for a, e in zip(s.alice, expected):
        if np.max(np.abs(a.matrix - e.matrix)) > 1e-9:
            raise ValueError(f"trusted observables are not (X Z^{l}, Z) for d = {s.d}")


def verify_theorem2(s: Scenario, l: int) -> RobustnessReport:
    _check_alice(s, l)
    d, D = s.d, s.bob_dim
    eps_raw = 2 * (d - 1) - steering_value(s)
    if eps_raw < -1e-9:
        raise ValueError(f"functional exceeds its maximum by {-eps_raw:.3g}")
    eps = max(eps_raw, 0.0)
    bounds = analytic_bounds(d, eps)
    r2e = np.sqrt(2 * eps)
    dec = decompose_state_zbasis(s.state, d)
    al = dec.alphas
    checks: list[Check] = []

    for i, (a, b) in enumerate(zip(s.alice, s.bob)):
        for k in range(1, d):
            val = s.expectation(a.power(k), b.power(k)).real
            checks.append(Check("correlator", (i, k), val, 1 - eps, "ge"))
    for k in range(1, d):
        checks.append(Check("alpha_shift_overlap", (k,), float(al @ np.roll(al, -k)), 1 - eps, "ge"))
    checks.append(Check("alpha_sum_sq", (), float(al.sum() ** 2), d * (1 - eps), "ge"))
    for i in range(d):
        checks.append(Check("alpha_close", (i,), abs(al[i] - 1 / np.sqrt(d)), r2e, "le"))
    for i in range(d):
        for j in range(d):
            checks.append(Check("alpha_pair_close", (i, j), abs(al[i] * al[(i + j) % d] - 1 / d), r2e, "le"))
    b2 = s.bob[1]
    v = alignment_vectors(b2, dec)
    for j in range(d):
        weight = float(np.vdot(dec.kets[j], v[j]).real)
        checks.append(Check("eigenspace_weight", (j,), weight, 1 - 2 * d * r2e, "ge"))

    report = RobustnessReport(d, l, eps, bounds, dec, checks)
    try:
        u = alignment_unitary(b2, dec)
    except AlignmentError as exc:
        report.alignment_error = str(exc)
        return report

    for j in range(d):
        overlap = complex(np.vdot(u @ dec.kets[j], np.eye(D)[j]))
        checks.append(Check("aligned_overlap", (j,), overlap.real, 1 - 2 * d * r2e, "ge"))

    psi_m = s.state_matrix()
    rotated = psi_m @ u.T
    phi = max_entangled(d, D).reshape(d, D)
    ref_dist = float(np.linalg.norm(rotated - phi))
    state_d = np.empty((2, d))
    obs_d = np.empty((2, d))
    stab = np.empty((2, d))
    for i, (a, b) in enumerate(zip(s.alice, s.bob)):
        ideal = np.conj(a.matrix)
        for k in range(d):
            bk = b.power(k)
            ik = matrix_power(ideal, k)
            ik_full = np.zeros((D, D), dtype=complex)
            ik_full[:d, :d] = ik
            state_d[i, k] = np.linalg.norm(psi_m @ (u @ bk).T - phi @ ik_full.T)
            obs_d[i, k] = hs_distance((u @ bk @ dagger(u))[:d, :d], ik) ** 2
            stab[i, k] = np.linalg.norm(a.power(k) @ psi_m @ bk.T - psi_m)
            report.bound_checks.append(Check("state_distance", (i, k), state_d[i, k], bounds.state_bound, "le"))
            report.bound_checks.append(Check("observable_distance_sq", (i, k), obs_d[i, k], bounds.observable_bound, "le"))
            checks.append(Check("stabilizer_residual", (i, k), stab[i, k], r2e, "le"))
            checks.append(Check("triangle_chain", (i, k), state_d[i, k], stab[i, k] + ref_dist + 1e-10, "le"))
    checks.append(Check("reference_distance", (), ref_dist, 2 * np.sqrt(d) * (2 * eps) ** 0.25, "le"))

    report.U_B = u
    report.state_distances = state_d
    report.obs_distances_sq = obs_d
    report.stabilizer_residuals = stab
    report.reference_distance = ref_dist
    return report


@dataclass(frozen=True)
class SweepRow:
    point_index: int
    theta: float
    delta: float
    epsilon: float
    state_bound: float
    obs_bound: float
    max_state_dist: float
    max_obs_dist_sq: float
    all_intermediate_pass: bool
    all_bounds_pass: bool


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def sweep(
    d: int,
    l: int,
    thetas: Sequence[float],
    deltas: Sequence[float],
    seed: int = 0,
    bob_dim: int | None = None,
) -> list[SweepRow]:
    """Evaluate every (theta, delta) grid point, theta-major, in point-index order."""
    ideal = ideal_robust_scenario(d, l, bob_dim)
    rows = []
    idx = 0
    for th in thetas:
        for de in deltas:
            s = perturb(ideal, NoiseSpec(float(th), float(de), point_seed(seed, idx)))
            rep = verify_theorem2(s, l)
            rows.append(
                SweepRow(
                    idx,
                    float(th),
                    float(de),
                    rep.epsilon,
                    rep.bounds.state_bound,
                    rep.bounds.observable_bound,
                    rep.max_state_distance,
                    rep.max_obs_distance_sq,
                    rep.all_intermediate_pass,
                    rep.all_bounds_pass,
                )
            )
            idx += 1
    return rows
