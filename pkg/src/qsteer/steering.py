"""Steering scenarios and the functional B_d = sum_i sum_k <A_i^k (x) B_i^k>."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import check_normalized, dagger, haar_ket, haar_unitary, max_entangled
from .observables import QuditObservable, conjugate_observable, omega

MAX_BOB_DIM = 64


@dataclass(frozen=True, eq=False)
class Scenario:
    """Trusted observables on C^d, untrusted observables on C^D and a pure state on C^d (x) C^D."""

    alice: tuple[QuditObservable, ...]
    bob: tuple[QuditObservable, ...]
    state: np.ndarray = field(repr=False)
    max_bob_dim: int = MAX_BOB_DIM

    def __post_init__(self):
        alice, bob = tuple(self.alice), tuple(self.bob)
        object.__setattr__(self, "alice", alice)
        object.__setattr__(self, "bob", bob)
        if not alice or len(alice) != len(bob):
            raise ValueError(f"need the same positive number of settings, got {len(alice)} and {len(bob)}")
        d = alice[0].d
        for a in alice:
            if a.d != d or a.dim != d:
                raise ValueError(f"every trusted observable must be a {d}-outcome {d}x{d} matrix")
        dims = {b.dim for b in bob}
        if len(dims) != 1:
            raise ValueError("untrusted observables act on different spaces")
        D = dims.pop()
        if any(b.d != d for b in bob):
            raise ValueError("untrusted observables must have d outcomes")
        if D > self.max_bob_dim:
            raise ValueError(f"untrusted dimension {D} exceeds the cap {self.max_bob_dim}")
        psi = np.asarray(self.state, dtype=complex).reshape(-1)
        if psi.size != d * D:
            raise ValueError(f"state has dimension {psi.size}, expected {d}*{D}")
        psi = check_normalized(psi).copy()
        psi.setflags(write=False)
        object.__setattr__(self, "state", psi)

    @property
    def d(self) -> int:
        return self.alice[0].d

    @property
    def n_settings(self) -> int:
        return len(self.alice)

    @property
    def bob_dim(self) -> int:
        return self.bob[0].dim

    def state_matrix(self) -> np.ndarray:
        """The state as a d x D coefficient matrix."""
        return self.state.reshape(self.d, self.bob_dim)

    def expectation(self, a: np.ndarray, b: np.ndarray) -> complex:
        """<psi| a (x) b |psi> without forming the Kronecker product."""
        m = self.state_matrix()
        return complex(np.vdot(m, a @ m @ b.T))


def ideal_realization(alice: Sequence[QuditObservable], bob_dim: int | None = None) -> Scenario:
    """|phi_d^+> with B_i = conj(A_i); optionally embedded in a larger Bob space with identity padding."""
    alice = tuple(alice)
    d = alice[0].d
    bob = [conjugate_observable(a) for a in alice]
    if bob_dim is not None and bob_dim > d:
        pad = np.eye(bob_dim - d)
        bob = [QuditObservable(d, _direct_sum(b.matrix, pad)) for b in bob]
    return Scenario(alice, tuple(bob), max_entangled(d, bob_dim or d))


def _direct_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0],) * 2, dtype=complex)
    out[: a.shape[0], : a.shape[0]] = a
    out[a.shape[0] :, a.shape[0] :] = b
    return out


def quantum_max(n: int, d: int) -> float:
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    return float(n * (d - 1))


def _powers(s: Scenario, ks: Sequence[int] | None) -> list[int]:
    ks = range(1, s.d) if ks is None else ks
    bad = [k for k in ks if not 1 <= k <= s.d - 1]
    if bad:
        raise ValueError(f"powers must lie in 1..{s.d - 1}, got {bad}")
    return list(ks)


def steering_value_complex(s: Scenario, ks: Sequence[int] | None = None) -> complex:
    total = 0j
    for a, b in zip(s.alice, s.bob):
        for k in _powers(s, ks):
            total += s.expectation(a.power(k), b.power(k))
    return total


def steering_value(s: Scenario, ks: Sequence[int] | None = None) -> float:
    """Real part of B_d; ``ks`` restricts the powers (e.g. ``(1, d-1)``).

    The imaginary part cancels in k <-> d-k pairs when all powers are used.
    """
    value = steering_value_complex(s, ks)
    if ks is None and abs(value.imag) > 1e-9:
        raise ArithmeticError(f"functional has imaginary part {value.imag:.3g}")
    return float(value.real)


# --- probability and correlator pictures -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProbTable:
    """p(a, b | x, y) stored as an array indexed [x, y, a, b]."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 4 or p.shape[0] != p.shape[1] or p.shape[2] != p.shape[3]:
            raise ValueError(f"probability table must have shape (N, N, d, d), got {p.shape}")
        if np.min(p) < -1e-10:
            raise ValueError(f"negative probability {np.min(p):.3g}")
        sums = p.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1)) > 1e-9:
            raise ValueError("probabilities do not sum to one for every (x, y)")
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return self.p.shape[2]

    @property
    def n_settings(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True, eq=False)
class CorrelatorTable:
    """<A_{k|x} B_{l|y}> stored as an array indexed [x, y, k, l]."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.ndim != 4:
            raise ValueError("correlator table must be 4-D [x, y, k, l]")
        object.__setattr__(self, "c", c)


def _fourier(d: int, sign: int) -> np.ndarray:
    a = np.arange(d)
    return omega(d) ** (sign * np.outer(a, a))


def prob_table(s: Scenario) -> ProbTable:
    """Born-rule table from the spectral projectors (outcome a <-> eigenvalue omega^a)."""
    n, d = s.n_settings, s.d
    pa = [a.spectral_projectors() for a in s.alice]
    pb = [b.spectral_projectors() for b in s.bob]
    p = np.empty((n, n, d, d))
    for x in range(n):
        for y in range(n):
            for a in range(d):
                for b in range(d):
                    p[x, y, a, b] = s.expectation(pa[x][a], pb[y][b]).real
    return ProbTable(p)


def correlators_from_probs(p: ProbTable, d: int | None = None) -> CorrelatorTable:
    d = p.d if d is None else d
    f = _fourier(d, +1)
    return CorrelatorTable(np.einsum("ka,xyab,lb->xykl", f, p.p, f))


def probs_from_correlators(c: CorrelatorTable, d: int | None = None) -> ProbTable:
    """Inverse transform; raises if the result is not a probability table."""
    d = c.c.shape[2] if d is None else d
    f = _fourier(d, -1)
    p = np.einsum("ak,xykl,bl->xyab", f, c.c, f) / d**2
    if np.max(np.abs(p.imag)) > 1e-9:
        raise ValueError("correlators do not transform to real probabilities")
    return ProbTable(p.real)


def steering_value_from_probs(p: ProbTable, d: int | None = None) -> float:
    """B_d = sum_x [d * P(a + b = 0 mod d | x, x) - 1]."""
    d = p.d if d is None else d
    a = np.arange(d)
    diag = p.p[np.arange(p.n_settings), np.arange(p.n_settings)]
    agree = diag[:, a, (-a) % d].sum(axis=1)
    return float(np.sum(d * agree - 1))


# --- classical bound -------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundEstimate:
    best: float
    best_state: np.ndarray
    values: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    quantum_max: float

    @property
    def gap(self) -> float:
        return self.quantum_max - self.best


def bound_objective(alice: Sequence[QuditObservable], psi) -> float:
    """sum_i sum_{k>=1} |<psi| A_i^k |psi>| for a pure state (or a density matrix)."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.outer(psi, np.conj(psi)) if psi.ndim == 1 else psi
    return float(sum(abs(np.trace(a.power(k) @ rho)) for a in alice for k in range(1, a.d)))


def _ascent_batch(mats: np.ndarray, psi0: np.ndarray, max_iter: int, eta: float = 1e-18):
    """Projected gradient ascent with step halving and an Armijo test, run on all starts at once."""

    def objective(psi):
        z = np.einsum("rd,kde,re->rk", np.conj(psi), mats, psi)
        return np.sqrt(np.abs(z) ** 2 + eta).sum(axis=1), z

    psi = psi0.copy()
    f, z = objective(psi)
    step = np.full(psi.shape[0], 0.5)
    active = np.ones(psi.shape[0], dtype=bool)
    iters = np.zeros(psi.shape[0], dtype=int)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        p, zz, ff = psi[idx], z[idx], f[idx]
        s = np.sqrt(np.abs(zz) ** 2 + eta)
        mp = np.einsum("kde,re->rkd", mats, p)
        mhp = np.einsum("ked,re->rkd", np.conj(mats), p)
        g = ((np.conj(zz)[..., None] * mp + zz[..., None] * mhp) / (2 * s[..., None])).sum(axis=1)
        g -= np.real(np.einsum("rd,rd->r", np.conj(p), g))[:, None] * p
        trial = p + step[idx, None] * g
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        ft, zt = objective(trial)
        # Armijo test: a step that barely improves is rejected so the step shrinks
        slope = np.sum(np.abs(g) ** 2, axis=1)
        ok = (ft > ff) & (ft - ff >= 0.25 * step[idx] * slope)
        gain = np.where(ok, ft - ff, 0.0)
        iters[idx] += 1
        acc = idx[ok]
        psi[acc], f[acc], z[acc] = trial[ok], ft[ok], zt[ok]
        step[acc] = np.minimum(step[acc] * 2, 4.0)
        step[idx[~ok]] /= 2
        done = (ok & (gain < 1e-12)) | (step[idx] < 1e-14)
        active[idx[done]] = False
    return psi, ~active, iters


def classical_bound_estimate(
    alice: Sequence[QuditObservable],
    restarts: int = 200,
    seed: int = 0,
    max_iter: int = 20000,
) -> BoundEstimate:
    """Lower estimate of max over pure states of sum_i sum_k |<A_i^k>|, by multi-start ascent.

    Restart r starts from a Haar-random ket drawn from ``default_rng([seed, r])``,
    so results do not depend on evaluation order.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    alice = tuple(alice)
    d = alice[0].dim
    mats = np.array([a.power(k) for a in alice for k in range(1, a.d)])
    psi0 = np.array([haar_ket(d, np.random.default_rng([seed, r])) for r in range(restarts)])
    psi, converged, iters = _ascent_batch(mats, psi0, max_iter)
    z = np.einsum("rd,kde,re->rk", np.conj(psi), mats, psi)
    values = np.abs(z).sum(axis=1)
    best = int(np.argmax(values))
    return BoundEstimate(
        best=float(values[best]),
        best_state=psi[best],
        values=values,
        converged=converged,
        iterations=iters,
        quantum_max=quantum_max(len(alice), alice[0].d),
    )


# --- local hidden state models ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LhsModel:
    """weights[l], hidden states[l] (d x d), responses[l, y, b] = p(b | y, lambda=l)."""

    weights: np.ndarray
    states: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        rho = np.asarray(self.states, dtype=complex)
        r = np.asarray(self.responses, dtype=float)
        if w.ndim != 1 or np.min(w) < -1e-12 or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must be a probability vector")
        if rho.ndim != 3 or rho.shape[0] != w.size or rho.shape[1] != rho.shape[2]:
            raise ValueError("states must have shape (L, d, d)")
        for m in rho:
            if np.max(np.abs(m - dagger(m))) > 1e-9 or abs(np.trace(m) - 1) > 1e-9:
                raise ValueError("hidden state is not a unit-trace Hermitian matrix")
            if np.min(np.linalg.eigvalsh(m)) < -1e-9:
                raise ValueError("hidden state is not positive semidefinite")
        if r.ndim != 3 or r.shape[0] != w.size or np.min(r) < -1e-12:
            raise ValueError("responses must have shape (L, N, d) with nonnegative entries")
        if np.max(np.abs(r.sum(axis=2) - 1)) > 1e-9:
            raise ValueError("responses must be normalized conditional distributions")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", rho)
        object.__setattr__(self, "responses", r)


def lhs_prob_table(m: LhsModel, alice: Sequence[QuditObservable]) -> ProbTable:
    alice = tuple(alice)
    n, d = len(alice), alice[0].d
    if m.states.shape[1] != d or m.responses.shape[1:] != (n, d):
        raise ValueError("model dimensions do not match the trusted observables")
    projs = np.array([a.spectral_projectors() for a in alice])  # [x, a, i, j]
    pa = np.einsum("xaij,lji->lxa", projs, m.states).real
    p = np.einsum("l,lxa,lyb->xyab", m.weights, pa, m.responses)
    return ProbTable(p)


def lhs_value(m: LhsModel, alice: Sequence[QuditObservable]) -> float:
    alice = tuple(alice)
    return steering_value_from_probs(lhs_prob_table(m, alice), alice[0].d)


def random_scenario(d: int, n: int, bob_dim: int, rng: np.random.Generator) -> Scenario:
    """Random observables (Haar eigenbases, random labels) and a Haar-random state."""

    def rand_obs(dim):
        u = haar_unitary(dim, rng)
        labels = rng.integers(0, d, size=dim)
        if dim == d:
            labels = rng.permutation(d)
        return QuditObservable(d, (u * omega(d) ** labels) @ dagger(u))

    alice = tuple(rand_obs(d) for _ in range(n))
    bob = tuple(rand_obs(bob_dim) for _ in range(n))
    return Scenario(alice, bob, haar_ket(d * bob_dim, rng))
