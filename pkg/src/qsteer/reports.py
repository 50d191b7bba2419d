"""Scenario files, JSON report payloads and the sweep CSV format."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .incompat import commutant, common_invariant_subspace, is_genuinely_incompatible, shares_common_eigenvector
from .linalg import max_entangled
from .observables import QuditObservable, builtin_example, mub_observable, pauli_x, pauli_z
from .robustness import SweepRow
from .selftest import CertificationReport, PartialReport
from .steering import BoundEstimate, Scenario

SWEEP_HEADER = [
    "point_index",
    "theta",
    "delta",
    "epsilon",
    "state_bound",
    "obs_bound",
    "max_state_dist",
    "max_obs_dist_sq",
    "all_intermediate_pass",
    "all_bounds_pass",
]


class ScenarioFileError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# --- matrices ---------------------------------------------------------------------------------


def matrix_to_json(m) -> list:
    """Row-major nested lists with each entry as [re, im]."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data, path: str = "matrix") -> np.ndarray:
    try:
        rows = []
        for row in data:
            rows.append([_complex_entry(z) for z in row])
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ScenarioFileError(path, f"malformed matrix ({exc})") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ScenarioFileError(path, f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def vector_to_json(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def _complex_entry(z) -> complex:
    if isinstance(z, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(z, (int, float)):
        return complex(z)
    if isinstance(z, list) and len(z) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in z):
        return complex(z[0], z[1])
    raise ValueError(f"entry {z!r} is neither a number nor [re, im]")


# --- scenario files ---------------------------------------------------------------------------


def _observable(d: int, m: np.ndarray, path: str) -> QuditObservable:
    try:
        return QuditObservable(d, m)
    except ValueError as exc:
        raise ScenarioFileError(path, str(exc)) from None


def _named(d: int, entry, path: str) -> list[QuditObservable]:
    try:
        if entry == "pauli_x":
            return [pauli_x(d)]
        if entry == "pauli_z":
            return [pauli_z(d)]
        if entry == "identity":
            return [QuditObservable(d, np.eye(d))]
        if entry in ("weaker_d4_pair", "triple_d4"):
            if d != 4:
                raise ValueError(f"{entry} needs d = 4")
            return builtin_example(entry)
        if isinstance(entry, dict) and set(entry) == {"mub"}:
            return [mub_observable(d, int(entry["mub"]))]
    except ValueError as exc:
        raise ScenarioFileError(path, str(exc)) from None
    raise ScenarioFileError(path, f"unknown observable constructor {entry!r}")


def parse_observables(d: int, entries, path: str) -> list[QuditObservable]:
    if not isinstance(entries, list) or not entries:
        raise ScenarioFileError(path, "expected a non-empty list")
    out: list[QuditObservable] = []
    for j, e in enumerate(entries):
        p = f"{path}[{j}]"
        if isinstance(e, list):
            out.append(_observable(d, matrix_from_json(e, p), p))
        else:
            out.extend(_named(d, e, p))
    return out


def _parse_state(d: int, bob_dim: int, entry) -> np.ndarray:
    path = "state"
    if entry == "maximally_entangled":
        return max_entangled(d, bob_dim)
    if isinstance(entry, dict) and set(entry) == {"schmidt"}:
        coeffs = entry["schmidt"]
        if not isinstance(coeffs, list) or not coeffs or len(coeffs) > min(d, bob_dim):
            raise ScenarioFileError("state.schmidt", f"expected 1..{min(d, bob_dim)} coefficients")
        try:
            c = np.array([float(x) for x in coeffs])
        except (TypeError, ValueError):
            raise ScenarioFileError("state.schmidt", "coefficients must be real numbers") from None
        if np.any(c < 0):
            raise ScenarioFileError("state.schmidt", "coefficients must be nonnegative")
        psi = np.zeros((d, bob_dim), dtype=complex)
        psi[np.arange(c.size), np.arange(c.size)] = c
        return _normalized(psi.reshape(-1), "state.schmidt")
    if isinstance(entry, list):
        try:
            psi = np.array([_complex_entry(z) for z in entry])
        except ValueError as exc:
            raise ScenarioFileError(path, str(exc)) from None
        if psi.size != d * bob_dim:
            raise ScenarioFileError(path, f"expected {d * bob_dim} amplitudes, got {psi.size}")
        return _normalized(psi, path)
    raise ScenarioFileError(path, f"unsupported state specification {entry!r}")


def _normalized(psi: np.ndarray, path: str) -> np.ndarray:
    n = np.linalg.norm(psi)
    if abs(n - 1) > 1e-6:
        raise ScenarioFileError(path, f"state norm is {n:.9g}, expected 1")
    return psi / n


def read_scenario_json(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioFileError("<file>", "top level must be an object")
    d = data.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise ScenarioFileError("d", "must be an integer >= 2")
    if "alice" not in data:
        raise ScenarioFileError("alice", "missing")
    return data


def parse_trusted(data: dict) -> list[QuditObservable]:
    alice = parse_observables(data["d"], data["alice"], "alice")
    for j, a in enumerate(alice):
        if a.dim != data["d"]:
            raise ScenarioFileError(f"alice[{j}]", f"trusted observables must be {data['d']}x{data['d']}")
    return alice


def parse_scenario(data: dict) -> Scenario:
    d = data["d"]
    alice = parse_trusted(data)
    bob_entry = data.get("bob", "ideal")
    if bob_entry == "ideal":
        bob = [a.conj() for a in alice]
    else:
        bob = parse_observables(d, bob_entry, "bob")
    if len(bob) != len(alice):
        raise ScenarioFileError("bob", f"expected {len(alice)} observables, got {len(bob)}")
    dims = {b.dim for b in bob}
    if len(dims) != 1:
        raise ScenarioFileError("bob", "observables act on different dimensions")
    bob_dim = dims.pop()
    if bob_dim < d:
        raise ScenarioFileError("bob", f"untrusted dimension {bob_dim} is smaller than d = {d}")
    if "state" not in data:
        raise ScenarioFileError("state", "missing")
    psi = _parse_state(d, bob_dim, data["state"])
    try:
        return Scenario(tuple(alice), tuple(bob), psi)
    except ValueError as exc:
        raise ScenarioFileError("<scenario>", str(exc)) from None


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(read_scenario_json(Path(path).read_text(encoding="utf-8")))


# --- payloads ---------------------------------------------------------------------------------


def _floats(a) -> Any:
    return np.asarray(a, dtype=float).tolist()


def incompatibility_payload(alice: Sequence[QuditObservable]) -> dict:
    comm = commutant(alice)
    sub = common_invariant_subspace(alice)
    return {
        "kind": "incompatibility",
        "d": alice[0].d,
        "n_observables": len(alice),
        "commutant_dim": comm.dimension,
        "genuinely_incompatible": is_genuinely_incompatible(alice),
        "shares_common_eigenvector": shares_common_eigenvector(alice),
        "invariant_subspace": None if sub is None else {"rank": sub.rank, "projector": matrix_to_json(sub.projector)},
    }


def _partial_payload(p: PartialReport) -> dict:
    return {
        "commutant_dim": p.commutant_dim,
        "P_A_rank": p.P_A_rank,
        "P_A_levels": p.P_A_levels,
        "certified_blocks": p.certified_blocks,
        "blocks": [
            {
                "dim": b.dim,
                "weight": b.weight,
                "coefficient": b.coefficient,
                "certified": b.certified,
                "projector": matrix_to_json(b.projector),
                "state_error": b.state_error,
                "observable_errors": b.observable_errors,
                "observables": None if b.observables is None else [matrix_to_json(o) for o in b.observables],
            }
            for b in p.blocks
        ],
    }


def certification_payload(r: CertificationReport) -> dict:
    return {
        "kind": "certification",
        "verdict": r.verdict,
        "tol": r.tol,
        "violation": r.violation,
        "epsilon": r.epsilon,
        "genuinely_incompatible": r.genuinely_incompatible,
        "stabilizer_residuals": _floats(r.stabilizer_residuals),
        "schmidt_coefficients": _floats(r.schmidt.coefficients),
        "schmidt_rank": r.schmidt_rank,
        "P_A": matrix_to_json(r.P_A),
        "P_A_identity_error": r.P_A_identity_error,
        "commutation_residuals": _floats(r.commutation_residuals),
        "bob_blocks": {
            "support_rank": r.blocks.rank,
            "offdiag_upper": _floats(r.blocks.offdiag_upper),
            "offdiag_lower": _floats(r.blocks.offdiag_lower),
            "rest_residual": _floats(r.blocks.rest_residual),
        },
        "U_B": None if r.U_B is None else matrix_to_json(r.U_B),
        "observable_errors": None if r.observable_errors is None else _floats(r.observable_errors),
        "state_error": r.state_error,
        "partial": None if r.partial is None else _partial_payload(r.partial),
    }


def bound_payload(e: BoundEstimate, restarts: int) -> dict:
    return {
        "kind": "bound_estimate",
        "best": e.best,
        "beta_Q": e.quantum_max,
        "gap": e.gap,
        "restarts": restarts,
        "converged": int(np.sum(e.converged)),
        "iterations_max": int(np.max(e.iterations)),
        "iterations_median": float(np.median(e.iterations)),
        "best_state": vector_to_json(e.best_state),
    }


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def input_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def envelope(payload: dict, digest: str | None, seed: int | None) -> dict:
    return {
        "tool": "qsteer",
        "version": __version__,
        "input_digest": digest,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "payload_digest": hashlib.sha256(dumps(payload).encode()).hexdigest(),
        "payload": payload,
    }


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(
            [
                r.point_index,
                *(format(v, ".17g") for v in (r.theta, r.delta, r.epsilon, r.state_bound, r.obs_bound,
                                              r.max_state_dist, r.max_obs_dist_sq)),
                "true" if r.all_intermediate_pass else "false",
                "true" if r.all_bounds_pass else "false",
            ]
        )
    return buf.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
