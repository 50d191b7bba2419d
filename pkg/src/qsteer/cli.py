"""qsteer command line: check, certify, bound and sweep.

Exit codes: 0 success / certified / genuinely incompatible, 1 input error,
2 failed / not genuinely incompatible, 3 partial certification. ``sweep``
returns 0 iff every grid row passes, else 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import reports
from .reports import ScenarioFileError
from .robustness import sweep
from .selftest import CERTIFIED, PARTIAL, certify
from .steering import classical_bound_estimate

EXIT_OK, EXIT_INPUT, EXIT_NEGATIVE, EXIT_PARTIAL = 0, 1, 2, 3


class GridError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``start:step:count`` or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            vals = [float(parts[0])]
        elif len(parts) == 3:
            start, step, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise GridError(f"grid {text!r}: count must be >= 1")
            if count > 1 and step <= 0:
                raise GridError(f"grid {text!r}: step must be positive")
            vals = [start + j * step for j in range(count)]
        else:
            raise GridError(f"grid {text!r}: expected start:step:count")
    except ValueError as exc:
        if isinstance(exc, GridError):
            raise
        raise GridError(f"grid {text!r}: {exc}") from None
    if not all(np.isfinite(vals)):
        raise GridError(f"grid {text!r}: non-finite value")
    return vals


def _emit(text: str, out: str | None) -> None:
    if out:
        reports.write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _load(path: str) -> tuple[bytes, dict]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ScenarioFileError("<file>", "not valid UTF-8") from None
    return raw, reports.read_scenario_json(text)


def cmd_check(args) -> int:
    raw, data = _load(args.path)
    alice = reports.parse_trusted(data)
    payload = reports.incompatibility_payload(alice)
    _emit(reports.dumps(reports.envelope(payload, reports.input_digest(raw), None)), args.out)
    return EXIT_OK if payload["genuinely_incompatible"] else EXIT_NEGATIVE


def cmd_certify(args) -> int:
    raw, data = _load(args.path)
    s = reports.parse_scenario(data)
    rep = certify(s, args.tol)
    payload = reports.certification_payload(rep)
    _emit(reports.dumps(reports.envelope(payload, reports.input_digest(raw), args.seed)), args.out)
    return {CERTIFIED: EXIT_OK, PARTIAL: EXIT_PARTIAL}.get(rep.verdict, EXIT_NEGATIVE)


def cmd_bound(args) -> int:
    if args.restarts < 1:
        raise ValueError("--restarts must be >= 1")
    raw, data = _load(args.path)
    alice = reports.parse_trusted(data)
    est = classical_bound_estimate(alice, args.restarts, args.seed)
    payload = reports.bound_payload(est, args.restarts)
    _emit(reports.dumps(reports.envelope(payload, reports.input_digest(raw), args.seed)), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.d < 2:
        raise ValueError("--d must be >= 2")
    if not 0 <= args.l < args.d:
        raise ValueError(f"--l must lie in 0..{args.d - 1}")
    thetas, deltas = parse_grid(args.theta), parse_grid(args.delta)
    rows = sweep(args.d, args.l, thetas, deltas, args.seed, args.bob_dim)
    _emit(reports.sweep_csv(rows), args.out)
    ok = all(r.all_intermediate_pass and r.all_bounds_pass for r in rows)
    return EXIT_OK if ok else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsteer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="commutant and genuine incompatibility of the trusted observables")
    c.add_argument("path")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("certify", help="run the exact self-testing pipeline")
    c.add_argument("path")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    c = sub.add_parser("bound", help="estimate the local bound by multi-start ascent")
    c.add_argument("path")
    c.add_argument("--restarts", type=int, default=200)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_bound)

    c = sub.add_parser("sweep", help="robustness sweep over a (theta, delta) grid, CSV output")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--l", type=int, default=0)
    c.add_argument("--theta", default="0")
    c.add_argument("--delta", default="0")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bob-dim", type=int, default=None)
    c.add_argument("--out")
    c.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "tol", 1.0) <= 0:
        print("qsteer: error: --tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ScenarioFileError, GridError, OSError, ValueError) as exc:
        print(f"qsteer: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
