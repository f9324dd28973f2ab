"""File-based front end: parse matrix polynomial documents, run, report.

Input documents are JSON with ascending-degree coefficient lists:

    {"rows": 2, "cols": 2,
     "entries": [[[1.0, 0.5], [0.0]], [[0.0], [2.0]]],
     "structure": "support"}

Reports are JSON on standard output; diagnostics go to standard error.
Exit codes: 0 success, 2 solver stalled, 3 unattainable problem,
4 invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import selftest
from .errors import ParseError, PolysmithError, UnattainableProblem, ValidationError
from .gcdkit import local_invariant_structure, triviality_report, distance_lower_bound
from .lmsolve import LmConfig, Termination
from .matpoly import MatPoly, PerturbStructure
from .mccoy_opt import McCoyProblem, solve_mccoy
from .snf_opt import SnfProblem, solve, solve_best_degree

EXIT_OK = 0
EXIT_STALLED = 2
EXIT_UNATTAINABLE = 3
EXIT_INVALID = 4


@dataclass
class InputDocument:
    rows: int
    cols: int
    entries: list
    structure: object = None

    def to_matpoly(self) -> MatPoly:
        return MatPoly.from_entries(self.entries)

    def to_structure(self, a: MatPoly, override=None) -> PerturbStructure:
        choice = override if override is not None else self.structure
        if choice is None:
            choice = "support"
        if isinstance(choice, str):
            name = choice.lower()
            if name == "full":
                return PerturbStructure.full(a)
            if name == "support":
                return PerturbStructure.support(a)
            if name == "degree":
                return PerturbStructure.degree(a)
            return _mask_from_file(choice, a)
        return _mask_from_grid(choice, a)


def _mask_from_grid(grid, a: MatPoly) -> PerturbStructure:
    mask = np.zeros_like(a.coeff, dtype=bool)
    if len(grid) != a.rows or any(len(row) != a.cols for row in grid):
        raise ValidationError("mask grid shape does not match the matrix")
    for i in range(a.rows):
        for j in range(a.cols):
            cells = grid[i][j]
            if len(cells) > a.degree_bound + 1:
                raise ValidationError(f"mask entry ({i},{j}) longer than degree bound")
            mask[i, j, : len(cells)] = [bool(c) for c in cells]
    return PerturbStructure(mask)


def _mask_from_file(path: str, a: MatPoly) -> PerturbStructure:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read mask file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"mask file {path} is not valid JSON: {exc}") from exc
    grid = doc.get("mask", doc) if isinstance(doc, dict) else doc
    return _mask_from_grid(grid, a)


def parse(path: str) -> InputDocument:
    """Load and validate an input document."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: expected a JSON object at the top level")
    for key in ("rows", "cols", "entries"):
        if key not in raw:
            raise ParseError(f"{path}: missing field '{key}'")
    rows, cols, entries = raw["rows"], raw["cols"], raw["entries"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
        raise ValidationError("rows and cols must be positive integers")
    if len(entries) != rows or any(len(r) != cols for r in entries):
        raise ValidationError("entries grid is ragged or does not match rows/cols")
    for i, row in enumerate(entries):
        for j, cell in enumerate(row):
            if not isinstance(cell, list) or not cell:
                raise ValidationError(f"entry ({i},{j}) must be a non-empty coefficient list")
            for c in cell:
                if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
                    raise ValidationError(f"entry ({i},{j}) has a non-finite coefficient")
    return InputDocument(rows=rows, cols=cols, entries=entries, structure=raw.get("structure"))


def serialize(doc: InputDocument) -> str:
    payload = {"rows": doc.rows, "cols": doc.cols, "entries": doc.entries}
    if doc.structure is not None:
        payload["structure"] = doc.structure
    return json.dumps(payload)


def _digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _complex_field(z) -> list:
    if z == np.inf:
        return [math.inf, 0.0]
    z = complex(z)
    return [z.real, z.imag]


def _trace_summary(trace) -> dict:
    return {
        "iterations": trace.iterations,
        "final_grad_norm": trace.merits[-1],
        "termination": trace.termination.value,
        "merits": list(trace.merits),
    }


def _require_square(doc: InputDocument):
    if doc.rows != doc.cols:
        raise ValidationError("solver commands need a square matrix polynomial")


def _lm_config(args) -> LmConfig:
    return LmConfig(max_iter=args.max_iter, grad_tol=args.tol)


def _cmd_check(args):
    doc = parse(args.input)
    _require_square(doc)
    a = doc.to_matpoly()
    structure = doc.to_structure(a, args.structure)
    report = triviality_report(a, structure)
    payload = {
        "is_trivial": report.is_trivial,
        "mccoy_rank": report.mccoy_rank,
        "gcd_adjoint_degree": report.gcd_adjoint_degree,
        "lower_bound": report.lower_bound,
        "unattainable": report.unattainable,
        "sylvester_rank": report.sylvester_rank,
        "sylvester_sigma": report.sylvester_sigma,
    }
    if report.unattainable:
        reversed_profile = local_invariant_structure(a.reversed(), 0.0)
        payload["reversal_invariant_structure"] = [list(pair) for pair in reversed_profile]
    return payload, EXIT_OK


def _cmd_bound(args):
    doc = parse(args.input)
    _require_square(doc)
    a = doc.to_matpoly()
    bound, sigma = distance_lower_bound(a)
    return {"lower_bound": bound, "sylvester_sigma": sigma}, EXIT_OK


def _cmd_snf(args):
    doc = parse(args.input)
    _require_square(doc)
    a = doc.to_matpoly()
    structure = doc.to_structure(a, args.structure)
    cfg = _lm_config(args)
    if args.deg_h is None:
        report = solve_best_degree(a, structure, cfg, use_reversal=args.reversal)
    else:
        problem = SnfProblem(a, structure, deg_h=args.deg_h, use_reversal=args.reversal)
        report = solve(problem, cfg)
    payload = {
        "distance": report.distance,
        "divisor": report.h.coeffs.tolist(),
        "omega": _complex_field(report.omega),
        "delta": _matpoly_grid(report.delta_a),
        "invariant_structure": [list(pair) for pair in report.invariant_structure],
        "certified": report.certified,
        "trace": _trace_summary(report.trace),
    }
    code = EXIT_STALLED if report.trace.termination == Termination.STALLED else EXIT_OK
    return payload, code


def _cmd_mccoy(args):
    doc = parse(args.input)
    _require_square(doc)
    a = doc.to_matpoly()
    structure = doc.to_structure(a, args.structure)
    problem = McCoyProblem(a, structure, r=args.rank_drop, use_linearization=args.linearize)
    report = solve_mccoy(problem, _lm_config(args))
    payload = {
        "distance": report.distance,
        "omega": _complex_field(report.omega),
        "invariant_factor": report.invariant_factor.coeffs.tolist(),
        "delta": _matpoly_grid(report.delta_a),
        "trace": _trace_summary(report.trace),
    }
    code = EXIT_STALLED if report.trace.termination == Termination.STALLED else EXIT_OK
    return payload, code


def _cmd_selftest(args):
    results = list(selftest.run_selftest(args.seed))
    for name, ok, detail in results:
        state = "ok" if ok else "FAIL"
        print(f"{state:4s} {name}" + (f" ({detail})" if detail else ""), file=sys.stderr)
    payload = {
        "checks": [{"name": n, "ok": bool(ok), "detail": d} for n, ok, d in results],
        "passed": int(sum(ok for _, ok, _ in results)),
        "total": len(results),
    }
    return payload, EXIT_OK if payload["passed"] == payload["total"] else 1


def _matpoly_grid(a: MatPoly) -> list:
    return [[a.coeff[i, j].tolist() for j in range(a.cols)] for i in range(a.rows)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polysmith",
        description="Nearby non-trivial Smith forms of matrix polynomials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_structure=True, with_solver=False):
        p.add_argument("input", help="path to the input JSON document")
        if with_structure:
            p.add_argument(
                "--structure",
                default=None,
                help="full | support | degree | path to a mask JSON file",
            )
        if with_solver:
            p.add_argument("--max-iter", type=int, default=500)
            p.add_argument("--tol", type=float, default=1e-12)

    p_check = sub.add_parser("check", help="triviality and unattainability report")
    add_common(p_check)
    p_check.set_defaults(fn=_cmd_check)

    p_bound = sub.add_parser("bound", help="lower bound on the distance to non-triviality")
    add_common(p_bound, with_structure=False)
    p_bound.set_defaults(fn=_cmd_bound)

    p_snf = sub.add_parser("snf", help="nearest matrix polynomial with non-trivial Smith form")
    add_common(p_snf, with_solver=True)
    p_snf.add_argument("--deg-h", type=int, choices=(1, 2), default=None,
                       help="divisor degree; both are tried when omitted")
    p_snf.add_argument("--reversal", action="store_true",
                       help="optimize the reversed adjoint (eigenvalue at infinity)")
    p_snf.set_defaults(fn=_cmd_snf)

    p_mccoy = sub.add_parser("mccoy", help="nearest matrix polynomial with a rank-r eigenvalue")
    add_common(p_mccoy, with_solver=True)
    p_mccoy.add_argument("--rank-drop", type=int, required=True)
    p_mccoy.add_argument("--linearize", type=lambda s: s.lower() not in ("0", "false", "no"),
                         default=None, help="use the companion pencil (default: degree > 1)")
    p_mccoy.set_defaults(fn=_cmd_mccoy)

    p_self = sub.add_parser("selftest", help="run the built-in oracle suite")
    p_self.add_argument("--seed", type=int, default=0)
    p_self.set_defaults(fn=_cmd_selftest)
    return parser


def run(argv=None):
    """Parse arguments, dispatch, and print the report document."""
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        payload, code = args.fn(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"command": args.command, "error": str(exc)}))
        return EXIT_INVALID
    except UnattainableProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"command": args.command, "error": str(exc)}))
        return EXIT_UNATTAINABLE
    except PolysmithError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"command": args.command, "error": str(exc)}))
        return 1
    report = {"command": args.command}
    if hasattr(args, "input"):
        report["input_digest"] = _digest(args.input)
    report.update(payload)
    report["wall_seconds"] = time.time() - started
    print(json.dumps(report))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
