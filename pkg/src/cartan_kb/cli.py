"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 precondition failure,
3 verification violation (or criterion without witness), 4 search finding.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import __version__
from .blocks import (
    CartanData,
    NotBlockLike,
    bound_brandt_partition,
    bound_main,
    contribution_matrix,
    diagonal_valuations,
    height_zero_flags,
    is_prime,
    k0_bound,
    trace_bound,
)
from .decomp import UndecidedError, finest_decomposition
from .groups import InvalidAction, base_two_exists, cor_criterion, min_centralizer, read_action_file
from .linalg import ParseError, det_exact, gram, invariant_factors, rank, read_matrix_file
from .qforms import NotPositiveDefinite, QuadraticForm, adjugate_min, minimum_nonzero
from .search import (
    SUITES,
    CorruptCheckpoint,
    EnumFamily,
    SearchSpec,
    atomic_write,
    check_constraints,
    search_counterexample,
    search_matrices,
)

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION, EXIT_VIOLATION, EXIT_FINDING = 0, 1, 2, 3, 4
SCHEMA_VERSION = 1

VERIFY_CAPS = {"max_k": 10, "max_l": 5, "entry_bound": 3, "candidates": 5_000_000}

log = logging.getLogger("cartan_kb")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _envelope(kind: str, body: dict) -> dict:
    return {"schema": f"cartan-kb/{kind}", "version": SCHEMA_VERSION, "tool_version": __version__, **body}


def _emit(args, payload: dict, text: str):
    if getattr(args, "out", None):
        atomic_write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _read_matrix(path):
    try:
        return read_matrix_file(path)
    except ParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}", EXIT_INPUT) from None


def _components(c) -> list[list[int]]:
    """Connected components of the support graph of a symmetric matrix."""
    n = c.nrows
    seen, comps = set(), []
    for s in range(n):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in range(n):
                if c.rows[i][j] and j not in seen:
                    seen.add(j)
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------------------
# analyze


def analyze_matrix(q, p: int) -> dict:
    if not is_prime(p):
        raise CliError(f"--prime {p} is not prime", EXIT_INPUT)
    zero = q.zero_rows()
    if zero:
        raise CliError(f"rows {zero} vanish; a decomposition matrix has no zero rows", EXIT_PRECONDITION)
    k, l = q.shape
    r = rank(q)
    if r != l:
        raise CliError(f"rank {r} < {l}: columns are dependent", EXIT_PRECONDITION)
    c = gram(q)
    try:
        cd = CartanData.from_matrix(c, p)
    except NotBlockLike as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from None
    try:
        fd = finest_decomposition(q)
        decomposition = {
            "decomposable": len(fd.cells) > 1,
            "cells": [list(cell.rows) for cell in fd.cells],
        }
    except UndecidedError as exc:
        decomposition = {"decomposable": None, "undecided": str(exc)}
    mb = bound_main(c)
    comps = _components(c)
    bounds = {
        "main": mb.value,
        "main_exact": str(mb.exact),
        "trace": trace_bound(c),
        "partition_singletons": bound_brandt_partition(c, [[i] for i in range(l)]),
        "k0": None,
    }
    if len(comps) > 1:
        bounds["support_partition"] = bound_brandt_partition(c, comps)
        tops = [invariant_factors(c.submatrix(s, s))[-1] for s in comps]
        if tops.count(cd.pd) == 1:
            blocks = [c.submatrix(s, s) for s in comps]
            try:
                bounds["k0"] = k0_bound(blocks, tops.index(cd.pd), p)
            except (ValueError, NotBlockLike):
                pass
    contrib = {"available": cd.ctilde_integral}
    if cd.ctilde_integral:
        m = contribution_matrix(q, cd)
        contrib.update(
            {
                "M": m.M.tolist(),
                "identities": m.identities(),
                "height_zero": list(height_zero_flags(m)),
                "diagonal_valuations": list(diagonal_valuations(m)),
            }
        )
    verdict = check_constraints(q, p)
    return _envelope(
        "analysis",
        {
            "input": {"matrix": q.tolist(), "k": k, "l": l, "prime": p},
            "invariants": {"rank": r, "invariant_factors": list(invariant_factors(q)), "det_C": cd.det},
            "decomposition": decomposition,
            "cartan": {
                "C": c.tolist(),
                "invariant_factors": list(cd.invariant_factors),
                "d": cd.d,
                "pd": cd.pd,
                "unique_top": cd.unique_top,
            },
            "bounds": bounds,
            "contribution": contrib,
            "constraints": dict(verdict._asdict()),
        },
    )


def _analysis_text(rep: dict) -> str:
    inp, inv, car, b = rep["input"], rep["invariants"], rep["cartan"], rep["bounds"]
    lines = [
        f"Q: {inp['k']} x {inp['l']}, p = {inp['prime']}",
        f"rank {inv['rank']}, elementary divisors of Q {inv['invariant_factors']}",
        f"C = {car['C']}",
        f"det C = {inv['det_C']}, elementary divisors {car['invariant_factors']}, p^d = {car['pd']}",
        f"decomposable: {rep['decomposition']['decomposable']}",
        f"bound (det C - 1)/l + l: {b['main']} (exact {b['main_exact']})",
        f"trace bound: {b['trace']}, singleton-partition bound: {b['partition_singletons']}",
    ]
    if b["k0"] is not None:
        lines.append(f"k0 bound: {b['k0']}")
    con = rep["contribution"]
    if con["available"]:
        lines.append(f"contribution identities: {con['identities']}")
        lines.append(f"height zero: {con['height_zero']}")
    else:
        lines.append("contribution matrix: p^d C^-1 is not integral")
    lines.append("constraints: " + " ".join(f"({k})={'T' if v else 'F'}" for k, v in rep["constraints"].items()))
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    q = _read_matrix(args.matrix)
    rep = analyze_matrix(q, args.prime)
    rep["input"]["file"] = str(args.matrix)
    _emit(args, rep, _analysis_text(rep))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    if args.max_k > VERIFY_CAPS["max_k"] or args.max_l > VERIFY_CAPS["max_l"] or args.entry_bound > VERIFY_CAPS["entry_bound"]:
        raise CliError(
            f"family exceeds the caps (max-k <= {VERIFY_CAPS['max_k']}, max-l <= {VERIFY_CAPS['max_l']}, "
            f"entry-bound <= {VERIFY_CAPS['entry_bound']}); lower the bounds or run the library function directly",
            EXIT_INPUT,
        )
    try:
        fam = EnumFamily(args.max_k, args.max_l, args.entry_bound)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if fam.estimated_size() > VERIFY_CAPS["candidates"]:
        raise CliError(
            f"family has about {fam.estimated_size()} candidates, above the cap {VERIFY_CAPS['candidates']}; lower the bounds",
            EXIT_INPUT,
        )
    fn = SUITES[args.suite]
    rep = fn(fam, sabotage=args.sabotage) if args.suite in ("lem", "schwer") else fn(fam)
    payload = {**rep.to_dict(), "tool_version": __version__}
    text = [f"suite {rep.suite}: {rep.checked} matrices checked, {len(rep.violations)} violations"]
    for v in rep.violations[:20]:
        text.append(f"  violation: {v}")
    for key, val in rep.notes.items():
        text.append(f"  {key}: {len(val) if isinstance(val, list) else val}")
    if args.suite == "except":
        for e in rep.notes["exceptional"][:3]:
            text.append(f"  exceptional class member: {e['matrix']} (det {e['det']})")
    _emit(args, payload, "\n".join(text))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# search


def _parse_primes(s: str) -> tuple[int, ...]:
    try:
        primes = tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise CliError(f"--primes: cannot parse {s!r}", EXIT_INPUT) from None
    bad = [x for x in primes if not is_prime(x)]
    if not primes or bad:
        raise CliError(f"--primes: {bad or 'empty list'} not prime", EXIT_INPUT)
    return primes


def cmd_search(args) -> int:
    primes = _parse_primes(args.primes)
    if args.only_matrix:
        q = _read_matrix(args.only_matrix)
        counters, findings = search_matrices([q], primes, args.max_pd)
        payload = _envelope(
            "search-report",
            {"single_matrix": q.tolist(), "primes": list(primes), "max_pd": args.max_pd,
             "counters": counters.to_dict(), "findings": findings},
        )
        text = f"candidates tested: {counters.tested}\n" + "\n".join(
            f"  first failure ({k}): {v}" for k, v in counters.first_failure.items()
        ) + f"\n  passed all eight: {counters.passed}\nfindings: {len(findings)}"
        _emit(args, payload, text)
        return EXIT_FINDING if findings else EXIT_OK
    try:
        spec = SearchSpec(EnumFamily(args.max_k, args.max_l, args.entry_bound), primes, args.max_pd)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    try:
        rep = search_counterexample(
            spec,
            checkpoint_path=args.checkpoint_out,
            resume=args.resume,
            shards=args.shards,
            checkpoint_every=args.checkpoint_every,
            stop_after_units=args.stop_after_units,
        )
    except CorruptCheckpoint as exc:
        raise CliError(f"{args.resume}: {exc}", EXIT_INPUT) from None
    _emit(args, rep.to_dict(), rep.summary())
    return EXIT_FINDING if rep.findings else EXIT_OK


# ---------------------------------------------------------------------------
# minform


def cmd_minform(args) -> int:
    m = _read_matrix(args.matrix)
    try:
        if args.adjugate:
            scale = None
            if args.prime is not None:
                if not is_prime(args.prime):
                    raise CliError(f"--prime {args.prime} is not prime", EXIT_INPUT)
                try:
                    scale = CartanData.from_matrix(m, args.prime).pd
                except NotBlockLike as exc:
                    raise CliError(str(exc), EXIT_PRECONDITION) from None
            else:
                QuadraticForm(m)
            value, witness = adjugate_min(m, scale)
            used = scale if scale is not None else det_exact(m)
        else:
            value, witness = minimum_nonzero(m)
            used = None
    except NotPositiveDefinite as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from None
    payload = _envelope(
        "minform",
        {"matrix": m.tolist(), "adjugate": args.adjugate, "scale": used, "minimum": value, "witness": list(witness)},
    )
    text = f"minimum {value} at {tuple(witness)}"
    if used is not None:
        text += f" (form {used} * C^-1)"
    _emit(args, payload, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# group-check


def cmd_group_check(args) -> int:
    try:
        t = read_action_file(args.group)
    except InvalidAction as exc:
        raise CliError(f"{args.group}: {exc}", EXIT_INPUT) from None
    except OSError as exc:
        raise CliError(f"{args.group}: {exc.strerror}", EXIT_INPUT) from None
    body = {"group": t.group.to_dict(), "T_order": t.order, "criterion": args.criterion}
    code = EXIT_OK
    if args.criterion == "cor":
        v = cor_criterion(t)
        if v is None:
            body["u"] = None
            text, code = "none", EXIT_VIOLATION
        else:
            body.update({"u": list(v.u), "centralizer_order": v.centralizer_order,
                         "free_on_quotient": v.free_on_quotient, "pairwise": v.pairwise})
            text = f"u = {v.u}, |C_T(u)| = {v.centralizer_order}"
    elif args.criterion == "min-centralizer":
        u, order = min_centralizer(t)
        body.update({"u": list(u), "centralizer_order": order})
        text = f"u = {u}, |C_T(u)| = {order}"
    else:
        pair = base_two_exists(t)
        if pair is None:
            body.update({"u": None, "v": None, "anomaly": True})
            text, code = "none", EXIT_VIOLATION
        else:
            body.update({"u": list(pair[0]), "v": list(pair[1])})
            text = f"u = {pair[0]}, v = {pair[1]}"
    _emit(args, _envelope("group-check", body), text)
    return code


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cartan-kb", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print the JSON report instead of text")
        p.add_argument("--out", help="also write the JSON report to this file")

    p = sub.add_parser("analyze", help="invariants, bounds and diagnostics of a decomposition matrix")
    p.add_argument("matrix")
    p.add_argument("--prime", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="exhaustive oracle over a small matrix family")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--max-k", type=int, default=5)
    p.add_argument("--max-l", type=int, default=3)
    p.add_argument("--entry-bound", type=int, default=1)
    p.add_argument("--sabotage", type=int, default=0, help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", help="counterexample search over 0..b matrices")
    p.add_argument("--max-k", type=int, default=8)
    p.add_argument("--max-l", type=int, default=4)
    p.add_argument("--entry-bound", type=int, default=1)
    p.add_argument("--primes", default="2,3,5,7")
    p.add_argument("--max-pd", type=int, default=8)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--resume")
    p.add_argument("--checkpoint-out")
    p.add_argument("--checkpoint-every", type=int, default=10**6)
    p.add_argument("--stop-after-units", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--only-matrix", help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("minform", help="minimum of a positive definite form")
    p.add_argument("matrix")
    p.add_argument("--adjugate", action="store_true", help="use det(C) C^-1 (or p^d C^-1 with --prime)")
    p.add_argument("--prime", type=int)
    common(p)
    p.set_defaults(func=cmd_minform)

    p = sub.add_parser("group-check", help="free-action criteria for a coprime action on an abelian p-group")
    p.add_argument("group")
    p.add_argument("--criterion", choices=["cor", "min-centralizer", "base2"], required=True)
    common(p)
    p.set_defaults(func=cmd_group_check)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
