"""Exhaustive oracles over small matrix families and the counterexample search.

Candidates are generated one per row-permutation class (rows in
non-decreasing lexicographic order).  Column transformations are not
quotiented out; every predicate tested here is GL(l, Z)-invariant, so the
redundancy only costs time.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from itertools import combinations_with_replacement, product
from typing import Iterable, Iterator, NamedTuple, Sequence

from . import __version__
from .blocks import (
    CartanData,
    bound_main,
    contribution_matrix,
    equality_shape_check,
    height_zero_flags,
)
from .decomp import is_decomposable, is_exceptional, min_column_support_ok
from .linalg import (
    IntegerMatrix,
    _det_rows,
    _rank_rows,
    _snf,
    as_matrix,
    det_exact,
    gram,
    scaled_inverse,
)
from .qforms import adjugate_min

log = logging.getLogger(__name__)

PROPERTIES = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii")
CHECKPOINT_VERSION = 1
REPORT_VERSION = 1


@dataclass(frozen=True)
class EnumFamily:
    k_max: int
    l_max: int
    entry_bound: int = 1
    k_min: int = 1
    l_min: int = 1
    full_rank: bool = False
    indecomposable: bool = False
    column_support: bool = False

    def __post_init__(self):
        if self.entry_bound < 1:
            raise ValueError("entry bound must be at least 1 (all-zero rows are excluded)")
        if not (1 <= self.k_min <= self.k_max) or not (1 <= self.l_min <= self.l_max):
            raise ValueError("empty k or l range")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnumFamily":
        return cls(**d)

    def estimated_size(self) -> int:
        """Number of sorted-row candidates before structural filters."""
        from math import comb

        total = 0
        for l in range(self.l_min, self.l_max + 1):
            n = (self.entry_bound + 1) ** l - 1
            for k in range(self.k_min, self.k_max + 1):
                total += comb(n + k - 1, k)
        return total


def row_alphabet(l: int, b: int) -> list[tuple[int, ...]]:
    return [v for v in product(range(b + 1), repeat=l) if any(v)]


def enumerate_canonical(family: EnumFamily) -> Iterator[IntegerMatrix]:
    """One matrix per row-permutation class, rows sorted, filters applied."""
    for l in range(family.l_min, family.l_max + 1):
        alphabet = row_alphabet(l, family.entry_bound)
        for k in range(family.k_min, family.k_max + 1):
            if (family.full_rank or family.indecomposable) and k < l:
                continue
            for rows in combinations_with_replacement(alphabet, k):
                if (family.full_rank or family.indecomposable or family.column_support) and _rank_rows(rows) != l:
                    continue
                q = IntegerMatrix(rows, l)
                if family.column_support and not min_column_support_ok(q):
                    continue
                if family.indecomposable and is_decomposable(q) is not None:
                    continue
                yield q


# ---------------------------------------------------------------------------
# exhaustive oracles


@dataclass
class ViolationReport:
    suite: str
    family: dict
    checked: int = 0
    violations: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "schema": "cartan-kb/violation-report",
            "version": REPORT_VERSION,
            "suite": self.suite,
            "family": self.family,
            "checked": self.checked,
            "violations": self.violations,
            "notes": self.notes,
        }


def verify_lemma_lem(family: EnumFamily, sabotage: int = 0) -> ViolationReport:
    """det(Q^T Q) is 0 or at least k - l + 1 (+ sabotage, for harness self-tests)."""
    rep = ViolationReport("lem", family.to_dict())
    for q in enumerate_canonical(family):
        k, l = q.shape
        dc = det_exact(gram(q))
        rep.checked += 1
        if dc != 0 and dc < k - l + 1 + sabotage:
            rep.violations.append({"matrix": q.tolist(), "det": dc, "threshold": k - l + 1 + sabotage})
    return rep


def verify_lemma_schwer(family: EnumFamily, sabotage: int = 0) -> ViolationReport:
    """Indecomposable full-rank Q: det C >= l(k - l) + 1 and min det(C) x C^-1 x^T >= l."""
    fam = EnumFamily(**{**family.to_dict(), "full_rank": True, "indecomposable": True})
    rep = ViolationReport("schwer", fam.to_dict())
    tight = 0
    for q in enumerate_canonical(fam):
        k, l = q.shape
        c = gram(q)
        dc = det_exact(c)
        amin = adjugate_min(c)[0]
        rep.checked += 1
        bad = []
        if dc < l * (k - l) + 1 + sabotage:
            bad.append("det")
        if amin < l + sabotage:
            bad.append("adjugate_min")
        if dc == l * (k - l) + 1:
            tight += 1
        if bad:
            rep.violations.append({"matrix": q.tolist(), "det": dc, "adjugate_min": amin, "failed": bad})
    rep.notes["det_bound_attained"] = tight
    return rep


def verify_lemma_except(family: EnumFamily) -> ViolationReport:
    """Column-support family: det >= l(k - l), apart from the exceptional 6x3 class."""
    fam = EnumFamily(**{**family.to_dict(), "full_rank": True, "column_support": True})
    rep = ViolationReport("except", fam.to_dict())
    exceptional = []
    for q in enumerate_canonical(fam):
        k, l = q.shape
        dc = det_exact(gram(q))
        rep.checked += 1
        if dc >= l * (k - l):
            continue
        if dc == l * (k - l) - 1 and is_exceptional(q):
            exceptional.append({"matrix": q.tolist(), "det": dc})
            continue
        rep.violations.append({"matrix": q.tolist(), "det": dc, "threshold": l * (k - l)})
    rep.notes["exceptional"] = exceptional
    return rep


def verify_detdefect_equality(family: EnumFamily) -> ViolationReport:
    """Every indecomposable Q with k equal to the main bound has C ~ mJ + I, divisors (1,..,1,det C), heights 0."""
    fam = EnumFamily(**{**family.to_dict(), "full_rank": True, "indecomposable": True})
    rep = ViolationReport("detdefect", fam.to_dict())
    cases = 0
    for q in enumerate_canonical(fam):
        rep.checked += 1
        v = equality_shape_check(q)
        if not v.equality:
            continue
        cases += 1
        if not v.all_hold:
            rep.violations.append(
                {
                    "matrix": q.tolist(),
                    "m": v.m,
                    "congruent": v.congruent_to_mJ_plus_I,
                    "divisors": v.divisors_ok,
                    "heights": v.heights_zero,
                }
            )
    rep.notes["equality_cases"] = cases
    return rep


SUITES = {
    "lem": verify_lemma_lem,
    "schwer": verify_lemma_schwer,
    "except": verify_lemma_except,
    "detdefect": verify_detdefect_equality,
}


# ---------------------------------------------------------------------------
# the eight-property profile


class ConstraintVerdict(NamedTuple):
    i: bool
    ii: bool
    iii: bool
    iv: bool
    v: bool
    vi: bool
    vii: bool
    viii: bool

    @property
    def first_failure(self) -> str | None:
        for name, ok in zip(PROPERTIES, self):
            if not ok:
                return name
        return None


def _top_prime_power(factors: Sequence[int], primes: Sequence[int], max_pd: int | None):
    """(p, d) if the largest elementary divisor is a unique power of a listed prime."""
    if len(factors) == 0:
        return None
    top = factors[-1]
    if len(factors) > 1 and factors[-2] == top:
        return None
    if max_pd is not None and top > max_pd:
        return None
    for p in primes:
        t, d = top, 0
        while t % p == 0:
            t //= p
            d += 1
        if t == 1:
            return p, d
    return None


def _contribution_rows(rows, c_rows, pd):
    l = len(c_rows)
    ct = scaled_inverse(IntegerMatrix(c_rows, l), pd).rows
    qc = [[sum(r[a] * ct[a][b] for a in range(l)) for b in range(l)] for r in rows]
    return [[sum(x * y for x, y in zip(u, w)) for w in rows] for u in qc]


def _diag_ok(m, p):
    p2 = p * p
    return all(m[i][i] % p2 == 0 or m[i][i] % p != 0 for i in range(len(m)))


def _zero_ok(m, p):
    p2 = p * p
    k = len(m)
    for i in range(k):
        for j in range(k):
            if m[i][j] == 0 and (m[i][i] % p2 or m[j][j] % p2):
                return False
    return True


def check_constraints(q, p: int) -> ConstraintVerdict:
    """All eight properties, each evaluated on its own (no short-circuit).

    (vi) and (vii) are reported false when the contribution matrix is
    undefined (singular C or largest divisor not a power of p).
    """
    q = as_matrix(q)
    rows = q.rows
    k, l = q.shape
    i_ = all(x >= 0 for r in rows for x in r)
    ii = not q.zero_rows()
    f = tuple(_snf(rows, l, want_transforms=False)[0])
    iii = len(f) == l and all(x == 1 for x in f)
    iv = ii and is_decomposable(q) is None
    c = gram(q)
    cf = tuple(_snf(c.rows, l, want_transforms=False)[0])
    pp = _top_prime_power(cf, [p], None) if len(cf) == l else None
    v = pp is not None
    vi = vii = False
    pd = None
    if len(cf) == l and all(_is_p_power(x, p) for x in cf[-1:]):
        pd = cf[-1]
        m = _contribution_rows(rows, c.rows, pd)
        vi = _diag_ok(m, p)
        vii = _zero_ok(m, p)
    viii = pd is not None and k > pd
    return ConstraintVerdict(i_, ii, iii, iv, v, vi, vii, viii)


def _is_p_power(n: int, p: int) -> bool:
    while n % p == 0:
        n //= p
    return n == 1


@dataclass
class Counters:
    tested: int = 0
    first_failure: dict = field(default_factory=lambda: {name: 0 for name in PROPERTIES})
    passed: int = 0
    contribution_checked: int = 0
    contribution_violations: int = 0
    bound_pruned: int = 0
    bound_anomalies: int = 0

    def merge(self, other: "Counters"):
        self.tested += other.tested
        for name in PROPERTIES:
            self.first_failure[name] += other.first_failure[name]
        self.passed += other.passed
        self.contribution_checked += other.contribution_checked
        self.contribution_violations += other.contribution_violations
        self.bound_pruned += other.bound_pruned
        self.bound_anomalies += other.bound_anomalies

    def conserved(self) -> bool:
        return self.tested == sum(self.first_failure.values()) + self.passed

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Counters":
        return cls(**d)


def evaluate_profile(rows, l: int, primes: Sequence[int], max_pd: int | None, counters: Counters, prune: bool = True):
    """Short-circuit evaluation (i) -> (viii); returns (failed property or None, p, d)."""
    k = len(rows)
    counters.tested += 1

    def fail(name):
        counters.first_failure[name] += 1
        return name, None, None

    if any(x < 0 for r in rows for x in r):
        return fail("i")
    if any(not any(r) for r in rows):
        return fail("ii")
    if k < l:
        return fail("iii")
    f = _snf(rows, l, want_transforms=False)[0]
    if len(f) != l or f[-1] != 1:
        return fail("iii")
    c_rows = [[0] * l for _ in range(l)]
    for a in range(l):
        for b in range(a, l):
            s = sum(r[a] * r[b] for r in rows)
            c_rows[a][b] = c_rows[b][a] = s
    dc = _det_rows(c_rows)
    bound = (dc - 1) // l + l
    if prune and k > bound:
        # an indecomposable full-rank Q always satisfies k <= bound
        counters.bound_pruned += 1
        return fail("iv")
    if is_decomposable(IntegerMatrix(rows, l)) is not None:
        return fail("iv")
    if k > bound:
        counters.bound_anomalies += 1
    cf = _snf(c_rows, l, want_transforms=False)[0]
    pp = _top_prime_power(cf, primes, max_pd)
    if pp is None:
        return fail("v")
    p, d = pp
    pd = p ** d
    m = _contribution_rows(rows, c_rows, pd)
    counters.contribution_checked += 1
    mm = IntegerMatrix(m, k)
    if not (mm.is_symmetric() and mm @ mm == mm.scale(pd) and mm.trace() == pd * l):
        counters.contribution_violations += 1
    if not _diag_ok(m, p):
        return fail("vi")
    if not _zero_ok(m, p):
        return fail("vii")
    if not k > pd:
        return fail("viii")
    counters.passed += 1
    return None, p, d


# ---------------------------------------------------------------------------
# checkpointed search


@dataclass(frozen=True)
class SearchSpec:
    family: EnumFamily
    primes: tuple[int, ...] = (2, 3, 5, 7)
    max_pd: int | None = 8
    prune: bool = True

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "primes": list(self.primes),
            "max_pd": self.max_pd,
            "prune": self.prune,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpec":
        return cls(EnumFamily.from_dict(d["family"]), tuple(d["primes"]), d["max_pd"], d["prune"])


def work_units(family: EnumFamily) -> list[tuple[int, int, tuple[int, ...]]]:
    """Deterministic shards: (l, k, canonical prefix of up to two row indices)."""
    units = []
    for l in range(family.l_min, family.l_max + 1):
        n = len(row_alphabet(l, family.entry_bound))
        for k in range(family.k_min, family.k_max + 1):
            depth = min(k, 2)
            for prefix in combinations_with_replacement(range(n), depth):
                units.append((l, k, prefix))
    return units


def _unit_candidates(family: EnumFamily, unit) -> Iterator[tuple[tuple[int, ...], ...]]:
    l, k, prefix = unit
    alphabet = row_alphabet(l, family.entry_bound)
    head = tuple(alphabet[i] for i in prefix)
    rest = k - len(prefix)
    start = prefix[-1]
    for tail in combinations_with_replacement(alphabet[start:], rest):
        yield head + tail


def run_unit(spec: SearchSpec, unit) -> tuple[Counters, list[dict]]:
    counters = Counters()
    findings = []
    l = unit[0]
    for rows in _unit_candidates(spec.family, unit):
        failed, p, d = evaluate_profile(rows, l, spec.primes, spec.max_pd, counters, spec.prune)
        if failed is None:
            findings.append({"matrix": [list(r) for r in rows], "p": p, "d": d})
    return counters, findings


def _run_unit_star(args):
    return run_unit(*args)


@dataclass
class SearchReport:
    spec: SearchSpec
    counters: Counters
    findings: list[dict]
    units_total: int
    units_done: int

    @property
    def complete(self) -> bool:
        return self.units_done == self.units_total

    def to_dict(self) -> dict:
        return {
            "schema": "cartan-kb/search-report",
            "version": REPORT_VERSION,
            "tool_version": __version__,
            "search": self.spec.to_dict(),
            "determinism": "seedless; independent of shard count and interruption points",
            "entry_bound_note": f"entries restricted to 0..{self.spec.family.entry_bound}; "
            "no claim is made outside this family",
            "complete": self.complete,
            "units_total": self.units_total,
            "units_done": self.units_done,
            "counters": self.counters.to_dict(),
            "findings": self.findings,
        }

    def summary(self) -> str:
        c = self.counters
        f = self.spec.family
        lines = [
            f"family: k {f.k_min}..{f.k_max}, l {f.l_min}..{f.l_max}, entries 0..{f.entry_bound}",
            f"primes: {', '.join(map(str, self.spec.primes))}; p^d <= {self.spec.max_pd}",
            f"complete: {self.complete} ({self.units_done}/{self.units_total} units)",
            f"candidates tested: {c.tested}",
        ]
        for name in PROPERTIES:
            lines.append(f"  first failure ({name}): {c.first_failure[name]}")
        lines += [
            f"  passed all eight: {c.passed}",
            f"contribution identities checked: {c.contribution_checked}, violations: {c.contribution_violations}",
            f"findings: {len(self.findings)}",
        ]
        return "\n".join(lines)


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class CorruptCheckpoint(ValueError):
    pass


def write_checkpoint(path, spec: SearchSpec, cursor: int, counters: Counters, findings: list[dict]):
    body = {
        "version": CHECKPOINT_VERSION,
        "search": spec.to_dict(),
        "cursor": cursor,
        "counters": counters.to_dict(),
        "findings": findings,
    }
    body["digest"] = hashlib.sha256(dumps_canonical(body).encode()).hexdigest()
    atomic_write(path, json.dumps(body, indent=1, sort_keys=True) + "\n")


def read_checkpoint(path) -> tuple[SearchSpec, int, Counters, list[dict]]:
    try:
        with open(path, encoding="utf-8") as fh:
            body = json.load(fh)
        digest = body.pop("digest")
        if hashlib.sha256(dumps_canonical(body).encode()).hexdigest() != digest:
            raise CorruptCheckpoint("checkpoint digest mismatch")
        if body["version"] != CHECKPOINT_VERSION:
            raise CorruptCheckpoint(f"unsupported checkpoint version {body['version']}")
        spec = SearchSpec.from_dict(body["search"])
        counters = Counters.from_dict(body["counters"])
        cursor = int(body["cursor"])
    except CorruptCheckpoint:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"unreadable checkpoint: {exc}") from None
    if not counters.conserved():
        raise CorruptCheckpoint("checkpoint counters are inconsistent")
    return spec, cursor, counters, body["findings"]


def search_counterexample(
    spec: SearchSpec,
    checkpoint_path=None,
    resume=None,
    shards: int = 1,
    checkpoint_every: int = 10**6,
    checkpoint_seconds: float = 30.0,
    stop_after_units: int | None = None,
) -> SearchReport:
    """Stream the family through the eight-property profile.

    Work units are processed in canonical order and merged in that order, so
    the report does not depend on ``shards`` or on where a run was
    interrupted.  ``stop_after_units`` simulates an interruption.
    """
    units = work_units(spec.family)
    cursor = 0
    counters = Counters()
    findings: list[dict] = []
    if resume is not None:
        rspec, cursor, counters, findings = read_checkpoint(resume)
        if rspec != spec:
            raise CorruptCheckpoint("checkpoint belongs to a different search")
        if cursor > len(units):
            raise CorruptCheckpoint("checkpoint cursor beyond the end of the search")
    todo = units[cursor:]
    if stop_after_units is not None:
        todo = todo[:stop_after_units]

    last_ck_count = counters.tested
    last_ck_time = time.monotonic()

    def consume(results):
        nonlocal cursor, last_ck_count, last_ck_time
        for uc, uf in results:
            counters.merge(uc)
            findings.extend(uf)
            cursor += 1
            if checkpoint_path is not None and (
                counters.tested - last_ck_count >= checkpoint_every
                or time.monotonic() - last_ck_time >= checkpoint_seconds
            ):
                write_checkpoint(checkpoint_path, spec, cursor, counters, findings)
                last_ck_count = counters.tested
                last_ck_time = time.monotonic()

    args = [(spec, u) for u in todo]
    if shards > 1:
        import multiprocessing

        with multiprocessing.get_context("spawn" if os.name == "nt" else "fork").Pool(shards) as pool:
            consume(pool.imap(_run_unit_star, args, chunksize=4))
    else:
        consume(map(_run_unit_star, args))
    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, spec, cursor, counters, findings)
    log.info("search stopped at unit %d of %d", cursor, len(units))
    return SearchReport(spec, counters, findings, len(units), cursor)


def search_matrices(matrices: Iterable, primes: Sequence[int] = (2, 3, 5, 7), max_pd: int | None = 8) -> tuple[Counters, list[dict]]:
    """Run the profile on an explicit list of matrices (single-candidate families)."""
    counters = Counters()
    findings = []
    for q in matrices:
        q = as_matrix(q)
        failed, p, d = evaluate_profile(q.rows, q.ncols, primes, max_pd, counters)
        if failed is None:
            findings.append({"matrix": q.tolist(), "p": p, "d": d})
    return counters, findings
