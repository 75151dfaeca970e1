import json
from itertools import product

import pytest
from hypothesis import given

from cartan_kb.decomp import exceptional_matrix, is_decomposable
from cartan_kb.linalg import IntegerMatrix, rank
from cartan_kb.search import (
    PROPERTIES,
    CorruptCheckpoint,
    Counters,
    EnumFamily,
    SearchSpec,
    check_constraints,
    enumerate_canonical,
    read_checkpoint,
    row_alphabet,
    search_counterexample,
    search_matrices,
    verify_detdefect_equality,
    verify_lemma_except,
    verify_lemma_lem,
    verify_lemma_schwer,
    work_units,
)
from tests.strategies import nonneg_matrices

CYCLIC = IntegerMatrix([[1, 0], [0, 1], [1, 1]])
SMALL = SearchSpec(EnumFamily(5, 3))


def _brute_classes(k, l, b, full_rank=False):
    rows = [r for r in product(range(b + 1), repeat=l) if any(r)]
    out = set()
    for combo in product(rows, repeat=k):
        if full_rank and rank(IntegerMatrix(combo, l)) != l:
            continue
        out.add(tuple(sorted(combo)))
    return out


def test_family_validation():
    with pytest.raises(ValueError):
        EnumFamily(3, 2, entry_bound=0)
    with pytest.raises(ValueError):
        EnumFamily(0, 2)
    fam = EnumFamily(4, 2, k_min=2)
    assert EnumFamily.from_dict(fam.to_dict()) == fam


def test_row_alphabet():
    assert row_alphabet(2, 1) == [(0, 1), (1, 0), (1, 1)]


def test_canonical_enumeration_counts():
    fam = EnumFamily(3, 2, k_min=3, l_min=2, full_rank=True)
    got = [tuple(q.rows) for q in enumerate_canonical(fam)]
    assert len(got) == 7 == len(_brute_classes(3, 2, 1, full_rank=True))
    assert set(got) == _brute_classes(3, 2, 1, full_rank=True)
    assert all(list(q) == sorted(q) for q in got)


@pytest.mark.parametrize("k,l,b", [(2, 2, 2), (3, 3, 1), (4, 2, 1), (2, 3, 2)])
def test_canonical_enumeration_matches_brute_force(k, l, b):
    fam = EnumFamily(k, l, b, k_min=k, l_min=l)
    got = [tuple(q.rows) for q in enumerate_canonical(fam)]
    assert len(got) == len(set(got))
    assert set(got) == _brute_classes(k, l, b)
    assert fam.estimated_size() == len(got)


def test_indecomposable_filter():
    fam = EnumFamily(4, 2, k_min=2, l_min=2, indecomposable=True)
    for q in enumerate_canonical(fam):
        assert rank(q) == 2 and is_decomposable(q) is None


def test_verify_lem_small_and_sabotage():
    rep = verify_lemma_lem(EnumFamily(4, 2))
    assert rep.ok and rep.checked > 0
    bad = verify_lemma_lem(EnumFamily(4, 2), sabotage=1)
    assert not bad.ok
    assert bad.to_dict()["schema"] == "cartan-kb/violation-report"


def test_verify_schwer_small_and_sabotage():
    assert verify_lemma_schwer(EnumFamily(5, 2)).ok
    assert not verify_lemma_schwer(EnumFamily(5, 2), sabotage=1).ok


def test_verify_except_small_has_no_exception():
    rep = verify_lemma_except(EnumFamily(5, 3))
    assert rep.ok and rep.notes["exceptional"] == []


def test_detdefect_small():
    rep = verify_detdefect_equality(EnumFamily(5, 2))
    assert rep.ok and rep.notes["equality_cases"] > 0


def test_check_constraints_examples():
    v = check_constraints(CYCLIC, 3)
    assert tuple(v) == (True,) * 7 + (False,)
    assert v.first_failure == "viii"
    v = check_constraints(exceptional_matrix(), 2)
    assert v.first_failure == "iv"
    assert (v.iv, v.v, v.vii) == (False, False, False)
    v = check_constraints([[1, 0], [0, 0]], 2)
    assert not v.ii
    v = check_constraints([[2]], 2)
    assert not v.iii
    v = check_constraints([[-1, 1], [1, 0]], 2)
    assert not v.i


@given(nonneg_matrices(max_k=6, max_l=3))
def test_profile_first_failure_matches_full_verdict(q):
    for p in (2, 3, 5):
        counters, findings = search_matrices([q], primes=(p,), max_pd=None)
        assert counters.conserved() and counters.tested == 1
        first = next((name for name in PROPERTIES if counters.first_failure[name]), None)
        assert first == check_constraints(q, p).first_failure
        assert bool(findings) == (first is None)


def test_single_candidate_reports_viii():
    counters, findings = search_matrices([CYCLIC], primes=(3,))
    assert counters.first_failure["viii"] == 1 and not findings
    assert counters.contribution_checked == 1 and counters.contribution_violations == 0


def test_counters_roundtrip():
    c = Counters()
    c.tested = 2
    c.first_failure["iv"] = 2
    assert c.conserved()
    assert Counters.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_work_units_cover_family():
    fam = EnumFamily(4, 2)
    spec = SearchSpec(fam)
    rep = search_counterexample(spec)
    assert rep.counters.tested == fam.estimated_size()
    assert rep.units_total == len(work_units(fam))


def test_search_small_no_findings_and_conservation():
    rep = search_counterexample(SMALL)
    assert rep.complete and rep.findings == []
    assert rep.counters.conserved()
    assert rep.counters.contribution_violations == 0
    d = rep.to_dict()
    assert d["schema"] == "cartan-kb/search-report" and d["search"]["family"]["entry_bound"] == 1


def test_prune_does_not_change_outcome():
    a = search_counterexample(SearchSpec(EnumFamily(6, 3), prune=True))
    b = search_counterexample(SearchSpec(EnumFamily(6, 3), prune=False))
    assert a.counters.first_failure == b.counters.first_failure
    assert a.findings == b.findings
    assert b.counters.bound_anomalies == 0
    assert a.counters.bound_pruned > 0


def test_shards_and_resume(tmp_path):
    base = search_counterexample(SMALL).to_dict()
    assert search_counterexample(SMALL, shards=3).to_dict() == base
    ck = tmp_path / "ck.json"
    part = search_counterexample(SMALL, checkpoint_path=ck, stop_after_units=7)
    assert not part.complete
    spec, cursor, counters, _ = read_checkpoint(ck)
    assert spec == SMALL and cursor == 7 and counters == part.counters
    done = search_counterexample(SMALL, checkpoint_path=ck, resume=ck, shards=2)
    assert done.to_dict() == base


def test_checkpoint_cadence(tmp_path):
    ck = tmp_path / "ck.json"
    search_counterexample(SMALL, checkpoint_path=ck, checkpoint_every=1, stop_after_units=3)
    assert read_checkpoint(ck)[1] == 3


def test_corrupt_checkpoint(tmp_path):
    ck = tmp_path / "ck.json"
    search_counterexample(SMALL, checkpoint_path=ck, stop_after_units=2)
    body = json.loads(ck.read_text())
    body["counters"]["tested"] += 1
    ck.write_text(json.dumps(body))
    with pytest.raises(CorruptCheckpoint):
        search_counterexample(SMALL, resume=ck)
    ck.write_text("{not json")
    with pytest.raises(CorruptCheckpoint):
        read_checkpoint(ck)
    other = tmp_path / "other.json"
    search_counterexample(SearchSpec(EnumFamily(4, 2)), checkpoint_path=other, stop_after_units=1)
    with pytest.raises(CorruptCheckpoint):
        search_counterexample(SMALL, resume=other)
