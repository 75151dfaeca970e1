import json

import pytest

from cartan_kb import fixture_path
from cartan_kb.blocks import bound_main, cartan_from_decomposition
from cartan_kb.cli import analyze_matrix, main
from cartan_kb.groups import cor_criterion, min_centralizer, read_action_file
from cartan_kb.linalg import read_matrix_file
from cartan_kb.qforms import adjugate_min, minimum_nonzero
from cartan_kb.search import EnumFamily, SearchSpec, search_counterexample, verify_lemma_lem

CYCLIC = str(fixture_path("cyclic_3x2.txt"))
CARTAN_2E3 = str(fixture_path("cartan_2block_2e3_7_3.txt"))
GF8 = str(fixture_path("gf8_model.json"))
GF128 = str(fixture_path("gf128_model.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out) if out.strip() else None, err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_analyze_cyclic_matches_library(capsys):
    code, rep, _ = run_json(capsys, "analyze", CYCLIC, "--prime", "3")
    assert code == 0
    q = read_matrix_file(CYCLIC)
    assert rep == json.loads(json.dumps(analyze_matrix(q, 3) | {"input": rep["input"]}))
    assert rep["invariants"]["det_C"] == 3
    assert rep["bounds"]["main"] == bound_main(cartan_from_decomposition(q, 3).C).value == 3
    assert rep["contribution"]["height_zero"] == [True, True, True]
    assert rep["schema"] == "cartan-kb/analysis" and rep["version"] == 1


def test_analyze_identity(capsys, tmp_path):
    path = write(tmp_path, "id.txt", "2 2\n1 0\n0 1\n")
    code, rep, _ = run_json(capsys, "analyze", path, "--prime", "2")
    assert code == 0
    assert rep["decomposition"]["decomposable"] is True
    assert rep["cartan"]["pd"] == 1


def test_analyze_block_diagonal_reports_k0(capsys, tmp_path):
    path = write(tmp_path, "bd.txt", "4 3\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n")
    code, rep, _ = run_json(capsys, "analyze", path, "--prime", "3")
    assert code == 0 and rep["bounds"]["k0"] == 3


def test_analyze_errors(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", write(tmp_path, "z.txt", "2 2\n1 0\n0 0\n"), "--prime", "2")
    assert code == 2 and "vanish" in err
    code, _, err = run(capsys, "analyze", write(tmp_path, "b.txt", "2 2\n1 x\n0 1\n"), "--prime", "2")
    assert code == 1 and "line 2, column 3" in err
    code, _, err = run(capsys, "analyze", CYCLIC, "--prime", "2")
    assert code == 2
    code, _, _ = run(capsys, "analyze", CYCLIC, "--prime", "4")
    assert code == 1
    code, _, _ = run(capsys, "analyze", str(tmp_path / "missing.txt"), "--prime", "2")
    assert code == 1


def test_analyze_text_and_out(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code, text, _ = run(capsys, "analyze", CYCLIC, "--prime", "3", "--out", str(out))
    assert code == 0 and "det C = 3" in text
    assert json.loads(out.read_text())["invariants"]["det_C"] == 3


def test_minform(capsys, tmp_path):
    path = write(tmp_path, "c.txt", "3 3\n2 1 0\n1 3 0\n0 0 5\n")
    code, rep, _ = run_json(capsys, "minform", path)
    assert code == 0 and (rep["minimum"], rep["witness"]) == (2, [1, 0, 0])
    code, rep, _ = run_json(capsys, "minform", write(tmp_path, "i.txt", "2 2\n1 0\n0 1\n"))
    assert rep["minimum"] == 1
    c = read_matrix_file(CARTAN_2E3)
    code, rep, _ = run_json(capsys, "minform", CARTAN_2E3, "--adjugate", "--prime", "2")
    assert code == 0 and rep["minimum"] == 4 == adjugate_min(c, 8)[0] and rep["scale"] == 8
    code, rep, _ = run_json(capsys, "minform", CARTAN_2E3, "--adjugate")
    assert rep["minimum"] == adjugate_min(c)[0] == 16 and rep["scale"] == 32
    code, _, _ = run(capsys, "minform", write(tmp_path, "n.txt", "2 2\n1 1\n1 1\n"))
    assert code == 2
    code, _, _ = run(capsys, "minform", path, "--adjugate", "--prime", "3")
    assert code == 2
    code, text, _ = run(capsys, "minform", path)
    assert text.strip() == f"minimum 2 at {minimum_nonzero(read_matrix_file(path))[1]}"


def test_verify(capsys, tmp_path):
    code, rep, _ = run_json(capsys, "verify", "--suite", "lem", "--max-k", "5", "--max-l", "3")
    assert code == 0 and rep["violations"] == []
    assert rep["checked"] == verify_lemma_lem(EnumFamily(5, 3)).checked
    code, rep, _ = run_json(capsys, "verify", "--suite", "except", "--max-k", "6", "--max-l", "3")
    assert code == 0 and rep["notes"]["exceptional"]
    code, rep, _ = run_json(capsys, "verify", "--suite", "schwer", "--max-k", "5", "--max-l", "2", "--sabotage", "1")
    assert code == 3 and rep["violations"]
    code, _, err = run(capsys, "verify", "--suite", "lem", "--max-k", "40")
    assert code == 1 and "caps" in err
    code, _, _ = run(capsys, "verify", "--suite", "lem", "--entry-bound", "0")
    assert code == 1


def test_search_small(capsys, tmp_path):
    ck = tmp_path / "ck.json"
    args = ["search", "--max-k", "5", "--max-l", "3", "--primes", "2,3"]
    code, rep, _ = run_json(capsys, *args)
    lib = search_counterexample(SearchSpec(EnumFamily(5, 3), (2, 3), 8)).to_dict()
    assert code == 0 and rep == lib
    code, part, _ = run_json(capsys, *args, "--checkpoint-out", str(ck), "--stop-after-units", "5")
    assert code == 0 and not part["complete"]
    code, rep2, _ = run_json(capsys, *args, "--resume", str(ck), "--shards", "2")
    assert rep2 == lib
    ck.write_text("garbage")
    code, _, err = run(capsys, *args, "--resume", str(ck))
    assert code == 1
    code, _, _ = run(capsys, *args[:-1], "4,2")
    assert code == 1


def test_search_single_matrix_hook(capsys):
    code, rep, _ = run_json(capsys, "search", "--only-matrix", CYCLIC, "--primes", "3")
    assert code == 0
    assert rep["counters"]["first_failure"]["viii"] == 1 and rep["findings"] == []


def test_search_finding_exit_code(capsys, tmp_path, monkeypatch):
    # stub the profile so that the single candidate passes all eight properties
    import cartan_kb.cli as cli

    def fake(matrices, primes, max_pd):
        from cartan_kb.search import Counters

        c = Counters(tested=1, passed=1)
        return c, [{"matrix": [[1]], "p": 2, "d": 0}]

    monkeypatch.setattr(cli, "search_matrices", fake)
    code, _, _ = run(capsys, "search", "--only-matrix", CYCLIC)
    assert code == 4


def test_group_check(capsys, tmp_path):
    code, rep, _ = run_json(capsys, "group-check", GF128, "--criterion", "cor")
    lib = cor_criterion(read_action_file(GF128))
    assert code == 0 and rep["u"] == list(lib.u)
    code, rep, _ = run_json(capsys, "group-check", GF8, "--criterion", "min-centralizer")
    assert rep["centralizer_order"] == 3 == min_centralizer(read_action_file(GF8))[1]
    code, rep, _ = run_json(capsys, "group-check", GF8, "--criterion", "base2")
    assert code == 0 and rep["u"] is not None
    triv = write(tmp_path, "t.json", json.dumps({"p": 2, "exponents": [1, 1], "generators": []}))
    code, rep, _ = run_json(capsys, "group-check", triv, "--criterion", "cor")
    assert code == 0 and rep["u"] == [0, 0]
    bad = write(tmp_path, "b.json", json.dumps({"p": 3, "exponents": [1, 1], "generators": [[[1, 1], [1, 1]]]}))
    code, _, _ = run(capsys, "group-check", bad, "--criterion", "cor")
    assert code == 1
    code, _, _ = run(capsys, "group-check", write(tmp_path, "x.json", "{"), "--criterion", "cor")
    assert code == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
