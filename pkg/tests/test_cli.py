import json
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings

from annkh.cli import RunConfig, corpus, main, run, to_json
from conftest import braid_words


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = call(capsys, *argv)
    return code, json.loads(out)


def dims(rep):
    return {(r["i"], r["jp"], r["k"]): r["dim"] for r in rep["skh"]}


def test_compute_sigma(capsys):
    code, rep = report(capsys, "compute", "--strands", "2", "--word", "1")
    assert code == 0 and rep["schema"] == 1
    assert rep["irreps"] == [{"i": 0, "jp": 1, "N": 2, "mult": 1}, {"i": 1, "jp": 3, "N": 0, "mult": 1}]


def test_compute_torus_link(capsys):
    code, rep = report(capsys, "compute", "--strands", "2", "--word", "-1 -1")
    assert code == 0
    assert {(r["i"], r["jp"], r["N"]) for r in rep["irreps"]} == {(0, -2, 2), (-1, -4, 0), (-2, -4, 0), (-2, -6, 0)}


def test_compute_trivial_three(capsys):
    code, rep = report(capsys, "compute", "--strands", "3", "--word", "")
    assert code == 0
    assert sum(dims(rep).values()) == 8
    assert {(i, jp) for i, jp, _ in dims(rep)} == {(0, 0)}


def test_table_format(capsys):
    code, out, _ = call(capsys, "compute", "--strands", "2", "--word", "1", "--format", "table")
    assert code == 0
    assert "PASS  trapezoid" in out and out.rstrip().endswith("ok")


def test_spectral_totals(capsys):
    code, rep = report(capsys, "spectral", "--strands", "2", "--word", "-1 -1 -1")
    assert code == 0
    assert rep["e_infinity_by_degree"] == rep["kh_by_degree"]
    assert rep["degrees_where_skh_and_kh_differ"] == [-1, 0]


def test_current(capsys):
    code, rep = report(capsys, "current", "--strands", "3", "--word", "1 2")
    assert code == 0 and rep["indecomposable"] is True


def test_snaction_schur_weyl(capsys):
    code, rep = report(capsys, "snaction", "--knot", "", "--strands", "1", "--cable", "3")
    assert code == 0
    assert rep["checks"]["every permutation matches Schur-Weyl"]
    assert sorted(rep["schur_weyl"]) == ["1", "2"]


def test_knot_input_builds_cable(capsys):
    code, rep = report(capsys, "compute", "--knot", "1 1 1", "--cable", "1")
    assert code == 0 and rep["diagram"] == {"strands": 2, "word": "1 1 1"}


@pytest.mark.parametrize("argv", [
    ["compute", "--strands", "2", "--word", "3"],
    ["compute", "--strands", "2", "--word", "one"],
    ["compute", "--word", "1"],
    ["compute"],
    ["verify", "--suite", "nonsense"],
    ["verify"],
    ["compute", "--strands", "2", "--word", "1", "--max-cube", "0"],
    ["compute", "--strands", "2", "--word", "1", "--knot", "1"],
    ["compute", "--strand", "2", "--word", "1"],
])
def test_input_errors(capsys, argv):
    code, out, _ = call(capsys, *argv)
    assert code == 2 and out == ""


def test_resource_limit_flag(capsys):
    code, out, err = call(capsys, "compute", "--strands", "2", "--word", "1 1 1", "--max-cube", "4")
    assert code == 3 and "resource limit" in err


def test_resource_limit_environment(capsys, monkeypatch):
    monkeypatch.setenv("ANNKH_MAX_CUBE", "4")
    assert call(capsys, "compute", "--strands", "2", "--word", "1 1 1")[0] == 3
    assert call(capsys, "compute", "--strands", "2", "--word", "1 1 1", "--max-cube", "64")[0] == 0


def test_corpus_reproducible():
    a, b = corpus(7), corpus(7)
    assert a == b and len(a) == 50
    assert corpus(8) != a
    assert all(w.strands <= 4 and len(w.letters) <= 6 for w in a)


@pytest.mark.parametrize("suite", ["chain-relations", "trapezoid"])
def test_corpus_suites_single_word(capsys, suite):
    code, rep = report(capsys, "verify", "--suite", suite, "--strands", "3", "--word", "1 -2 1")
    assert code == 0 and len(rep["items"]) == 1


def test_schur_suite_with_cable(capsys):
    code, rep = report(capsys, "verify", "--suite", "schur", "--cable", "2")
    assert code == 0 and len(rep["runs"]) == 1


def test_failing_check_gives_exit_one(capsys, monkeypatch):
    import annkh.cli as cli
    monkeypatch.setitem(cli.HANDLERS, "compute", lambda cfg: {"checks": {"always": False}})
    code, rep = report(capsys, "compute", "--strands", "1", "--word", "")
    assert code == 1 and rep["ok"] is False


@settings(max_examples=20)
@given(braid_words())
def test_json_is_deterministic(item):
    text, strands = item
    cfg = RunConfig("compute", word=text, strands=strands)
    assert to_json(run(cfg)) == to_json(run(cfg))


def test_byte_identical_across_processes():
    argv = [sys.executable, "-m", "annkh", "current", "--strands", "3", "--word", "1 -2 1 2"]
    outs = {subprocess.run(argv, capture_output=True, env={**os.environ, "PYTHONHASHSEED": seed},
                           check=True).stdout for seed in ("1", "2")}
    assert len(outs) == 1
