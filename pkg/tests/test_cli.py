"""End-to-end command dispatch, JSON determinism, and exit codes."""

from __future__ import annotations

import json

import pytest

from kgraphkit import kgraph_to_dict, make_bouquet, make_cycle, make_omega
from kgraphkit.cli import main

from conftest import flip_presentation


@pytest.fixture()
def graph_files(tmp_path):
    files = {}
    for name, data in [
        ("c3", kgraph_to_dict(make_cycle(3))),
        ("bouquet2", kgraph_to_dict(make_bouquet(2))),
        ("flip", flip_presentation()),
        ("omega22", kgraph_to_dict(make_omega(2, (2, 2)))),
    ]:
        path = tmp_path / f"{name}.kg"
        path.write_text(json.dumps(data), encoding="utf-8")
        files[name] = str(path)
    return files


@pytest.fixture()
def tm_seeds(tmp_path):
    spec = {"handles": [{"kind": "substitution", "seed": "a", "shifts": 16,
                         "rules": {"a": "ab", "b": "ba"}}]}
    path = tmp_path / "tm.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    payload = json.loads(captured.out) if captured.out else None
    return code, payload, captured.out


class TestValidate:
    def test_valid_graph(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["validate", graph_files["omega22"]])
        assert code == 0
        assert payload["results"]["valid"] is True
        assert payload["results"]["vertices"] == 9

    def test_broken_square_set(self, capsys, tmp_path):
        pres = flip_presentation()
        del pres["squares"][1]
        bad = tmp_path / "bad.kg"
        bad.write_text(json.dumps(pres), encoding="utf-8")
        code, payload, _ = run(capsys, ["validate", str(bad)])
        assert code == 1
        codes = {v["code"] for v in payload["results"]["violations"]}
        assert "IncompleteSquares" in codes

    def test_unreadable_file(self, capsys, tmp_path):
        missing = tmp_path / "nope.kg"
        code, payload, _ = run(capsys, ["validate", str(missing)])
        assert code == 2

    def test_unknown_keys_rejected(self, capsys, tmp_path):
        pres = flip_presentation()
        pres["extra"] = 1
        bad = tmp_path / "extra.kg"
        bad.write_text(json.dumps(pres), encoding="utf-8")
        code, _, _ = run(capsys, ["validate", str(bad)])
        assert code == 2


class TestQueries:
    def test_paths(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["paths", graph_files["bouquet2"],
                                        "--degree", "2"])
        assert code == 0
        assert payload["results"] == ["a.a", "a.b", "b.a", "b.b"]

    def test_mce(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["mce", graph_files["omega22"],
                                        "e1_0_0", "e2_0_0"])
        assert code == 0
        assert len(payload["results"]) == 1

    def test_vee(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["vee", graph_files["bouquet2"],
                                        "v", "a", "b"])
        assert code == 0
        assert payload["results"] == ["v", "a", "b"]

    def test_exhaustive_pass_and_fail(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["exhaustive", graph_files["bouquet2"],
                                        "v", "a", "b"])
        assert code == 0 and payload["results"]["exhaustive"] is True
        code, payload, _ = run(capsys, ["exhaustive", graph_files["bouquet2"],
                                        "v", "a"])
        assert code == 1 and payload["results"]["witness"] == "b"

    def test_fe(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["fe", graph_files["bouquet2"], "v",
                                        "--cap", "1"])
        assert code == 0
        assert payload["results"] == [["v"], ["a", "b"]]


class TestAperiodic:
    def test_cycle_reports_periodic(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["aperiodic", graph_files["c3"],
                                        "--pair-bound", "3", "--tau-bound", "6"])
        assert code == 1
        assert payload["results"]["status"] == "PeriodicEvidence"
        assert payload["results"]["witness"] == ["e0.e1.e2", "v0"]

    def test_omega_certified(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["aperiodic", graph_files["omega22"],
                                        "--pair-bound", "1,1", "--tau-bound", "1,1"])
        assert code == 0
        assert payload["results"]["status"] == "AperiodicCertified"

    def test_deterministic_bytes(self, capsys, graph_files):
        argv = ["aperiodic", graph_files["c3"], "--pair-bound", "2",
                "--tau-bound", "4"]
        _, _, first = run(capsys, argv)
        _, _, second = run(capsys, argv)
        assert first == second


class TestBoundaryCheck:
    def test_omega_finite_handles(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["boundary-check", graph_files["omega22"],
                                        "--window", "2,2", "--fe-cap", "1,1",
                                        "--shift-bound", "2,2"])
        assert code == 0
        assert len(payload["results"]) == 9

    def test_thue_morse_seeds(self, capsys, graph_files, tm_seeds):
        code, payload, _ = run(capsys, ["boundary-check", graph_files["bouquet2"],
                                        "--window", "64", "--fe-cap", "1",
                                        "--shift-bound", "4", "--seeds", tm_seeds])
        assert code == 0
        assert all(r["boundary_condition"]["status"] == "pass"
                   for r in payload["results"])

    def test_cyclic_graph_needs_seeds(self, capsys, graph_files):
        code, _, _ = run(capsys, ["boundary-check", graph_files["bouquet2"]])
        assert code == 2


class TestRepVerify:
    def test_omega_boundary_tck_ck(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["rep-verify", graph_files["omega22"],
                                        "--family", "boundary", "--suite", "tck,ck",
                                        "--gen-cap", "1,1", "--fe-cap", "1,1",
                                        "--cap", "2,2", "--window", "2,2"])
        assert code == 0
        assert all(c["status"] == "pass" for c in payload["results"])

    def test_fock_ck_fails_for_bouquet(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["rep-verify", graph_files["bouquet2"],
                                        "--family", "fock", "--suite", "ck",
                                        "--cap", "4", "--gen-cap", "1"])
        assert code == 1
        bad = [c for c in payload["results"] if c["status"] == "fail"]
        assert bad and bad[0]["witness"] == "v"

    def test_bouquet_full_stack_with_seeds(self, capsys, graph_files, tm_seeds):
        code, payload, _ = run(capsys, [
            "rep-verify", graph_files["bouquet2"], "--family", "boundary",
            "--suite", "tck,exp,couniversal", "--cap", "6", "--gen-cap", "1",
            "--window", "128", "--seeds", tm_seeds, "--suite-size", "3"])
        assert code == 0, payload
        statuses = {c["status"] for c in payload["results"]}
        assert statuses <= {"pass", "heuristic-pass"}

    def test_lemma_suites_on_fock(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["rep-verify", graph_files["bouquet2"],
                                        "--suite", "lem1,lem3,phi2",
                                        "--cap", "4", "--gen-cap", "1"])
        assert code == 0
        assert all(c["status"] == "pass" for c in payload["results"])

    def test_diag_suite_on_omega_boundary(self, capsys, graph_files):
        code, payload, _ = run(capsys, ["rep-verify", graph_files["omega22"],
                                        "--family", "boundary", "--suite", "diag",
                                        "--cap", "2,2", "--gen-cap", "1,1",
                                        "--window", "2,2"])
        assert code == 0
        assert all(c["status"] == "pass" for c in payload["results"])

    def test_deterministic_bytes(self, capsys, graph_files):
        argv = ["rep-verify", graph_files["bouquet2"], "--suite", "tck,claim1",
                "--cap", "6", "--gen-cap", "1", "--suite-size", "2"]
        _, _, first = run(capsys, argv)
        _, _, second = run(capsys, argv)
        assert first == second

    def test_unknown_suite(self, capsys, graph_files):
        code, _, _ = run(capsys, ["rep-verify", graph_files["bouquet2"],
                                  "--suite", "nonsense"])
        assert code == 2
