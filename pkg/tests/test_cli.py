import json
import shutil

import pytest

from reservematch.cli import main

from conftest import fixture_path

TINY = ("universe_size=4,universes_per_size=5,exhaustive_size=1,individuals=4,capacity=2,"
        "q_max=3,vacancy_bound=2,laminar_samples=4,institution_universes=30,desk_instances=30,"
        "large_instances=2,large_individuals=4,random_orders=3")


@pytest.fixture(autouse=True)
def no_env_bounds(monkeypatch):
    monkeypatch.delenv("RESERVEMATCH_BOUNDS", raising=False)


@pytest.mark.parametrize("name,code", [
    ("two_person.json", 0), ("empty_prefs.json", 0), ("capacity_mismatch.json", 2),
    ("truncated.json", 3), ("missing.json", 3)])
def test_validate_exit_codes(name, code, capsys):
    assert main(["validate", str(fixture_path(name))]) == code


def test_capacity_mismatch_message(capsys):
    main(["validate", str(fixture_path("capacity_mismatch.json"))])
    err = capsys.readouterr().err
    assert "10" in err and "9" in err


def test_match_two_category_example(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    assert main(["match", str(fixture_path("two_person.json")), "--check-stability", "--check-envy",
                 "--trace", str(trace)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["matching"] == {"i": {"institution": "s", "category": "SC"},
                                  "j": {"institution": "s", "category": "Open"}}
    assert report["verdicts"]["stable"] and report["verdicts"]["envy_free"]
    lines = [json.loads(l) for l in trace.read_text().splitlines()]
    assert [l["proposer"] for l in lines] == ["i", "j", "j"]
    assert main(["replay", str(trace)]) == 0
    assert "proposes" in capsys.readouterr().out


def test_match_dereservation_fill_table(capsys):
    assert main(["match", str(fixture_path("dereservation_demo.json")), "--rule", "hT"]) == 0
    rows = json.loads(capsys.readouterr().out)["institutions"]["s"]["categories"]
    by = {r["category"]: r for r in rows}
    assert by["OBC"]["vacancies"] == 1
    assert by["DeReserved"]["capacity"] == 1 and by["DeReserved"]["transferred_in"] == 1


def test_match_pretty_and_empty(capsys):
    assert main(["match", str(fixture_path("empty_prefs.json")), "--pretty",
                 "--check-stability"]) == 0
    out = capsys.readouterr().out
    assert "unmatched" in out and '"stable": true' not in out and "stable: true" in out


def test_hierarchical_on_overlapping_types_is_invalid(capsys):
    assert main(["match", str(fixture_path("overlapping_types.json")), "--rule", "hNT"]) == 2
    assert main(["match", str(fixture_path("overlapping_types.json"))]) == 0


def test_audit_flags_broken_rule(capsys):
    code = main(["audit", str(fixture_path("broken_rule.json")),
                 "--checks", "substitutability,fairness"])
    assert code == 1
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    failing = {c["name"] for c in doc["checks"] if c["verdict"] == "fail"}
    assert any(n.startswith("substitutability") for n in failing)
    assert any(n.startswith("fairness") for n in failing)
    assert "witness" in captured.err


def test_audit_sound_instance_and_directory(tmp_path, capsys):
    for name in ("two_person.json", "dereservation_demo.json", "empty_prefs.json"):
        shutil.copy(fixture_path(name), tmp_path / name)
    assert main(["audit", str(fixture_path("two_person.json"))]) == 0
    capsys.readouterr()
    out = tmp_path / "report.json"
    assert main(["audit", str(tmp_path), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and {c["universe"] for c in doc["checks"]} >= {"two_person.json"}


def test_audit_argument_errors(capsys):
    assert main(["audit"]) == 2
    assert main(["audit", "--gen", "--checks", "nonsense"]) == 2
    assert main(["audit", "--gen", "--bounds", "capacity=x"]) == 2


def test_audit_generated_is_deterministic(capsys, monkeypatch):
    monkeypatch.setenv("RESERVEMATCH_BOUNDS", TINY)
    docs = []
    for _ in range(2):
        assert main(["audit", "--gen", "--seed", "42"]) == 0
        doc = json.loads(capsys.readouterr().out)
        for c in doc["checks"]:
            c.pop("elapsed", None)
        docs.append(doc)
    assert docs[0] == docs[1] and docs[0]["bounds"]["universe_size"] == 4


def test_gen_is_seeded_and_valid(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen", "-m", "2", "-n", "8", "-k", "2", "--seed", "5"]
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["validate", str(a)]) == 0


def test_gen_statutory_split(capsys):
    assert main(["gen", "-m", "1", "-n", "3", "--capacity", "200"]) == 0
    cap = json.loads(capsys.readouterr().out)["institutions"][0]["capacity"]
    assert [cap[c] for c in ("Open", "SC", "ST", "OBC", "EWS")] == [81, 30, 15, 54, 20]


def test_gen_rejects_types_without_individuals(capsys):
    assert main(["gen", "-k", "2", "-n", "0"]) == 2


def test_replay_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert main(["replay", str(bad)]) == 3
