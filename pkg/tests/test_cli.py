import json

import pytest

from markovlogic.cli import main

SWAP = {
    "states": 2,
    "kernel": [["1/2", "1/2"], ["1/2", "1/2"]],
    "map": [1, 0],
    "valuation": {"p": [0], "q": [0, 1]},
}
CONST = {"states": 2, "kernel": [["1/2", "1/2"], ["1/2", "1/2"]], "map": [0, 0]}


@pytest.fixture
def swap_file(tmp_path):
    path = tmp_path / "swap2.json"
    path.write_text(json.dumps(SWAP))
    return str(path)


@pytest.fixture
def const_file(tmp_path):
    path = tmp_path / "const2.json"
    path.write_text(json.dumps(CONST))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParseCmd:
    def test_ok(self, capsys):
        code, out, _ = run(capsys, "parse", "-f", "L[1/2] (p & O q)")
        assert code == 0 and "L[1/2] (p & O q)" in out

    def test_json_roundtrip(self, capsys):
        code, out, _ = run(capsys, "parse", "--json", "-f", "AndBelow[s < 1]{ L[s] p }")
        doc = json.loads(out)
        assert code == 0 and doc["ast"]["family"] == "threshold"

    def test_threshold_error(self, capsys):
        code, _, err = run(capsys, "parse", "-f", "L[3/2] p")
        assert code == 2 and "threshold" in err


class TestCheckCmd:
    def test_extension_and_world(self, capsys, swap_file):
        code, out, _ = run(capsys, "check", swap_file, "-f", "L[1/2] p", "-w", "0")
        assert code == 0
        assert "extension: {0,1}" in out and "world 0: true" in out

    def test_false_world_exit(self, capsys, swap_file):
        code, out, _ = run(capsys, "check", swap_file, "-f", "L[3/4] p", "-w", "1")
        assert code == 1 and "world 1: false" in out

    def test_missing_atom(self, capsys, swap_file):
        code, _, err = run(capsys, "check", swap_file, "-f", "zzz")
        assert code == 2 and "zzz" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "check", "/nonexistent.json", "-f", "p")
        assert code == 2


class TestFrameValidCmd:
    def test_valid(self, capsys, swap_file):
        code, out, _ = run(capsys, "frame-valid", swap_file, "-f", "p -> p")
        assert code == 0 and "valid" in out

    def test_counterexample_replays_through_check(self, capsys, const_file, tmp_path):
        code, out, _ = run(capsys, "frame-valid", const_file, "--json", "-f", "L[1] O p -> O L[1] p")
        assert code == 1
        doc = json.loads(out)
        ce = doc["counterexample"]
        # feed the counterexample back through `check`
        model = dict(CONST)
        model["valuation"] = ce["valuation"]
        path = tmp_path / "replay.json"
        path.write_text(json.dumps(model))
        code2, out2, _ = run(capsys, "check", str(path), "-f", ce["formula"], "-w", str(ce["world"]))
        assert code2 == 1 and f"world {ce['world']}: false" in out2

    def test_cap(self, capsys, swap_file):
        code, _, err = run(capsys, "frame-valid", swap_file, "--cap", "2", "-f", "p & q")
        assert code == 3 and "cap" in err


class TestClassifyCmd:
    def test_swap_flags(self, capsys, swap_file):
        code, out, _ = run(capsys, "classify", swap_file, "--json")
        doc = json.loads(out)
        assert code == 0
        assert doc["measure_preserving"] and doc["dps"] and doc["ads"]
        assert doc["ergodic"] is True and doc["stationary"] is None

    def test_human_lines(self, capsys, swap_file):
        code, out, _ = run(capsys, "classify", swap_file)
        assert "measure_preserving: true" in out and "stationary: n/a" in out


class TestCorrespondCmd:
    def test_exhaustive_ok(self, capsys):
        code, out, _ = run(capsys, "correspond", "ergodic", "--exhaustive", "-n", "2", "--denom", "2")
        assert code == 0 and "disagree 0" in out

    def test_random_json(self, capsys):
        code, out, _ = run(capsys, "correspond", "stationary", "--random", "-n", "3",
                           "--denom", "3", "-N", "25", "--seed", "7", "--json")
        doc = json.loads(out)
        assert code == 0 and doc["total"] == 25 and doc["disagree"] == 0

    def test_unknown_property(self, capsys):
        code, _, err = run(capsys, "correspond", "bogus", "--random")
        assert code == 2 and "unknown property" in err


class TestProveCmd:
    def test_builtin_ok(self, capsys):
        code, out, _ = run(capsys, "prove", "--builtin")
        assert code == 0 and "garch_closure: ok" in out

    def test_failing_file(self, capsys, tmp_path):
        doc = {"lemmas": [{
            "name": "broken", "system": "H_DPL",
            "steps": [{"id": 1, "formula": "p -> q", "rule": "Axiom", "axiom": "Taut"}],
        }]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run(capsys, "prove", str(path))
        assert code == 1 and "broken: step 1" in out

    def test_json_schema(self, capsys):
        code, out, _ = run(capsys, "prove", "--builtin", "--json")
        doc = json.loads(out)
        assert code == 0 and all(entry["ok"] for entry in doc["lemmas"])

    def test_requires_input(self, capsys):
        code, _, err = run(capsys, "prove")
        assert code == 2

    def test_malformed_file(self, capsys, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{not json")
        code, _, err = run(capsys, "prove", str(path))
        assert code == 2
