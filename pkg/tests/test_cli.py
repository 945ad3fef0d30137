import json
import subprocess
import sys

import jsonschema
import pydot
import pytest

from tlsat.cli import main

from tests.test_solver import RESULT_SCHEMA
from tests.test_xpath import VERDICT_SCHEMA

WORKED = "p1 & <fc> count(ns*; p2) > 1"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sat_worked_example(capsys):
    code, out, _ = run(capsys, "sat", WORKED)
    assert code == 0
    assert out.startswith("SAT")
    assert "witness: 0" in out
    assert out.count("p2") == 2


def test_sat_json(capsys):
    code, out, _ = run(capsys, "sat", WORKED, "--format", "json")
    assert code == 0
    data = json.loads(out)
    jsonschema.validate(data, RESULT_SCHEMA)
    assert len(data["model"]["nodes"]) == 3


def test_unsat(capsys):
    code, out, _ = run(capsys, "sat", "p & ~p")
    assert code == 1
    assert out.startswith("UNSAT")


def test_round_limit(capsys):
    code, out, _ = run(capsys, "sat", "a & <fc> count(ns*; b) > 6", "--limit-rounds", "1")
    assert code == 3
    assert out.startswith("RESOURCE_EXHAUSTED")


def test_parse_error(capsys):
    code, _, err = run(capsys, "sat", "p &")
    assert code == 2
    assert "error" in err


def test_bad_limit(capsys):
    code, _, _ = run(capsys, "sat", "p", "--limit-rounds", "0")
    assert code == 2


def test_formula_from_file_and_stdin(tmp_path, capsys, monkeypatch):
    f = tmp_path / "f.txt"
    f.write_text(WORKED)
    assert run(capsys, "sat", "--file", str(f))[0] == 0
    import io
    monkeypatch.setattr(sys, "stdin", io.StringIO("p & ~p"))
    assert run(capsys, "sat", "-")[0] == 1


def test_model_dot(capsys):
    code, out, _ = run(capsys, "model", WORKED, "--format", "dot")
    assert code == 0
    (graph,) = pydot.graph_from_dot_data(out)
    assert len(graph.get_edges()) == 2


def test_model_json(capsys):
    code, out, _ = run(capsys, "model", WORKED, "--format", "json")
    data = json.loads(out)
    assert [n["label"] for n in data["nodes"]] == ["p1", "p2", "p2"]


def test_marks(capsys):
    code, out, _ = run(capsys, "sat", "a & m & <fc> (b & m)", "--marks", "m")
    assert code == 0
    assert out.count("{m}") == 2


def test_xpath_equiv_by_position(capsys):
    code, out, _ = run(capsys, "xpath", "equiv", "child::a[position()=5]",
                       "child::a[count(preceding-sibling::a)=4]")
    assert code == 0
    assert "HOLDS" in out


def test_xpath_disjoint(capsys):
    code, out, _ = run(capsys, "xpath", "disjoint", "child::a", "child::b")
    assert code == 0


def test_xpath_contains_fails_with_counterexample(capsys):
    code, out, _ = run(capsys, "xpath", "contains", "child::a", "child::a[count(child::b)<=0]",
                       "--format", "json")
    assert code == 1
    data = json.loads(out)
    jsonschema.validate(data, VERDICT_SCHEMA)
    assert data["result"] is False
    labels = {n["id"]: n["label"] for n in data["counterexample"]["nodes"]}
    assert labels[data["node"]] == "a"


def test_xpath_schema_file(tmp_path, capsys):
    schema = tmp_path / "html.type"
    schema.write_text("html[(p|a)*]; a[(b|span)*]; p[(a|b)*]")
    code, out, _ = run(capsys, "xpath", "empty", "child::a/descendant::a", "--schema", str(schema))
    assert code == 0
    schema.write_text("html[(p|a)*]; a[(a|b)*]; p[(a|b)*]")
    code, out, _ = run(capsys, "xpath", "empty", "child::a/descendant::a", "--schema", str(schema))
    assert code == 1


def test_xpath_usage_errors(capsys):
    assert run(capsys, "xpath", "contains", "child::a")[0] == 2
    assert run(capsys, "xpath", "empty", "child::a", "child::b")[0] == 2
    assert run(capsys, "xpath", "contains", "a[count(b) = count(c)]", "child::a")[0] == 2
    assert run(capsys, "xpath", "contains", "child::a", "sideways::b")[0] == 2


def test_xpath_dot_counterexample(capsys):
    code, out, _ = run(capsys, "xpath", "contains", "descendant::a", "child::a", "--format", "dot")
    assert code == 1
    (graph,) = pydot.graph_from_dot_data(out)
    assert graph.get_nodes()


def test_translate_formula(capsys):
    code, out, _ = run(capsys, "translate", "formula", WORKED, "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["k"] == 2
    assert len(data["lean"]) == 10


def test_translate_xpath(capsys):
    code, out, _ = run(capsys, "translate", "xpath", "child::a/child::b[count(child::e/descendant::h)>3]",
                       "--format", "json")
    data = json.loads(out)
    assert data["nominals"] == ["n0"]
    assert len(data["constraints"]) == 1


def test_translate_type(capsys):
    code, out, _ = run(capsys, "translate", "type", "a[b*] b{4,9}")
    assert code == 0
    assert out.startswith("type: a[b*] b{4,9}")


def test_crosscheck(capsys):
    code, out, _ = run(capsys, "crosscheck", WORKED, "--oracle-bound", "4")
    assert code == 0 and out.startswith("AGREE(SAT)")
    code, out, _ = run(capsys, "crosscheck", "p & ~p", "--oracle-bound", "5")
    assert code == 0 and out.startswith("AGREE(UNSAT-within-bound)")
    code, out, _ = run(capsys, "crosscheck", "a & <fc> count(ns*; b) > 4", "--oracle-bound", "3")
    assert code == 0 and out.startswith("AGREE(SAT-beyond-bound)")


def test_crosscheck_json(capsys):
    code, out, _ = run(capsys, "crosscheck", WORKED, "--format", "json", "--oracle-bound", "4")
    data = json.loads(out)
    assert data["verdict"] == "AGREE(SAT)"
    jsonschema.validate(data["solver"], RESULT_SCHEMA)


@pytest.mark.parametrize("seed", range(5))
def test_crosscheck_random(capsys, seed):
    from tlsat.formula import to_text
    from tests.strategies import random_formula
    code, out, _ = run(capsys, "crosscheck", to_text(random_formula(seed + 300)), "--oracle-bound", "4")
    assert code == 0 and out.startswith("AGREE")


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "tlsat.cli", "sat", "p & ~p"], capture_output=True, text=True)
    assert r.returncode == 1


def test_logging_env(monkeypatch, capsys):
    monkeypatch.setenv("TLSAT_LOG", "debug")
    assert main(["sat", "p"]) == 0


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "usage" in capsys.readouterr().out
