import json

import pytest
from click.testing import CliRunner

from conftest import FIXTURES
from kglue.cli import main


def run(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env, catch_exceptions=False)


def failing(result):
    return {r["check"] for r in json.loads(result.stdout)["rows"] if not r["passed"]}


def test_count_tangent_sphere_json():
    res = run("count", "--example", "tangent-sphere", "--format", "json")
    assert res.exit_code == 0, res.output
    data = json.loads(res.stdout)
    assert data["schema_version"] == "1.0"
    assert data["total"] == {"numerator": 2, "denominator": 1}
    assert data["passed"] is True


def test_validate_is_deterministic():
    a = run("validate", "--example", "football", "--samples", "16", "--format", "json")
    b = run("validate", "--example", "football", "--samples", "16", "--format", "json")
    assert a.exit_code == 0 and a.stdout == b.stdout


def test_text_output_ends_with_overall_line():
    res = run("validate", "--example", "toy-chain", "--samples", "8")
    assert res.exit_code == 0
    assert res.stdout.strip().splitlines()[-1] == "overall: PASS"


def test_broken_cocycle_fixture():
    res = run("validate", "--file", str(FIXTURES / "broken_cocycle.yaml"), "--samples", "24", "--format", "json")
    assert res.exit_code == 1
    assert "cocycle" in failing(res)


def test_broken_section_fixture():
    res = run("validate", "--file", str(FIXTURES / "broken_section.yaml"), "--samples", "24", "--format", "json")
    assert res.exit_code == 1
    assert "section_compatibility" in failing(res)


def test_inflated_epsilon_fixture():
    res = run("reduce", "--file", str(FIXTURES / "inflated_epsilon.yaml"), "--samples", "24", "--format", "json")
    assert res.exit_code == 1
    assert "collar_compatibility" in failing(res)


def test_broken_tau_fixture():
    res = run("glue", "--file", str(FIXTURES / "broken_tau.yaml"), "--samples", "12", "--format", "json")
    assert res.exit_code == 1
    assert {"round_trip", "tau_restriction"} <= failing(res)


def test_football_params_from_file_and_override():
    res = run("weights", "--file", str(FIXTURES / "football.yaml"), "--samples", "12", "--format", "json")
    assert res.exit_code == 0, res.output
    assert set(json.loads(res.stdout)["weights"]["12"]) <= {"1/15", "1/3", "1/5"}
    res = run("weights", "--file", str(FIXTURES / "football.yaml"), "--p", "2", "--q", "3", "--samples", "12",
              "--format", "json")
    assert set(json.loads(res.stdout)["weights"]["12"]) <= {"1/6", "1/2", "1/3"}


def test_two_circle_weights():
    res = run("weights", "--example", "two-circle", "--format", "json")
    assert res.exit_code == 0
    data = json.loads(res.stdout)
    assert len(data["points"]) == 20
    assert all(r["passed"] for r in data["rows"])


def test_euler_sphere_bundle():
    res = run("euler", "--example", "sphere-euler", "--format", "json")
    assert res.exit_code == 0, res.output
    assert json.loads(res.stdout)["total"]["numerator"] == 2


@pytest.mark.parametrize("args,code", [
    (["count", "--example", "klein-bottle"], 2),
    (["count"], 2),
    (["count", "--example", "tangent-sphere", "--magnitude", "1.5"], 6),
    (["validate", "--example", "football", "--p", "2", "--q", "4"], 2),
    (["validate", "--example", "toy-chain", "--samples", "0"], 2),
    (["validate", "--file", "/nonexistent/run.yaml"], 2),
])
def test_error_exit_codes(args, code):
    res = run(*args)
    assert res.exit_code == code
    assert "error" in res.stderr


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("example: [unclosed\n")
    assert run("validate", "--file", str(path)).exit_code == 2
    path.write_text("example: football\nparams: {p: 2, q: 3}\ncolour: red\n")
    res = run("validate", "--file", str(path))
    assert res.exit_code == 2 and "colour" in res.stderr


def test_out_writes_json_file(tmp_path):
    target = tmp_path / "report.json"
    res = run("reduce", "--example", "tangent-sphere", "--samples", "16", "--format", "json", "--out", str(target))
    assert res.exit_code == 0
    data = json.loads(target.read_text())
    assert data["title"] and "eps" in data
    assert "overall: PASS" in res.stdout


def test_thread_budget_env_keeps_output():
    args = ["validate", "--example", "tangent-sphere", "--samples", "16", "--format", "json"]
    assert run(*args, env={"KGLUE_THREADS": "1"}).stdout == run(*args, env={"KGLUE_THREADS": "4"}).stdout
