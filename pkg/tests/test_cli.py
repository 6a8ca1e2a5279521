from __future__ import annotations

import io
import json

import pytest

from minicogent.cli import main
from minicogent.refine.checks import corpus_source


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


@pytest.fixture
def sum_file(tmp_path):
    p = tmp_path / "sum.cog"
    p.write_text(corpus_source("sum"))
    return str(p)


@pytest.fixture
def search_file(tmp_path):
    p = tmp_path / "binsearch.cog"
    p.write_text(corpus_source("binsearch"))
    return str(p)


@pytest.mark.parametrize("layer", ["shallow", "value", "update", "low"])
def test_run_sum_at_every_layer(sum_file, layer):
    code, text = run(["run", sum_file, "[1, 2, 3]", "--layer", layer])
    assert code == 0 and text.splitlines()[0] == "6"


def test_run_search_json(search_file):
    code, text = run(["run", search_file, "[1, 3, 5, 7]", "5", "--layer", "low", "--format", "json"])
    data = json.loads(text)
    assert code == 0 and data["result"] == 2 and data["entry"] == "binary_search"
    assert len(data["heap_digest"]) == 16


def test_run_update_digest_is_stable(sum_file):
    a = run(["run", sum_file, "[4, 5]", "--layer", "update"])
    b = run(["run", sum_file, "[4, 5]", "--layer", "update"])
    assert a == b and "store digest" in a[1]


def test_bad_layer_is_a_usage_error(sum_file):
    with pytest.raises(SystemExit) as exc:
        main(["run", sum_file, "--layer", "bogus"])
    assert exc.value.code == 2


def test_missing_file(tmp_path):
    assert run(["typecheck", str(tmp_path / "nope.cog")])[0] == 2


def test_typecheck_exit_codes(tmp_path, sum_file):
    assert run(["typecheck", sum_file]) == (0, "ok: 4 functions\n")  # two foreign, two defined
    bad = tmp_path / "alias.cog"
    bad.write_text("fun f (x : Array U32) -> (Array U32, Array U32) =\n  (x, x)\n")
    assert run(["typecheck", str(bad)])[0] == 1
    junk = tmp_path / "junk.cog"
    junk.write_text("fun f (x : U32 -> \n")
    assert run(["typecheck", str(junk)])[0] == 1


def test_typecheck_json_lists_functions(sum_file):
    code, text = run(["typecheck", sum_file, "--format", "json"])
    assert code == 0 and "sum" in json.loads(text)["functions"]


@pytest.mark.parametrize("name", ["sum", "binsearch"])
def test_demo(name):
    code, text = run(["demo", name])
    assert code == 0
    assert "FAILS" not in text and text.count("holds") >= 6


def test_demo_custom_input():
    code, text = run(["demo", "binsearch", "[2, 4, 6]", "5"])
    assert code == 0 and "3" in text


def test_unknown_demo():
    assert run(["demo", "bogus"])[0] == 2


def test_check_json_is_reproducible():
    argv = ["check", "thm3", "--trials", "5", "--seed", "11", "--format", "json", "--no-timestamp"]
    a, b = run(argv), run(argv)
    assert a == b and a[0] == 0
    assert json.loads(a[1])["reports"][0]["trials"] == 5


def test_seed_from_environment(monkeypatch):
    argv = ["check", "thm1", "--trials", "3", "--format", "json", "--no-timestamp"]
    monkeypatch.setenv("MINICOGENT_SEED", "17")
    assert json.loads(run(argv)[1])["reports"][0]["seed"] == 17
    assert json.loads(run(argv + ["--seed", "5"])[1])["reports"][0]["seed"] == 5
    monkeypatch.setenv("MINICOGENT_SEED", "x")
    assert run(argv)[0] == 2


def test_invalid_trials():
    assert run(["check", "thm1", "--trials", "0"])[0] == 2
