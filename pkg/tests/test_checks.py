from __future__ import annotations

import json

import pytest

from minicogent import shallow as sh
from minicogent.ffi import parse_with_prelude
from minicogent.refine import checks as ck
from minicogent.refine.faults import FAULTS, faulty_envs, swapped
from minicogent.refine.mono import mono_program
from minicogent.syntax import BOOL, U32
from minicogent.typecheck import typecheck_program
from minicogent.values import VU32

# inc and dec at different instances; the product breaks the symmetry so a
# swapped name map changes the result
POLY = """\
fun inc a (x : U32, y : a!) -> U32 =
  x + 1
fun dec a (x : U32, y : a!) -> U32 =
  x - 1
fun main (x : U32) -> U32 =
  inc[U32] (x, 0) * 2 + dec[Bool] (x, True)
"""


def test_small_runs_pass():
    for fn in (ck.check_thm1, ck.check_thm2, ck.check_thm3):
        rep = fn(None, seed=1, trials=40)
        assert rep.passed and rep.trials == 40, rep.counterexample


@pytest.mark.parametrize("fault", sorted(FAULTS))
def test_planted_put_faults_are_detected(fault):
    thm, _ = FAULTS[fault]
    fn = {"thm1": ck.check_thm1, "thm2": ck.check_thm2, "thm3": ck.check_thm3}[thm]
    rep = fn(None, seed=42, trials=200, envs=faulty_envs(fault))
    assert not rep.passed
    assert rep.counterexample["trial"] < 200
    assert "program" in rep.counterexample


def test_ill_typed_put_fails_the_typing_clause():
    rep = ck.check_thm1(None, seed=42, trials=200, envs=faulty_envs("ill-typed-put"))
    assert rep.clauses["vtyping_u"] > 0 and rep.clauses["eval_v"] == 0


def test_swapped_name_map_is_detected():
    prog = typecheck_program(parse_with_prelude(POLY)).program
    assert ck.check_thm4(prog, None, seed=0, trials=50).passed
    _, canon = mono_program(prog)
    bad = swapped(canon, ("inc", (U32,)), ("dec", (BOOL,)))
    rep = ck.check_thm4(prog, bad, seed=0, trials=50)
    assert rep.failures == 50 and rep.clauses["equal"] == 50


def test_wrong_shallow_embedding_is_detected():
    prog = ck.corpus_program("sum")
    assert ck.check_thm5((prog, "sum"), sh.sum_s, seed=0, trials=50).passed
    off_by_one = lambda xs: sh.SU32((sh.sum_s(xs).value + 1) & 0xFFFFFFFF)
    rep = ck.check_thm5((prog, "sum"), off_by_one, seed=0, trials=50)
    assert rep.failures == 50 and rep.clauses["rel_PS"] == 50


def test_empty_corpus_runs_no_trials():
    for fn in (ck.check_thm1, ck.check_thm2, ck.check_thm3):
        rep = fn([], seed=0, trials=100)
        assert rep.trials == 0 and rep.passed


def test_literal_program_passes_every_check():
    prog = ck.literal_program()
    for fn in (ck.check_thm1, ck.check_thm2, ck.check_thm3):
        assert fn([prog], seed=0, trials=5).passed
    assert ck.check_thm4(prog, None, seed=0, trials=5).passed
    rep = ck.check_combined(prog, lambda a: sh.SU32(42), seed=0, trials=5)
    assert rep.passed


def test_oracles():
    from minicogent.values import VProd, VWA
    xs = VWA(U32, (VU32(1), VU32(2), VU32(0xFFFFFFFF)))
    assert ck.sum_oracle(xs, VU32(2))
    assert not ck.sum_oracle(xs, VU32(3))
    arr = VWA(U32, (VU32(1), VU32(3), VU32(5)))
    assert ck.search_oracle(VProd((arr, VU32(3))), VU32(1))
    assert ck.search_oracle(VProd((arr, VU32(4))), VU32(3))
    assert not ck.search_oracle(VProd((arr, VU32(4))), VU32(1))


def test_combined_sum_and_search():
    rep = ck.check_combined((ck.corpus_program("sum"), "sum"), sh.sum_s, seed=3, trials=60, oracle=ck.sum_oracle)
    assert rep.passed, rep.counterexample
    rep = ck.check_combined((ck.corpus_program("binsearch"), "binary_search"),
                            lambda a: sh.binary_search_s(*a.items), seed=3, trials=60,
                            input_gen=ck.sorted_search_input, oracle=ck.search_oracle)
    assert rep.passed, rep.counterexample


def test_combined_catches_a_broken_put():
    src = "fun main (a : Array U32) -> Array U32 =\n  put[U32] (a, 0, 7)\n"
    prog = typecheck_program(parse_with_prelude(src)).program
    shallow = lambda xs: sh.put_s(xs, sh.SU32(0), sh.SU32(7))
    assert ck.check_combined(prog, shallow, seed=0, trials=40).passed
    rep = ck.check_combined(prog, shallow, seed=0, trials=40, envs=faulty_envs("noop-put-value"))
    assert not rep.passed


@pytest.mark.parametrize("op", ck.OPS)
def test_op_refinement_small(op):
    for b in ck.BOUNDARIES:
        rep = ck.check_op_refinement(op, b, seed=5, trials=60)
        assert rep.passed and rep.check == f"corres:{op}:{b}", rep.counterexample


def test_step_bound():
    assert [ck.step_bound(n) for n in (0, 1, 2, 3, 4, 5, 1024)] == [0, 1, 2, 3, 3, 4, 11]


def test_early_exit_and_binary_search_small():
    assert ck.check_early_exit(6, low_samples=4).passed
    rep = ck.check_binary_search(seed=9, trials=50, max_len=300)
    assert rep.passed, rep.counterexample


def test_obligations_report_mutant_detection():
    rep = ck.check_obligations(seed=42, trials=100)
    assert rep.passed
    for clause in ck.CLAUSES:
        assert 0 < rep.clauses[f"mutant:{clause}"] <= 200


def test_report_json_is_deterministic_without_timestamps():
    a = ck.reports_json(ck.run_suite("thm5", seed=7, trials=20), timestamp=False)
    b = ck.reports_json(ck.run_suite("thm5", seed=7, trials=20), timestamp=False)
    assert a == b and "elapsed" not in a
    data = json.loads(a)
    assert [r["check"] for r in data["reports"]] == ["thm5:sum", "thm5:binary_search", "thm5:main"]
    assert "elapsed" in ck.reports_json(ck.run_suite("thm5", seed=7, trials=2))


def test_unknown_suite():
    with pytest.raises(ValueError):
        ck.run_suite("thm9")
