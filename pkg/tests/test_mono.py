from __future__ import annotations

import pytest

from minicogent.dynsem import apply_v, eval_v
from minicogent.ffi import DEFAULT_ENVS, parse_with_prelude
from minicogent.refine.checks import corpus_program
from minicogent.refine.mono import MonoError, NameMap, mangle_type, mono_expr, mono_name, mono_program, mono_value
from minicogent.syntax import BOOL, U8, U32, Abs, Prod, parse_expr
from minicogent.typecheck import typecheck_program
from minicogent.values import VFun, VProd, VU32

POLY = """\
fun inc a (x : U32, y : a!) -> U32 =
  x + 1
fun dec a (x : U32, y : a!) -> U32 =
  x - 1
fun main (x : U32) -> U32 =
  inc[U32] (x, 0) * 2 + dec[Bool] (x, True)
"""


def test_mono_names_are_canonical_and_injective():
    assert mono_name("f", ()) == "f"
    assert mono_name("get", (U32,)) == "get_U32"
    arr, ro = Abs("Array", (U8,), False), Abs("Array", (U8,), True)
    spelled = {mangle_type(t) for t in (U32, U8, BOOL, arr, ro, Prod((U32, U8)), Prod((Prod((U32,)), U8)))}
    assert len(spelled) == 7
    with pytest.raises(MonoError, match="injective"):
        NameMap({("f", (U32,)): "g", ("f", (U8,)): "g"})


def test_mono_expr_is_identity_without_instantiations():
    e = parse_expr("let (a, b) = (1, 2) in if a < b then a else b")
    assert mono_expr(NameMap(), e) == e


def test_mono_value_renames_functions_only():
    N = NameMap({("add", ()): "add", ("inc", (U32,)): "inc_U32"})
    assert mono_value(N, VU32(3)) == VU32(3)
    assert mono_value(N, VProd((VFun("inc", (U32,)), VU32(1)))) == VProd((VFun("inc_U32", ()), VU32(1)))


def test_sum_program_specialises_fold():
    mp, canon = mono_program(corpus_program("sum"))
    assert ("fold", (U32, U32, Prod(()))) in canon or any(k[0] == "fold" for k, _ in canon.items())
    for d in mp.decls:
        assert not getattr(d, "tyvars", ())
    typecheck_program(mp)


def test_polymorphic_copies_agree_with_the_source():
    prog = typecheck_program(parse_with_prelude(POLY)).program
    mp, canon = mono_program(prog)
    assert {"inc_U32", "dec_Bool", "main"} <= set(mp.funs)
    for x in (0, 5, 0xFFFFFFFF):
        assert apply_v(DEFAULT_ENVS.v, mp, "main", VU32(x)) == apply_v(DEFAULT_ENVS.v, prog, "main", VU32(x))


def test_explicit_name_map_is_used_at_call_sites():
    prog = typecheck_program(parse_with_prelude(POLY)).program
    _, canon = mono_program(prog)
    table = dict(canon.table)
    a, b = ("inc", (U32,)), ("dec", (BOOL,))
    table[a], table[b] = table[b], table[a]
    mp, _ = mono_program(prog, NameMap(table))
    assert apply_v(DEFAULT_ENVS.v, mp, "main", VU32(10)) != apply_v(DEFAULT_ENVS.v, prog, "main", VU32(10))


def test_unknown_root_is_rejected():
    with pytest.raises(MonoError):
        mono_program(corpus_program("sum"), roots=[("nope", ())])
