from __future__ import annotations

import random

import pytest

from minicogent.refine.checks import corpus_source
from minicogent.refine.gen import gen_program
from minicogent.syntax import (
    BOOL, U8, U32, Abs, Prod, TVar, Tuple, Var, parse_expr, parse_program, pretty_print,
)
from minicogent.typecheck import (
    Kind, TypeCheckError, TypingCtx, bang_type, kind_of, typecheck_expr, typecheck_program,
)

ARR = Abs("Array", (U32,), False)
RO = Abs("Array", (U32,), True)


def test_kinds():
    assert kind_of({}, U32) == Kind.SHAREABLE
    assert kind_of({}, ARR) == Kind.LINEAR
    assert kind_of({}, RO) == Kind.SHAREABLE
    assert kind_of({}, Prod((U32, ARR))) == Kind.LINEAR
    assert kind_of({"a": Kind.LINEAR}, TVar("a")) == Kind.LINEAR


def test_kind_of_unbound_tyvar():
    with pytest.raises(TypeCheckError):
        kind_of({}, TVar("a"))


def test_bang_type():
    assert bang_type(U32) == U32
    assert bang_type(ARR) == RO
    rng = random.Random(3)
    for _ in range(200):
        t = Prod(tuple(rng.choice([U32, U8, BOOL, ARR, RO]) for _ in range(3)))
        assert bang_type(bang_type(t)) == bang_type(t)
        assert kind_of({}, bang_type(t)) == Kind.SHAREABLE


def test_linear_variable_used_twice():
    ctx = TypingCtx.of({}, {"x": ARR})
    with pytest.raises(TypeCheckError, match="twice"):
        typecheck_expr({}, ctx, Tuple((Var("x"), Var("x"))))


def test_shareable_variable_used_twice():
    ctx = TypingCtx.of({}, {"x": RO})
    assert typecheck_expr({}, ctx, Tuple((Var("x"), Var("x")))) == Prod((RO, RO))


def test_weakening_with_unused_shareable_binding():
    e = parse_expr("x + 1")
    base = typecheck_expr({}, TypingCtx.of({}, {"x": U32}), e)
    more = typecheck_expr({}, TypingCtx.of({}, {"x": U32, "spare": RO}), e)
    assert base == more == U32


def test_corpus_typechecks():
    for name in ("sum", "binsearch"):
        tp = typecheck_program(parse_program(corpus_source(name)))
        assert "length" in tp.signatures


def test_search_body_has_range_type():
    tp = typecheck_program(parse_program(corpus_source("binsearch")))
    _, t = tp.signatures["search"]
    assert t.ret == Prod((U32, U32, BOOL))


PRELUDE_TEXT = "abstract Array a\nforeign length a : (Array a)! -> U32\n"


@pytest.mark.parametrize("body, msg", [
    ("(arr, arr)", "twice"),
    ("let n = 3 in (n, n)", "type"),
    ("if True then (arr, 1) else (arr, 2)", None),
])
def test_linearity_in_functions(body, msg):
    src = PRELUDE_TEXT + f"fun f (arr : Array U32) -> (Array U32, U32) =\n  {body}\n"
    if msg is None:
        typecheck_program(parse_program(src))
    else:
        with pytest.raises(TypeCheckError, match=msg):
            typecheck_program(parse_program(src))


def test_linear_argument_must_be_used():
    src = PRELUDE_TEXT + "fun f (arr : Array U32) -> U32 =\n  3\n"
    with pytest.raises(TypeCheckError, match="never used"):
        typecheck_program(parse_program(src))


def test_branches_must_consume_the_same_linear_variables():
    src = PRELUDE_TEXT + (
        "fun drop (a : Array U32) -> U32 =\n  0\n"
        "fun f (arr : Array U32, c : Bool) -> U32 =\n  if c then drop arr else 0\n")
    with pytest.raises(TypeCheckError):
        typecheck_program(parse_program(src))


def test_let_bang_result_cannot_escape():
    src = PRELUDE_TEXT + "fun f (arr : Array U32) -> Array U32 =\n  let! (arr) y = arr in\n  arr\n"
    with pytest.raises(TypeCheckError, match="escape"):
        typecheck_program(parse_program(src))


def test_let_bang_observes_then_releases():
    src = PRELUDE_TEXT + (
        "fun f (arr : Array U32) -> (Array U32, U32) =\n  let! (arr) n = length[U32] arr in\n  (arr, n)\n")
    typecheck_program(parse_program(src))


def test_sum_with_array_used_twice_linearly_is_rejected():
    src = corpus_source("sum").replace("(arr : (Array U32)!)", "(arr : Array U32)")
    with pytest.raises(TypeCheckError):
        typecheck_program(parse_program(src))


def test_generated_programs_typecheck_and_round_trip():
    for seed in range(1000):
        p = gen_program(seed, 6)
        elaborated = typecheck_program(p).program
        assert typecheck_program(parse_program(pretty_print(p))).program == elaborated


def test_u8_width_flows_into_literal_arithmetic():
    src = "fun f (x : U8) -> U8 =\n  x + (200 + 100)\n"
    typecheck_program(parse_program(src))
    with pytest.raises(TypeCheckError, match="out of range"):
        typecheck_program(parse_program("fun f (x : U8) -> U8 =\n  x + 300\n"))
