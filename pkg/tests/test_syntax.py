from __future__ import annotations

import random

import pytest

from minicogent.refine.checks import corpus_source
from minicogent.syntax import (
    BOOL, U8, U32, UNIT, Abs, Fun, If, Prod, SyntaxError_, TVar, bang, instantiate_type,
    parse_expr, parse_program, pretty_print, subst_type,
)


def test_single_definition():
    p = parse_program("fun add (x:U32, y:U32) -> U32 = x + y")
    assert list(p.funs) == ["add"]
    assert p.funs["add"].type == Fun(Prod((U32, U32)), U32)


def test_sum_source_has_foreign_decls_and_two_functions():
    p = parse_program(corpus_source("sum"))
    assert sorted(p.foreign) == ["fold", "length"]
    assert sorted(p.fundefs) == ["add", "sum"]


def test_truncated_source_is_a_syntax_error():
    with pytest.raises(SyntaxError_) as exc:
        parse_program("fun f")
    assert exc.value.line >= 1


@pytest.mark.parametrize("src", [
    "fun f (x : U32) -> U32 = y",
    "fun f (x : U32) -> U32 = g x",
    "fun f (x : U32) -> U32 = x\nfun f (x : U32) -> U32 = x",
])
def test_unbound_and_duplicate_names_are_rejected(src):
    with pytest.raises(SyntaxError_):
        parse_program(src)


@pytest.mark.parametrize("name", ["sum", "binsearch"])
def test_corpus_round_trips_textually(name):
    src = corpus_source(name)
    assert pretty_print(parse_program(src)) == src


@pytest.mark.parametrize("name", ["sum", "binsearch"])
def test_parse_print_parse_is_parse(name):
    p = parse_program(corpus_source(name))
    assert parse_program(pretty_print(p)) == p


def test_empty_program_prints_empty():
    assert pretty_print(parse_program("")) == ""


def test_foreign_decl_prints_on_one_line():
    text = pretty_print(parse_program("foreign length a : (Array a)! -> U32"))
    assert text.strip().count("\n") == 0
    assert text.startswith("foreign length")


def test_multiway_if_desugars_to_nested_if():
    multi = parse_expr("if | x < v -> 1 | x > v -> 2 | else -> 3")
    nested = parse_expr("if x < v then 1 else if x > v then 2 else 3")
    assert multi == nested
    assert isinstance(multi, If) and isinstance(multi.orelse, If)


def test_instantiate_substitutes():
    a = TVar("a")
    assert instantiate_type(Fun(a, a), [U32]) == Fun(U32, U32)
    assert instantiate_type(Abs("Array", (a,), False), [U32]) == Abs("Array", (U32,), False)


def test_instantiate_arity_mismatch():
    with pytest.raises(ValueError):
        instantiate_type(TVar("a"), [])


def test_bang_is_idempotent_and_resolves_after_substitution():
    t = Abs("Array", (TVar("a"),), False)
    assert bang(bang(t)) == bang(t)
    assert subst_type(bang(TVar("a")), {"a": Abs("Array", (U32,), False)}) == Abs("Array", (U32,), True)


def _rand_type(rng: random.Random, depth: int):
    if depth == 0 or rng.random() < 0.3:
        return rng.choice([U32, U8, BOOL, UNIT, TVar("a"), TVar("b")])
    k = rng.randrange(3)
    if k == 0:
        return Prod(tuple(_rand_type(rng, depth - 1) for _ in range(rng.randint(2, 3))))
    if k == 1:
        return Fun(_rand_type(rng, depth - 1), _rand_type(rng, depth - 1))
    return Abs("Array", (_rand_type(rng, depth - 1),), rng.random() < 0.5)


def test_instantiation_is_compositional():
    rng = random.Random(7)
    for _ in range(300):
        items = tuple(_rand_type(rng, 4) for _ in range(2))
        args = [U32, BOOL]
        whole = instantiate_type(Prod(items), args, ["a", "b"])
        parts = Prod(tuple(instantiate_type(t, args, ["a", "b"]) for t in items))
        assert whole == parts
