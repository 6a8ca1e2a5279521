from __future__ import annotations

from minicogent.refine.checks import input_violations
from minicogent.refine.gen import World, gen_program, gen_value, images
from minicogent.syntax import BOOL, U8, U32, UNIT, Abs, Lit, Prod, pretty_print
from minicogent.typecheck import typecheck_program

import random

TYPES = (U32, U8, BOOL, UNIT, Abs("Array", (U32,), False), Abs("Array", (U8,), False),
         Prod((Abs("Array", (BOOL,), False), U32, Abs("Array", (U32,), False))))


def test_generated_values_are_related_at_every_layer():
    for seed in range(300):
        t = TYPES[seed % len(TYPES)]
        w = World.new()
        imgs = images(w, t, random.Random(seed), max_len=40)
        assert input_violations(w, t, imgs) == []


def test_gen_value_is_deterministic():
    t = Prod((Abs("Array", (U32,), False), U8))
    a, b = gen_value(t, "s", 20), gen_value(t, "s", 20)
    assert (a.v, a.u, a.low, a.s, a.amap) == (b.v, b.u, b.low, b.s, b.amap)
    assert a.store == b.store and a.heap.mem == b.heap.mem


def test_size_zero_program_is_a_literal_main():
    p = gen_program(7, 0)
    assert isinstance(p.funs["main"].body, Lit)
    typecheck_program(p)


def test_gen_program_is_deterministic_and_seed_sensitive():
    assert pretty_print(gen_program("x", 6)) == pretty_print(gen_program("x", 6))
    assert len({pretty_print(gen_program(s, 6)) for s in range(20)}) == 20
