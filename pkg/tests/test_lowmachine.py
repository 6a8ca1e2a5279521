from __future__ import annotations

import random
import struct

import pytest

from minicogent import lowmachine as lm
from minicogent import shallow as sh
from minicogent.lowmachine import (
    Failed, LBool, LFunId, LowFault, LowHeap, LPtr, LStructArray, LTuple, LU8, LU32, LUnit, Ok,
)
from minicogent.syntax import BOOL, U8, U32
from minicogent.values import Store, UProd, UU8, UU32, UWA

MASK = 0xFFFFFFFF


def heap_with(xs, elem=U32):
    h = LowHeap(1 << 12)
    hdr, vals = lm.alloc_array(h, elem, xs)
    return h, LPtr(hdr), vals


def add_body(heap, arg):
    x, acc, _ = arg.items
    return LU32((x.value + acc.value) & MASK)


def incacc_body(heap, arg):
    x, acc, _ = arg.items
    return LTuple((LU32((x.value + 1) & MASK), LU32((acc.value + x.value) & MASK)))


TABLE = {0: add_body, 1: incacc_body,
         2: lambda heap, arg: LBool(0),
         3: lambda heap, arg: LU32(arg.items[0].value + 1),
         4: lambda heap, arg: LBool(1)}


def test_word_round_trip_and_faults():
    h = LowHeap(0x140)
    base = h.alloc(8, "u32")
    h2 = lm.write_word(h, base + 4, 0xDEADBEEF)
    assert lm.read_word(h2, base + 4) == 0xDEADBEEF
    assert lm.read_word(h, base + 4) == 0  # write returned a new heap
    with pytest.raises(LowFault):
        lm.read_word(h, 0x140)
    with pytest.raises(LowFault, match="unaligned"):
        lm.write_word(h, base + 1, 1)
    with pytest.raises(LowFault, match="unallocated"):
        lm.read_word(h, base + 8)


def test_little_endian_layout_hexdump():
    h, arr, vals = heap_with([1, 0x01020304])
    assert vals == lm.HEAP_START
    # hand-derived: two little-endian words, then the header (len 2, vals 0x100)
    assert lm.hexdump(h, 0x100, 0x110) == "00000100: 01 00 00 00 04 03 02 01 02 00 00 00 00 01 00 00"


def test_length():
    for xs in ([7, 8, 9], []):
        h, arr, _ = heap_with(xs)
        out = lm.low_length(h, arr)
        assert out == Ok(LU32(len(xs)), h)
    assert isinstance(lm.low_length(LowHeap(64), LPtr(0x40)), Failed)


def test_get():
    h, arr, _ = heap_with([10, 20, 30])
    assert lm.low_get(h, arr, LU32(1), LU32(0)).value == LU32([10, 20, 30][1])
    h0, empty, _ = heap_with([])
    assert lm.low_get(h0, empty, LU32(5), LU32(42)).value == LU32(42)
    h1, one, _ = heap_with([10])
    assert lm.low_get(h1, one, LU32(0), LU32(9)).value == LU32(10)


def test_put_in_and_out_of_bounds():
    h, arr, vals = heap_with([0, 0])
    out = lm.low_put(h, arr, LU32(1), LU32(7))
    assert lm.read_array(out.heap, arr) == [0, 7]  # put_s [0,0] 1 7
    assert lm.low_put(h, arr, LU32(2), LU32(7)).heap == h
    assert lm.low_put(h, arr, LU32(MASK), LU32(7)).heap == h
    once = lm.low_put(h, arr, LU32(0), LU32(1)).heap
    twice = lm.low_put(once, arr, LU32(0), LU32(2)).heap
    assert lm.read_array(twice, arr) == [2, 0]


@pytest.mark.parametrize("elem, size, new", [(U32, 4, LU32(0x01010101)), (U8, 1, LU8(1)), (BOOL, 1, LBool(1))])
def test_put_changes_exactly_one_element(elem, size, new):
    rng = random.Random(size)
    for _ in range(50):
        n = rng.randint(1, 20)
        h, arr, vals = heap_with([0] * n, elem)
        i = rng.randrange(n)
        out = lm.low_put(h, arr, LU32(i), new).heap
        diff = [a for a in range(h.size) if h.mem[a] != out.mem[a]]
        assert diff == list(range(vals + size * i, vals + size * (i + 1)))


def test_fold():
    h, arr, _ = heap_with([1, 2, 3])
    run = lambda frm, to, acc=0: lm.low_fold(h, LFunId(0), LU32(acc), arr, LU32(frm), LU32(to), LUnit(), TABLE).value
    assert run(0, 3) == LU32(6)
    assert run(3, 1, 5) == LU32(5)
    assert run(0, 99) == LU32(6)


def test_fold_matches_shallow_slices():
    rng = random.Random(11)
    add = sh.SFun("add", sh.add_s)
    for _ in range(200):
        xs = [rng.getrandbits(32) for _ in range(rng.randint(0, 12))]
        frm, to = rng.randint(0, 14), rng.randint(0, 14)
        h, arr, _ = heap_with(xs)
        low = lm.low_fold(h, LFunId(0), LU32(0), arr, LU32(frm), LU32(to), LUnit(), TABLE).value
        s = sh.fold_s(add, sh.SU32(0), sh.to_slist(xs), sh.SU32(frm), sh.SU32(to), sh.SUnit())
        assert low.value == s.value == sum(xs[frm:to]) & MASK


def test_mapaccum():
    h, arr, _ = heap_with([1, 2])
    out = lm.low_mapaccum(h, LFunId(1), LU32(0), arr, LU32(0), LU32(2), LUnit(), TABLE)
    assert out.value == LTuple((arr, LU32(3))) and lm.read_array(out.heap, arr) == [2, 3]
    empty = lm.low_mapaccum(h, LFunId(1), LU32(4), arr, LU32(2), LU32(2), LUnit(), TABLE)
    assert empty.value.items[1] == LU32(4) and empty.heap == h
    h2, arr2, _ = heap_with([5, 6])
    part = lm.low_mapaccum(h2, LFunId(1), LU32(0), arr2, LU32(1), LU32(2), LUnit(), TABLE)
    assert lm.read_array(part.heap, arr2) == [5, 7] and part.value.items[1] == LU32(6)


def test_repeat():
    h = LowHeap(64)
    assert lm.low_repeat(h, LU32(0), LFunId(2), LFunId(3), LU32(9), LUnit(), TABLE).value == LU32(9)
    assert lm.low_repeat(h, LU32(5), LFunId(4), LFunId(3), LU32(9), LUnit(), TABLE).value == LU32(9)
    c = lm.Counter()
    assert lm.low_repeat(h, LU32(5), LFunId(2), LFunId(3), LU32(0), LUnit(), TABLE, c).value == LU32(5)
    assert c.steps == 5


def test_dispatch():
    h = LowHeap(64)
    out = lm.dispatch(TABLE, LFunId(0), LTuple((LU32(2), LU32(3), LUnit())), h)
    assert out == Ok(LU32(5), h)
    assert isinstance(lm.dispatch(TABLE, LFunId(999), LUnit(), h), Failed)


def test_rel_VC():
    assert lm.rel_VC(LStructArray(2, 0x100), UWA(U32, 2, 5), {5: 0x100})
    assert not lm.rel_VC(LStructArray(3, 0x100), UWA(U32, 2, 5), {5: 0x100})
    assert lm.rel_VC(LU32(5), UU32(5), {})
    assert not lm.rel_VC(LU8(5), UU32(5), {})
    assert lm.rel_VC(LTuple((LU32(1), LU8(2))), UProd((UU32(1), UU8(2))), {})


def test_rel_HC():
    assert lm.rel_HC(LowHeap(64), Store(), {})
    h = LowHeap(0x140)
    a = h.alloc(4, "u32")
    h.mem[a:a + 4] = struct.pack("<I", 7)
    mu = Store({3: UU32(7)})
    assert lm.rel_HC(h, mu, {3: a})
    h.mem[a] ^= 1
    assert not lm.rel_HC(h, mu, {3: a})


def test_rel_HC_requires_exact_allocation_cover():
    h = LowHeap(0x140)
    a = h.alloc(4, "u32")
    h.alloc(4, "u32")  # allocated but unmapped
    assert not lm.rel_HC(h, Store({0: UU32(0)}), {0: a})


def test_machine_ops_never_fail_on_allocated_arrays():
    rng = random.Random(5)
    for _ in range(300):
        xs = [rng.getrandbits(32) for _ in range(rng.randint(0, 16))]
        h, arr, _ = heap_with(xs)
        i = LU32(rng.choice([0, len(xs), rng.getrandbits(32)]))
        for out in (lm.low_length(h, arr), lm.low_get(h, arr, i, LU32(0)), lm.low_put(h, arr, i, LU32(1)),
                    lm.low_fold(h, LFunId(0), LU32(0), arr, i, LU32(rng.getrandbits(32)), LUnit(), TABLE)):
            assert isinstance(out, Ok)
            assert lm.heap_valid(out.heap)
