from __future__ import annotations

import json

import pytest

from minicogent.dynsem import (
    EvalError, TypingReject, apply_u, apply_v, corr, eval_u, eval_v, frame, frame_violation,
    vtyping_u, vtyping_v,
)
from minicogent.ffi import DEFAULT_ENVS, PRELUDE, parse_with_prelude
from minicogent.refine.checks import corpus_program
from minicogent.syntax import U32, Abs, Lit, Prod, parse_expr
from minicogent.typecheck import typecheck_program
from minicogent.values import (
    Footprint, Store, UBool, ULoc, UProd, UU32, UWA, VBool, VProd, VU32, VWA,
)

ARR = Abs("Array", (U32,), False)
RO = Abs("Array", (U32,), True)
XV, XU = DEFAULT_ENVS.v, DEFAULT_ENVS.u


def stored(xs, hdr=0, base=10):
    """Store with an array header at ``hdr`` and elements from ``base``."""
    cells = {hdr: UWA(U32, len(xs), base)}
    cells.update({base + i: UU32(x) for i, x in enumerate(xs)})
    return Store(cells)


def test_literal_evaluates_to_itself():
    assert eval_v(None, {}, Lit(5, U32)) == VU32(5)
    mu = stored([1, 2])
    u, mu2 = eval_u(None, {}, mu, Lit(5, U32))
    assert u == UU32(5) and mu2 == mu


def test_add_at_both_semantics():
    prog = corpus_program("sum")
    assert apply_v(XV, prog, "add", VProd((VU32(3), VU32(4), VProd(())))) == VU32(7)


def test_sum_over_value_array():
    prog = corpus_program("sum")
    # oracle: built-in list sum
    assert apply_v(XV, prog, "sum", VWA(U32, (VU32(1), VU32(2), VU32(3)))) == VU32(sum([1, 2, 3]))


def test_sum_over_stored_array_leaves_store_unchanged():
    prog = corpus_program("sum")
    mu = stored([1, 2, 3])
    u, mu2 = apply_u(XU, prog, "sum", mu, ULoc(0))
    assert u == UU32(6) and mu2 == mu


def test_put_updates_one_stored_element():
    prog = typecheck_program(parse_with_prelude(
        "fun f (a : Array U32) -> Array U32 =\n  put[U32] (a, 1, 7)\n")).program
    mu = stored([0, 0])
    u, mu2 = apply_u(XU, prog, "f", mu, ULoc(0))
    expected = [0, 0]
    expected[1] = 7  # list-update oracle
    assert u == ULoc(0)
    assert [mu2[10 + i].value for i in range(2)] == expected
    assert mu[11] == UU32(0)  # input store untouched


def test_evaluation_is_deterministic():
    prog = corpus_program("binsearch")
    mu = stored([1, 3, 5, 7])
    a = apply_u(XU, prog, "binary_search", mu, UProd((ULoc(0), UU32(5))))
    b = apply_u(XU, prog, "binary_search", mu, UProd((ULoc(0), UU32(5))))
    assert a == b and a[0] == UU32(2)


def test_stuck_evaluation_is_reported():
    with pytest.raises(EvalError):
        eval_v(None, {}, parse_expr("x"))
    with pytest.raises(EvalError):
        eval_u(None, {"a": ULoc(99)}, Store(), parse_expr("length[U32] a"),
               PRELUDE)


def test_vtyping_v():
    assert vtyping_v(VU32(7), U32)
    assert vtyping_v(VWA(U32, (VU32(1), VU32(2))), ARR)
    assert not vtyping_v(VBool(True), U32)
    assert not vtyping_v(VWA(U32, (VU32(1), VBool(False))), ARR)


def test_vtyping_u_array_footprints():
    mu = stored([1, 2])
    cell = mu[0]
    assert vtyping_u(UU32(7), mu, U32) == Footprint()
    assert vtyping_u(cell, mu, ARR) == Footprint.of(w={10, 11})
    assert vtyping_u(cell, mu, RO) == Footprint.of(r={10, 11})
    assert vtyping_u(ULoc(0), mu, ARR) == Footprint.of(w={0, 10, 11})


def test_vtyping_u_rejects_aliased_writable_pointers():
    mu = stored([1, 2])
    with pytest.raises(TypingReject) as exc:
        vtyping_u(UProd((ULoc(0), ULoc(0))), mu, Prod((ARR, ARR)))
    assert exc.value.clause == "aliasing"
    # two read-only views of the same array are fine
    fp = vtyping_u(UProd((ULoc(0), ULoc(0))), mu, Prod((RO, RO)))
    assert fp.r == {0, 10, 11} and not fp.w


def test_vtyping_u_dangling():
    with pytest.raises(TypingReject) as exc:
        vtyping_u(ULoc(3), Store(), ARR)
    assert exc.value.clause == "dangling"


def test_footprints_never_overlap():
    mu = stored([4, 5, 6])
    for t in (ARR, RO):
        fp = vtyping_u(ULoc(0), mu, t)
        assert not fp.r & fp.w


def test_frame_clauses():
    mu = Store({1: UU32(5)})
    assert frame(set(), mu, set(), mu)
    assert not frame({1}, mu, set(), mu)
    assert "leak" in frame_violation({1}, mu, set(), mu)
    assert "fresh" in frame_violation(set(), mu, {1}, mu)
    assert "inertia" in frame_violation(set(), mu, set(), Store({1: UU32(6)}))
    assert frame({1}, mu, {1}, Store({1: UU32(6)}))
    assert frame({1}, mu, set(), Store())
    assert frame(set(), Store(), {2}, Store({2: UBool(True)}))


def test_corr():
    mu = Store({0: UWA(U32, 2, 10), 10: UU32(1), 11: UU32(2)})
    assert corr(UU32(5), mu, VU32(5), U32) == Footprint()
    assert corr(mu[0], mu, VWA(U32, (VU32(1), VU32(2))), ARR) == Footprint.of(w={10, 11})
    with pytest.raises(TypingReject):
        corr(UU32(5), mu, VU32(6), U32)
    with pytest.raises(TypingReject):
        corr(mu[0], mu, VWA(U32, (VU32(1),)), ARR)


def test_store_snapshot_is_canonical_json():
    mu = Store({11: UU32(2), 0: UWA(U32, 2, 10), 10: UU32(1)})
    data = json.loads(mu.to_json())
    assert [c[0] for c in data["cells"]] == [0, 10, 11]
    assert data["cells"][1] == [10, {"U32": 1}]
