"""Pure reference models: list-based array operations, the fuelled
loop, and hand-written shallow embeddings of the corpus programs.

A shallow function value (:class:`SFun`) wraps a Python callable taking one
argument, laid out exactly like the tuple argument of the corresponding
Cogent function.  Higher-order operations call their function arguments with
the same ``(elem, acc, obs)`` / ``(acc, obs)`` tuples the other layers use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .values import MAX_U32, VBool, VFun, VProd, VU8, VU32, VUnit, VValue, VWA


class SValue:
    __slots__ = ()


@dataclass(frozen=True)
class SUnit(SValue):
    pass


@dataclass(frozen=True)
class SBool(SValue):
    value: bool


@dataclass(frozen=True)
class SU8(SValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= 0xFF:
            raise ValueError(f"U8 out of range: {self.value}")


@dataclass(frozen=True)
class SU32(SValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_U32:
            raise ValueError(f"U32 out of range: {self.value}")


@dataclass(frozen=True)
class STuple(SValue):
    items: tuple


@dataclass(frozen=True)
class SList(SValue):
    items: tuple


@dataclass(frozen=True)
class SFun(SValue):
    name: str
    fn: Callable = field(compare=False, hash=False, repr=False)

    def __call__(self, arg: SValue) -> SValue:
        return self.fn(arg)


class StepCounter:
    """Counts step-function applications made by :func:`repeat_s`."""

    def __init__(self) -> None:
        self.steps = 0


def _word(x: SValue) -> int:
    if not isinstance(x, SU32):
        raise TypeError(f"expected a word, got {x!r}")
    return x.value


def _slice(frm: int, to: int, xs: tuple) -> tuple:
    return xs[frm:to] if frm < to else ()


# ---------------------------------------------------------------------------
# array operations


def length_s(xs: SList) -> SU32:
    return SU32(len(xs.items) & MAX_U32)


def get_s(xs: SList, i: SU32, d: SValue) -> SValue:
    k = _word(i)
    return xs.items[k] if k < len(xs.items) else d


def put_s(xs: SList, i: SU32, v: SValue) -> SList:
    k = _word(i)
    if k >= len(xs.items):
        return xs
    items = list(xs.items)
    items[k] = v
    return SList(tuple(items))


def fold_s(f: SFun, acc: SValue, xs: SList, frm: SU32, to: SU32, obs: SValue) -> SValue:
    for el in _slice(_word(frm), _word(to), xs.items):
        acc = f(STuple((el, acc, obs)))
    return acc


def mapaccum_s(f: SFun, acc: SValue, xs: SList, frm: SU32, to: SU32, obs: SValue) -> STuple:
    a, b = _word(frm), _word(to)
    out = []
    for el in _slice(a, b, xs.items):
        r = f(STuple((el, acc, obs)))
        if not isinstance(r, STuple) or len(r.items) != 2:
            raise TypeError(f"mapAccum body returned {r!r}")
        out.append(r.items[0])
        acc = r.items[1]
    items = xs.items[:a] + tuple(out) + xs.items[max(a, b):]
    return STuple((SList(items), acc))


def repeat_s(n: int, f: SFun, g: SFun, acc: SValue, obsv: SValue,
             counter: Optional[StepCounter] = None) -> SValue:
    """Fuelled loop: at most ``n`` steps, stopping as soon as ``f`` holds."""
    for _ in range(n):
        b = f(STuple((acc, obsv)))
        if not isinstance(b, SBool):
            raise TypeError(f"stop function returned {b!r}")
        if b.value:
            return acc
        if counter is not None:
            counter.steps += 1
        acc = g(STuple((acc, obsv)))
    return acc


# ---------------------------------------------------------------------------
# corpus embeddings


def add_s(arg: STuple) -> SU32:
    x, y, _ = arg.items
    return SU32((_word(x) + _word(y)) & MAX_U32)


ADD = SFun("add", add_s)


def sum_s(xs: SList) -> SU32:
    return fold_s(ADD, SU32(0), xs, SU32(0), length_s(xs), SUnit())


def stop_s(arg: STuple) -> SBool:
    (l, r, b), _ = arg.items[0].items, arg.items[1]
    return SBool(b.value or l.value >= r.value)


def search_s(arg: STuple) -> STuple:
    (l, r, b), (arr, v) = arg.items[0].items, arg.items[1].items
    m = (l.value + ((r.value - l.value) & MAX_U32) // 2) & MAX_U32
    x = get_s(arr, SU32(m), SU32(0)).value
    if x < v.value:
        return STuple((SU32((m + 1) & MAX_U32), r, b))
    if x > v.value:
        return STuple((l, SU32(m), b))
    return STuple((SU32(m), r, SBool(True)))


STOP = SFun("stop", stop_s)
SEARCH = SFun("search", search_s)


def binary_search_s(xs: SList, v: SU32, counter: Optional[StepCounter] = None) -> SU32:
    n = length_s(xs)
    init = STuple((SU32(0), n, SBool(False)))
    l, _, b = repeat_s(n.value, STOP, SEARCH, init, STuple((xs, v)), counter).items
    return l if b.value else n


def binary_search_step_count(xs: list, v: int) -> int:
    c = StepCounter()
    binary_search_s(to_slist(xs), SU32(v), c)
    return c.steps


# shallow embeddings of corpus functions, by Cogent name
SHALLOW_FUNS: dict = {
    "add": add_s,
    "sum": lambda arr: sum_s(arr),
    "stop": stop_s,
    "search": search_s,
    "binary_search": lambda arg: binary_search_s(*arg.items),
}


# ---------------------------------------------------------------------------
# conversions and the shallow/polymorphic relation


def to_slist(xs, elem=SU32) -> SList:
    return SList(tuple(elem(x) for x in xs))


def s_of_v(v: VValue) -> SValue:
    """Shallow image of a first-order value."""
    if isinstance(v, VUnit):
        return SUnit()
    if isinstance(v, VBool):
        return SBool(v.value)
    if isinstance(v, VU8):
        return SU8(v.value)
    if isinstance(v, VU32):
        return SU32(v.value)
    if isinstance(v, VProd):
        return STuple(tuple(s_of_v(x) for x in v.items))
    if isinstance(v, VWA):
        return SList(tuple(s_of_v(x) for x in v.items))
    raise TypeError(f"no shallow image for {v!r}")


def rel_PS(s: SValue, v: VValue) -> bool:
    """Shallow/polymorphic value relation: equal primitives, pointwise tuples,
    equal-length lists with pairwise related elements."""
    if isinstance(s, SUnit):
        return isinstance(v, VUnit)
    if isinstance(s, (SBool, SU8, SU32)):
        want = {SBool: VBool, SU8: VU8, SU32: VU32}[type(s)]
        return isinstance(v, want) and s.value == v.value
    if isinstance(s, STuple):
        return (isinstance(v, VProd) and len(s.items) == len(v.items)
                and all(rel_PS(a, b) for a, b in zip(s.items, v.items)))
    if isinstance(s, SList):
        return (isinstance(v, VWA) and len(s.items) == len(v.items)
                and all(rel_PS(a, b) for a, b in zip(s.items, v.items)))
    if isinstance(s, SFun):
        return isinstance(v, VFun) and v.name == s.name
    return False
