"""Foreign-function registries for every layer, the array abstract type,
and randomized checks of the abstract-type value-typing obligations.

Each foreign function is described once by a :class:`ForeignEntry` carrying
its implementation at every layer: update semantics, value semantics
(shared by the polymorphic and monomorphic layers), the machine, and the
shallow embedding.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

from . import lowmachine as lm
from . import shallow as sh
from .dynsem import EvalError, ObligationBreach, TypingReject, frame, register_abstract_type
from .syntax import BOOL, U8, U32, UNIT, Abs, FunDef, Program, Type, bang, parse_program, show_type, type_order
from .values import (
    MAX_U32, Footprint, Store, UBool, ULoc, UProd, UU8, UU32, UUnit, UValue, UWA,
    VBool, VFun, VProd, VU8, VU32, VUnit, VValue, VWA,
)

PRELUDE_SOURCE = """\
abstract Array a
foreign length a : (Array a)! -> U32
foreign get a : ((Array a)!, U32, a!) -> a!
foreign put a : (Array a, U32, a) -> Array a
foreign fold a b c : ((a!, b, c!) -> b, b, (Array a)!, U32, U32, c!) -> b
foreign mapAccum a b c : ((a, b, c!) -> (a, b), b, Array a, U32, U32, c!) -> (Array a, b)
foreign repeat a b : (U32, (a!, b!) -> Bool, (a, b!) -> a, a, b!) -> a
"""

PRELUDE = parse_program(PRELUDE_SOURCE)


def with_prelude(prog: Program) -> Program:
    """Prepend the prelude declarations the program does not already make."""
    have = {d.name for d in prog.decls}
    extra = tuple(d for d in PRELUDE.decls if d.name not in have)
    return Program(extra + prog.decls, prog.origin)


def parse_with_prelude(text: str) -> Program:
    """Parse source that may call the library functions without declaring them."""
    return parse_program(PRELUDE_SOURCE + text)


# ---------------------------------------------------------------------------
# the array abstract type

_UCLS = {U32: UU32, U8: UU8, BOOL: UBool, UNIT: UUnit}
_VCLS = {U32: VU32, U8: VU8, BOOL: VBool, UNIT: VUnit}


def size_of(t: Type) -> int:
    """Byte size of an unboxed element type."""
    return 1 if t in (U8, BOOL) else 4


def _elem_type(t: Type) -> Type:
    if not isinstance(t, Abs) or t.name != "Array" or len(t.args) != 1:
        raise TypingReject("ill-typed", f"{show_type(t)} is not an array type")
    return t.args[0]


class ArrayType:
    """Value typing and value/update correspondence for arrays of unboxed elements."""

    name = "Array"
    layout = dict(lm.ELEM_SIZE)

    def vtyping_v(self, v, t: Type) -> bool:
        try:
            elem = _elem_type(t)
        except TypingReject:
            return False
        if not isinstance(v, VWA) or v.elem != elem:
            return False
        cls = _VCLS.get(elem)
        if cls is None:
            return False
        return all(type(x) is cls for x in v.items)

    def _okay(self, cell, store: Store, elem: Type) -> None:
        if not isinstance(cell, UWA) or cell.elem != elem:
            raise TypingReject("ill-typed", f"{cell!r} is not an array of {show_type(elem)}")
        if cell.length * size_of(elem) > MAX_U32:
            raise TypingReject("overflow", f"{cell.length} elements of {size_of(elem)} bytes")
        cls = _UCLS.get(elem)
        if cls is None:
            raise TypingReject("element-ill-typed", f"{show_type(elem)} is not unboxed")
        cells = store.cells
        for loc in range(cell.base, cell.base + cell.length):
            u = cells.get(loc)
            if u is None:
                raise TypingReject("dangling", f"element location {loc}")
            if type(u) is not cls:
                raise TypingReject("element-ill-typed", f"location {loc} holds {u!r}")

    def footprint(self, cell: UWA, t: Abs) -> Footprint:
        locs = frozenset(range(cell.base, cell.base + cell.length))
        return Footprint(locs, frozenset()) if t.readonly else Footprint(frozenset(), locs)

    def vtyping_u(self, cell, store: Store, t: Type) -> Footprint:
        self._okay(cell, store, _elem_type(t))
        return self.footprint(cell, t)

    def corr(self, cell, store: Store, v, t: Type) -> Footprint:
        fp = self.vtyping_u(cell, store, t)
        if not self.vtyping_v(v, t):
            raise TypingReject("ill-typed", f"{v!r} at {show_type(t)}")
        if len(v.items) != cell.length:
            raise TypingReject("mismatch", f"length {cell.length} vs {len(v.items)}")
        cells = store.cells
        for i, x in enumerate(v.items):
            if not isinstance(x, VUnit) and cells[cell.base + i].value != x.value:
                raise TypingReject("mismatch", f"element {i}")
        return fp


ARRAY = ArrayType()
register_abstract_type(ARRAY)


def array_vtyping_u(u: UValue, store: Store, t: Type) -> Footprint:
    """Footprint of an array header ``u`` at ``t``; rejects name the failed clause
    (``overflow``, ``element-ill-typed`` or ``dangling``)."""
    return ARRAY.vtyping_u(u, store, t)


# ---------------------------------------------------------------------------
# array operations: update semantics


def _header(store: Store, x: UValue) -> UWA:
    if not isinstance(x, ULoc):
        raise EvalError(f"not an array pointer: {x!r}")
    cell = store[x.loc]
    if not isinstance(cell, UWA):
        raise EvalError(f"location {x.loc} is not an array")
    return cell


def _uword(x: UValue) -> int:
    if not isinstance(x, UU32):
        raise EvalError(f"expected U32, got {x!r}")
    return x.value


def _uargs(arg: UValue, n: int) -> tuple:
    if not isinstance(arg, UProd) or len(arg.items) != n:
        raise EvalError(f"expected a {n}-tuple, got {arg!r}")
    return arg.items


def length_u(targs, store: Store, arg: UValue, call):
    return store, UU32(_header(store, arg).length)


def get_u(targs, store: Store, arg: UValue, call):
    x, i, d = _uargs(arg, 3)
    hdr = _header(store, x)
    k = _uword(i)
    return store, (store[hdr.base + k] if k < hdr.length else d)


def put_u(targs, store: Store, arg: UValue, call):
    x, i, v = _uargs(arg, 3)
    hdr = _header(store, x)
    k = _uword(i)
    if k < hdr.length:
        store.set(hdr.base + k, v)
    return store, x


def fold_u(targs, store: Store, arg: UValue, call):
    f, acc, x, s, e, obs = _uargs(arg, 6)
    hdr = _header(store, x)
    for i in range(_uword(s), min(_uword(e), hdr.length)):
        store, acc = call(store, f, UProd((store[hdr.base + i], acc, obs)))
    return store, acc


def mapaccum_u(targs, store: Store, arg: UValue, call):
    f, acc, x, s, e, obs = _uargs(arg, 6)
    hdr = _header(store, x)
    for i in range(_uword(s), min(_uword(e), hdr.length)):
        store, r = call(store, f, UProd((store[hdr.base + i], acc, obs)))
        el, acc = _uargs(r, 2)
        store.set(hdr.base + i, el)
    return store, UProd((x, acc))


def repeat_u(targs, store: Store, arg: UValue, call):
    n, f, g, acc, obs = _uargs(arg, 5)
    for _ in range(_uword(n)):
        before = (id(store), store.version)
        store, b = call(store, f, UProd((acc, obs)))
        if (id(store), store.version) != before:
            raise ObligationBreach("repeat: the stop function modified the store")
        if not isinstance(b, UBool):
            raise EvalError(f"stop function returned {b!r}")
        if b.value:
            break
        store, acc = call(store, g, UProd((acc, obs)))
    return store, acc


# ---------------------------------------------------------------------------
# array operations: value semantics (polymorphic and monomorphic layers)


def _varr(x: VValue) -> VWA:
    if not isinstance(x, VWA):
        raise EvalError(f"not an array value: {x!r}")
    return x


def _vword(x: VValue) -> int:
    if not isinstance(x, VU32):
        raise EvalError(f"expected U32, got {x!r}")
    return x.value


def _vargs(arg: VValue, n: int) -> tuple:
    if not isinstance(arg, VProd) or len(arg.items) != n:
        raise EvalError(f"expected a {n}-tuple, got {arg!r}")
    return arg.items


def length_v(targs, arg: VValue, call):
    return VU32(len(_varr(arg).items))


def get_v(targs, arg: VValue, call):
    x, i, d = _vargs(arg, 3)
    xs = _varr(x).items
    k = _vword(i)
    return xs[k] if k < len(xs) else d


def put_v(targs, arg: VValue, call):
    x, i, v = _vargs(arg, 3)
    a = _varr(x)
    k = _vword(i)
    if k >= len(a.items):
        return a
    items = list(a.items)
    items[k] = v
    return VWA(a.elem, tuple(items))


def fold_v(targs, arg: VValue, call):
    f, acc, x, s, e, obs = _vargs(arg, 6)
    xs = _varr(x).items
    for i in range(_vword(s), min(_vword(e), len(xs))):
        acc = call(f, VProd((xs[i], acc, obs)))
    return acc


def mapaccum_v(targs, arg: VValue, call):
    f, acc, x, s, e, obs = _vargs(arg, 6)
    a = _varr(x)
    items = list(a.items)
    for i in range(_vword(s), min(_vword(e), len(items))):
        el, acc = _vargs(call(f, VProd((items[i], acc, obs))), 2)
        items[i] = el
    return VProd((VWA(a.elem, tuple(items)), acc))


def repeat_v(targs, arg: VValue, call):
    n, f, g, acc, obs = _vargs(arg, 5)
    for _ in range(_vword(n)):
        b = call(f, VProd((acc, obs)))
        if not isinstance(b, VBool):
            raise EvalError(f"stop function returned {b!r}")
        if b.value:
            break
        acc = call(g, VProd((acc, obs)))
    return acc


# ---------------------------------------------------------------------------
# machine and shallow implementations


def _low_args(arg, n: int) -> tuple:
    if not isinstance(arg, lm.LTuple) or len(arg.items) != n:
        raise lm.LowFault(f"expected a {n}-tuple, got {arg!r}")
    return arg.items


def length_low(m, heap, targs, arg):
    return lm.length_raw(heap, arg)


def get_low(m, heap, targs, arg):
    return lm.get_raw(heap, *_low_args(arg, 3))


def put_low(m, heap, targs, arg):
    return lm.put_raw(heap, *_low_args(arg, 3))


def fold_low(m, heap, targs, arg):
    f, acc, a, frm, to, obs = _low_args(arg, 6)
    return lm.fold_raw(heap, m.table, f, acc, a, frm, to, obs)


def mapaccum_low(m, heap, targs, arg):
    f, acc, a, frm, to, obs = _low_args(arg, 6)
    return lm.mapaccum_raw(heap, m.table, f, acc, a, frm, to, obs)


def repeat_low(m, heap, targs, arg):
    n, f, g, acc, obs = _low_args(arg, 5)
    return lm.repeat_raw(heap, m.table, n, f, g, acc, obs, m.counter)


def repeat_shallow(arg):
    n, f, g, acc, obs = arg.items
    return sh.repeat_s(n.value, f, g, acc, obs)


# ---------------------------------------------------------------------------
# registry


class RegistrationError(Exception):
    pass


@dataclass(frozen=True)
class ForeignEntry:
    """One foreign function at every layer.

    ``update(targs, store, arg, call) -> (store, value)``;
    ``value(targs, arg, call) -> value``;
    ``low(machine, heap, targs, arg) -> LowValue``;
    ``shallow(arg) -> SValue``.
    """

    name: str
    order: int
    signature: Optional[FunDef]
    update: Callable
    value: Callable
    low: Callable
    shallow: Callable
    fid: int = -1


@dataclass(frozen=True)
class _VView:
    name: str
    order: int
    call: Callable


@dataclass(frozen=True)
class _UView:
    name: str
    order: int
    call: Callable


@dataclass(frozen=True)
class FfiEnvs:
    """Immutable registry; :func:`register` returns an extended copy."""

    entries: tuple = ()

    @cached_property
    def by_name(self) -> dict:
        return {e.name: e for e in self.entries}

    @cached_property
    def v(self) -> dict:
        """Value-level environment (shared by polymorphic and monomorphic layers)."""
        return {e.name: _VView(e.name, e.order, e.value) for e in self.entries}

    @cached_property
    def u(self) -> dict:
        return {e.name: _UView(e.name, e.order, e.update) for e in self.entries}

    @cached_property
    def low(self) -> dict:
        return {e.name: e.low for e in self.entries}

    @cached_property
    def shallow(self) -> dict:
        return {e.name: e.shallow for e in self.entries}

    def __contains__(self, name: str) -> bool:
        return name in self.by_name

    def __getitem__(self, name: str) -> ForeignEntry:
        return self.by_name[name]

    def override(self, name: str, **layers) -> "FfiEnvs":
        """Swap implementations of an existing entry (used to plant faults)."""
        return FfiEnvs(tuple(replace(e, **layers) if e.name == name else e for e in self.entries))


def register(envs: FfiEnvs, name: str, entry: ForeignEntry) -> FfiEnvs:
    """Register ``entry`` at all layers at once.

    An entry of order ``n > 1`` may only be registered once some entry of
    order ``n - 1`` exists, since it can only call functions of lower order.
    """
    if name != entry.name:
        raise RegistrationError(f"entry named {entry.name} registered as {name}")
    if name in envs:
        raise RegistrationError(f"duplicate registration of {name}")
    if entry.order < 1:
        raise RegistrationError(f"{name}: functions have order at least 1")
    if entry.signature is not None and type_order(entry.signature.type) != entry.order:
        raise RegistrationError(
            f"{name}: declared order {entry.order} but its type has order {type_order(entry.signature.type)}")
    if entry.order > 1 and not any(e.order == entry.order - 1 for e in envs.entries):
        raise RegistrationError(f"{name}: order {entry.order} needs a registered order-{entry.order - 1} function")
    for part in ("update", "value", "low", "shallow"):
        if not callable(getattr(entry, part)):
            raise RegistrationError(f"{name}: missing {part} implementation")
    return FfiEnvs(envs.entries + (replace(entry, fid=len(envs.entries)),))


def entry_for(name: str, update, value, low, shallow, order: Optional[int] = None) -> ForeignEntry:
    sig = PRELUDE.funs.get(name)
    if order is None:
        order = type_order(sig.type) if sig is not None else 1
    return ForeignEntry(name, order, sig, update, value, low, shallow)


def _default_envs() -> FfiEnvs:
    envs = FfiEnvs()
    for e in (
        entry_for("length", length_u, length_v, length_low, sh.length_s),
        entry_for("get", get_u, get_v, get_low, lambda a: sh.get_s(*a.items)),
        entry_for("put", put_u, put_v, put_low, lambda a: sh.put_s(*a.items)),
        entry_for("fold", fold_u, fold_v, fold_low, lambda a: sh.fold_s(*a.items)),
        entry_for("mapAccum", mapaccum_u, mapaccum_v, mapaccum_low, lambda a: sh.mapaccum_s(*a.items)),
        entry_for("repeat", repeat_u, repeat_v, repeat_low, repeat_shallow),
    ):
        envs = register(envs, e.name, e)
    return envs


DEFAULT_ENVS = _default_envs()


# ---------------------------------------------------------------------------
# abstract-type obligations

CLAUSES = ("bang_v", "bang_u", "no-alias", "valid", "frame", "read-only")
ELEM_TYPES = (U32, U8, BOOL)


def _rand_elem(rng: random.Random, t: Type):
    if t == U32:
        return rng.choice([0, 1, MAX_U32, rng.getrandbits(32)])
    if t == U8:
        return rng.randrange(256)
    return rng.random() < 0.5


@dataclass
class _Scenario:
    store: Store
    arrays: list  # (header loc, UWA, VWA)
    subject: int
    readonly: bool


def _scenario(rng: random.Random, max_len: int = 8) -> _Scenario:
    store = Store()
    arrays = []
    for _ in range(rng.randint(1, 3)):
        elem = rng.choice(ELEM_TYPES)
        n = rng.randint(0, max_len)
        raw = [_rand_elem(rng, elem) for _ in range(n)]
        hdr_loc = store.reserve(1)
        base = store.reserve(n)
        cls = _UCLS[elem]
        for i, x in enumerate(raw):
            store.set(base + i, cls(x))
        cell = UWA(elem, n, base)
        store.set(hdr_loc, cell)
        arrays.append((hdr_loc, cell, VWA(elem, tuple(_VCLS[elem](x) for x in raw))))
    return _Scenario(store, arrays, rng.randrange(len(arrays)), rng.random() < 0.5)


def _atype(cell: UWA, readonly: bool) -> Abs:
    return Abs("Array", (cell.elem,), readonly)


def _frame_step(rng: random.Random, sc: _Scenario, fp: Footprint) -> tuple:
    """Evolve the store within the writable footprint of the other arrays.

    Returns ``(w_i, mu_o, w_o)``.  Locations outside ``w_i`` are untouched,
    dropped locations are unmapped, and fresh locations are new.
    """
    mu_i = sc.store
    w_i: set = set()
    for j, (loc, cell, _) in enumerate(sc.arrays):
        if j != sc.subject:
            w_i |= {loc} | set(range(cell.base, cell.base + cell.length))
    w_i -= fp.all
    mu_o = mu_i.copy()
    w_o = set(w_i)
    for p in sorted(w_i):
        roll = rng.random()
        if roll < 0.3:
            mu_o.delete(p)
            w_o.discard(p)
        elif roll < 0.6:
            mu_o.set(p, UU32(rng.getrandbits(32)))
    for _ in range(rng.randint(1, 3)):
        p = mu_o.alloc(UU32(rng.getrandbits(32)))
        w_o.add(p)
    return w_i, mu_o, w_o


def _check_clause(entry, clause: str, rng: random.Random) -> Optional[dict]:
    """Run one trial of ``clause``; return a counterexample or ``None``."""
    sc = _scenario(rng)
    loc, cell, vwa = sc.arrays[sc.subject]
    t_w = _atype(cell, False)
    t_ro = bang(t_w)
    t = t_ro if sc.readonly else t_w
    where = {"store": json.loads(sc.store.to_json()), "value": repr(cell), "type": show_type(t)}
    try:
        if clause == "bang_v":
            if entry.vtyping_v(vwa, t_w) and not entry.vtyping_v(vwa, t_ro):
                return {**where, "value": repr(vwa), "reason": "typing lost under bang"}
            return None
        if clause == "read-only":
            fp = entry.vtyping_u(cell, sc.store, t_ro)
            if fp.w:
                return {**where, "reason": f"read-only type has writable footprint {sorted(fp.w)}"}
            return None
        fp = entry.vtyping_u(cell, sc.store, t)
        if clause == "bang_u":
            fp2 = entry.vtyping_u(cell, sc.store, t_ro)
            if fp2 != Footprint(fp.r | fp.w, frozenset()):
                return {**where, "reason": f"banged footprint {_fp(fp2)} differs from {_fp(fp)} moved to r"}
        elif clause == "no-alias":
            if fp.r & fp.w:
                return {**where, "reason": f"r and w share {sorted(fp.r & fp.w)}"}
        elif clause == "valid":
            bad = sorted(p for p in fp.all if sc.store.get(p) is None)
            if bad:
                return {**where, "reason": f"footprint locations {bad} are unmapped"}
        elif clause == "frame":
            w_i, mu_o, w_o = _frame_step(rng, sc, fp)
            if not frame(w_i, sc.store, w_o, mu_o):
                return {**where, "reason": "harness produced a non-frame store step"}
            try:
                fp_o = entry.vtyping_u(cell, mu_o, t)
            except TypingReject as exc:
                return {**where, "reason": f"typing lost after a frame step: {exc}"}
            if fp_o != fp:
                return {**where, "reason": f"footprint changed to {_fp(fp_o)} after a frame step"}
    except TypingReject:
        # premise of the implication does not hold
        return None
    return None


def _fp(fp: Footprint) -> dict:
    return {"r": sorted(fp.r), "w": sorted(fp.w)}


@dataclass
class ObligationReport:
    type_name: str
    seed: int
    clauses: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(c["failures"] for c in self.clauses)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return {"type": self.type_name, "seed": self.seed, "clauses": self.clauses,
                "failures": self.failures}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def check_abs_type_obligations(entry=ARRAY, seed: int = 0, trials: int = 500,
                               clauses: tuple = CLAUSES, stop_at_first: bool = False) -> ObligationReport:
    """Randomized check of the value-typing obligations for an abstract type.

    Each clause runs ``trials`` independent trials from its own seeded stream.
    With ``stop_at_first`` a clause stops at its first counterexample and
    ``trials`` records how many trials that took.
    """
    report = ObligationReport(entry.name, seed)
    for k, clause in enumerate(clauses):
        rng = random.Random(f"{seed}:{clause}")
        failures = 0
        first = None
        ran = 0
        for _ in range(trials):
            ran += 1
            cex = _check_clause(entry, clause, rng)
            if cex is not None:
                failures += 1
                first = first or cex
                if stop_at_first:
                    break
        rec = {"clause": clause, "trials": ran, "failures": failures}
        if first is not None:
            rec["counterexample"] = first
        report.clauses.append(rec)
    return report


# planted faults, one per clause


class _BangVMutant(ArrayType):
    def vtyping_v(self, v, t):
        return not getattr(t, "readonly", False) and super().vtyping_v(v, t)


class _BangUMutant(ArrayType):
    def footprint(self, cell, t):
        fp = super().footprint(cell, t)
        if t.readonly and cell.length:
            return Footprint(fp.r - {cell.base}, fp.w)
        return fp


class _NoAliasMutant(ArrayType):
    def footprint(self, cell, t):
        fp = super().footprint(cell, t)
        return Footprint(fp.r | fp.w, fp.w)


class _ValidMutant(ArrayType):
    def footprint(self, cell, t):
        locs = frozenset(range(cell.base, cell.base + cell.length + 1))
        return Footprint(locs, frozenset()) if t.readonly else Footprint(frozenset(), locs)


class _FrameMutant(ArrayType):
    def vtyping_u(self, cell, store, t):
        # also inspects the location just past the end, outside its footprint
        if isinstance(cell, UWA) and store.get(cell.base + cell.length) is not None \
                and not isinstance(store.get(cell.base + cell.length), UWA):
            raise TypingReject("ill-typed", "neighbouring location in use")
        return super().vtyping_u(cell, store, t)


class _ReadOnlyMutant(ArrayType):
    def footprint(self, cell, t):
        locs = frozenset(range(cell.base, cell.base + cell.length))
        return Footprint(frozenset(), locs)


MUTANTS = {
    "bang_v": _BangVMutant(),
    "bang_u": _BangUMutant(),
    "no-alias": _NoAliasMutant(),
    "valid": _ValidMutant(),
    "frame": _FrameMutant(),
    "read-only": _ReadOnlyMutant(),
}
