"""A flat, byte-addressed 32-bit machine standing in for compiled C.

The heap is a ``bytearray`` with an allocation table of disjoint regions.
Words are little-endian.  An array is a pointer (:class:`LPtr`) to an 8-byte
header region holding ``len`` and ``vals``; ``vals`` is the address of a
contiguous element block.

Internal helpers mutate the heap in place and raise :class:`LowFault`; the
public ``low_*`` operations work on a copy and return :class:`Ok` or
:class:`Failed`.
"""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .syntax import (
    BOOL, U8, U32, App, Expr, FunRef, If, Let, LetBang, Lit, PTuple, PVar, PWild,
    Pat, PrimOp, Program, Tuple, Type, Var,
)
from .dynsem import arith, compare
from .values import UBool, UFun, ULoc, UProd, UU8, UU32, UUnit, UValue, UWA, Store

WORD_MAX = (1 << 32) - 1
DEFAULT_HEAP_BYTES = 1 << 20
HEAP_START = 0x100
HEADER_BYTES = 8

ELEM_SIZE = {"u32": 4, "u8": 1, "bool": 1}
KIND_OF_TYPE = {U32: "u32", U8: "u8", BOOL: "bool"}


class LowFault(Exception):
    """Undefined behaviour: the execution has failed."""


# ---------------------------------------------------------------------------
# values


class LowValue:
    __slots__ = ()


@dataclass(frozen=True)
class LUnit(LowValue):
    pass


@dataclass(frozen=True)
class LBool(LowValue):
    value: int  # 0 or 1


@dataclass(frozen=True)
class LU8(LowValue):
    value: int


@dataclass(frozen=True)
class LU32(LowValue):
    value: int


@dataclass(frozen=True)
class LTuple(LowValue):
    items: tuple


@dataclass(frozen=True)
class LFunId(LowValue):
    fid: int


@dataclass(frozen=True)
class LPtr(LowValue):
    """Address of an array header (a ``WArray*``)."""

    addr: int


@dataclass(frozen=True)
class LStructArray(LowValue):
    """Decoded array header: ``{len, vals}``."""

    len: int
    vals: int


@dataclass(frozen=True)
class Ok:
    value: LowValue
    heap: "LowHeap"

    ok = True


@dataclass(frozen=True)
class Failed:
    reason: str

    ok = False


ExecOutcome = Union[Ok, Failed]


# ---------------------------------------------------------------------------
# heap


@dataclass(frozen=True)
class Region:
    base: int
    length: int
    kind: str  # "u32" | "u8" | "bool" | "header"


class LowHeap:
    """Byte heap plus allocation table.  Regions never overlap."""

    __slots__ = ("mem", "regions", "_bases", "_top")

    def __init__(self, size: int = DEFAULT_HEAP_BYTES):
        if not 0 < size <= 1 << 32:
            raise ValueError(f"bad heap size {size}")
        self.mem = bytearray(size)
        self.regions: list[Region] = []
        self._bases: list[int] = []
        self._top = HEAP_START

    @property
    def size(self) -> int:
        return len(self.mem)

    def copy(self) -> "LowHeap":
        h = LowHeap.__new__(LowHeap)
        h.mem = bytearray(self.mem)
        h.regions = list(self.regions)
        h._bases = list(self._bases)
        h._top = self._top
        return h

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LowHeap) and self.mem == other.mem and self.regions == other.regions

    def alloc(self, length: int, kind: str, align: int = 4) -> int:
        """Reserve a fresh region; a harness facility, not part of the machine."""
        base = -(-self._top // align) * align
        if base + length > self.size:
            raise LowFault(f"heap exhausted allocating {length} bytes")
        self.add_region(Region(base, length, kind))
        self._top = base + max(length, 1)
        return base

    def add_region(self, reg: Region) -> None:
        if reg.base < 0 or reg.base + reg.length > self.size:
            raise LowFault(f"region {reg} outside heap")
        i = bisect.bisect_right(self._bases, reg.base)
        if i > 0:
            prev = self.regions[i - 1]
            if prev.base + prev.length > reg.base or prev.base == reg.base:
                raise LowFault(f"region {reg} overlaps {prev}")
        if i < len(self.regions) and reg.base + reg.length > self.regions[i].base:
            raise LowFault(f"region {reg} overlaps {self.regions[i]}")
        self.regions.insert(i, reg)
        self._bases.insert(i, reg.base)

    def region_at(self, addr: int) -> Optional[Region]:
        """The region starting exactly at ``addr``."""
        i = bisect.bisect_left(self._bases, addr)
        if i < len(self._bases) and self._bases[i] == addr:
            return self.regions[i]
        return None

    def check(self, addr: int, n: int) -> None:
        if addr < 0 or addr + n > WORD_MAX + 1:
            raise LowFault(f"address overflow at {addr:#x}")
        if addr + n > self.size:
            raise LowFault(f"out-of-bounds access at {addr:#x}")
        i = bisect.bisect_right(self._bases, addr) - 1
        if i < 0:
            raise LowFault(f"access to unallocated address {addr:#x}")
        reg = self.regions[i]
        if addr + n > reg.base + reg.length:
            raise LowFault(f"access to unallocated address {addr:#x}")

    def load_word(self, addr: int) -> int:
        if addr % 4:
            raise LowFault(f"unaligned word access at {addr:#x}")
        self.check(addr, 4)
        return int.from_bytes(self.mem[addr:addr + 4], "little")

    def store_word(self, addr: int, val: int) -> None:
        if addr % 4:
            raise LowFault(f"unaligned word access at {addr:#x}")
        self.check(addr, 4)
        self.mem[addr:addr + 4] = (val & WORD_MAX).to_bytes(4, "little")

    def load_byte(self, addr: int) -> int:
        self.check(addr, 1)
        return self.mem[addr]

    def store_byte(self, addr: int, val: int) -> None:
        self.check(addr, 1)
        self.mem[addr] = val & 0xFF


def read_word(heap: LowHeap, addr: int) -> int:
    """Little-endian 32-bit read; raises :class:`LowFault` on a bad address."""
    return heap.load_word(addr)


def write_word(heap: LowHeap, addr: int, val: int) -> LowHeap:
    """Return a copy of ``heap`` with ``val`` written at ``addr``."""
    h = heap.copy()
    h.store_word(addr, val)
    return h


def hexdump(heap: LowHeap, start: int = 0, end: Optional[int] = None) -> str:
    """Hex image, 16 bytes per line, each line prefixed by its offset."""
    end = heap.size if end is None else end
    lines = []
    for off in range(start, end, 16):
        chunk = heap.mem[off:min(off + 16, end)]
        lines.append(f"{off:08x}: " + " ".join(f"{b:02x}" for b in chunk))
    return "\n".join(lines)


def allocated_dump(heap: LowHeap) -> str:
    """Hex image restricted to allocated regions."""
    parts = []
    for reg in heap.regions:
        if reg.length:
            parts.append(f"# {reg.kind} @ {reg.base:#x} len {reg.length}")
            parts.append(hexdump(heap, reg.base, reg.base + reg.length))
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# element access


def encode_elem(kind: str, v: LowValue) -> int:
    if kind == "u32" and isinstance(v, LU32):
        return v.value
    if kind == "u8" and isinstance(v, LU8):
        return v.value
    if kind == "bool" and isinstance(v, LBool):
        return v.value
    raise LowFault(f"cannot store {v!r} in a {kind} array")


def decode_elem(kind: str, raw: int) -> LowValue:
    if kind == "u32":
        return LU32(raw)
    if kind == "u8":
        return LU8(raw)
    if kind == "bool":
        if raw not in (0, 1):
            raise LowFault(f"bad boolean byte {raw}")
        return LBool(raw)
    raise LowFault(f"bad element kind {kind}")


def read_header(heap: LowHeap, arr: LowValue) -> LStructArray:
    if not isinstance(arr, LPtr):
        raise LowFault(f"not an array pointer: {arr!r}")
    reg = heap.region_at(arr.addr)
    if reg is None or reg.kind != "header":
        raise LowFault(f"dangling array pointer {arr.addr:#x}")
    return LStructArray(heap.load_word(arr.addr), heap.load_word(arr.addr + 4))


def _elem_kind(heap: LowHeap, hdr: LStructArray) -> str:
    reg = heap.region_at(hdr.vals)
    if reg is None or reg.kind not in ELEM_SIZE:
        raise LowFault(f"array element block {hdr.vals:#x} is not allocated")
    return reg.kind


def _elem_addr(hdr: LStructArray, kind: str, i: int) -> int:
    addr = hdr.vals + ELEM_SIZE[kind] * i
    if addr > WORD_MAX:
        raise LowFault("pointer arithmetic overflow")
    return addr


def load_elem(heap: LowHeap, hdr: LStructArray, kind: str, i: int) -> LowValue:
    addr = _elem_addr(hdr, kind, i)
    raw = heap.load_word(addr) if kind == "u32" else heap.load_byte(addr)
    return decode_elem(kind, raw)


def store_elem(heap: LowHeap, hdr: LStructArray, kind: str, i: int, v: LowValue) -> None:
    addr = _elem_addr(hdr, kind, i)
    raw = encode_elem(kind, v)
    if kind == "u32":
        heap.store_word(addr, raw)
    else:
        heap.store_byte(addr, raw)


def _u32(v: LowValue) -> int:
    if not isinstance(v, LU32):
        raise LowFault(f"expected a u32, got {v!r}")
    return v.value


# ---------------------------------------------------------------------------
# dispatch and the library operations (in place)

DispatchTable = dict  # fid -> Callable[[LowHeap, LowValue], LowValue]


def dispatch_raw(table: DispatchTable, fid: LowValue, arg: LowValue, heap: LowHeap) -> LowValue:
    f = table.get(fid.fid) if isinstance(fid, LFunId) else None
    if f is None:
        raise LowFault(f"unknown function id {fid!r}")
    return f(heap, arg)


class Counter:
    """Counts dispatched step-body calls of ``repeat``."""

    def __init__(self) -> None:
        self.steps = 0


def length_raw(heap: LowHeap, arr: LowValue) -> LowValue:
    return LU32(read_header(heap, arr).len)


def get_raw(heap: LowHeap, arr: LowValue, i: LowValue, d: LowValue) -> LowValue:
    hdr = read_header(heap, arr)
    idx = _u32(i)
    if idx < hdr.len:
        return load_elem(heap, hdr, _elem_kind(heap, hdr), idx)
    return d


def put_raw(heap: LowHeap, arr: LowValue, i: LowValue, v: LowValue) -> LowValue:
    hdr = read_header(heap, arr)
    idx = _u32(i)
    if idx < hdr.len:
        store_elem(heap, hdr, _elem_kind(heap, hdr), idx, v)
    return arr


def fold_raw(heap: LowHeap, table: DispatchTable, f: LowValue, acc: LowValue, arr: LowValue,
             frm: LowValue, to: LowValue, obsv: LowValue) -> LowValue:
    hdr = read_header(heap, arr)
    e = hdr.len
    if _u32(to) < e:
        e = to.value
    i = _u32(frm)
    if i < e:
        kind = _elem_kind(heap, hdr)
        while i < e:
            acc = dispatch_raw(table, f, LTuple((load_elem(heap, hdr, kind, i), acc, obsv)), heap)
            i += 1
    return acc


def mapaccum_raw(heap: LowHeap, table: DispatchTable, f: LowValue, acc: LowValue, arr: LowValue,
                 frm: LowValue, to: LowValue, obsv: LowValue) -> LowValue:
    hdr = read_header(heap, arr)
    e = hdr.len
    if _u32(to) < e:
        e = to.value
    i = _u32(frm)
    if i < e:
        kind = _elem_kind(heap, hdr)
        while i < e:
            ea = dispatch_raw(table, f, LTuple((load_elem(heap, hdr, kind, i), acc, obsv)), heap)
            if not isinstance(ea, LTuple) or len(ea.items) != 2:
                raise LowFault(f"mapAccum body returned {ea!r}")
            store_elem(heap, hdr, kind, i, ea.items[0])
            acc = ea.items[1]
            i += 1
    return LTuple((arr, acc))


def repeat_raw(heap: LowHeap, table: DispatchTable, n: LowValue, f: LowValue, g: LowValue,
               acc: LowValue, obsv: LowValue, counter: Optional[Counter] = None) -> LowValue:
    for _ in range(_u32(n)):
        b = dispatch_raw(table, f, LTuple((acc, obsv)), heap)
        if not isinstance(b, LBool):
            raise LowFault(f"stop function returned {b!r}")
        if b.value:
            break
        if counter is not None:
            counter.steps += 1
        acc = dispatch_raw(table, g, LTuple((acc, obsv)), heap)
    return acc


def _outcome(fn: Callable, heap: LowHeap, *args) -> ExecOutcome:
    h = heap.copy()
    try:
        return Ok(fn(h, *args), h)
    except LowFault as exc:
        return Failed(str(exc))


def low_length(heap: LowHeap, arr: LowValue) -> ExecOutcome:
    return _outcome(length_raw, heap, arr)


def low_get(heap: LowHeap, arr: LowValue, i: LowValue, d: LowValue) -> ExecOutcome:
    return _outcome(get_raw, heap, arr, i, d)


def low_put(heap: LowHeap, arr: LowValue, i: LowValue, v: LowValue) -> ExecOutcome:
    return _outcome(put_raw, heap, arr, i, v)


def low_fold(heap: LowHeap, f: LowValue, acc: LowValue, arr: LowValue, frm: LowValue,
             to: LowValue, obsv: LowValue, table: DispatchTable) -> ExecOutcome:
    return _outcome(lambda h: fold_raw(h, table, f, acc, arr, frm, to, obsv), heap)


def low_mapaccum(heap: LowHeap, f: LowValue, acc: LowValue, arr: LowValue, frm: LowValue,
                 to: LowValue, obsv: LowValue, table: DispatchTable) -> ExecOutcome:
    return _outcome(lambda h: mapaccum_raw(h, table, f, acc, arr, frm, to, obsv), heap)


def low_repeat(heap: LowHeap, n: LowValue, f: LowValue, g: LowValue, acc: LowValue,
               obsv: LowValue, table: DispatchTable, counter: Optional[Counter] = None) -> ExecOutcome:
    return _outcome(lambda h: repeat_raw(h, table, n, f, g, acc, obsv, counter), heap)


def dispatch(table: DispatchTable, fid: LowValue, arg: LowValue, heap: LowHeap) -> ExecOutcome:
    return _outcome(lambda h: dispatch_raw(table, fid, arg, h), heap)


# ---------------------------------------------------------------------------
# compiled programs


def _bind(env: dict, p: Pat, v: LowValue) -> None:
    if isinstance(p, PVar):
        env[p.name] = v
    elif isinstance(p, PTuple):
        if not isinstance(v, LTuple) or len(v.items) != len(p.items):
            raise LowFault(f"cannot match {v!r}")
        for q, x in zip(p.items, v.items):
            _bind(env, q, x)
    elif not isinstance(p, PWild):
        raise LowFault(f"bad pattern {p!r}")


def _num(v: LowValue):
    if isinstance(v, (LU32, LU8, LBool)):
        return v.value
    raise LowFault(f"not a number: {v!r}")


class LowMachine:
    """Machine-level execution of a monomorphic program.

    Every function gets a function id (ids follow sorted name order).
    ``ffi`` maps the implementation name of each foreign function to
    ``fn(machine, heap, targs, arg) -> LowValue``.
    """

    def __init__(self, prog: Program, ffi: dict):
        self.prog = prog
        self.ffi = ffi
        self.funs = prog.funs
        names = sorted(self.funs)
        self.fids = {n: i for i, n in enumerate(names)}
        self.names = {i: n for n, i in self.fids.items()}
        self.table: DispatchTable = {
            i: (lambda heap, arg, _n=n: self.call_raw(_n, arg, heap)) for n, i in self.fids.items()}
        self.counter = Counter()

    def call_raw(self, name: str, arg: LowValue, heap: LowHeap) -> LowValue:
        d = self.funs.get(name)
        if d is None:
            raise LowFault(f"unknown function {name}")
        if d.is_foreign:
            impl = self.ffi.get(self.prog.base_name(name))
            if impl is None:
                raise LowFault(f"no machine implementation for {name}")
            return impl(self, heap, self.prog.origin_targs(name, ()), arg)
        env: dict = {}
        _bind(env, d.pat, arg)
        return self.eval(env, d.body, heap)

    def call(self, name: str, arg: LowValue, heap: LowHeap) -> ExecOutcome:
        h = heap.copy()
        try:
            return Ok(self.call_raw(name, arg, h), h)
        except LowFault as exc:
            return Failed(str(exc))
        except RecursionError:
            return Failed("stack exhausted")

    def eval(self, env: dict, e: Expr, heap: LowHeap) -> LowValue:
        if isinstance(e, Lit):
            if e.value is None:
                return LUnit()
            if isinstance(e.value, bool):
                return LBool(int(e.value))
            return LU8(e.value) if e.ty == U8 else LU32(e.value)
        if isinstance(e, Var):
            try:
                return env[e.name]
            except KeyError:
                raise LowFault(f"unbound variable {e.name}") from None
        if isinstance(e, FunRef):
            if e.name not in self.fids:
                raise LowFault(f"unknown function {e.name}")
            return LFunId(self.fids[e.name])
        if isinstance(e, (Let, LetBang)):
            v = self.eval(env, e.bound, heap)
            env2 = dict(env)
            _bind(env2, e.pat, v)
            return self.eval(env2, e.body, heap)
        if isinstance(e, If):
            c = self.eval(env, e.cond, heap)
            if not isinstance(c, LBool):
                raise LowFault(f"if condition is {c!r}")
            return self.eval(env, e.then if c.value else e.orelse, heap)
        if isinstance(e, PrimOp):
            a = self.eval(env, e.left, heap)
            b = self.eval(env, e.right, heap)
            if e.op in ("+", "-", "*", "/"):
                if isinstance(a, LU32) and isinstance(b, LU32):
                    return LU32(arith(e.op, a.value, b.value, 32))
                if isinstance(a, LU8) and isinstance(b, LU8):
                    return LU8(arith(e.op, a.value, b.value, 8))
                raise LowFault(f"bad operands for {e.op}")
            if type(a) is not type(b):
                raise LowFault(f"bad operands for {e.op}")
            return LBool(int(compare(e.op, _num(a), _num(b))))
        if isinstance(e, Tuple):
            return LTuple(tuple(self.eval(env, x, heap) for x in e.items))
        if isinstance(e, App):
            return self.call_raw(e.fun, self.eval(env, e.arg, heap), heap)
        raise LowFault(f"cannot execute {e!r}")


# ---------------------------------------------------------------------------
# relations between the machine and the update semantics


def rel_VC(x: LowValue, u: UValue, amap: dict, fids: Optional[dict] = None) -> bool:
    """Value relation between a machine value and an update value.

    ``amap`` maps store locations to addresses.  Array pointers relate when
    the location maps to the pointer; a decoded header relates to a ``UWA``
    when the lengths agree and the base location maps to ``vals`` (empty
    arrays relate on length alone).
    """
    if isinstance(u, UUnit):
        return isinstance(x, LUnit)
    if isinstance(u, UBool):
        return isinstance(x, LBool) and x.value == int(u.value)
    if isinstance(u, UU8):
        return isinstance(x, LU8) and x.value == u.value
    if isinstance(u, UU32):
        return isinstance(x, LU32) and x.value == u.value
    if isinstance(u, UProd):
        return (isinstance(x, LTuple) and len(x.items) == len(u.items)
                and all(rel_VC(a, b, amap, fids) for a, b in zip(x.items, u.items)))
    if isinstance(u, ULoc):
        return isinstance(x, LPtr) and amap.get(u.loc) == x.addr
    if isinstance(u, UWA):
        if not isinstance(x, LStructArray) or x.len != u.length:
            return False
        if u.length == 0:
            return True  # no element locations, so the base names nothing
        return amap.get(u.base) == x.vals
    if isinstance(u, UFun):
        return isinstance(x, LFunId) and fids is not None and fids.get(u.name) == x.fid
    return False


def _cell_layout(u: UValue) -> tuple[int, str]:
    if isinstance(u, UU32):
        return 4, "u32"
    if isinstance(u, UU8):
        return 1, "u8"
    if isinstance(u, UBool):
        return 1, "bool"
    if isinstance(u, UWA):
        return HEADER_BYTES, "header"
    raise LowFault(f"no machine layout for {u!r}")


def _merge(intervals: list) -> list:
    out: list = []
    for lo, hi in sorted(intervals):
        if hi <= lo:
            continue
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def rel_HC_violation(heap: LowHeap, store: Store, amap: dict) -> Optional[str]:
    """First reason the heap relation fails, or ``None``."""
    seen: dict = {}
    cells = []
    for loc, u in store.cells.items():
        if loc not in amap:
            return f"location {loc} has no address"
        addr = amap[loc]
        if addr in seen:
            return f"locations {seen[addr]} and {loc} share address {addr:#x}"
        seen[addr] = loc
        try:
            size, kind = _cell_layout(u)
            heap.check(addr, size)
            if kind == "u32":
                ok = heap.load_word(addr) == u.value
            elif kind == "u8":
                ok = heap.load_byte(addr) == u.value
            elif kind == "bool":
                ok = heap.load_byte(addr) == int(u.value)
            else:
                hdr = read_header(heap, LPtr(addr))
                ok = rel_VC(hdr, u, amap)
        except LowFault as exc:
            return f"location {loc}: {exc}"
        if not ok:
            return f"location {loc} disagrees with the heap at {addr:#x}"
        cells.append((addr, addr + size))
    regions = [(r.base, r.base + r.length) for r in heap.regions]
    if _merge(regions) != _merge(cells):
        return "allocated regions do not match the mapped store locations"
    return None


def rel_HC(heap: LowHeap, store: Store, amap: dict) -> bool:
    """Heap relation: every mapped location decodes to its store value, and
    the allocation table covers exactly the mapped addresses."""
    return rel_HC_violation(heap, store, amap) is None


# ---------------------------------------------------------------------------
# building related images


def elem_kind(t: Type) -> str:
    try:
        return KIND_OF_TYPE[t]
    except KeyError:
        raise LowFault(f"arrays of {t} have no machine layout") from None


def alloc_array(heap: LowHeap, elem: Type, items: list) -> tuple[int, int]:
    """Allocate and fill an array; returns ``(header address, vals address)``."""
    kind = elem_kind(elem)
    n = len(items)
    vals = heap.alloc(ELEM_SIZE[kind] * n, kind)
    if kind == "u32":
        struct.pack_into(f"<{n}I", heap.mem, vals, *items)
    else:
        heap.mem[vals:vals + n] = bytes(int(x) for x in items)
    hdr = heap.alloc(HEADER_BYTES, "header")
    struct.pack_into("<II", heap.mem, hdr, n, vals)
    return hdr, vals


def read_array(heap: LowHeap, arr: LowValue) -> list:
    """Raw element values of an array (ints; booleans as 0/1)."""
    hdr = read_header(heap, arr)
    if hdr.len == 0:
        return []
    kind = _elem_kind(heap, hdr)
    heap.check(hdr.vals, ELEM_SIZE[kind] * hdr.len)
    if kind == "u32":
        return list(struct.unpack_from(f"<{hdr.len}I", heap.mem, hdr.vals))
    return list(heap.mem[hdr.vals:hdr.vals + hdr.len])


def array_bytes(heap: LowHeap, arr: LowValue) -> bytes:
    hdr = read_header(heap, arr)
    if hdr.len == 0:
        return b""
    kind = _elem_kind(heap, hdr)
    return bytes(heap.mem[hdr.vals:hdr.vals + ELEM_SIZE[kind] * hdr.len])


def heap_valid(heap: LowHeap) -> bool:
    """Every header points at an allocated element block large enough for its length."""
    try:
        for reg in heap.regions:
            if reg.kind == "header":
                hdr = read_header(heap, LPtr(reg.base))
                if hdr.len:
                    kind = _elem_kind(heap, hdr)
                    heap.check(hdr.vals, ELEM_SIZE[kind] * hdr.len)
    except LowFault:
        return False
    return True

