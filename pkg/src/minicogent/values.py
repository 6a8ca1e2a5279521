"""Runtime values of the value semantics and the update semantics, and the store."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import ClassVar, Iterable, Optional

from .syntax import Type, show_type

MAX_U8 = (1 << 8) - 1
MAX_U32 = (1 << 32) - 1


class DanglingError(Exception):
    """A store location was dereferenced but is unmapped."""


# ---------------------------------------------------------------------------
# value semantics


class VValue:
    __slots__ = ()


@dataclass(frozen=True)
class VUnit(VValue):
    pass


@dataclass(frozen=True)
class VBool(VValue):
    value: bool


@dataclass(frozen=True)
class VU8(VValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_U8:
            raise ValueError(f"U8 out of range: {self.value}")


@dataclass(frozen=True)
class VU32(VValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_U32:
            raise ValueError(f"U32 out of range: {self.value}")


@dataclass(frozen=True)
class VProd(VValue):
    items: tuple


@dataclass(frozen=True)
class VFun(VValue):
    name: str
    targs: tuple = ()


class VAbstract(VValue):
    """Values of abstract types; ``tag`` names the abstract type."""

    __slots__ = ()
    tag: ClassVar[str] = ""


@dataclass(frozen=True)
class VWA(VAbstract):
    """Array in the value semantics: element type and an immutable list."""

    tag: ClassVar[str] = "Array"
    elem: Type
    items: tuple


# ---------------------------------------------------------------------------
# update semantics


class UValue:
    __slots__ = ()


@dataclass(frozen=True)
class UUnit(UValue):
    pass


@dataclass(frozen=True)
class UBool(UValue):
    value: bool


@dataclass(frozen=True)
class UU8(UValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_U8:
            raise ValueError(f"U8 out of range: {self.value}")


@dataclass(frozen=True)
class UU32(UValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_U32:
            raise ValueError(f"U32 out of range: {self.value}")


@dataclass(frozen=True)
class UProd(UValue):
    items: tuple


@dataclass(frozen=True)
class UFun(UValue):
    name: str
    targs: tuple = ()


@dataclass(frozen=True)
class ULoc(UValue):
    loc: int


class UAbstract(UValue):
    __slots__ = ()
    tag: ClassVar[str] = ""


@dataclass(frozen=True)
class UWA(UAbstract):
    """Array header in the update semantics: element ``i`` lives at location ``base + i``."""

    tag: ClassVar[str] = "Array"
    elem: Type
    length: int
    base: int


# ---------------------------------------------------------------------------
# store


class Store:
    """Finite map from locations to update values plus a fresh-location counter.

    Reading an unmapped location with :meth:`get` yields ``None`` (bottom).
    Equality compares the mapped cells only.
    """

    __slots__ = ("cells", "next_id", "version")

    def __init__(self, cells: Optional[dict] = None, next_id: Optional[int] = None):
        self.cells: dict[int, UValue] = dict(cells or {})
        top = max(self.cells, default=-1) + 1
        self.next_id = top if next_id is None else max(next_id, top)
        self.version = 0  # bumped by every mutation

    def get(self, loc: int) -> Optional[UValue]:
        return self.cells.get(loc)

    def __getitem__(self, loc: int) -> UValue:
        try:
            return self.cells[loc]
        except KeyError:
            raise DanglingError(f"dangling location {loc}") from None

    def __contains__(self, loc: int) -> bool:
        return loc in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def set(self, loc: int, v: UValue) -> None:
        self.version += 1
        self.cells[loc] = v
        if loc >= self.next_id:
            self.next_id = loc + 1

    def delete(self, loc: int) -> None:
        self.version += 1
        self.cells.pop(loc, None)

    def alloc(self, v: UValue) -> int:
        loc = self.next_id
        self.set(loc, v)
        return loc

    def reserve(self, n: int) -> int:
        """Reserve ``n`` consecutive fresh locations without mapping them."""
        base = self.next_id
        self.next_id += n
        return base

    def copy(self) -> "Store":
        return Store(self.cells, self.next_id)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Store) and self.cells == other.cells

    def __repr__(self) -> str:
        return f"Store({dict(sorted(self.cells.items()))!r})"

    def to_json(self) -> str:
        cells = [[loc, uvalue_to_json(self.cells[loc])] for loc in sorted(self.cells)]
        return json.dumps({"cells": cells, "next": self.next_id}, sort_keys=True)


def uvalue_to_json(u: UValue):
    if isinstance(u, UUnit):
        return {"Unit": None}
    if isinstance(u, UBool):
        return {"Bool": u.value}
    if isinstance(u, UU8):
        return {"U8": u.value}
    if isinstance(u, UU32):
        return {"U32": u.value}
    if isinstance(u, UProd):
        return {"Prod": [uvalue_to_json(x) for x in u.items]}
    if isinstance(u, UFun):
        return {"Fun": [u.name, [show_type(t) for t in u.targs]]}
    if isinstance(u, ULoc):
        return {"Loc": u.loc}
    if isinstance(u, UWA):
        return {"WA": {"elem": show_type(u.elem), "len": u.length, "base": u.base}}
    raise TypeError(u)


@dataclass(frozen=True)
class Footprint:
    r: frozenset = frozenset()
    w: frozenset = frozenset()

    @staticmethod
    def of(r: Iterable[int] = (), w: Iterable[int] = ()) -> "Footprint":
        return Footprint(frozenset(r), frozenset(w))

    @property
    def all(self) -> frozenset:
        return self.r | self.w


EMPTY = Footprint()
