"""Deliberately broken foreign implementations and name maps.

Each fault breaks exactly one refinement property so that the matching
checker can be shown to notice it.
"""

from __future__ import annotations

from ..ffi import DEFAULT_ENVS, FfiEnvs
from ..values import UBool, ULoc, UU32, UWA
from .mono import NameMap


def put_ill_typed_u(targs, store, arg, call):
    """Stores a value of the wrong type into the array."""
    x, i, v = arg.items
    hdr = store[x.loc]
    if i.value < hdr.length:
        store.set(hdr.base + i.value, UU32(7) if isinstance(v, UBool) else UBool(True))
    return store, x


def put_leaking_u(targs, store, arg, call):
    """Copies the array to fresh locations and never frees the original."""
    x, i, v = arg.items
    hdr = store[x.loc]
    new = store.reserve(1)
    base = store.reserve(hdr.length)
    for j in range(hdr.length):
        store.set(base + j, v if j == i.value else store[hdr.base + j])
    store.set(new, UWA(hdr.elem, hdr.length, base))
    return store, ULoc(new)


def put_outside_u(targs, store, arg, call):
    """Writes out-of-range indices past the end of the array."""
    x, i, v = arg.items
    hdr = store[x.loc]
    store.set(hdr.base + i.value, v)
    return store, x


def put_noop_v(targs, arg, call):
    """Value-level put that forgets the update."""
    return arg.items[0]


FAULTS = {
    "ill-typed-put": ("thm1", {"update": put_ill_typed_u}),
    "leaking-put": ("thm2", {"update": put_leaking_u}),
    "outside-put": ("thm2", {"update": put_outside_u}),
    "noop-put-value": ("thm3", {"value": put_noop_v}),
}


def faulty_envs(name: str, envs: FfiEnvs = DEFAULT_ENVS) -> FfiEnvs:
    """``envs`` with ``put`` replaced by the named planted fault."""
    _, layers = FAULTS[name]
    return envs.override("put", **layers)


def swapped(N: NameMap, a: tuple, b: tuple) -> NameMap:
    """A name map sending the instantiations ``a`` and ``b`` to each other's copies."""
    table = dict(N.table)
    table[a], table[b] = table[b], table[a]
    return NameMap(table)
