"""Random generators: related values at every layer and well-typed programs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .. import lowmachine as lm
from .. import shallow as sh
from ..ffi import PRELUDE, size_of
from ..syntax import (
    BOOL, U8, U32, UNIT, Abs, App, Expr, FunDef, FunRef, If, Let, LetBang, Lit, PTuple, PVar,
    Prim, PrimOp, Prod, Program, Tuple, Type, Var, bang, parse_program,
)
from ..values import (
    MAX_U32, Store, UBool, ULoc, UProd, UU8, UU32, UUnit, UWA, VBool, VProd, VU8, VU32, VUnit, VWA,
)

# ---------------------------------------------------------------------------
# related values


@dataclass
class World:
    """A store, a machine heap and the location-to-address map relating them."""

    store: Store = field(default_factory=Store)
    heap: lm.LowHeap = field(default_factory=lm.LowHeap)
    amap: dict = field(default_factory=dict)

    @staticmethod
    def new(heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> "World":
        return World(Store(), lm.LowHeap(heap_bytes), {})

    def array(self, elem: Type, raw: list) -> tuple:
        """Allocate one array at every layer; returns ``(v, u, low, s)``."""
        n = len(raw)
        if elem == U32:
            ucls, vcls, scls = UU32, VU32, sh.SU32
        elif elem == U8:
            ucls, vcls, scls = UU8, VU8, sh.SU8
        elif elem == BOOL:
            ucls, vcls, scls = UBool, VBool, sh.SBool
            raw = [bool(x) for x in raw]
        else:
            raise ValueError(f"unsupported element type {elem}")
        hdr_loc = self.store.reserve(1)
        base = self.store.reserve(n)
        cells = self.store.cells
        for i, x in enumerate(raw):
            cells[base + i] = ucls(x)
        cells[hdr_loc] = UWA(elem, n, base)
        hdr_addr, vals = lm.alloc_array(self.heap, elem, raw)
        sz = size_of(elem)
        self.amap[hdr_loc] = hdr_addr
        for i in range(n):
            self.amap[base + i] = vals + sz * i
        v = VWA(elem, tuple(vcls(x) for x in raw))
        s = sh.SList(tuple(scls(x) for x in raw))
        return v, ULoc(hdr_loc), lm.LPtr(hdr_addr), s


def prim_images(t: Type, x) -> tuple:
    if t == U32:
        return VU32(x), UU32(x), lm.LU32(x), sh.SU32(x)
    if t == U8:
        return VU8(x), UU8(x), lm.LU8(x), sh.SU8(x)
    if t == BOOL:
        return VBool(bool(x)), UBool(bool(x)), lm.LBool(int(bool(x))), sh.SBool(bool(x))
    if t == UNIT:
        return VUnit(), UUnit(), lm.LUnit(), sh.SUnit()
    raise ValueError(f"not a primitive type: {t}")


def rand_u32(rng: random.Random) -> int:
    r = rng.random()
    if r < 0.3:
        return rng.randrange(16)
    if r < 0.4:
        return MAX_U32 - rng.randrange(4)
    if r < 0.7:
        return rng.randrange(1000)
    return rng.getrandbits(32)


def rand_prim(rng: random.Random, t: Type):
    if t == U32:
        return rand_u32(rng)
    if t == U8:
        return rng.randrange(256) if rng.random() < 0.7 else rng.choice([0, 1, 255])
    if t == BOOL:
        return rng.random() < 0.5
    return None


def images(world: World, t: Type, rng: random.Random, max_len: int = 64) -> tuple:
    """Random value of type ``t`` allocated in ``world``: ``(v, u, low, s)``."""
    if isinstance(t, Prim):
        return prim_images(t, rand_prim(rng, t))
    if isinstance(t, Prod):
        parts = [images(world, x, rng, max_len) for x in t.items]
        return (VProd(tuple(p[0] for p in parts)), UProd(tuple(p[1] for p in parts)),
                lm.LTuple(tuple(p[2] for p in parts)), sh.STuple(tuple(p[3] for p in parts)))
    if isinstance(t, Abs) and t.name == "Array":
        elem = t.args[0]
        n = rng.randint(0, max_len)
        return world.array(elem, [rand_prim(rng, elem) for _ in range(n)])
    raise ValueError(f"cannot generate values of type {t}")


@dataclass
class Related:
    """One value at every layer together with the store, heap and address map."""

    v: object
    u: object
    store: Store
    low: object
    heap: lm.LowHeap
    s: object
    amap: dict


def gen_value(t: Type, seed, max_len: int = 64, heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> Related:
    rng = random.Random(seed)
    w = World.new(heap_bytes)
    v, u, low, s = images(w, t, rng, max_len)
    return Related(v, u, w.store, low, w.heap, s, w.amap)


# ---------------------------------------------------------------------------
# programs

HELPERS_SOURCE = """\
fun pick a (c : Bool, x : a!, y : a!) -> a! =
  if c then x
  else y
fun swap a b (x : a, y : b) -> (b, a) =
  (y, x)
"""

HELPERS = parse_program(HELPERS_SOURCE)

ELEMS = (U32, U32, U8, BOOL)
ARITH = ("+", "-", "*", "/")
CMPS = ("<", ">", "<=", ">=", "==", "/=")


def _arr(elem: Type, readonly: bool = False) -> Abs:
    t = Abs("Array", (elem,), False)
    return bang(t) if readonly else t


def _app(fun: str, targs: tuple, *args: Expr) -> App:
    return App(fun, targs, args[0] if len(args) == 1 else Tuple(tuple(args)))


class _Scope:
    def __init__(self, prims=(), ro=(), lin=()):
        self.prims = list(prims)  # (name, type)
        self.ro = list(ro)        # (name, elem)
        self.lin = list(lin)      # (name, elem)

    def copy(self) -> "_Scope":
        return _Scope(self.prims, self.ro, self.lin)


class ProgramGen:
    """Builds a random well-typed program around a function ``main``."""

    def __init__(self, rng: random.Random, size: int, max_len: int = 64, depth: int = 2):
        self.rng = rng
        self.size = size
        self.max_len = max_len
        self.depth = depth
        self.helpers: list = []
        self.counter = 0

    def fresh(self, stem: str = "v") -> str:
        self.counter += 1
        return f"{stem}{self.counter}"

    def helper(self, params: list, ret: Type, body: Expr) -> str:
        name = f"h{len(self.helpers)}"
        pat = PTuple(tuple(PVar(n) for n, _ in params))
        arg = Prod(tuple(t for _, t in params))
        self.helpers.append(FunDef(name, (), arg, ret, pat, body))
        return name

    # primitive expressions

    def lit(self, t: Type) -> Lit:
        if t == BOOL:
            return Lit(self.rng.random() < 0.5)
        if t == U8:
            return Lit(self.rng.choice([0, 1, 2, 7, 128, 255]), U8)
        return Lit(self.rng.choice([0, 1, 2, 3, 5, 10, 64, 1000, MAX_U32]), U32)

    def index(self, sc: _Scope) -> Expr:
        r = self.rng.random()
        if sc.ro and r < 0.35:
            name, elem = self.rng.choice(sc.ro)
            ln = _app("length", (elem,), Var(name))
            return ln if self.rng.random() < 0.5 else PrimOp("-", ln, Lit(1, U32))
        if r < 0.8:
            return Lit(self.rng.randint(0, self.max_len + 2), U32)
        return self.pexpr(U32, sc, 1)

    def pexpr(self, t: Type, sc: _Scope, depth: Optional[int] = None) -> Expr:
        depth = self.depth if depth is None else depth
        rng = self.rng
        opts = ["lit"]
        if any(pt == t for _, pt in sc.prims):
            opts += ["var"] * 3
        if depth > 0:
            if t in (U32, U8):
                opts += ["arith"] * 2
            if t == BOOL:
                opts += ["cmp", "cmp", "logic"]
            opts.append("pick")
            if any(e == t for _, e in sc.ro):
                opts.append("get")
            if t == U32 and sc.ro:
                opts += ["length", "fold"]
            if t == U32:
                opts.append("repeat")
        k = rng.choice(opts)
        if k == "lit":
            return self.lit(t)
        if k == "var":
            return Var(rng.choice([n for n, pt in sc.prims if pt == t]))
        if k == "arith":
            return PrimOp(rng.choice(ARITH), self.pexpr(t, sc, depth - 1), self.pexpr(t, sc, depth - 1))
        if k == "cmp":
            s = rng.choice([U32, U32, U8, BOOL])
            op = rng.choice(CMPS if s != BOOL else ("==", "/="))
            return PrimOp(op, self.anchored(s, sc, depth - 1), self.pexpr(s, sc, depth - 1))
        if k == "logic":
            return PrimOp(rng.choice(("&&", "||")), self.pexpr(BOOL, sc, depth - 1), self.pexpr(BOOL, sc, depth - 1))
        if k == "pick":
            return _app("pick", (t,), self.pexpr(BOOL, sc, depth - 1), self.pexpr(t, sc, depth - 1),
                        self.pexpr(t, sc, depth - 1))
        if k == "get":
            name = rng.choice([n for n, e in sc.ro if e == t])
            return _app("get", (t,), Var(name), self.index(sc), self.pexpr(t, sc, depth - 1))
        if k == "length":
            name, elem = rng.choice(sc.ro)
            return _app("length", (elem,), Var(name))
        if k == "fold":
            return self.fold(sc, depth)
        return self.repeat_prim(sc, depth)

    def anchored(self, t: Type, sc: _Scope, depth: Optional[int] = None) -> Expr:
        """An expression of type ``t`` that keeps its type without context.

        Integer literals default to U32, so U8 expressions in unconstrained
        positions go through an explicitly instantiated call.
        """
        e = self.pexpr(t, sc, depth)
        if t == U8:
            return _app("pick", (U8,), Lit(True), e, Lit(0, U8))
        return e

    def fold(self, sc: _Scope, depth: int) -> Expr:
        name, elem = self.rng.choice(sc.ro)
        with_obs = self.rng.random() < 0.5
        obs_t = U32 if with_obs else UNIT
        params = [("el", elem), ("acc", U32), ("o", obs_t)]
        hs = _Scope(prims=[("el", elem), ("acc", U32)] + ([("o", U32)] if with_obs else []))
        h = self.helper(params, U32, self.pexpr(U32, hs, 2))
        obs = self.pexpr(U32, sc, 0) if with_obs else Lit(None)
        return _app("fold", (elem, U32, obs_t), FunRef(h), self.pexpr(U32, sc, depth - 1), Var(name),
                    self.index(sc), self.index(sc), obs)

    def fuel(self, sc: _Scope) -> Expr:
        if sc.ro and self.rng.random() < 0.4:
            name, elem = self.rng.choice(sc.ro)
            return _app("length", (elem,), Var(name))
        return Lit(self.rng.randint(0, 10), U32)

    def repeat_prim(self, sc: _Scope, depth: int) -> Expr:
        hs = _Scope(prims=[("acc", U32), ("o", U32)])
        stop = self.helper([("acc", U32), ("o", U32)], BOOL, self.pexpr(BOOL, hs, 2))
        step = self.helper([("acc", U32), ("o", U32)], U32, self.pexpr(U32, hs, 2))
        return _app("repeat", (U32, U32), self.fuel(sc), FunRef(stop), FunRef(step),
                    self.pexpr(U32, sc, depth - 1), self.pexpr(U32, sc, 0))

    # statements over linear arrays

    def stmt(self, sc: _Scope) -> tuple:
        """One ``let``; returns ``(builder, new scope)`` where ``builder(body)`` wraps the rest."""
        rng = self.rng
        kinds = ["prim", "prim"]
        if sc.lin:
            kinds += ["put", "put", "letbang", "letbang", "mapaccum", "ifput", "repeat_lin"]
        if len(sc.lin) >= 2:
            kinds.append("swap")
        k = rng.choice(kinds)
        new = sc.copy()
        if k == "prim":
            t = rng.choice([U32, U32, U8, BOOL])
            x = self.fresh()
            e = self.anchored(t, sc)
            new.prims.append((x, t))
            return (lambda body: Let(PVar(x), e, body)), new
        i = rng.randrange(len(sc.lin))
        a, elem = sc.lin[i]
        a2 = self.fresh("a")
        new.lin[i] = (a2, elem)
        if k == "put":
            e = _app("put", (elem,), Var(a), self.index(sc), self.pexpr(elem, sc))
            return (lambda body: Let(PVar(a2), e, body)), new
        if k == "ifput":
            e = If(self.pexpr(BOOL, sc), _app("put", (elem,), Var(a), self.index(sc), self.pexpr(elem, sc)), Var(a))
            return (lambda body: Let(PVar(a2), e, body)), new
        if k == "letbang":
            new.lin[i] = (a, elem)
            inner = sc.copy()
            inner.lin = [p for p in sc.lin if p[0] != a]
            inner.ro.append((a, elem))
            t = rng.choice([U32, U32, elem, BOOL])
            x = self.fresh()
            e = self.anchored(t, inner)
            new.prims.append((x, t))
            return (lambda body: LetBang((a,), PVar(x), e, body)), new
        if k == "mapaccum":
            with_obs = rng.random() < 0.5
            obs_t = U32 if with_obs else UNIT
            hs = _Scope(prims=[("el", elem), ("acc", U32)] + ([("o", U32)] if with_obs else []))
            h = self.helper([("el", elem), ("acc", U32), ("o", obs_t)], Prod((elem, U32)),
                            Tuple((self.pexpr(elem, hs, 2), self.pexpr(U32, hs, 2))))
            acc = self.fresh()
            obs = self.pexpr(U32, sc, 0) if with_obs else Lit(None)
            e = _app("mapAccum", (elem, U32, obs_t), FunRef(h), self.pexpr(U32, sc, 1), Var(a),
                     self.index(sc), self.index(sc), obs)
            new.prims.append((acc, U32))
            return (lambda body: Let(PTuple((PVar(a2), PVar(acc))), e, body)), new
        if k == "repeat_lin":
            ps = [("arr", _arr(elem, True)), ("o", U32)]
            hs = _Scope(prims=[("o", U32)], ro=[("arr", elem)])
            stop = self.helper(ps, BOOL, self.pexpr(BOOL, hs, 2))
            ss = _Scope(prims=[("o", U32)])
            bs = _Scope(prims=[("o", U32)], ro=[("arr", elem)])
            body_put = _app("put", (elem,), Var("arr"), Var("i"), self.pexpr(elem, ss, 1))
            step_body = LetBang(("arr",), PVar("i"), self.pexpr(U32, bs, 1), body_put)
            step = self.helper([("arr", _arr(elem)), ("o", U32)], _arr(elem), step_body)
            e = _app("repeat", (_arr(elem), U32), self.fuel(sc), FunRef(stop), FunRef(step), Var(a),
                     self.pexpr(U32, sc, 0))
            return (lambda body: Let(PVar(a2), e, body)), new
        # swap two linear arrays through the polymorphic helper
        j = rng.choice([x for x in range(len(sc.lin)) if x != i])
        b, elem_b = sc.lin[j]
        b2 = self.fresh("a")
        new.lin[j] = (b2, elem_b)
        e = _app("swap", (_arr(elem), _arr(elem_b)), Var(a), Var(b))
        return (lambda body: Let(PTuple((PVar(b2), PVar(a2))), e, body)), new

    def main(self) -> FunDef:
        rng = self.rng
        if self.size <= 0:
            return FunDef("main", (), UNIT, U32, PVar("u"), self.lit(U32))
        params: list = []
        sc = _Scope()
        for _ in range(rng.randint(0, 2)):
            n, e = self.fresh("w"), rng.choice(ELEMS)
            params.append((n, _arr(e)))
            sc.lin.append((n, e))
        for _ in range(rng.randint(0, 2)):
            n, e = self.fresh("r"), rng.choice(ELEMS)
            params.append((n, _arr(e, True)))
            sc.ro.append((n, e))
        for _ in range(rng.randint(0 if params else 1, 2)):
            n, t = self.fresh("x"), rng.choice([U32, U8, BOOL])
            params.append((n, t))
            sc.prims.append((n, t))
        builders = []
        for _ in range(rng.randint(1, self.size)):
            b, sc = self.stmt(sc)
            builders.append(b)
        t = rng.choice([U32, U8, BOOL])
        tail: Expr = self.pexpr(t, sc)
        rets = [_arr(e) for _, e in sc.lin] + [t]
        if sc.lin:
            tail = Tuple(tuple(Var(n) for n, _ in sc.lin) + (tail,))
        body = tail
        for b in reversed(builders):
            body = b(body)
        ret = Prod(tuple(rets)) if sc.lin else t
        if len(params) == 1:
            return FunDef("main", (), params[0][1], ret, PVar(params[0][0]), body)
        return FunDef("main", (), Prod(tuple(t for _, t in params)), ret,
                      PTuple(tuple(PVar(n) for n, _ in params)), body)


def gen_program(seed, size: int = 6, max_len: int = 64) -> Program:
    """A random well-typed program whose entry point is ``main``.

    ``size`` bounds the number of statements in ``main``; ``size == 0``
    yields a ``main`` whose body is a single literal.
    """
    g = ProgramGen(random.Random(seed), size, max_len)
    main = g.main()
    return Program(PRELUDE.decls + HELPERS.decls + tuple(g.helpers) + (main,))
