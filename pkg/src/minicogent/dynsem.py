"""Big-step value and update semantics, value typing, the frame relation and
the value/update correspondence relation.

Foreign functions are looked up in a foreign environment ``xi``: a mapping
from name to an object with an ``order`` and a ``call(targs, arg, call)``
method (update level: ``call(targs, store, arg, call)``).  ``call`` lets a
higher-order foreign function invoke its function arguments.
"""

from __future__ import annotations

from typing import Optional

from .syntax import (
    BOOL, U8, U32, UNIT, Abs, App, Expr, Fun, FunRef, If, Let, LetBang, Lit, PTuple,
    PVar, PWild, Pat, PrimOp, Prod, Program, Tuple, Type, Var, show_type, subst_type,
    type_order,
)
from .values import (
    EMPTY, DanglingError, Footprint, Store, UAbstract, UBool, UFun, ULoc,
    UProd, UU8, UU32, UUnit, UValue, VAbstract, VBool, VFun, VProd, VU8, VU32, VUnit, VValue,
)


class EvalError(Exception):
    """Evaluation got stuck.  For well-typed terms this indicates a bug."""


class OrderViolation(EvalError):
    """A foreign function invoked a function of equal or higher order."""


class ObligationBreach(EvalError):
    """A foreign function broke a contract it is required to keep."""


class TypingReject(Exception):
    """Value typing failed; ``clause`` names the violated condition."""

    def __init__(self, clause: str, detail: str = ""):
        self.clause = clause
        self.detail = detail
        super().__init__(f"{clause}: {detail}" if detail else clause)


# abstract type name -> entry with vtyping_v / vtyping_u / corr methods
ABSTRACT_TYPES: dict = {}


def register_abstract_type(entry) -> None:
    ABSTRACT_TYPES[entry.name] = entry


def _abs_entry(name: str, abs_types: Optional[dict]):
    table = ABSTRACT_TYPES if abs_types is None else abs_types
    try:
        return table[name]
    except KeyError:
        raise TypingReject("unregistered", f"abstract type {name}") from None


# ---------------------------------------------------------------------------
# primitive operations


def arith(op: str, a: int, b: int, bits: int) -> int:
    mask = (1 << bits) - 1
    if op == "+":
        return (a + b) & mask
    if op == "-":
        return (a - b) & mask
    if op == "*":
        return (a * b) & mask
    if op == "/":
        return a // b if b else 0
    raise EvalError(f"unknown arithmetic operator {op}")


def compare(op: str, a, b) -> bool:
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "/=":
        return a != b
    if op == "&&":
        return a and b
    if op == "||":
        return a or b
    raise EvalError(f"unknown operator {op}")


def _bind(env: dict, p: Pat, v, prod_type) -> None:
    if isinstance(p, PVar):
        env[p.name] = v
    elif isinstance(p, PTuple):
        if not isinstance(v, prod_type) or len(v.items) != len(p.items):
            raise EvalError(f"cannot match {v!r} against a {len(p.items)}-tuple")
        for q, x in zip(p.items, v.items):
            _bind(env, q, x, prod_type)
    elif not isinstance(p, PWild):
        raise EvalError(f"bad pattern {p!r}")


def fun_order(prog: Program, xi, name: str) -> int:
    if name in prog.fundefs:
        return type_order(prog.fundefs[name].type)
    base = prog.base_name(name)
    if base in xi:
        return xi[base].order
    if name in prog.foreign:
        return type_order(prog.foreign[name].type)
    return 0


def _tsub(targs: tuple, sub: dict) -> tuple:
    return tuple(subst_type(t, sub) for t in targs) if sub else targs


# ---------------------------------------------------------------------------
# value semantics


class _VEval:
    def __init__(self, xi, prog: Program):
        self.xi = xi
        self.prog = prog
        self.funs = prog.funs

    def eval(self, env: dict, e: Expr, sub: dict) -> VValue:
        if isinstance(e, Lit):
            if e.value is None:
                return VUnit()
            if isinstance(e.value, bool):
                return VBool(e.value)
            return VU8(e.value) if e.ty == U8 else VU32(e.value)
        if isinstance(e, Var):
            try:
                return env[e.name]
            except KeyError:
                raise EvalError(f"unbound variable {e.name}") from None
        if isinstance(e, FunRef):
            return VFun(e.name, _tsub(e.targs, sub))
        if isinstance(e, (Let, LetBang)):
            v = self.eval(env, e.bound, sub)
            env2 = dict(env)
            _bind(env2, e.pat, v, VProd)
            return self.eval(env2, e.body, sub)
        if isinstance(e, If):
            c = self.eval(env, e.cond, sub)
            if not isinstance(c, VBool):
                raise EvalError(f"if condition is {c!r}")
            return self.eval(env, e.then if c.value else e.orelse, sub)
        if isinstance(e, PrimOp):
            return self.primop(e.op, self.eval(env, e.left, sub), self.eval(env, e.right, sub))
        if isinstance(e, Tuple):
            return VProd(tuple(self.eval(env, x, sub) for x in e.items))
        if isinstance(e, App):
            arg = self.eval(env, e.arg, sub)
            return self.call(e.fun, _tsub(e.targs, sub), arg)
        raise EvalError(f"cannot evaluate {e!r}")

    def primop(self, op: str, a: VValue, b: VValue) -> VValue:
        if op in ("+", "-", "*", "/"):
            if isinstance(a, VU32) and isinstance(b, VU32):
                return VU32(arith(op, a.value, b.value, 32))
            if isinstance(a, VU8) and isinstance(b, VU8):
                return VU8(arith(op, a.value, b.value, 8))
            raise EvalError(f"bad operands for {op}: {a!r}, {b!r}")
        if type(a) is not type(b) or not isinstance(a, (VU8, VU32, VBool)):
            raise EvalError(f"bad operands for {op}: {a!r}, {b!r}")
        return VBool(compare(op, a.value, b.value))

    def call(self, name: str, targs: tuple, arg: VValue, caller_order: Optional[int] = None) -> VValue:
        d = self.funs.get(name)
        if d is None:
            raise EvalError(f"unknown function {name}")
        if caller_order is not None and fun_order(self.prog, self.xi, name) >= caller_order:
            raise OrderViolation(f"order-{caller_order} foreign function called {name}")
        if d.is_foreign:
            base = self.prog.base_name(name)
            entry = self.xi.get(base) if self.xi is not None else None
            if entry is None:
                raise EvalError(f"foreign function {name} has no value-level definition")
            ftargs = self.prog.origin_targs(name, targs)

            def cb(f: VValue, a: VValue) -> VValue:
                if not isinstance(f, VFun):
                    raise EvalError(f"not a function value: {f!r}")
                return self.call(f.name, f.targs, a, entry.order)

            return entry.call(ftargs, arg, cb)
        env: dict = {}
        _bind(env, d.pat, arg, VProd)
        sub = dict(zip(d.tyvars, targs)) if d.tyvars else {}
        return self.eval(env, d.body, sub)


def eval_v(xi, env: dict, e: Expr, prog: Optional[Program] = None) -> VValue:
    """Evaluate ``e`` under the value semantics."""
    return _VEval(xi, prog or Program()).eval(dict(env), e, {})


def apply_v(xi, prog: Program, name: str, arg: VValue, targs: tuple = ()) -> VValue:
    """Evaluate the function ``name`` of ``prog`` at ``arg``."""
    return _VEval(xi, prog).call(name, targs, arg)


# ---------------------------------------------------------------------------
# update semantics


class _UEval:
    def __init__(self, xi, prog: Program, store: Store):
        self.xi = xi
        self.prog = prog
        self.funs = prog.funs
        self.store = store

    def eval(self, env: dict, e: Expr, sub: dict) -> UValue:
        if isinstance(e, Lit):
            if e.value is None:
                return UUnit()
            if isinstance(e.value, bool):
                return UBool(e.value)
            return UU8(e.value) if e.ty == U8 else UU32(e.value)
        if isinstance(e, Var):
            try:
                return env[e.name]
            except KeyError:
                raise EvalError(f"unbound variable {e.name}") from None
        if isinstance(e, FunRef):
            return UFun(e.name, _tsub(e.targs, sub))
        if isinstance(e, (Let, LetBang)):
            u = self.eval(env, e.bound, sub)
            env2 = dict(env)
            _bind(env2, e.pat, u, UProd)
            return self.eval(env2, e.body, sub)
        if isinstance(e, If):
            c = self.eval(env, e.cond, sub)
            if not isinstance(c, UBool):
                raise EvalError(f"if condition is {c!r}")
            return self.eval(env, e.then if c.value else e.orelse, sub)
        if isinstance(e, PrimOp):
            return self.primop(e.op, self.eval(env, e.left, sub), self.eval(env, e.right, sub))
        if isinstance(e, Tuple):
            return UProd(tuple(self.eval(env, x, sub) for x in e.items))
        if isinstance(e, App):
            arg = self.eval(env, e.arg, sub)
            return self.call(e.fun, _tsub(e.targs, sub), arg)
        raise EvalError(f"cannot evaluate {e!r}")

    def primop(self, op: str, a: UValue, b: UValue) -> UValue:
        if op in ("+", "-", "*", "/"):
            if isinstance(a, UU32) and isinstance(b, UU32):
                return UU32(arith(op, a.value, b.value, 32))
            if isinstance(a, UU8) and isinstance(b, UU8):
                return UU8(arith(op, a.value, b.value, 8))
            raise EvalError(f"bad operands for {op}: {a!r}, {b!r}")
        if type(a) is not type(b) or not isinstance(a, (UU8, UU32, UBool)):
            raise EvalError(f"bad operands for {op}: {a!r}, {b!r}")
        return UBool(compare(op, a.value, b.value))

    def call(self, name: str, targs: tuple, arg: UValue, caller_order: Optional[int] = None) -> UValue:
        d = self.funs.get(name)
        if d is None:
            raise EvalError(f"unknown function {name}")
        if caller_order is not None and fun_order(self.prog, self.xi, name) >= caller_order:
            raise OrderViolation(f"order-{caller_order} foreign function called {name}")
        if d.is_foreign:
            base = self.prog.base_name(name)
            entry = self.xi.get(base) if self.xi is not None else None
            if entry is None:
                raise EvalError(f"foreign function {name} has no update-level definition")
            ftargs = self.prog.origin_targs(name, targs)

            def cb(store: Store, f: UValue, a: UValue):
                if not isinstance(f, UFun):
                    raise EvalError(f"not a function value: {f!r}")
                self.store = store
                r = self.call(f.name, f.targs, a, entry.order)
                return self.store, r

            self.store, result = entry.call(ftargs, self.store, arg, cb)
            return result
        env: dict = {}
        _bind(env, d.pat, arg, UProd)
        sub = dict(zip(d.tyvars, targs)) if d.tyvars else {}
        return self.eval(env, d.body, sub)


def eval_u(xi, env: dict, store: Store, e: Expr, prog: Optional[Program] = None) -> tuple[UValue, Store]:
    """Evaluate ``e`` under the update semantics; ``store`` itself is not modified."""
    ev = _UEval(xi, prog or Program(), store.copy())
    try:
        u = ev.eval(dict(env), e, {})
    except DanglingError as exc:
        raise EvalError(str(exc)) from None
    return u, ev.store


def apply_u(xi, prog: Program, name: str, store: Store, arg: UValue, targs: tuple = ()) -> tuple[UValue, Store]:
    ev = _UEval(xi, prog, store.copy())
    try:
        u = ev.call(name, targs, arg)
    except DanglingError as exc:
        raise EvalError(str(exc)) from None
    return u, ev.store


# ---------------------------------------------------------------------------
# value typing


def vtyping_v(v: VValue, t: Type, abs_types: Optional[dict] = None) -> bool:
    if isinstance(v, VUnit):
        return t == UNIT
    if isinstance(v, VBool):
        return t == BOOL
    if isinstance(v, VU8):
        return t == U8
    if isinstance(v, VU32):
        return t == U32
    if isinstance(v, VProd):
        return (isinstance(t, Prod) and len(t.items) == len(v.items)
                and all(vtyping_v(x, s, abs_types) for x, s in zip(v.items, t.items)))
    if isinstance(v, VFun):
        return isinstance(t, Fun)
    if isinstance(v, VAbstract):
        if not isinstance(t, Abs) or t.name != v.tag:
            return False
        return _abs_entry(v.tag, abs_types).vtyping_v(v, t)
    return False


def _prim_fp(u: UValue, t: Type) -> bool:
    return ((isinstance(u, UUnit) and t == UNIT) or (isinstance(u, UBool) and t == BOOL)
            or (isinstance(u, UU8) and t == U8) or (isinstance(u, UU32) and t == U32))


def combine_footprints(fps: list) -> Footprint:
    """Footprint of a product: writable sets must not overlap anything else."""
    r: set = set()
    w: set = set()
    for fp in fps:
        if fp.w & (r | w) or fp.r & w:
            raise TypingReject("aliasing", f"locations {sorted((fp.w & (r | w)) | (fp.r & w))} shared")
        r |= fp.r
        w |= fp.w
    return Footprint(frozenset(r), frozenset(w))


def _with_pointer(loc: int, fp: Footprint, t: Abs) -> Footprint:
    if loc in fp.all:
        raise TypingReject("aliasing", f"location {loc} reachable from itself")
    if t.readonly:
        return Footprint(fp.r | {loc}, fp.w)
    return Footprint(fp.r, fp.w | {loc})


def vtyping_u(u: UValue, store: Store, t: Type, abs_types: Optional[dict] = None) -> Footprint:
    """Canonical footprint of ``u`` at type ``t``; raises :class:`TypingReject`."""
    if isinstance(u, (UUnit, UBool, UU8, UU32)):
        if not _prim_fp(u, t):
            raise TypingReject("ill-typed", f"{u!r} is not a {show_type(t)}")
        return EMPTY
    if isinstance(u, UProd):
        if not isinstance(t, Prod) or len(t.items) != len(u.items):
            raise TypingReject("ill-typed", f"{u!r} is not a {show_type(t)}")
        return combine_footprints([vtyping_u(x, store, s, abs_types) for x, s in zip(u.items, t.items)])
    if isinstance(u, UFun):
        if not isinstance(t, Fun):
            raise TypingReject("ill-typed", f"{u!r} is not a {show_type(t)}")
        return EMPTY
    if isinstance(u, ULoc):
        if not isinstance(t, Abs):
            raise TypingReject("ill-typed", f"pointer at type {show_type(t)}")
        cell = store.get(u.loc)
        if cell is None:
            raise TypingReject("dangling", f"location {u.loc}")
        if not isinstance(cell, UAbstract) or cell.tag != t.name:
            raise TypingReject("ill-typed", f"location {u.loc} holds {cell!r}")
        fp = _abs_entry(t.name, abs_types).vtyping_u(cell, store, t)
        return _with_pointer(u.loc, fp, t)
    if isinstance(u, UAbstract):
        if not isinstance(t, Abs) or t.name != u.tag:
            raise TypingReject("ill-typed", f"{u!r} is not a {show_type(t)}")
        return _abs_entry(t.name, abs_types).vtyping_u(u, store, t)
    raise TypingReject("ill-typed", f"unknown value {u!r}")


# ---------------------------------------------------------------------------
# frame relation


def frame_violation(w_i, mu_i: Store, w_o, mu_o: Store) -> Optional[str]:
    """First violated frame clause, or ``None`` if the frame relation holds."""
    w_i = set(w_i)
    w_o = set(w_o)
    for p in sorted(set(mu_i.cells) | set(mu_o.cells) | w_i | w_o):
        in_i, in_o = p in w_i, p in w_o
        if not in_i and not in_o and mu_i.get(p) != mu_o.get(p):
            return f"inertia: location {p} changed outside the frame"
        if in_i and not in_o and mu_o.get(p) is not None:
            return f"leak freedom: location {p} left the frame but is still mapped"
        if not in_i and in_o and mu_i.get(p) is not None:
            return f"fresh allocation: location {p} entered the frame but was already mapped"
    return None


def frame(w_i, mu_i: Store, w_o, mu_o: Store) -> bool:
    return frame_violation(w_i, mu_i, w_o, mu_o) is None


# ---------------------------------------------------------------------------
# value/update correspondence


def corr(u: UValue, store: Store, v: VValue, t: Type, abs_types: Optional[dict] = None) -> Footprint:
    """Footprint if ``u`` (in ``store``) and ``v`` denote the same value of type ``t``."""
    if isinstance(u, (UUnit, UBool, UU8, UU32)):
        if not _prim_fp(u, t) or not vtyping_v(v, t, abs_types):
            raise TypingReject("ill-typed", f"{u!r} / {v!r} at {show_type(t)}")
        if not isinstance(u, UUnit) and u.value != v.value:
            raise TypingReject("mismatch", f"{u!r} vs {v!r}")
        return EMPTY
    if isinstance(u, UProd):
        if (not isinstance(v, VProd) or not isinstance(t, Prod)
                or not len(u.items) == len(v.items) == len(t.items)):
            raise TypingReject("mismatch", f"{u!r} vs {v!r}")
        return combine_footprints(
            [corr(a, store, b, s, abs_types) for a, b, s in zip(u.items, v.items, t.items)])
    if isinstance(u, UFun):
        if not isinstance(v, VFun) or not isinstance(t, Fun) or (u.name, u.targs) != (v.name, v.targs):
            raise TypingReject("mismatch", f"{u!r} vs {v!r}")
        return EMPTY
    if isinstance(u, ULoc):
        if not isinstance(t, Abs):
            raise TypingReject("ill-typed", f"pointer at type {show_type(t)}")
        cell = store.get(u.loc)
        if cell is None:
            raise TypingReject("dangling", f"location {u.loc}")
        if not isinstance(cell, UAbstract) or cell.tag != t.name:
            raise TypingReject("ill-typed", f"location {u.loc} holds {cell!r}")
        fp = _abs_entry(t.name, abs_types).corr(cell, store, v, t)
        return _with_pointer(u.loc, fp, t)
    if isinstance(u, UAbstract):
        if not isinstance(t, Abs) or t.name != u.tag:
            raise TypingReject("ill-typed", f"{u!r} at {show_type(t)}")
        return _abs_entry(t.name, abs_types).corr(u, store, v, t)
    raise TypingReject("ill-typed", f"unknown value {u!r}")

