"""Uniqueness type checking.

Linear variables are tracked by marking each binding ``available`` or
``used`` in a single deterministic pass; ``if`` branches are checked from the
same snapshot and must consume the same linear variables.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .syntax import (
    ARITH_OPS, BOOL, BOOL_OPS, CMP_OPS, U8, U32, UNIT, Abs, App, Bang, Expr, Fun,
    FunDef, FunRef, If, Let, LetBang, Lit, PTuple, PVar, PWild, Pat, Prim, PrimOp,
    Prod, Program, TVar, Tuple, Type, Var, bang, instantiate_type, show_type, subexprs,
)

__all__ = [
    "Kind", "TypeCheckError", "TyVarCtx", "TypingCtx", "TypedProgram",
    "kind_of", "bang_type", "typecheck_expr", "typecheck_program", "escapable",
]


class TypeCheckError(Exception):
    def __init__(self, msg: str, fun: Optional[str] = None):
        self.msg = msg
        self.fun = fun
        super().__init__(f"in {fun}: {msg}" if fun else msg)


class Kind(enum.Enum):
    LINEAR = "linear"
    SHAREABLE = "shareable"


TyVarCtx = dict  # type-variable name -> Kind


def bang_type(t: Type) -> Type:
    return bang(t)


def kind_of(A: TyVarCtx, t: Type) -> Kind:
    def linear(t: Type) -> bool:
        if isinstance(t, (Prim, Fun)):
            return False
        if isinstance(t, Bang):
            _check_bound(t.inner)
            return False
        if isinstance(t, TVar):
            if t.name not in A:
                raise TypeCheckError(f"unbound type variable {t.name}")
            return A[t.name] == Kind.LINEAR
        if isinstance(t, Prod):
            return any([linear(x) for x in t.items])
        if isinstance(t, Abs):
            inner = any([linear(x) for x in t.args])
            return inner or not t.readonly
        raise TypeError(t)

    def _check_bound(t: Type) -> None:
        if isinstance(t, TVar) and t.name not in A:
            raise TypeCheckError(f"unbound type variable {t.name}")

    return Kind.LINEAR if linear(t) else Kind.SHAREABLE


def escapable(t: Type) -> bool:
    """True when ``t`` may leave a ``let!`` region: shareable and no read-only references."""
    if isinstance(t, (Prim, Fun)):
        return True
    if isinstance(t, Prod):
        return all(escapable(x) for x in t.items)
    return False  # Abs, TVar, Bang


AVAILABLE, USED, BANGED = "available", "used", "banged"


@dataclass
class _Entry:
    type: Type
    state: str
    linear: bool


@dataclass
class TypingCtx:
    """Variable name -> (type, usage state).  Shadowed entries are kept on a stack."""

    entries: dict = field(default_factory=dict)

    @classmethod
    def of(cls, A: TyVarCtx, bindings: dict) -> "TypingCtx":
        ctx = cls()
        for name, t in bindings.items():
            ctx.entries[name] = _Entry(t, AVAILABLE, kind_of(A, t) == Kind.LINEAR)
        return ctx

    def snapshot(self) -> dict:
        return {k: _Entry(v.type, v.state, v.linear) for k, v in self.entries.items()}

    def restore(self, snap: dict) -> None:
        self.entries = {k: _Entry(v.type, v.state, v.linear) for k, v in snap.items()}

    def used_linear(self) -> set:
        return {k for k, v in self.entries.items() if v.linear and v.state == USED}

    def unused_linear(self) -> list:
        return [k for k, v in self.entries.items() if v.linear and v.state == AVAILABLE]


@dataclass(frozen=True)
class TypedProgram:
    program: Program  # bodies elaborated: every integer literal carries its type
    signatures: dict  # name -> (tyvars, Fun type)


class _Checker:
    def __init__(self, program: Program, A: TyVarCtx):
        self.prog = program
        self.funs = program.funs
        self.A = A

    def err(self, msg: str):
        raise TypeCheckError(msg)

    def kind(self, t: Type) -> Kind:
        return kind_of(self.A, t)

    def fun_type(self, name: str, targs: tuple) -> Fun:
        if name not in self.funs:
            self.err(f"unknown function {name}")
        d = self.funs[name]
        if len(targs) != len(d.tyvars):
            self.err(f"{name} expects {len(d.tyvars)} type arguments, got {len(targs)}")
        for t in targs:
            self.check_wf(t)
        try:
            return instantiate_type(d.type, targs, d.tyvars) if d.tyvars else d.type
        except ValueError as exc:
            self.err(str(exc))

    def check_wf(self, t: Type) -> None:
        for x in _walk_types(t):
            if isinstance(x, TVar) and x.name not in self.A:
                self.err(f"unbound type variable {x.name}")
            if isinstance(x, Abs):
                decl = self.prog.typedefs.get(x.name)
                if decl is None:
                    self.err(f"unknown abstract type {x.name}")
                if len(decl.params) != len(x.args):
                    self.err(f"{x.name} expects {len(decl.params)} type arguments")

    # -- expressions -------------------------------------------------------
    def synth(self, ctx: TypingCtx, e: Expr, expected: Optional[Type] = None) -> tuple[Type, Expr]:
        if isinstance(e, Lit):
            if e.value is None:
                return UNIT, e
            if isinstance(e.value, bool):
                return BOOL, e
            ty = expected if expected in (U8, U32) else (e.ty or U32)
            bound = 1 << (8 if ty == U8 else 32)
            if not 0 <= e.value < bound:
                self.err(f"literal {e.value} out of range for {ty.name}")
            return ty, Lit(e.value, ty)
        if isinstance(e, Var):
            ent = ctx.entries.get(e.name)
            if ent is None:
                self.err(f"unbound variable {e.name}")
            if ent.state == USED:
                self.err(f"linear variable {e.name} used twice (already consumed)")
            if ent.linear and ent.state == AVAILABLE:
                ent.state = USED
            return ent.type, e
        if isinstance(e, FunRef):
            return self.fun_type(e.name, e.targs), e
        if isinstance(e, Tuple):
            exp_items = expected.items if isinstance(expected, Prod) and len(expected.items) == len(e.items) else None
            ts, es = [], []
            for i, x in enumerate(e.items):
                t, x2 = self.synth(ctx, x, exp_items[i] if exp_items else None)
                ts.append(t)
                es.append(x2)
            return Prod(tuple(ts)), Tuple(tuple(es))
        if isinstance(e, PrimOp):
            return self.primop(ctx, e, expected)
        if isinstance(e, If):
            tc, c2 = self.synth(ctx, e.cond, BOOL)
            if tc != BOOL:
                self.err(f"if condition has type {show_type(tc)}, expected Bool")
            snap = ctx.snapshot()
            tt, t2 = self.synth(ctx, e.then, expected)
            used_then = ctx.used_linear()
            ctx.restore(snap)
            te, e2 = self.synth(ctx, e.orelse, expected or tt)
            if te != tt:
                # a literal in the then-branch may have defaulted before the else-branch fixed the type
                if _is_int_lit(e.then) and te in (U8, U32) and tt in (U8, U32):
                    ctx2 = TypingCtx()
                    ctx2.restore(snap)
                    tt, t2 = self.synth(ctx2, e.then, te)
                if te != tt:
                    self.err(f"if branches have types {show_type(tt)} and {show_type(te)}")
            if ctx.used_linear() != used_then:
                diff = sorted(ctx.used_linear() ^ used_then)
                self.err(f"if branches consume different linear variables: {', '.join(diff)}")
            return tt, If(c2, t2, e2)
        if isinstance(e, Let):
            tb, b2 = self.synth(ctx, e.bound)
            saved = self.bind(ctx, e.pat, tb)
            tr, body2 = self.synth(ctx, e.body, expected)
            self.unbind(ctx, e.pat, saved)
            return tr, Let(e.pat, b2, body2)
        if isinstance(e, LetBang):
            old = {}
            for v in e.vars:
                ent = ctx.entries.get(v)
                if ent is None:
                    self.err(f"unbound variable {v} in let!")
                if ent.state != AVAILABLE:
                    self.err(f"variable {v} in let! is not available")
                old[v] = _Entry(ent.type, ent.state, ent.linear)
                ctx.entries[v] = _Entry(bang(ent.type), BANGED, False)
            tb, b2 = self.synth(ctx, e.bound)
            for v, ent in old.items():
                ctx.entries[v] = ent
            if self.kind(tb) != Kind.SHAREABLE or not escapable(tb):
                self.err(f"let! result type {show_type(tb)} may not escape the region")
            saved = self.bind(ctx, e.pat, tb)
            tr, body2 = self.synth(ctx, e.body, expected)
            self.unbind(ctx, e.pat, saved)
            return tr, LetBang(e.vars, e.pat, b2, body2)
        if isinstance(e, App):
            ft = self.fun_type(e.fun, e.targs)
            ta, a2 = self.synth(ctx, e.arg, ft.arg)
            if ta != ft.arg:
                self.err(f"argument of {e.fun} has type {show_type(ta)}, expected {show_type(ft.arg)}")
            return ft.ret, App(e.fun, e.targs, a2)
        raise TypeError(e)

    def primop(self, ctx: TypingCtx, e: PrimOp, expected: Optional[Type] = None) -> tuple[Type, Expr]:
        if e.op in BOOL_OPS:
            tl, l2 = self.synth(ctx, e.left, BOOL)
            tr, r2 = self.synth(ctx, e.right, BOOL)
            if tl != BOOL or tr != BOOL:
                self.err(f"operands of {e.op} must be Bool")
            return BOOL, PrimOp(e.op, l2, r2)
        # numeric operands (== and /= also accept Bool)
        hint = expected if e.op in ARITH_OPS and expected in (U8, U32) else None
        if _is_int_lit(e.left) and not _is_int_lit(e.right):
            tr, r2 = self.synth(ctx, e.right, hint)
            tl, l2 = self.synth(ctx, e.left, tr)
        else:
            tl, l2 = self.synth(ctx, e.left, hint)
            tr, r2 = self.synth(ctx, e.right, tl)
        ok = (U8, U32, BOOL) if e.op in ("==", "/=") else (U8, U32)
        if tl != tr or tl not in ok:
            self.err(f"bad operand types {show_type(tl)} {e.op} {show_type(tr)}")
        res = tl if e.op in ARITH_OPS else BOOL
        return res, PrimOp(e.op, l2, r2)

    def bind(self, ctx: TypingCtx, p: Pat, t: Type) -> dict:
        saved: dict = {}

        def go(p: Pat, t: Type) -> None:
            if isinstance(p, PVar):
                if p.name in saved:
                    self.err(f"duplicate name {p.name} in pattern")
                saved[p.name] = ctx.entries.get(p.name)
                ctx.entries[p.name] = _Entry(t, AVAILABLE, self.kind(t) == Kind.LINEAR)
            elif isinstance(p, PWild):
                if self.kind(t) == Kind.LINEAR:
                    self.err(f"cannot discard a value of linear type {show_type(t)}")
            elif isinstance(p, PTuple):
                if not isinstance(t, Prod) or len(t.items) != len(p.items):
                    self.err(f"tuple pattern of arity {len(p.items)} does not match {show_type(t)}")
                for q, s in zip(p.items, t.items):
                    go(q, s)

        go(p, t)
        return saved

    def unbind(self, ctx: TypingCtx, p: Pat, saved: dict) -> None:
        for name, old in saved.items():
            ent = ctx.entries[name]
            if ent.linear and ent.state == AVAILABLE:
                self.err(f"linear variable {name} is never used")
            if old is None:
                del ctx.entries[name]
            else:
                ctx.entries[name] = old


def _is_int_lit(e: Expr) -> bool:
    """An integer literal, or arithmetic over them: its width comes from context."""
    if isinstance(e, PrimOp):
        return e.op in ARITH_OPS and _is_int_lit(e.left) and _is_int_lit(e.right)
    return isinstance(e, Lit) and isinstance(e.value, int) and not isinstance(e.value, bool)


def _walk_types(t: Type):
    yield t
    if isinstance(t, Prod):
        for x in t.items:
            yield from _walk_types(x)
    elif isinstance(t, Abs):
        for x in t.args:
            yield from _walk_types(x)
    elif isinstance(t, Fun):
        yield from _walk_types(t.arg)
        yield from _walk_types(t.ret)
    elif isinstance(t, Bang):
        yield from _walk_types(t.inner)


def typecheck_expr(
    A: TyVarCtx, ctx: TypingCtx, e: Expr, program: Optional[Program] = None,
    expected: Optional[Type] = None,
) -> Type:
    """Type of ``e``; linear entries of ``ctx`` consumed by ``e`` are marked used."""
    t, _ = _Checker(program or Program(), A).synth(ctx, e, expected)
    return t


def _elaborate_fun(program: Program, d: FunDef) -> FunDef:
    A = {v: Kind.LINEAR for v in d.tyvars}
    chk = _Checker(program, A)
    chk.check_wf(d.arg)
    chk.check_wf(d.ret)
    ctx = TypingCtx()
    chk.bind(ctx, d.pat, d.arg)
    t, body = chk.synth(ctx, d.body, d.ret)
    if t != d.ret:
        chk.err(f"body has type {show_type(t)}, declared {show_type(d.ret)}")
    left = ctx.unused_linear()
    if left:
        chk.err(f"linear variable {left[0]} is never used")
    return FunDef(d.name, d.tyvars, d.arg, d.ret, d.pat, body)


def _check_no_recursion(program: Program) -> None:
    graph = {}
    for name, d in program.fundefs.items():
        graph[name] = {x.fun if isinstance(x, App) else x.name
                       for x in subexprs(d.body) if isinstance(x, (App, FunRef))}
    state: dict = {}

    def visit(n: str, path: list) -> None:
        if state.get(n) == 1:
            raise TypeCheckError(f"recursive definition: {' -> '.join(path + [n])}", n)
        if state.get(n) == 2 or n not in graph:
            return
        state[n] = 1
        for m in sorted(graph[n]):
            visit(m, path + [n])
        state[n] = 2

    for n in graph:
        visit(n, [])


def typecheck_program(program: Program) -> TypedProgram:
    errors = []
    decls = []
    for d in program.decls:
        if isinstance(d, FunDef):
            try:
                if d.is_foreign:
                    _Checker(program, {v: Kind.LINEAR for v in d.tyvars}).check_wf(d.type)
                else:
                    d = _elaborate_fun(program, d)
            except TypeCheckError as exc:
                errors.append(TypeCheckError(exc.msg, d.name))
        decls.append(d)
    if errors:
        raise errors[0] if len(errors) == 1 else TypeCheckError(
            "; ".join(str(x) for x in errors))
    out = Program(tuple(decls), dict(program.origin))
    _check_no_recursion(out)
    sigs = {d.name: (d.tyvars, d.type) for d in out.funs.values()}
    return TypedProgram(out, sigs)
