"""Monomorphisation: specialised copies of polymorphic functions, a name
map from instantiations to copies, and the expression/value translations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..syntax import (
    Abs, App, Bang, Expr, Fun, FunDef, FunRef, If, Let, LetBang, Lit, Prim, PrimOp, Prod,
    Program, TVar, Tuple, Type, Var, free_tvars, subst_type,
)
from ..values import VFun, VProd, VValue


class MonoError(Exception):
    pass


def mangle_type(t: Type) -> str:
    """Injective spelling of a closed type using identifier characters."""
    if isinstance(t, Prim):
        return t.name
    if isinstance(t, Prod):
        return "T" + "_".join(mangle_type(x) for x in t.items) + "_E"
    if isinstance(t, Fun):
        return "F" + mangle_type(t.arg) + "_" + mangle_type(t.ret) + "_E"
    if isinstance(t, Abs):
        tag = "R" if t.readonly else "W"
        return f"A{tag}{t.name}" + "".join("_" + mangle_type(x) for x in t.args) + "_E"
    if isinstance(t, (TVar, Bang)):
        raise MonoError(f"cannot specialise at open type {t}")
    raise TypeError(t)


def mono_name(name: str, targs: tuple) -> str:
    if not targs:
        return name
    return name + "_" + "_".join(mangle_type(t) for t in targs)


@dataclass(frozen=True)
class NameMap:
    """Injective map from ``(function name, type arguments)`` to a monomorphic name."""

    table: Mapping = field(default_factory=dict)

    def __post_init__(self):
        names = list(self.table.values())
        if len(set(names)) != len(names):
            raise MonoError("name map is not injective")

    def __getitem__(self, key: tuple) -> str:
        try:
            return self.table[key]
        except KeyError:
            name, targs = key
            raise MonoError(f"no monomorphic name for {name}{list(map(str, targs))}") from None

    def __contains__(self, key: tuple) -> bool:
        return key in self.table

    def items(self):
        return self.table.items()

    def inverse(self) -> dict:
        return {v: k for k, v in self.table.items()}


def mono_expr(N: NameMap, e: Expr, sub: Optional[dict] = None) -> Expr:
    """Replace every instantiated call by the corresponding specialised copy.

    ``sub`` instantiates the type variables of the enclosing function.
    """
    sub = sub or {}

    def inst(targs: tuple) -> tuple:
        out = tuple(subst_type(t, sub) for t in targs)
        for t in out:
            if free_tvars(t):
                raise MonoError(f"type argument {t} is not closed")
        return out

    def go(e: Expr) -> Expr:
        if isinstance(e, (Lit, Var)):
            return e
        if isinstance(e, FunRef):
            return FunRef(N[(e.name, inst(e.targs))])
        if isinstance(e, Let):
            return Let(e.pat, go(e.bound), go(e.body))
        if isinstance(e, LetBang):
            return LetBang(e.vars, e.pat, go(e.bound), go(e.body))
        if isinstance(e, If):
            return If(go(e.cond), go(e.then), go(e.orelse))
        if isinstance(e, PrimOp):
            return PrimOp(e.op, go(e.left), go(e.right))
        if isinstance(e, Tuple):
            return Tuple(tuple(go(x) for x in e.items))
        if isinstance(e, App):
            return App(N[(e.fun, inst(e.targs))], (), go(e.arg))
        raise TypeError(e)

    return go(e)


def mono_value(N: NameMap, v: VValue) -> VValue:
    """Rename function values through ``N``; data is unchanged."""
    if isinstance(v, VFun):
        return VFun(N[(v.name, v.targs)])
    if isinstance(v, VProd):
        return VProd(tuple(mono_value(N, x) for x in v.items))
    return v


def _instances(e: Expr, sub: dict, out: list) -> None:
    if isinstance(e, (Lit, Var)):
        return
    if isinstance(e, FunRef):
        out.append((e.name, tuple(subst_type(t, sub) for t in e.targs)))
    elif isinstance(e, App):
        out.append((e.fun, tuple(subst_type(t, sub) for t in e.targs)))
        _instances(e.arg, sub, out)
    elif isinstance(e, (Let, LetBang)):
        _instances(e.bound, sub, out)
        _instances(e.body, sub, out)
    elif isinstance(e, If):
        for x in (e.cond, e.then, e.orelse):
            _instances(x, sub, out)
    elif isinstance(e, PrimOp):
        _instances(e.left, sub, out)
        _instances(e.right, sub, out)
    elif isinstance(e, Tuple):
        for x in e.items:
            _instances(x, sub, out)


def mono_program(prog: Program, names: Optional[NameMap] = None,
                 roots: Optional[list] = None) -> tuple[Program, NameMap]:
    """Specialise every instantiation reachable from the monomorphic functions
    (or from ``roots``).

    Copies are named canonically; call sites are rewritten through ``names``
    when given (it defaults to the canonical map).  Returns the monomorphic
    program and the canonical map.  Foreign copies record their origin so the
    foreign environments can find the shared implementation.
    """
    funs = prog.funs
    if roots is None:
        roots = [(n, ()) for n, d in funs.items() if not d.tyvars and not d.is_foreign]
    table: dict = {}
    order: list = []
    work = list(roots)
    while work:
        key = work.pop(0)
        if key in table:
            continue
        name, targs = key
        d = funs.get(name)
        if d is None:
            raise MonoError(f"unknown function {name}")
        if len(targs) != len(d.tyvars):
            raise MonoError(f"{name} expects {len(d.tyvars)} type arguments, got {len(targs)}")
        table[key] = mono_name(name, targs)
        order.append(key)
        if not d.is_foreign:
            found: list = []
            _instances(d.body, dict(zip(d.tyvars, targs)), found)
            work.extend(found)
    canon = NameMap(table)
    N = names if names is not None else canon
    decls: list = []
    origin: dict = {}
    for d in prog.decls:
        if not isinstance(d, FunDef):
            decls.append(d)
    for key in sorted(order, key=lambda k: table[k]):
        name, targs = key
        d = funs[name]
        sub = dict(zip(d.tyvars, targs))
        arg, ret = subst_type(d.arg, sub), subst_type(d.ret, sub)
        new = table[key]
        if d.is_foreign:
            decls.append(FunDef(new, (), arg, ret))
            origin[new] = (prog.base_name(name), prog.origin_targs(name, targs))
        else:
            decls.append(FunDef(new, (), arg, ret, d.pat, mono_expr(N, d.body, sub)))
    return Program(tuple(decls), origin), canon
