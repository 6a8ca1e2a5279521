"""Abstract and concrete syntax of the mini language.

Types and expressions are immutable dataclasses.  The same representation
serves the polymorphic layer (``App`` nodes carry type arguments, types may
contain ``TVar``) and the monomorphic layer (no type arguments, no variables).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Sequence, Union


class SyntaxError_(Exception):
    """Parse or scoping error, with 1-based line/column when known."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg = msg
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + msg)


# ---------------------------------------------------------------------------
# Types


class Type:
    __slots__ = ()

    def __str__(self) -> str:
        return show_type(self)


@dataclass(frozen=True)
class Prim(Type):
    name: str  # Unit | Bool | U8 | U32


UNIT = Prim("Unit")
BOOL = Prim("Bool")
U8 = Prim("U8")
U32 = Prim("U32")
PRIM_NAMES = {"Unit": UNIT, "Bool": BOOL, "U8": U8, "U32": U32}


@dataclass(frozen=True)
class Prod(Type):
    items: tuple[Type, ...]


@dataclass(frozen=True)
class Fun(Type):
    arg: Type
    ret: Type


@dataclass(frozen=True)
class TVar(Type):
    name: str


@dataclass(frozen=True)
class Abs(Type):
    name: str
    args: tuple[Type, ...] = ()
    readonly: bool = False


@dataclass(frozen=True)
class Bang(Type):
    """Deferred bang; only survives around type variables."""

    inner: Type


def bang(t: Type) -> Type:
    """Make ``t`` read-only.  Idempotent: ``bang(bang(t)) == bang(t)``."""
    if isinstance(t, Prim) or isinstance(t, Fun):
        return t
    if isinstance(t, Prod):
        return Prod(tuple(bang(x) for x in t.items))
    if isinstance(t, Abs):
        return Abs(t.name, tuple(bang(x) for x in t.args), True)
    if isinstance(t, TVar):
        return Bang(t)
    if isinstance(t, Bang):
        return t
    raise TypeError(f"not a type: {t!r}")


def type_order(t: Type) -> int:
    """Data types have order 0; a function type is one above its argument and result."""
    if isinstance(t, Fun):
        return 1 + max(type_order(t.arg), type_order(t.ret))
    if isinstance(t, Prod):
        return max((type_order(x) for x in t.items), default=0)
    if isinstance(t, Abs):
        return max((type_order(x) for x in t.args), default=0)
    if isinstance(t, Bang):
        return type_order(t.inner)
    return 0


def free_tvars(t: Type) -> list[str]:
    """Type variables of ``t`` in order of first occurrence."""
    out: list[str] = []

    def go(t: Type) -> None:
        if isinstance(t, TVar):
            if t.name not in out:
                out.append(t.name)
        elif isinstance(t, Prod):
            for x in t.items:
                go(x)
        elif isinstance(t, Abs):
            for x in t.args:
                go(x)
        elif isinstance(t, Fun):
            go(t.arg)
            go(t.ret)
        elif isinstance(t, Bang):
            go(t.inner)

    go(t)
    return out


def subst_type(t: Type, sub: dict[str, Type]) -> Type:
    """Capture-free substitution; re-normalises ``Bang`` once the variable is known."""
    if isinstance(t, TVar):
        return sub.get(t.name, t)
    if isinstance(t, Prim):
        return t
    if isinstance(t, Prod):
        return Prod(tuple(subst_type(x, sub) for x in t.items))
    if isinstance(t, Abs):
        return Abs(t.name, tuple(subst_type(x, sub) for x in t.args), t.readonly)
    if isinstance(t, Fun):
        return Fun(subst_type(t.arg, sub), subst_type(t.ret, sub))
    if isinstance(t, Bang):
        return bang(subst_type(t.inner, sub))
    raise TypeError(f"not a type: {t!r}")


def instantiate_type(
    scheme: Type, args: Sequence[Type], tyvars: Optional[Sequence[str]] = None
) -> Type:
    """Replace the variables of ``scheme`` by ``args``.

    ``tyvars`` gives the binding order; by default it is the order of first
    occurrence in ``scheme``.
    """
    names = list(tyvars) if tyvars is not None else free_tvars(scheme)
    if len(names) != len(args):
        raise ValueError(f"expected {len(names)} type arguments, got {len(args)}")
    for a in args:
        if free_tvars(a):
            raise ValueError(f"type argument {show_type(a)} is not closed")
    out = subst_type(scheme, dict(zip(names, args)))
    left = free_tvars(out)
    if left:
        raise ValueError(f"uninstantiated type variable {left[0]}")
    return out


# ---------------------------------------------------------------------------
# Expressions and patterns


class Pat:
    __slots__ = ()


@dataclass(frozen=True)
class PVar(Pat):
    name: str


@dataclass(frozen=True)
class PWild(Pat):
    pass


@dataclass(frozen=True)
class PTuple(Pat):
    items: tuple[Pat, ...]


def pat_names(p: Pat) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PTuple):
        return [n for x in p.items for n in pat_names(x)]
    return []


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return show_expr(self)


@dataclass(frozen=True)
class Lit(Expr):
    value: Union[int, bool, None]  # None is the unit value
    ty: Optional[Prim] = None  # filled in by the type checker for integers


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class FunRef(Expr):
    """A top-level function used as a value."""

    name: str
    targs: tuple[Type, ...] = ()


@dataclass(frozen=True)
class Let(Expr):
    pat: Pat
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class LetBang(Expr):
    """``let! (vars) pat = bound in body``: ``vars`` are read-only inside ``bound``."""

    vars: tuple[str, ...]
    pat: Pat
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class PrimOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Tuple(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class App(Expr):
    fun: str
    targs: tuple[Type, ...]
    arg: Expr


ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("<", ">", "<=", ">=", "==", "/=")
BOOL_OPS = ("&&", "||")
BINOPS = ARITH_OPS + CMP_OPS + BOOL_OPS


def subexprs(e: Expr) -> Iterator[Expr]:
    """Pre-order walk of ``e``."""
    yield e
    if isinstance(e, (Let, LetBang)):
        yield from subexprs(e.bound)
        yield from subexprs(e.body)
    elif isinstance(e, If):
        yield from subexprs(e.cond)
        yield from subexprs(e.then)
        yield from subexprs(e.orelse)
    elif isinstance(e, PrimOp):
        yield from subexprs(e.left)
        yield from subexprs(e.right)
    elif isinstance(e, Tuple):
        for x in e.items:
            yield from subexprs(x)
    elif isinstance(e, App):
        yield from subexprs(e.arg)


def map_expr_types(e: Expr, f) -> Expr:
    """Rebuild ``e`` applying ``f`` to every type argument."""
    if isinstance(e, (Lit, Var)):
        return e
    if isinstance(e, FunRef):
        return FunRef(e.name, tuple(f(t) for t in e.targs))
    if isinstance(e, Let):
        return Let(e.pat, map_expr_types(e.bound, f), map_expr_types(e.body, f))
    if isinstance(e, LetBang):
        return LetBang(e.vars, e.pat, map_expr_types(e.bound, f), map_expr_types(e.body, f))
    if isinstance(e, If):
        return If(map_expr_types(e.cond, f), map_expr_types(e.then, f), map_expr_types(e.orelse, f))
    if isinstance(e, PrimOp):
        return PrimOp(e.op, map_expr_types(e.left, f), map_expr_types(e.right, f))
    if isinstance(e, Tuple):
        return Tuple(tuple(map_expr_types(x, f) for x in e.items))
    if isinstance(e, App):
        return App(e.fun, tuple(f(t) for t in e.targs), map_expr_types(e.arg, f))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Programs


@dataclass(frozen=True)
class AbsDecl:
    name: str
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class FunDef:
    """A function definition; ``body is None`` marks a foreign function."""

    name: str
    tyvars: tuple[str, ...]
    arg: Type
    ret: Type
    pat: Optional[Pat] = None
    body: Optional[Expr] = None

    @property
    def is_foreign(self) -> bool:
        return self.body is None

    @property
    def type(self) -> Fun:
        return Fun(self.arg, self.ret)


Decl = Union[AbsDecl, FunDef]


@dataclass(frozen=True)
class Program:
    decls: tuple[Decl, ...] = ()
    # monomorphic programs only: mono name -> (polymorphic name, type args)
    origin: dict = field(default_factory=dict, compare=False, hash=False)

    @cached_property
    def typedefs(self) -> dict[str, AbsDecl]:
        return {d.name: d for d in self.decls if isinstance(d, AbsDecl)}

    @cached_property
    def funs(self) -> dict[str, FunDef]:
        return {d.name: d for d in self.decls if isinstance(d, FunDef)}

    @cached_property
    def fundefs(self) -> dict[str, FunDef]:
        return {d.name: d for d in self.decls if isinstance(d, FunDef) and not d.is_foreign}

    @cached_property
    def foreign(self) -> dict[str, FunDef]:
        return {d.name: d for d in self.decls if isinstance(d, FunDef) and d.is_foreign}

    def base_name(self, name: str) -> str:
        """Name of the foreign implementation behind ``name``."""
        if name in self.origin:
            return self.origin[name][0]
        return name

    def origin_targs(self, name: str, targs: tuple[Type, ...]) -> tuple[Type, ...]:
        if name in self.origin:
            return self.origin[name][1]
        return targs


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {"let", "in", "if", "then", "else", "fun", "foreign", "abstract", "and", "True", "False"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<letbang>let!)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|<=|>=|==|/=|&&|\|\||[-+*/<>()\[\],:=|!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int | name | kw | sym | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SyntaxError_(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            toks.append(Token("int", s, line, col))
        elif kind == "letbang":
            toks.append(Token("kw", "let!", line, col))
        elif kind == "name":
            toks.append(Token("kw" if s in KEYWORDS else "name", s, line, col))
        elif kind == "sym":
            toks.append(Token("sym", s, line, col))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser

_PREC = {"||": 1, "&&": 2, "<": 3, ">": 3, "<=": 3, ">=": 3, "==": 3, "/=": 3,
         "+": 4, "-": 4, "*": 5, "/": 5}


def _is_tyvar(name: str) -> bool:
    return name[0].islower() or name[0] == "_"


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.text == text

    def next(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise SyntaxError_(f"{msg}, found {found}", t.line, t.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def name(self) -> str:
        if self.tok.kind != "name":
            self.error("expected a name")
        return self.next().text

    # declarations
    def program(self) -> list[Decl]:
        decls: list[Decl] = []
        while self.tok.kind != "eof":
            if self.at("abstract"):
                self.next()
                name = self.name()
                params = []
                while self.tok.kind == "name" and _is_tyvar(self.tok.text):
                    params.append(self.next().text)
                decls.append(AbsDecl(name, tuple(params)))
            elif self.at("foreign"):
                self.next()
                name = self.name()
                tyvars = self.tyvar_list()
                self.expect(":")
                t = self.type_()
                if not isinstance(t, Fun):
                    self.error("foreign declaration needs a function type")
                if not tyvars:
                    tyvars = free_tvars(t)
                decls.append(FunDef(name, tuple(tyvars), t.arg, t.ret))
            elif self.at("fun"):
                decls.append(self.fundef())
            else:
                self.error("expected 'abstract', 'foreign' or 'fun'")
        return decls

    def tyvar_list(self) -> list[str]:
        out = []
        while self.tok.kind == "name" and _is_tyvar(self.tok.text):
            out.append(self.next().text)
        return out

    def fundef(self) -> FunDef:
        self.expect("fun")
        name = self.name()
        tyvars = self.tyvar_list()
        self.expect("(")
        binds = [self.pbind()]
        while self.at(","):
            self.next()
            binds.append(self.pbind())
        self.expect(")")
        self.expect("->")
        ret = self.type_()
        self.expect("=")
        body = self.expr()
        if len(binds) == 1:
            pat, arg = binds[0]
        else:
            pat = PTuple(tuple(p for p, _ in binds))
            arg = Prod(tuple(t for _, t in binds))
        return FunDef(name, tuple(tyvars), arg, ret, pat, body)

    def pbind(self) -> tuple[Pat, Type]:
        p = self.pat()
        self.expect(":")
        return p, self.type_()

    # types
    def type_(self) -> Type:
        t = self.btype()
        if self.at("->"):
            self.next()
            return Fun(t, self.type_())
        return t

    def btype(self) -> Type:
        if self.tok.kind == "name" and not _is_tyvar(self.tok.text) and self.tok.text not in PRIM_NAMES:
            name = self.next().text
            args = []
            while self._atype_start():
                args.append(self.atype())
            t: Type = Abs(name, tuple(args), False)
            return self.bangs(t)
        return self.atype()

    def _atype_start(self) -> bool:
        return self.tok.kind == "name" or self.at("(")

    def bangs(self, t: Type) -> Type:
        while self.at("!"):
            self.next()
            t = bang(t)
        return t

    def atype(self) -> Type:
        tok = self.tok
        if tok.kind == "name":
            self.next()
            if tok.text in PRIM_NAMES:
                t: Type = PRIM_NAMES[tok.text]
            elif _is_tyvar(tok.text):
                t = TVar(tok.text)
            else:
                t = Abs(tok.text, (), False)
            return self.bangs(t)
        if self.at("("):
            self.next()
            if self.at(")"):
                self.next()
                return self.bangs(UNIT)
            items = [self.type_()]
            while self.at(","):
                self.next()
                items.append(self.type_())
            self.expect(")")
            t = items[0] if len(items) == 1 else Prod(tuple(items))
            return self.bangs(t)
        self.error("expected a type")

    # patterns
    def pat(self) -> Pat:
        if self.tok.kind == "name":
            n = self.next().text
            return PWild() if n == "_" else PVar(n)
        if self.at("("):
            self.next()
            items = [self.pat()]
            while self.at(","):
                self.next()
                items.append(self.pat())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            p = PTuple(tuple(items))
            names = pat_names(p)
            if len(set(names)) != len(names):
                self.error("duplicate name in pattern")
            return p
        self.error("expected a pattern")

    # expressions
    def expr(self) -> Expr:
        if self.at("let"):
            self.next()
            return self.let_chain()
        if self.at("let!"):
            self.next()
            self.expect("(")
            names = []
            while self.tok.kind == "name":
                names.append(self.next().text)
                if self.at(","):
                    self.next()
            self.expect(")")
            p = self.pat()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            return LetBang(tuple(names), p, bound, self.expr())
        if self.at("if"):
            self.next()
            if self.at("|"):
                return self.multiway_if()
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            return If(c, t, self.expr())
        return self.binop(1)

    def let_chain(self) -> Expr:
        p = self.pat()
        self.expect("=")
        bound = self.expr()
        if self.at("and"):
            self.next()
            return Let(p, bound, self.let_chain())
        self.expect("in")
        return Let(p, bound, self.expr())

    def multiway_if(self) -> Expr:
        arms: list[tuple[Expr, Expr]] = []
        while self.at("|"):
            self.next()
            if self.at("else"):
                self.next()
                self.expect("->")
                default = self.expr()
                for c, e in reversed(arms):
                    default = If(c, e, default)
                return default
            c = self.binop(1)
            self.expect("->")
            arms.append((c, self.binop(1)))
        self.error("multi-way if needs an else arm")

    def binop(self, level: int) -> Expr:
        if level > 5:
            return self.app()
        left = self.binop(level + 1)
        while self.tok.kind == "sym" and _PREC.get(self.tok.text) == level:
            op = self.next().text
            right = self.binop(level + 1)
            left = PrimOp(op, left, right)
            if level == 3 and self.tok.kind == "sym" and _PREC.get(self.tok.text) == 3:
                self.error("comparison operators do not associate")
        return left

    def _atom_start(self) -> bool:
        t = self.tok
        return t.kind in ("int", "name") or (t.kind == "kw" and t.text in ("True", "False")) or self.at("(")

    def app(self) -> Expr:
        if self.tok.kind == "name":
            name = self.next().text
            targs: Optional[list[Type]] = None
            if self.at("["):
                self.next()
                targs = [self.type_()]
                while self.at(","):
                    self.next()
                    targs.append(self.type_())
                self.expect("]")
            if self._atom_start():
                return App(name, tuple(targs or ()), self.atom())
            if targs is not None:
                return FunRef(name, tuple(targs))
            return Var(name)
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.next()
            return Lit(int(t.text))
        if t.kind == "kw" and t.text in ("True", "False"):
            self.next()
            return Lit(t.text == "True")
        if t.kind == "name":
            self.next()
            if self.at("["):
                self.next()
                targs = [self.type_()]
                while self.at(","):
                    self.next()
                    targs.append(self.type_())
                self.expect("]")
                return FunRef(t.text, tuple(targs))
            return Var(t.text)
        if self.at("("):
            self.next()
            if self.at(")"):
                self.next()
                return Lit(None)
            items = [self.expr()]
            while self.at(","):
                self.next()
                items.append(self.expr())
            self.expect(")")
            return items[0] if len(items) == 1 else Tuple(tuple(items))
        self.error("expected an expression")


def _resolve(decls: list[Decl]) -> tuple[Decl, ...]:
    """Turn free variable references to functions into ``FunRef``s; reject unbound names."""
    funs: dict[str, FunDef] = {}
    abstract: set[str] = set()
    for d in decls:
        if d.name in funs or d.name in abstract:
            raise SyntaxError_(f"duplicate definition of {d.name}")
        if isinstance(d, FunDef):
            funs[d.name] = d
        else:
            abstract.add(d.name)

    def fix(e: Expr, scope: frozenset) -> Expr:
        if isinstance(e, Lit):
            return e
        if isinstance(e, Var):
            if e.name in scope:
                return e
            if e.name in funs:
                return FunRef(e.name)
            raise SyntaxError_(f"unbound name {e.name}")
        if isinstance(e, FunRef):
            if e.name not in funs:
                raise SyntaxError_(f"unbound function {e.name}")
            return e
        if isinstance(e, Let):
            return Let(e.pat, fix(e.bound, scope), fix(e.body, scope | set(pat_names(e.pat))))
        if isinstance(e, LetBang):
            for v in e.vars:
                if v not in scope:
                    raise SyntaxError_(f"unbound name {v} in let!")
            return LetBang(e.vars, e.pat, fix(e.bound, scope), fix(e.body, scope | set(pat_names(e.pat))))
        if isinstance(e, If):
            return If(fix(e.cond, scope), fix(e.then, scope), fix(e.orelse, scope))
        if isinstance(e, PrimOp):
            return PrimOp(e.op, fix(e.left, scope), fix(e.right, scope))
        if isinstance(e, Tuple):
            return Tuple(tuple(fix(x, scope) for x in e.items))
        if isinstance(e, App):
            if e.fun not in funs:
                if e.fun in scope:
                    raise SyntaxError_(f"{e.fun} is not a top-level function")
                raise SyntaxError_(f"unbound function {e.fun}")
            return App(e.fun, e.targs, fix(e.arg, scope))
        raise TypeError(e)

    out: list[Decl] = []
    for d in decls:
        if isinstance(d, FunDef) and d.body is not None:
            names = pat_names(d.pat)
            if len(set(names)) != len(names):
                raise SyntaxError_(f"duplicate parameter name in {d.name}")
            d = FunDef(d.name, d.tyvars, d.arg, d.ret, d.pat, fix(d.body, frozenset(names)))
        out.append(d)
    return tuple(out)


def parse_program(text: str) -> Program:
    p = _Parser(text)
    return Program(_resolve(p.program()))


def parse_type(text: str) -> Type:
    p = _Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        p.error("trailing input after type")
    return t


def parse_expr(text: str) -> Expr:
    """Parse a stand-alone expression (names are left unresolved)."""
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("trailing input after expression")
    return e


# ---------------------------------------------------------------------------
# Pretty printer


def show_type(t: Type) -> str:
    return _show_type(t, 0)


def _show_type(t: Type, ctx: int) -> str:
    # ctx 0: anywhere, 1: left of an arrow, 2: constructor argument
    if isinstance(t, Prim):
        return "()" if t == UNIT else t.name
    if isinstance(t, TVar):
        return t.name
    if isinstance(t, Bang):
        return _show_type(t.inner, 2) + "!"
    if isinstance(t, Prod):
        return "(" + ", ".join(_show_type(x, 0) for x in t.items) + ")"
    if isinstance(t, Fun):
        s = f"{_show_type(t.arg, 1)} -> {_show_type(t.ret, 0)}"
        return f"({s})" if ctx else s
    if isinstance(t, Abs):
        args = t.args
        if t.readonly:
            args = tuple(a.inner if isinstance(a, Bang) else a for a in args)
        s = " ".join([t.name] + [_show_type(a, 2) for a in args])
        if t.readonly:
            return f"({s})!" if args else f"{s}!"
        return f"({s})" if args and ctx == 2 else s
    raise TypeError(t)


def show_pat(p: Pat) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PWild):
        return "_"
    return "(" + ", ".join(show_pat(x) for x in p.items) + ")"


def _show_lit(e: Lit) -> str:
    if e.value is None:
        return "()"
    if isinstance(e.value, bool):
        return "True" if e.value else "False"
    return str(e.value)


def _targs(ts: tuple[Type, ...]) -> str:
    return "[" + ", ".join(show_type(t) for t in ts) + "]" if ts else ""


def show_expr(e: Expr, indent: int = 0) -> str:
    return _show(e, 0, indent)


def _show(e: Expr, prec: int, ind: int) -> str:
    pad = "  " * ind
    if isinstance(e, Lit):
        return _show_lit(e)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FunRef):
        return e.name + _targs(e.targs)
    if isinstance(e, Tuple):
        return "(" + ", ".join(_show(x, 0, ind) for x in e.items) + ")"
    if isinstance(e, App):
        arg = _show(e.arg, 7, ind)
        return f"{e.fun}{_targs(e.targs)} {arg}"
    if isinstance(e, PrimOp):
        p = _PREC[e.op]
        rp = p + 1
        lp = p + 1 if p == 3 else p
        s = f"{_show(e.left, lp, ind)} {e.op} {_show(e.right, rp, ind)}"
        return f"({s})" if prec > p else s
    if isinstance(e, (Let, LetBang, If)):
        if isinstance(e, Let):
            s = f"let {show_pat(e.pat)} = {_show(e.bound, 0, ind + 1)} in\n{pad}{_show(e.body, 0, ind)}"
        elif isinstance(e, LetBang):
            s = (f"let! ({' '.join(e.vars)}) {show_pat(e.pat)} = {_show(e.bound, 0, ind + 1)} in"
                 f"\n{pad}{_show(e.body, 0, ind)}")
        else:
            s = (f"if {_show(e.cond, 0, ind + 1)} then {_show(e.then, 0, ind + 1)}"
                 f"\n{pad}else {_show(e.orelse, 0, ind)}")
        return f"({s})" if prec > 0 else s
    raise TypeError(e)


def _show_params(d: FunDef) -> str:
    if isinstance(d.pat, PTuple) and isinstance(d.arg, Prod) and len(d.pat.items) == len(d.arg.items):
        parts = [f"{show_pat(p)} : {show_type(t)}" for p, t in zip(d.pat.items, d.arg.items)]
        return "(" + ", ".join(parts) + ")"
    return f"({show_pat(d.pat)} : {show_type(d.arg)})"


def show_decl(d: Decl) -> str:
    if isinstance(d, AbsDecl):
        return " ".join(["abstract", d.name, *d.params])
    head = " ".join([d.name, *d.tyvars])
    if d.is_foreign:
        return f"foreign {head} : {show_type(d.type)}"
    return f"fun {head} {_show_params(d)} -> {show_type(d.ret)} =\n  {show_expr(d.body, 1)}"


def pretty_print(p: Program) -> str:
    if not p.decls:
        return ""
    return "\n".join(show_decl(d) for d in p.decls) + "\n"
