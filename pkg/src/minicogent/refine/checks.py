"""Differential checkers for every refinement step of the tower.

Each checker runs independent seeded trials and returns a :class:`CheckReport`.
A trial checks an implication: when the lower layer evaluates, the upper
layer must evaluate too and the two results must be related.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Callable, Optional

from .. import lowmachine as lm
from .. import shallow as sh
from ..dynsem import (
    EvalError, TypingReject, apply_u, apply_v, corr, frame_violation, vtyping_u, vtyping_v,
)
from ..ffi import (
    ARRAY, CLAUSES, DEFAULT_ENVS, MUTANTS, PRELUDE, PRELUDE_SOURCE, ArrayType, FfiEnvs, check_abs_type_obligations,
)
from ..syntax import (
    BOOL, U8, U32, UNIT, Abs, Program, Type, parse_program, pretty_print, subst_type,
)
from ..typecheck import typecheck_program
from ..values import MAX_U32, UFun, UProd, VFun, VProd, VU32, VWA
from .gen import World, gen_program, images, prim_images, rand_prim
from .mono import NameMap, mono_name, mono_program, mono_value

# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one checker run.  ``clauses`` counts failures per clause."""

    check: str
    trials: int
    failures: int
    seed: object
    clauses: dict = field(default_factory=dict)
    counterexample: Optional[dict] = None
    elapsed: float = 0.0
    coverage: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self, timestamp: bool = True) -> dict:
        d = {"check": self.check, "trials": self.trials, "failures": self.failures,
             "seed": self.seed, "clauses": dict(self.clauses)}
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample
        if self.coverage:
            d["coverage"] = dict(self.coverage)
        if timestamp:
            d["elapsed"] = round(self.elapsed, 3)
        return d

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), sort_keys=True)


def _show(x, limit: int = 400) -> str:
    s = repr(x)
    return s if len(s) <= limit else s[:limit] + "..."


class _Tally:
    def __init__(self, check: str, seed, clauses: tuple):
        self.check = check
        self.seed = seed
        self.counts = {c: 0 for c in clauses}
        self.trials = 0
        self.failures = 0
        self.example: Optional[dict] = None
        self.coverage: dict = {}
        self.start = time.perf_counter()

    def cover(self, tag: str) -> None:
        self.coverage[tag] = self.coverage.get(tag, 0) + 1

    def add(self, index: int, failed: list, info: Callable[[], dict]) -> None:
        """Record one trial; ``failed`` lists ``(clause, detail)`` pairs."""
        self.trials += 1
        if not failed:
            return
        self.failures += 1
        for clause, _ in failed:
            self.counts[clause] = self.counts.get(clause, 0) + 1
        if self.example is None:
            self.example = {"trial": index, "violations": [{"clause": c, "detail": d} for c, d in failed],
                            **info()}

    def report(self) -> CheckReport:
        return CheckReport(self.check, self.trials, self.failures, self.seed, self.counts,
                           self.example, time.perf_counter() - self.start, self.coverage)


def _trial_rng(seed, check: str, i: int) -> random.Random:
    return random.Random(f"{seed}:{check}:{i}")


# ---------------------------------------------------------------------------
# corpus programs


def corpus_source(name: str) -> str:
    """Source text of a shipped example program (``sum`` or ``binsearch``)."""
    return resources.files("minicogent").joinpath("corpus", f"{name}.cog").read_text()


@lru_cache(maxsize=None)
def corpus_program(name: str) -> Program:
    """A shipped example, elaborated by the typechecker."""
    return typecheck_program(parse_program(corpus_source(name))).program


LITERAL_SOURCE = """\
fun main (u : ()) -> U32 =
  42
"""

ENTRIES = {"sum": "sum", "binsearch": "binary_search", "literal": "main"}


def literal_program() -> Program:
    return typecheck_program(parse_program(LITERAL_SOURCE)).program


def _item(x) -> tuple:
    if isinstance(x, Program):
        return x, "main"
    return x


# ---------------------------------------------------------------------------
# related inputs


def _inputs(world: World, t: Type, rng: random.Random, max_len: int) -> tuple:
    return images(world, t, rng, max_len)


def input_violations(world: World, t: Type, imgs: tuple) -> list:
    """Self-check of generated inputs: all four images must be related."""
    v, u, low, s = imgs
    out = []
    try:
        corr(u, world.store, v, t)
    except TypingReject as exc:
        out.append(("inputs", f"corr: {exc}"))
    if not lm.rel_VC(low, u, world.amap):
        out.append(("inputs", "rel_VC"))
    why = lm.rel_HC_violation(world.heap, world.store, world.amap)
    if why:
        out.append(("inputs", f"rel_HC: {why}"))
    if not sh.rel_PS(s, v):
        out.append(("inputs", "rel_PS"))
    return out


def sorted_search_input(world: World, rng: random.Random, max_len: int) -> tuple:
    """A sorted U32 array and a probe that is present about half the time."""
    n = rng.randint(0, max_len)
    hi = rng.choice([4, 64, 1 << 16, MAX_U32])
    xs = sorted(rng.randint(0, hi) for _ in range(n))
    v = rng.choice(xs) if xs and rng.random() < 0.5 else rng.randint(0, hi)
    arr = world.array(U32, xs)
    key = prim_images(U32, v)
    return _tuple4([arr, key])


def _tuple4(parts: list) -> tuple:
    return (VProd(tuple(p[0] for p in parts)), UProd(tuple(p[1] for p in parts)),
            lm.LTuple(tuple(p[2] for p in parts)), sh.STuple(tuple(p[3] for p in parts)))


# ---------------------------------------------------------------------------
# type preservation, frame, value/update correspondence on whole programs


def _program_for(corpus, seed, check: str, i: int, size: int) -> tuple:
    if corpus is None:
        return gen_program(f"{seed}:{check}:{i}", size), "main", True
    prog, entry = _item(corpus[i % len(corpus)])
    return prog, entry, False


def _elaborate(prog: Program, generated: bool) -> Program:
    return typecheck_program(prog).program if generated else prog


def _run_program_checks(check: str, clauses: tuple, body: Callable, corpus, seed, trials: int,
                        size: int, max_len: int, envs: FfiEnvs, heap_bytes: int) -> CheckReport:
    tally = _Tally(check, seed, clauses)
    if corpus is not None and len(corpus) == 0:
        return tally.report()
    for i in range(trials):
        prog, entry, generated = _program_for(corpus, seed, check, i, size)
        prog = _elaborate(prog, generated)
        d = prog.funs[entry]
        rng = _trial_rng(seed, check, i)
        world = World.new(heap_bytes)
        imgs = _inputs(world, d.arg, rng, max_len)
        failed, outs = body(prog, entry, d, world, imgs, envs)

        def info(prog=prog, entry=entry, imgs=imgs, outs=outs, generated=generated):
            r = {"entry": entry, "input": _show(imgs[0]), **{k: _show(x) for k, x in outs.items()}}
            if generated:
                r["program"] = pretty_print(prog)
            return r

        tally.add(i, failed, info)
    return tally.report()


def _thm1_body(prog, entry, d, world, imgs, envs):
    v, u, _, _ = imgs
    failed, outs = [], {}
    try:
        vr = apply_v(envs.v, prog, entry, v)
        outs["value"] = vr
        if not vtyping_v(vr, d.ret):
            failed.append(("vtyping_v", f"result {_show(vr)} is not a {d.ret}"))
    except EvalError as exc:
        failed.append(("eval_v", str(exc)))
    try:
        ur, st = apply_u(envs.u, prog, entry, world.store, u)
        outs["update"] = ur
        vtyping_u(ur, st, d.ret)
    except EvalError as exc:
        failed.append(("eval_u", str(exc)))
    except TypingReject as exc:
        failed.append(("vtyping_u", str(exc)))
    return failed, outs


def check_thm1(corpus=None, seed=0, trials: int = 1000, *, size: int = 6, max_len: int = 64,
               envs: FfiEnvs = DEFAULT_ENVS, heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> CheckReport:
    """Type preservation at both semantics.

    ``corpus`` is a list of programs (entry ``main``) or ``(program, entry)``
    pairs; ``None`` draws a fresh generated program for every trial.
    """
    return _run_program_checks("thm1", ("eval_v", "vtyping_v", "eval_u", "vtyping_u"), _thm1_body,
                               corpus, seed, trials, size, max_len, envs, heap_bytes)


def _footprint_checks(world, d, u, ur, st) -> list:
    """Output typing, ``r' <= r`` and the frame relation for one update run."""
    failed = []
    try:
        fp_i = vtyping_u(u, world.store, d.arg)
    except TypingReject as exc:
        return [("inputs", str(exc))]
    try:
        fp_o = vtyping_u(ur, st, d.ret)
    except TypingReject as exc:
        return [("vtyping_u", str(exc))]
    if not fp_o.r <= fp_i.r:
        failed.append(("read-set", f"new read-only locations {sorted(fp_o.r - fp_i.r)}"))
    why = frame_violation(fp_i.w, world.store, fp_o.w, st)
    if why:
        failed.append(("frame", why))
    return failed


def _thm2_body(prog, entry, d, world, imgs, envs):
    _, u, _, _ = imgs
    try:
        ur, st = apply_u(envs.u, prog, entry, world.store, u)
    except EvalError as exc:
        return [("eval_u", str(exc))], {}
    return _footprint_checks(world, d, u, ur, st), {"update": ur}


def check_thm2(corpus=None, seed=0, trials: int = 1000, *, size: int = 6, max_len: int = 64,
               envs: FfiEnvs = DEFAULT_ENVS, heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> CheckReport:
    """Update-semantics footprints: output typing, ``r' <= r`` and frame."""
    return _run_program_checks("thm2", ("inputs", "eval_u", "vtyping_u", "read-set", "frame"), _thm2_body,
                               corpus, seed, trials, size, max_len, envs, heap_bytes)


def _thm3_body(prog, entry, d, world, imgs, envs):
    v, u, _, _ = imgs
    try:
        corr(u, world.store, v, d.arg)
    except TypingReject as exc:
        return [("inputs", str(exc))], {}
    try:
        ur, st = apply_u(envs.u, prog, entry, world.store, u)
    except EvalError as exc:
        return [("eval_u", str(exc))], {}
    outs = {"update": ur}
    try:
        vr = apply_v(envs.v, prog, entry, v)
    except EvalError as exc:
        return [("eval_v", str(exc))], outs
    outs["value"] = vr
    try:
        corr(ur, st, vr, d.ret)
    except TypingReject as exc:
        return [("corr", str(exc))], outs
    return _footprint_checks(world, d, u, ur, st), outs


def check_thm3(corpus=None, seed=0, trials: int = 1000, *, size: int = 6, max_len: int = 64,
               envs: FfiEnvs = DEFAULT_ENVS, heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> CheckReport:
    """Update refines value: a successful update run has a related value run."""
    return _run_program_checks("thm3", ("inputs", "eval_u", "eval_v", "corr", "vtyping_u", "read-set", "frame"),
                               _thm3_body, corpus, seed, trials, size, max_len, envs, heap_bytes)


# ---------------------------------------------------------------------------
# monomorphisation and the shallow layer


InputGen = Callable[[World, random.Random, int], tuple]


def _gen_inputs(d, input_gen: Optional[InputGen]):
    if input_gen is not None:
        return input_gen
    return lambda world, rng, max_len: images(world, d.arg, rng, max_len)


def check_thm4(program, N: Optional[NameMap] = None, seed=0, trials: int = 500, *, entry: Optional[str] = None,
               max_len: int = 64, input_gen: Optional[InputGen] = None,
               envs: FfiEnvs = DEFAULT_ENVS) -> CheckReport:
    """Monomorphisation: the specialised program computes the renamed result.

    ``N`` overrides the name map used at call sites (the default is the
    canonical one produced by :func:`mono_program`).
    """
    prog, entry = (program, entry or "main") if isinstance(program, Program) else program
    tally = _Tally("thm4", seed, ("eval_poly", "eval_mono", "equal"))
    mp, canon = mono_program(prog, names=N)
    d = prog.funs[entry]
    gen = _gen_inputs(d, input_gen)
    mentry = canon[(entry, ())]
    for i in range(trials):
        rng = _trial_rng(seed, "thm4", i)
        v = gen(World.new(), rng, max_len)[0]
        failed, outs = [], {}
        try:
            vp = apply_v(envs.v, prog, entry, v)
            outs["poly"] = vp
        except EvalError as exc:
            failed.append(("eval_poly", str(exc)))
        try:
            vm = apply_v(envs.v, mp, mentry, mono_value(canon, v))
            outs["mono"] = vm
        except EvalError as exc:
            failed.append(("eval_mono", str(exc)))
        if not failed and outs["mono"] != mono_value(canon, outs["poly"]):
            failed.append(("equal", "monomorphic result differs from the renamed polymorphic result"))
        tally.add(i, failed, lambda v=v, outs=outs: {"entry": entry, "input": _show(v),
                                                     **{k: _show(x) for k, x in outs.items()}})
    return tally.report()


def check_thm5(program, shallow_fn: Callable, seed=0, trials: int = 500, *, entry: Optional[str] = None,
               max_len: int = 64, input_gen: Optional[InputGen] = None,
               envs: FfiEnvs = DEFAULT_ENVS) -> CheckReport:
    """Shallow embedding against the polymorphic value semantics."""
    prog, entry = (program, entry or "main") if isinstance(program, Program) else program
    tally = _Tally("thm5", seed, ("eval_v", "shallow", "rel_PS"))
    d = prog.funs[entry]
    gen = _gen_inputs(d, input_gen)
    for i in range(trials):
        rng = _trial_rng(seed, "thm5", i)
        v, _, _, s = gen(World.new(), rng, max_len)
        failed, outs = [], {}
        try:
            outs["shallow"] = shallow_fn(s)
        except (TypeError, ValueError) as exc:
            failed.append(("shallow", str(exc)))
        try:
            outs["value"] = apply_v(envs.v, prog, entry, v)
        except EvalError as exc:
            failed.append(("eval_v", str(exc)))
        if not failed and not sh.rel_PS(outs["shallow"], outs["value"]):
            failed.append(("rel_PS", "shallow and value results are unrelated"))
        tally.add(i, failed, lambda v=v, outs=outs: {"entry": entry, "input": _show(v),
                                                     **{k: _show(x) for k, x in outs.items()}})
    return tally.report()


# ---------------------------------------------------------------------------
# per-operation refinement for the array library

# Argument functions for the higher-order operations, drawn from a fixed
# corpus whose shallow embeddings are written by hand below.
OPS_BODIES_SOURCE = """\
fun add (x : U32, y : U32, z : ()) -> U32 =
  x + y
fun addk (x : U32, acc : U32, k : U32) -> U32 =
  acc + x * k
fun count (x : U8, acc : U32, k : U32) -> U32 =
  if x > 127 then acc + k
  else acc
fun incacc (x : U32, acc : U32, k : U32) -> (U32, U32) =
  (x + k, acc + x)
fun scale (x : U8, acc : U32, k : U32) -> (U8, U32) =
  (x * 2, acc + 1)
fun atleast (acc : U32, k : U32) -> Bool =
  acc >= k
fun never (acc : U32, k : U32) -> Bool =
  False
fun step2 (acc : U32, k : U32) -> U32 =
  acc + 2
fun full (arr : (Array U32)!, k : U32) -> Bool =
  get[U32] (arr, k, 0) > 100
fun bump (arr : Array U32, k : U32) -> Array U32 =
  let! (arr) x = get[U32] (arr, k, 0) in
  put[U32] (arr, k, x + 7)
"""


def _w(x) -> int:
    return x.value


def _shallow_bodies() -> dict:
    m = MAX_U32
    fns = {
        "add": sh.add_s,
        "addk": lambda a: sh.SU32((_w(a.items[1]) + _w(a.items[0]) * _w(a.items[2])) & m),
        "count": lambda a: sh.SU32((_w(a.items[1]) + _w(a.items[2])) & m) if _w(a.items[0]) > 127 else a.items[1],
        "incacc": lambda a: sh.STuple((sh.SU32((_w(a.items[0]) + _w(a.items[2])) & m),
                                       sh.SU32((_w(a.items[1]) + _w(a.items[0])) & m))),
        "scale": lambda a: sh.STuple((sh.SU8((_w(a.items[0]) * 2) & 0xFF), sh.SU32((_w(a.items[1]) + 1) & m))),
        "atleast": lambda a: sh.SBool(_w(a.items[0]) >= _w(a.items[1])),
        "never": lambda a: sh.SBool(False),
        "step2": lambda a: sh.SU32((_w(a.items[0]) + 2) & m),
        "full": lambda a: sh.SBool(_w(sh.get_s(a.items[0], a.items[1], sh.SU32(0))) > 100),
        "bump": lambda a: sh.put_s(a.items[0], a.items[1],
                                   sh.SU32((_w(sh.get_s(a.items[0], a.items[1], sh.SU32(0))) + 7) & m)),
    }
    return {k: sh.SFun(k, f) for k, f in fns.items()}


SHALLOW_BODIES = _shallow_bodies()

OPS = ("length", "get", "put", "fold", "mapAccum", "repeat")
BOUNDARIES = ("low-update", "update-value", "value-shallow")
_ARR_U32 = Abs("Array", (U32,), False)

# the instantiations exercised for each operation
OP_INSTANCES = {
    "length": [((e,), None) for e in (U32, U8, BOOL)],
    "get": [((e,), None) for e in (U32, U8, BOOL)],
    "put": [((e,), None) for e in (U32, U8, BOOL)],
    "fold": [((U32, U32, UNIT), "add"), ((U32, U32, U32), "addk"), ((U8, U32, U32), "count")],
    "mapAccum": [((U32, U32, U32), "incacc"), ((U8, U32, U32), "scale")],
    "repeat": [((U32, U32), ("atleast", "step2")), ((U32, U32), ("never", "step2")),
               ((_ARR_U32, U32), ("full", "bump"))],
}


@dataclass
class _OpsWorld:
    prog: Program
    mono: Program
    machine: lm.LowMachine


@lru_cache(maxsize=None)
def _ops_world() -> _OpsWorld:
    prog = typecheck_program(parse_program(PRELUDE_SOURCE + OPS_BODIES_SOURCE)).program
    roots = [(n, ()) for n, d in prog.funs.items() if not d.is_foreign]
    roots += [(op, targs) for op, insts in OP_INSTANCES.items() for targs, _ in insts]
    mono, _ = mono_program(prog, roots=roots)
    return _OpsWorld(prog, mono, lm.LowMachine(mono, DEFAULT_ENVS.low))


def _index(rng: random.Random, n: int) -> int:
    if n and rng.random() < 0.65:
        return rng.randrange(n)
    return rng.choice([n, n + 1, n + rng.randrange(1, 100), MAX_U32])


def _bound(rng: random.Random, n: int) -> int:
    r = rng.random()
    if r < 0.1:
        return MAX_U32
    return rng.randint(0, n + 2)


def _fun4(name: str, fids: dict) -> tuple:
    return VFun(name), UFun(name), lm.LFunId(fids[name]), SHALLOW_BODIES[name]


def op_instance(op: str, rng: random.Random, world: World, max_len: int, fids: dict) -> tuple:
    """Random related arguments for ``op``; returns ``(targs, images)``."""
    targs, fun = rng.choice(OP_INSTANCES[op])
    elem = targs[0]

    def arr(t=elem):
        n = rng.randint(0, max_len)
        return world.array(t, [rand_prim(rng, t) for _ in range(n)])

    def word(x):
        return prim_images(U32, x)

    if op == "length":
        return targs, arr()
    if op in ("get", "put"):
        a = arr()
        n = len(a[0].items)
        return targs, _tuple4([a, word(_index(rng, n)), prim_images(elem, rand_prim(rng, elem))])
    if op in ("fold", "mapAccum"):
        a = arr()
        n = len(a[0].items)
        obs = prim_images(UNIT, None) if targs[2] == UNIT else word(rng.randrange(1 << 8))
        return targs, _tuple4([_fun4(fun, fids), word(rand_prim(rng, U32)), a, word(_bound(rng, n)),
                               word(_bound(rng, n)), obs])
    # repeat
    stop, step = fun
    fuel = word(rng.randint(0, 32))
    if targs[0] == U32:
        acc = word(rng.randrange(64))
        obs = word(rng.randrange(80))
    else:
        acc = arr(U32)
        obs = word(_index(rng, len(acc[0].items)))
    return targs, _tuple4([fuel, _fun4(stop, fids), _fun4(step, fids), acc, obs])


def out_of_bounds(op: str, v) -> bool:
    """Whether the value-level arguments of ``op`` index past the array."""
    if op in ("get", "put"):
        return v.items[1].value >= len(v.items[0].items)
    if op in ("fold", "mapAccum"):
        return max(v.items[3].value, v.items[4].value) > len(v.items[2].items)
    if op == "repeat" and isinstance(v.items[3], VWA):
        return v.items[4].value >= len(v.items[3].items)
    return False


def _sig(op: str, targs: tuple) -> tuple:
    d = PRELUDE.funs[op]
    sub = dict(zip(d.tyvars, targs))
    return subst_type(d.arg, sub), subst_type(d.ret, sub)


def _op_trial(op: str, boundary: str, rng: random.Random, max_len: int, envs: FfiEnvs,
              heap_bytes: int) -> tuple:
    ow = _ops_world()
    world = World.new(heap_bytes)
    targs, (v, u, low, s) = op_instance(op, rng, world, max_len, ow.machine.fids)
    arg_t, ret_t = _sig(op, targs)
    outs: dict = {"op": op, "targs": [str(t) for t in targs], "input": _show(v),
                  "out_of_bounds": out_of_bounds(op, v)}
    failed: list = []
    if boundary == "low-update":
        name = mono_name(op, targs)
        machine = ow.machine if envs is DEFAULT_ENVS else lm.LowMachine(ow.mono, envs.low)
        res = machine.call(name, low, world.heap)
        if not isinstance(res, lm.Ok):
            return [("low", res.reason)], outs
        outs["low"] = _show(res.value)
        try:
            ur, st = apply_u(envs.u, ow.mono, name, world.store, u)
        except EvalError as exc:
            return [("eval_u", str(exc))], outs
        outs["update"] = _show(ur)
        if not lm.rel_VC(res.value, ur, world.amap, machine.fids):
            failed.append(("rel_VC", "results unrelated"))
        why = lm.rel_HC_violation(res.heap, st, world.amap)
        if why:
            failed.append(("rel_HC", why))
        if not lm.heap_valid(res.heap):
            failed.append(("heap", "heap no longer valid"))
        return failed, outs
    if boundary == "update-value":
        try:
            ur, st = apply_u(envs.u, ow.prog, op, world.store, u, targs)
        except EvalError as exc:
            return [("eval_u", str(exc))], outs
        outs["update"] = _show(ur)
        try:
            vr = apply_v(envs.v, ow.prog, op, v, targs)
        except EvalError as exc:
            return [("eval_v", str(exc))], outs
        outs["value"] = _show(vr)
        try:
            fp_i = vtyping_u(u, world.store, arg_t)
            fp_o = corr(ur, st, vr, ret_t)
        except TypingReject as exc:
            return [("corr", str(exc))], outs
        if not fp_o.r <= fp_i.r:
            failed.append(("read-set", f"new read-only locations {sorted(fp_o.r - fp_i.r)}"))
        why = frame_violation(fp_i.w, world.store, fp_o.w, st)
        if why:
            failed.append(("frame", why))
        return failed, outs
    try:
        vr = apply_v(envs.v, ow.prog, op, v, targs)
    except EvalError as exc:
        return [("eval_v", str(exc))], outs
    outs["value"] = _show(vr)
    try:
        sr = envs.shallow[op](s)
    except (TypeError, ValueError) as exc:
        return [("shallow", str(exc))], outs
    outs["shallow"] = _show(sr)
    if not sh.rel_PS(sr, vr):
        failed.append(("rel_PS", "results unrelated"))
    return failed, outs


def check_op_refinement(op: str, boundary: str, seed=0, trials: int = 500, *, max_len: int = 64,
                        envs: FfiEnvs = DEFAULT_ENVS, heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> CheckReport:
    """One library operation across one layer boundary on random related inputs."""
    if op not in OPS:
        raise ValueError(f"unknown operation {op}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary}")
    check = f"corres:{op}:{boundary}"
    tally = _Tally(check, seed, ())
    for i in range(trials):
        failed, outs = _op_trial(op, boundary, _trial_rng(seed, check, i), max_len, envs, heap_bytes)
        if outs["out_of_bounds"]:
            tally.cover("out-of-bounds")
        tally.add(i, failed, lambda outs=outs: outs)
    return tally.report()


def check_thm_corres(op: str, seed=0, trials: int = 500, **kw) -> CheckReport:
    """Machine code against the update abstraction for one operation."""
    return check_op_refinement(op, "low-update", seed, trials, **kw)


# ---------------------------------------------------------------------------
# the whole tower


@dataclass
class TowerRun:
    """One input pushed through all five layers."""

    shallow: object = None
    poly: object = None
    mono: object = None
    update: object = None
    store: object = None
    low: object = None
    heap: object = None
    steps: int = 0


def run_tower(prog: Program, entry: str, shallow_fn: Callable, world: World, imgs: tuple,
              envs: FfiEnvs = DEFAULT_ENVS, mono: Optional[tuple] = None) -> tuple[TowerRun, list]:
    """Evaluate at every layer and check each cross-layer relation.

    Returns the results and a list of ``(clause, detail)`` violations.
    """
    v, u, low, s = imgs
    d = prog.funs[entry]
    mp, canon = mono if mono is not None else mono_program(prog)
    mentry = canon[(entry, ())]
    run = TowerRun()
    failed: list = []
    try:
        run.shallow = shallow_fn(s)
        run.poly = apply_v(envs.v, prog, entry, v)
        run.mono = apply_v(envs.v, mp, mentry, mono_value(canon, v))
        run.update, run.store = apply_u(envs.u, mp, mentry, world.store, u)
    except EvalError as exc:
        return run, [("eval", str(exc))]
    machine = lm.LowMachine(mp, envs.low)
    res = machine.call(mentry, low, world.heap)
    if not isinstance(res, lm.Ok):
        return run, [("low", res.reason)]
    run.low, run.heap, run.steps = res.value, res.heap, machine.counter.steps
    if not sh.rel_PS(run.shallow, run.poly):
        failed.append(("rel_PS", "shallow and polymorphic results unrelated"))
    if run.mono != mono_value(canon, run.poly):
        failed.append(("mono", "monomorphic result differs"))
    try:
        fp_i = vtyping_u(u, world.store, d.arg)
        fp_o = corr(run.update, run.store, run.mono, d.ret)
        if not fp_o.r <= fp_i.r:
            failed.append(("read-set", f"new read-only locations {sorted(fp_o.r - fp_i.r)}"))
        why = frame_violation(fp_i.w, world.store, fp_o.w, run.store)
        if why:
            failed.append(("frame", why))
    except TypingReject as exc:
        failed.append(("corr", str(exc)))
    if not lm.rel_VC(run.low, run.update, world.amap, machine.fids):
        failed.append(("rel_VC", "machine and update results unrelated"))
    why = lm.rel_HC_violation(run.heap, run.store, world.amap)
    if why:
        failed.append(("rel_HC", why))
    return run, failed


def check_combined(program, shallow_fn: Callable, seed=0, trials: int = 1000, *, entry: Optional[str] = None,
                   max_len: int = 64, input_gen: Optional[InputGen] = None,
                   oracle: Optional[Callable] = None, envs: FfiEnvs = DEFAULT_ENVS,
                   heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> CheckReport:
    """All five layers per trial; ``oracle(input, result) -> bool`` is optional."""
    prog, entry = (program, entry or "main") if isinstance(program, Program) else program
    d = prog.funs[entry]
    gen = _gen_inputs(d, input_gen)
    mono = mono_program(prog)
    tally = _Tally("combined", seed, ())
    for i in range(trials):
        rng = _trial_rng(seed, "combined", i)
        world = World.new(heap_bytes)
        imgs = gen(world, rng, max_len)
        failed = input_violations(world, d.arg, imgs)
        run = TowerRun()
        if not failed:
            run, failed = run_tower(prog, entry, shallow_fn, world, imgs, envs, mono)
            if oracle is not None and not failed and not oracle(imgs[0], run.poly):
                failed.append(("oracle", "result disagrees with the oracle"))
        tally.add(i, failed, lambda imgs=imgs, run=run: {
            "entry": entry, "input": _show(imgs[0]),
            **{k: _show(getattr(run, k)) for k in ("shallow", "poly", "mono", "update", "low")}})
    return tally.report()


def sum_oracle(v, result) -> bool:
    """The result is the list sum modulo 2^32."""
    return result == VU32(sum(x.value for x in v.items) & MAX_U32)


def _search_ok(xs: list, key: int, got: int) -> bool:
    # linear-scan oracle: in bounds means a hit, otherwise the key is absent
    if got < len(xs):
        return xs[got] == key
    return got == len(xs) and key not in xs


def search_oracle(v, result) -> bool:
    arr, key = v.items
    return isinstance(result, VU32) and _search_ok([x.value for x in arr.items], key.value, result.value)


def check_binary_search(seed=0, trials: int = 1000, *, max_len: int = 1 << 12,
                        heap_bytes: int = lm.DEFAULT_HEAP_BYTES, envs: FfiEnvs = DEFAULT_ENVS) -> CheckReport:
    """Binary search on sorted arrays at the machine and shallow layers.

    The returned index must agree with a linear scan, the array bytes must
    be untouched and the heap must remain valid.
    """
    prog = corpus_program("binsearch")
    mp, canon = mono_program(prog)
    machine = lm.LowMachine(mp, envs.low)
    tally = _Tally("binsearch", seed, ())
    for i in range(trials):
        rng = _trial_rng(seed, "binsearch", i)
        n = rng.randint(0, max_len)
        hi = rng.choice([4, 64, 1 << 16, MAX_U32])
        xs = sorted(rng.randint(0, hi) for _ in range(n))
        key = rng.choice(xs) if xs and rng.random() < 0.5 else rng.randint(0, hi)
        heap = lm.LowHeap(heap_bytes)
        hdr, _ = lm.alloc_array(heap, U32, xs)
        arr = lm.LPtr(hdr)
        before = lm.array_bytes(heap, arr)
        res = machine.call(canon[("binary_search", ())], lm.LTuple((arr, lm.LU32(key))), heap)
        failed = []
        got = None
        if not isinstance(res, lm.Ok):
            failed.append(("low", res.reason))
        else:
            got = res.value.value
            if not _search_ok(xs, key, got):
                failed.append(("oracle", f"index {got} for key {key}"))
            if lm.array_bytes(res.heap, arr) != before or lm.read_header(res.heap, arr) != lm.read_header(heap, arr):
                failed.append(("same", "array bytes changed"))
            if not lm.heap_valid(res.heap):
                failed.append(("heap", "heap no longer valid"))
        s = sh.binary_search_s(sh.to_slist(xs), sh.SU32(key)).value
        if not _search_ok(xs, key, s):
            failed.append(("shallow", f"shallow index {s} for key {key}"))
        tally.add(i, failed, lambda xs=xs, key=key, got=got: {"array": _show(xs), "key": key, "low": got})
    return tally.report()


def step_bound(n: int) -> int:
    return math.ceil(math.log2(n)) + 1 if n > 0 else 0


def check_early_exit(max_exp: int = 12, *, low_samples: int = 16, seed=0,
                     envs: FfiEnvs = DEFAULT_ENVS) -> CheckReport:
    """Binary search performs at most ``ceil(log2 n) + 1`` steps on length ``n``.

    Every present key and every gap is probed at the shallow layer; a sample
    of probes is also counted on the machine.
    """
    prog = corpus_program("binsearch")
    mp, canon = mono_program(prog)
    name = canon[("binary_search", ())]
    tally = _Tally("early-exit", seed, ("shallow", "low"))
    rng = random.Random(f"{seed}:early-exit")
    for k in range(max_exp + 1):
        n = 1 << k
        xs = [2 * j + 1 for j in range(n)]
        probes = list(range(0, 2 * n + 2))
        bound = step_bound(n)
        worst = 0
        failed = []
        slist = sh.to_slist(xs)
        for key in probes:
            c = sh.StepCounter()
            sh.binary_search_s(slist, sh.SU32(key), c)
            worst = max(worst, c.steps)
        if worst > bound:
            failed.append(("shallow", f"{worst} steps > {bound}"))
        heap = lm.LowHeap(max(lm.DEFAULT_HEAP_BYTES, 8 * n + 4096))
        hdr, _ = lm.alloc_array(heap, U32, xs)
        lworst = 0
        for key in [0, 2 * n + 1] + rng.sample(probes, min(low_samples, len(probes))):
            machine = lm.LowMachine(mp, envs.low)
            res = machine.call(name, lm.LTuple((lm.LPtr(hdr), lm.LU32(key))), heap)
            if not isinstance(res, lm.Ok):
                failed.append(("low", res.reason))
                break
            lworst = max(lworst, machine.counter.steps)
        if lworst > bound:
            failed.append(("low", f"{lworst} steps > {bound}"))
        tally.add(k, failed, lambda n=n, worst=worst, lworst=lworst, bound=bound: {
            "n": n, "bound": bound, "shallow_steps": worst, "low_steps": lworst})
    return tally.report()


# ---------------------------------------------------------------------------
# abstract-type obligations


def check_obligations(seed=0, trials: int = 500, *, entry: ArrayType = None,
                      mutant_budget: int = 200) -> CheckReport:
    """All obligation clauses for the array type, plus mutant sensitivity:
    each clause's planted fault must be caught within ``mutant_budget`` trials."""
    start = time.perf_counter()
    rep = check_abs_type_obligations(entry or ARRAY, seed=seed, trials=trials)
    clauses = {c["clause"]: c["failures"] for c in rep.clauses}
    example = next(({"clause": c["clause"], **c["counterexample"]} for c in rep.clauses
                    if "counterexample" in c), None)
    failures = rep.failures
    for clause in CLAUSES:
        m = check_abs_type_obligations(MUTANTS[clause], seed=seed, trials=mutant_budget,
                                       clauses=(clause,), stop_at_first=True).clauses[0]
        caught = m["failures"] > 0
        clauses[f"mutant:{clause}"] = m["trials"] if caught else -1
        if not caught:
            failures += 1
            example = example or {"clause": f"mutant:{clause}", "detail": "planted fault not detected"}
    return CheckReport("obligations", trials * len(CLAUSES), failures, seed, clauses, example,
                       time.perf_counter() - start)


# ---------------------------------------------------------------------------
# suites


SUITES = ("thm1", "thm2", "thm3", "thm4", "thm5", "corres", "combined", "obligations", "binsearch",
          "early-exit", "all")


def _shallow_entry(name: str) -> Callable:
    if name == "sum":
        return sh.sum_s
    if name == "binsearch":
        return lambda a: sh.binary_search_s(*a.items)
    return lambda a: sh.SU32(42)


def _corpus_items() -> list:
    return [(corpus_program(n), ENTRIES[n]) for n in ("sum", "binsearch")] + [(literal_program(), "main")]


def run_suite(name: str, seed=0, trials: Optional[int] = None, *, max_len: int = 64,
              heap_bytes: int = lm.DEFAULT_HEAP_BYTES) -> list:
    """Run one named suite (or ``all``); returns a list of reports."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name}")
    names = SUITES[:-1] if name == "all" else (name,)
    out: list = []
    for suite in names:
        if suite in ("thm1", "thm2", "thm3"):
            fn = {"thm1": check_thm1, "thm2": check_thm2, "thm3": check_thm3}[suite]
            out.append(fn(None, seed, trials or 1000, max_len=max_len, heap_bytes=heap_bytes))
        elif suite == "thm4":
            for item in _corpus_items():
                out.append(_named(check_thm4(item, None, seed, trials or 500, max_len=max_len), item))
        elif suite == "thm5":
            for item, cname in zip(_corpus_items(), ("sum", "binsearch", "literal")):
                out.append(_named(check_thm5(item, _shallow_entry(cname), seed, trials or 500,
                                             max_len=max_len), item))
        elif suite == "corres":
            for op in OPS:
                for b in BOUNDARIES:
                    out.append(check_op_refinement(op, b, seed, trials or 500, max_len=max_len,
                                                   heap_bytes=heap_bytes))
        elif suite == "combined":
            specs = [("sum", None, sum_oracle), ("binsearch", sorted_search_input, search_oracle),
                     ("literal", None, None)]
            for (item, (cname, gen, oracle)) in zip(_corpus_items(), specs):
                out.append(_named(check_combined(item, _shallow_entry(cname), seed, trials or 1000,
                                                 max_len=max_len, input_gen=gen, oracle=oracle,
                                                 heap_bytes=heap_bytes), item))
        elif suite == "obligations":
            out.append(check_obligations(seed, trials or 500))
        elif suite == "binsearch":
            out.append(check_binary_search(seed, trials or 1000, heap_bytes=max(heap_bytes, 1 << 16)))
        else:
            out.append(check_early_exit(seed=seed))
    return out


def _named(rep: CheckReport, item: tuple) -> CheckReport:
    return replace(rep, check=f"{rep.check}:{item[1]}")


def reports_json(reports: list, timestamp: bool = True) -> str:
    return json.dumps({"reports": [r.to_dict(timestamp) for r in reports],
                       "failures": sum(r.failures for r in reports)}, sort_keys=True, indent=2)
