"""Command-line entry point: typecheck, run at any layer, run check suites, demos."""

from __future__ import annotations

import argparse
import ast
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import lowmachine as lm
from . import shallow as sh
from .dynsem import EvalError, TypingReject, apply_u, apply_v
from .ffi import DEFAULT_ENVS
from .refine import checks as C
from .refine.gen import World, prim_images
from .refine.mono import mono_program
from .syntax import BOOL, U8, U32, UNIT, Abs, Prim, Prod, Program, SyntaxError_, Type, parse_program, show_type
from .typecheck import TypeCheckError, typecheck_program
from .values import UProd, UWA, ULoc, VProd, VWA

LAYERS = ("shallow", "value", "update", "low")
DEMOS = ("sum", "binsearch")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    path: Optional[str] = None
    layer: str = "value"
    seed: int = 0
    trials: Optional[int] = None
    heap_bytes: int = lm.DEFAULT_HEAP_BYTES
    array_len_max: int = 64
    format: str = "text"
    timestamp: bool = True

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise UsageError(f"unknown layer {self.layer}")
        if self.trials is not None and self.trials < 1:
            raise UsageError("--trials must be at least 1")
        if not 0 <= self.seed < 1 << 64:
            raise UsageError("--seed must fit in 64 bits")


# ---------------------------------------------------------------------------
# argument literals


def parse_literal(text: str):
    """Python-style literal: integers, True/False, lists and tuples."""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise UsageError(f"cannot parse argument {text!r}") from None


def build_value(world: World, t: Type, x) -> tuple:
    """Images of the Python value ``x`` at type ``t`` at every layer."""
    if isinstance(t, Prim):
        if t == UNIT:
            if x != ():
                raise UsageError(f"expected () for {show_type(t)}")
            return prim_images(UNIT, None)
        if t == BOOL and not isinstance(x, bool):
            raise UsageError(f"expected True or False, got {x!r}")
        if t in (U8, U32) and (isinstance(x, bool) or not isinstance(x, int)
                               or not 0 <= x < (1 << (8 if t == U8 else 32))):
            raise UsageError(f"expected a {t.name}, got {x!r}")
        return prim_images(t, x)
    if isinstance(t, Prod):
        if not isinstance(x, tuple) or len(x) != len(t.items):
            raise UsageError(f"expected a {len(t.items)}-tuple for {show_type(t)}, got {x!r}")
        return C._tuple4([build_value(world, s, y) for s, y in zip(t.items, x)])
    if isinstance(t, Abs) and t.name == "Array":
        elem = t.args[0]
        if not isinstance(x, list):
            raise UsageError(f"expected a list for {show_type(t)}, got {x!r}")
        for y in x:
            build_value(world, elem, y)
        return world.array(elem, list(x))
    raise UsageError(f"cannot pass arguments of type {show_type(t)}")


def entry_args(world: World, t: Type, args: list) -> tuple:
    if not args:
        if t == UNIT:
            return prim_images(UNIT, None)
        raise UsageError(f"missing arguments of type {show_type(t)}")
    xs = [parse_literal(a) for a in args]
    return build_value(world, t, xs[0] if len(xs) == 1 else tuple(xs))


# ---------------------------------------------------------------------------
# rendering results


def _py_value(x, t: Type, store=None, heap=None):
    """Plain Python rendering of a result from any layer."""
    if isinstance(x, (VProd, UProd, lm.LTuple, sh.STuple)):
        return tuple(_py_value(y, s, store, heap) for y, s in zip(x.items, t.items))
    if isinstance(x, VWA):
        return [y.value for y in x.items]
    if isinstance(x, sh.SList):
        return [y.value for y in x.items]
    if isinstance(x, ULoc):
        hdr = store[x.loc]
        if isinstance(hdr, UWA):
            return [store[hdr.base + i].value for i in range(hdr.length)]
    if isinstance(x, lm.LPtr):
        raw = lm.read_array(heap, x)
        return [bool(y) for y in raw] if t.args[0] == BOOL else raw
    if hasattr(x, "value"):
        return bool(x.value) if t == BOOL else x.value
    return ()


def show_py(x) -> str:
    if isinstance(x, tuple):
        return "(" + ", ".join(show_py(y) for y in x) + ")"
    if isinstance(x, list):
        return "[" + ", ".join(show_py(y) for y in x) + "]"
    return repr(x)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# commands


def _load(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_program(text)


def cmd_typecheck(cfg: RunConfig, out) -> int:
    prog = _load(cfg.path)
    tp = typecheck_program(prog)
    if cfg.format == "json":
        print(json.dumps({"ok": True, "functions": sorted(tp.signatures)}), file=out)
    else:
        print(f"ok: {len(tp.signatures)} functions", file=out)
    return EXIT_OK


def _shallow_for(prog: Program, entry: str):
    for cname, ename in C.ENTRIES.items():
        if ename == entry and cname in DEMOS and C.corpus_program(cname).funs[entry] == prog.funs[entry]:
            return C._shallow_entry(cname)
    return None


def cmd_run(cfg: RunConfig, entry: Optional[str], args: list, out) -> int:
    prog = typecheck_program(_load(cfg.path)).program
    fundefs = [d for d in prog.funs.values() if not d.is_foreign]
    entry = entry or (fundefs[-1].name if fundefs else None)
    if entry is None or entry not in prog.funs or prog.funs[entry].is_foreign:
        raise UsageError(f"no function {entry} to run")
    d = prog.funs[entry]
    if d.tyvars:
        raise UsageError(f"{entry} is polymorphic; run a monomorphic entry point")
    world = World.new(cfg.heap_bytes)
    v, u, low, s = entry_args(world, d.arg, args)
    extra: dict = {}
    if cfg.layer == "shallow":
        fn = _shallow_for(prog, entry)
        if fn is None:
            print(f"error: no shallow embedding for {entry}", file=sys.stderr)
            return EXIT_FAIL
        result = _py_value(fn(s), d.ret)
    elif cfg.layer == "value":
        result = _py_value(apply_v(DEFAULT_ENVS.v, prog, entry, v), d.ret)
    elif cfg.layer == "update":
        mp, canon = mono_program(prog)
        r, store = apply_u(DEFAULT_ENVS.u, mp, canon[(entry, ())], world.store, u)
        result = _py_value(r, d.ret, store=store)
        extra["store_digest"] = _digest(store.to_json())
    else:
        mp, canon = mono_program(prog)
        res = lm.LowMachine(mp, DEFAULT_ENVS.low).call(canon[(entry, ())], low, world.heap)
        if not isinstance(res, lm.Ok):
            print(f"error: machine failure: {res.reason}", file=sys.stderr)
            return EXIT_FAIL
        result = _py_value(res.value, d.ret, heap=res.heap)
        extra["heap_digest"] = _digest(lm.allocated_dump(res.heap))
    if cfg.format == "json":
        print(json.dumps({"entry": entry, "layer": cfg.layer, "result": result, **extra}, sort_keys=True),
              file=out)
    else:
        print(show_py(result), file=out)
        for k, x in extra.items():
            print(f"{k.replace('_', ' ')}: {x}", file=out)
    return EXIT_OK


def cmd_check(cfg: RunConfig, suite: str, out) -> int:
    reports = C.run_suite(suite, cfg.seed, cfg.trials, max_len=cfg.array_len_max, heap_bytes=cfg.heap_bytes)
    failures = sum(r.failures for r in reports)
    if cfg.format == "json":
        print(C.reports_json(reports, cfg.timestamp), file=out)
    else:
        for r in reports:
            mark = "PASS" if r.passed else "FAIL"
            tail = f" ({r.elapsed:.2f}s)" if cfg.timestamp else ""
            print(f"{mark} {r.check}: {r.trials} trials, {r.failures} failures{tail}", file=out)
            if r.counterexample is not None:
                print("  counterexample: " + json.dumps(r.counterexample, sort_keys=True), file=out)
        print(f"{'ok' if failures == 0 else 'FAILED'}: {len(reports)} reports, {failures} failures", file=out)
    return EXIT_OK if failures == 0 else EXIT_FAIL


DEMO_INPUTS = {"sum": ["[1, 2, 3]"], "binsearch": ["[1, 3, 5, 7]", "5"]}


def cmd_demo(cfg: RunConfig, name: str, args: list, out) -> int:
    if name not in DEMOS:
        raise UsageError(f"unknown demo {name}; choose from {', '.join(DEMOS)}")
    prog = C.corpus_program(name)
    entry = C.ENTRIES[name]
    d = prog.funs[entry]
    world = World.new(cfg.heap_bytes)
    imgs = entry_args(world, d.arg, args or DEMO_INPUTS[name])
    heap_before = world.heap.copy()
    run, failed = C.run_tower(prog, entry, C._shallow_entry(name), world, imgs)
    print(f"demo {name}: {entry} {' '.join(args or DEMO_INPUTS[name])}", file=out)
    for layer, x in (("shallow", run.shallow), ("polymorphic value", run.poly),
                     ("monomorphic value", run.mono), ("update", run.update), ("machine", run.low)):
        if x is None:
            continue
        print(f"  {layer:18s} {show_py(_py_value(x, d.ret, store=run.store, heap=run.heap))}", file=out)
    bad = {c for c, _ in failed}
    for clause, what in (("rel_PS", "shallow ~ polymorphic"), ("mono", "polymorphic ~ monomorphic"),
                         ("corr", "monomorphic ~ update"), ("frame", "frame relation"),
                         ("rel_VC", "update ~ machine values"), ("rel_HC", "update ~ machine heap")):
        print(f"  {what:28s} {'FAILS' if clause in bad else 'holds'}", file=out)
    ok = not failed
    if name == "binsearch" and run.heap is not None:
        arr = imgs[2].items[0]
        same = lm.array_bytes(run.heap, arr) == lm.array_bytes(heap_before, arr) and lm.heap_valid(run.heap)
        xs = [x.value for x in imgs[3].items[0].items]
        abstracted = lm.read_array(run.heap, arr) == xs
        print(f"  {'array bytes unchanged':28s} {'holds' if same else 'FAILS'}", file=out)
        print(f"  {'heap still lists the input':28s} {'holds' if abstracted else 'FAILS'}", file=out)
        ok = ok and same and abstracted
    for c, detail in failed:
        print(f"  violation {c}: {detail}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing


def _env_seed() -> int:
    raw = os.environ.get("MINICOGENT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MINICOGENT_SEED is not an integer: {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $MINICOGENT_SEED or 0)")
    common.add_argument("--trials", type=int, default=None, help="trials per check")
    common.add_argument("--heap-bytes", type=int, default=lm.DEFAULT_HEAP_BYTES, help="machine heap size")
    common.add_argument("--array-len-max", type=int, default=64, help="longest generated array")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--no-timestamp", action="store_true", help="omit timing from reports")

    p = argparse.ArgumentParser(prog="minicogent", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("typecheck", parents=[common], help="typecheck a program")
    t.add_argument("path")
    r = sub.add_parser("run", parents=[common], help="run a function at one semantic layer")
    r.add_argument("path")
    r.add_argument("args", nargs="*", help="arguments as literals, e.g. '[1, 2, 3]' 5")
    r.add_argument("--layer", choices=LAYERS, default="value")
    r.add_argument("--entry", default=None, help="function to run (default: the last one)")
    c = sub.add_parser("check", parents=[common], help="run a check suite")
    c.add_argument("suite", choices=C.SUITES)
    d = sub.add_parser("demo", parents=[common], help="walk an example through every layer")
    d.add_argument("name")
    d.add_argument("args", nargs="*")
    return p


def main(argv: Optional[list] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command, path=getattr(args, "path", None), layer=getattr(args, "layer", "value"),
            seed=args.seed if args.seed is not None else _env_seed(), trials=args.trials,
            heap_bytes=args.heap_bytes, array_len_max=args.array_len_max, format=args.format,
            timestamp=not args.no_timestamp)
        if cfg.command == "typecheck":
            return cmd_typecheck(cfg, out)
        if cfg.command == "run":
            return cmd_run(cfg, args.entry, args.args, out)
        if cfg.command == "check":
            return cmd_check(cfg, args.suite, out)
        return cmd_demo(cfg, args.name, args.args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SyntaxError_, TypeCheckError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (EvalError, TypingReject) as exc:
        print(f"error: evaluation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
