"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for just the nine lines.
"""

from __future__ import annotations

import io
import sys
import time

import pytest

from minicogent import shallow as sh
from minicogent.cli import main
from minicogent.refine import checks as ck

SEED = 42


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def _summary(reports) -> str:
    return ", ".join(f"{r.check} {r.trials}/{r.failures}" for r in reports)


def criterion_1():
    reports, secs = _timed(lambda: [ck.check_thm1(None, SEED, 1000, size=6, max_len=64),
                                      ck.check_thm2(None, SEED, 1000, size=6, max_len=64)])
    ok = all(r.passed and r.trials == 1000 for r in reports) and secs <= 60
    return ok, f"{_summary(reports)} (trials/failures), {secs:.1f}s of 60s"


def criterion_2():
    r = ck.check_thm3(None, SEED, 1000, size=6, max_len=64)
    return r.passed and r.trials == 1000, f"{r.trials} trials, {r.failures} failures"


def criterion_3():
    r = ck.check_obligations(SEED, 500, mutant_budget=200)
    caught = {c: r.clauses[f"mutant:{c}"] for c in ck.CLAUSES}
    per_clause = all(r.clauses[c] == 0 for c in ck.CLAUSES) and r.trials == 500 * len(ck.CLAUSES)
    ok = r.passed and per_clause and all(0 < n <= 200 for n in caught.values())
    return ok, f"{r.trials} trials, {r.failures} failures; mutants caught at trial counts {caught}"


def criterion_4():
    reports = [ck.check_op_refinement(op, b, SEED, 500) for op in ck.OPS for b in ck.BOUNDARIES]
    oob = {r.check: r.coverage.get("out-of-bounds", 0) for r in reports}
    indexed = [c for c in oob if c.split(":")[1] in ("get", "put", "fold", "mapAccum")]
    ok = (all(r.passed and r.trials == 500 for r in reports) and all(oob[c] > 0 for c in indexed))
    fails = sum(r.failures for r in reports)
    return ok, (f"{len(reports)} op/boundary pairs x 500 trials, {fails} failures; "
                f"out-of-bounds trials in indexed ops >= {min(oob[c] for c in indexed)}")


def criterion_5():
    reports = [ck.check_thm4((ck.corpus_program("sum"), "sum"), None, SEED, 500),
               ck.check_thm4((ck.corpus_program("binsearch"), "binary_search"), None, SEED, 500,
                             input_gen=ck.sorted_search_input)]
    detail = ", ".join(f"{name} {r.trials} trials/{r.failures} failures" for name, r in zip(("sum", "binary_search"), reports))
    return all(r.passed and r.trials == 500 for r in reports), detail


def criterion_6():
    r, secs = _timed(lambda: ck.check_binary_search(SEED, 1000, max_len=1 << 12, heap_bytes=1 << 16))
    return r.passed and r.trials == 1000 and secs <= 30, f"{r.trials} trials, {r.failures} failures, {secs:.1f}s of 30s"


def criterion_7():
    r = ck.check_combined((ck.corpus_program("sum"), "sum"), sh.sum_s, SEED, 1000, max_len=64,
                          oracle=ck.sum_oracle)
    return r.passed and r.trials == 1000, f"{r.trials} trials, {r.failures} failures"


def criterion_8():
    r = ck.check_early_exit(12, seed=SEED)
    return r.passed and r.trials == 13, f"n = 1..4096 ({r.trials} sizes), {r.failures} over the bound"


def criterion_9():
    argv = ["check", "all", "--seed", str(SEED), "--format", "json", "--no-timestamp"]
    runs = []
    for _ in range(2):
        out = io.StringIO()
        code = main(argv, out)
        runs.append((code, out.getvalue().encode()))
    (c1, a), (c2, b) = runs
    return c1 == c2 == 0 and a == b, f"two runs, {len(a)} bytes each, identical={a == b}, exit {c1}/{c2}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9]


def report_line(n: int, ok: bool, detail: str) -> str:
    return f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}"


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n - 1]()
    with capsys.disabled():
        print("\n" + report_line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        failed += not ok
        print(report_line(n, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
