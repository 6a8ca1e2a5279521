from __future__ import annotations

import math
import random

from minicogent import shallow as sh
from minicogent.shallow import (
    SBool, SFun, SList, STuple, SU32, SUnit, StepCounter, binary_search_s, fold_s, get_s,
    length_s, mapaccum_s, put_s, rel_PS, repeat_s, sum_s, to_slist,
)
from minicogent.syntax import U32
from minicogent.values import VProd, VU8, VU32, VUnit, VWA

ws = to_slist
INC_ACC = SFun("incacc", lambda a: STuple((SU32(a.items[0].value + 1), SU32(a.items[1].value + a.items[0].value))))
NEVER = SFun("never", lambda a: SBool(False))
ALWAYS = SFun("always", lambda a: SBool(True))


def plus(k):
    return SFun(f"plus{k}", lambda a: SU32(a.items[0].value + k))


def test_get_s():
    assert get_s(ws([10, 20, 30]), SU32(1), SU32(0)) == SU32(20)
    assert get_s(ws([]), SU32(5), SU32(42)) == SU32(42)


def test_mapaccum_s():
    out = mapaccum_s(INC_ACC, SU32(0), ws([1, 2, 3]), SU32(1), SU32(3), SUnit())
    assert out == STuple((ws([1, 3, 4]), SU32(5)))
    full = mapaccum_s(INC_ACC, SU32(0), ws([1, 2]), SU32(0), SU32(2), SUnit())
    assert full == STuple((ws([2, 3]), SU32(3)))
    # an empty or inverted range leaves the list alone
    assert mapaccum_s(INC_ACC, SU32(9), ws([1, 2]), SU32(2), SU32(0), SUnit()) == STuple((ws([1, 2]), SU32(9)))


def test_repeat_s():
    assert repeat_s(0, NEVER, plus(1), SU32(7), SUnit()) == SU32(7)
    assert repeat_s(10, ALWAYS, plus(1), SU32(7), SUnit()) == SU32(7)
    assert repeat_s(3, NEVER, plus(1), SU32(0), SUnit()) == SU32(3)
    assert repeat_s(4, NEVER, plus(2), SU32(1), SUnit()) == SU32(9)


def test_sum_and_search():
    assert sum_s(ws([1, 2, 3])) == SU32(6)
    assert sum_s(ws([0xFFFFFFFF, 2])) == SU32(1)
    assert binary_search_s(ws([1, 3, 5, 7]), SU32(5)) == SU32(2)
    assert binary_search_s(ws([]), SU32(0)) == SU32(0)
    assert binary_search_s(ws([1, 3, 5, 7]), SU32(4)) == SU32(4)


def test_rel_PS():
    assert rel_PS(ws([1, 2]), VWA(U32, (VU32(1), VU32(2))))
    assert not rel_PS(ws([1, 2]), VWA(U32, (VU32(1),)))
    assert rel_PS(SU32(5), VU32(5))
    assert not rel_PS(SU32(5), VU8(5))
    assert rel_PS(STuple((SU32(1), SUnit())), VProd((VU32(1), VUnit())))


def test_fold_s_is_list_fold():
    rng = random.Random(2)
    for _ in range(200):
        xs = [rng.getrandbits(32) for _ in range(rng.randint(0, 30))]
        assert fold_s(sh.ADD, SU32(0), ws(xs), SU32(0), length_s(ws(xs)), SUnit()).value == sum(xs) % 2 ** 32


def test_put_then_get():
    rng = random.Random(4)
    for _ in range(200):
        xs = [rng.getrandbits(8) for _ in range(rng.randint(1, 20))]
        i, v = rng.randrange(len(xs)), rng.getrandbits(32)
        assert get_s(put_s(ws(xs), SU32(i), SU32(v)), SU32(i), SU32(0)) == SU32(v)


def test_binary_search_contract_and_early_exit():
    rng = random.Random(13)
    for trial in range(60):
        n = rng.choice([0, 1, 2, 3, rng.randint(4, 300), 2 ** rng.randint(9, 16)])
        xs = sorted(rng.getrandbits(rng.choice([4, 32])) for _ in range(n))
        v = rng.choice(xs) if xs and rng.random() < 0.5 else rng.getrandbits(32)
        c = StepCounter()
        got = binary_search_s(ws(xs), SU32(v), c).value
        if v in xs:
            assert got < n and xs[got] == v
        else:
            assert got == n
        assert c.steps <= (math.ceil(math.log2(n)) + 1 if n else 0)
