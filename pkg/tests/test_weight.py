import random

import pytest

from padic_hilbert.errors import DomainError
from padic_hilbert.padic import PadicCtx, teichmuller
from padic_hilbert.weight import Weight, analyticity_level, eval_character, restrict_to_F, weight_shift
from conftest import local_setup


def _unit(ctx, rng):
    while True:
        x = ctx([rng.randrange(ctx.pM) for _ in range(ctx.f)])
        if x.is_unit():
            return x


def test_trivial_weight_is_trivial(quad_setup):
    S = quad_setup
    k = Weight.classical(S, (0, 0))
    rng = random.Random(0)
    t = tuple(_unit(S.ctx, rng) for _ in S.primes)
    assert eval_character(k, t, S) == S.ctx.one()


def test_parallel_weight_on_diagonal_one_unit():
    # k = (u, u) sends a rational t to N(t)^u = t^{2u}
    S = local_setup(2, 7, 12)
    k = Weight.classical(S, (3, 3))
    t = S.ctx(8)
    assert eval_character(k, (t, t), S) == S.ctx(8**6)


def test_classical_weight_is_integer_power():
    S = local_setup(2, 7, 12)
    rng = random.Random(4)
    for _ in range(10):
        a, b = rng.randrange(-4, 6), rng.randrange(-4, 6)
        k = Weight.classical(S, (a, b))
        t0, t1 = _unit(S.ctx, rng), _unit(S.ctx, rng)
        # split: prime i sits under embedding sigma with sigmas[i] = (sigma,)
        sig = [S.uniformizers.sigmas[i][0] for i in S.primes]
        expected = S.ctx.one()
        for i, ti in enumerate((t0, t1)):
            e = (a, b)[sig[i]]
            expected = expected * (ti**e if e >= 0 else ti.inverse() ** (-e))
        assert eval_character(k, (t0, t1), S) == expected


def test_inert_classical_weight_uses_frobenius():
    S = local_setup(2, 5, 10)
    rng = random.Random(8)
    for _ in range(10):
        a, b = rng.randrange(0, 5), rng.randrange(0, 5)
        t = _unit(S.ctx, rng)
        k = Weight.classical(S, (a, b))
        assert eval_character(k, (t,), S) == t**a * t.frobenius() ** b


def test_character_property(quad_setup):
    S = quad_setup
    rng = random.Random(11)
    k = Weight(tuple(S.ctx([rng.randrange(S.ctx.pM) for _ in range(S.ctx.f)]) for _ in range(2)), tuple(0 for _ in S.primes))
    for _ in range(10):
        t = tuple(_unit(S.ctx, rng) for _ in S.primes)
        s = tuple(_unit(S.ctx, rng) for _ in S.primes)
        ts = tuple(a * b for a, b in zip(t, s))
        assert eval_character(k, ts, S) == eval_character(k, t, S) * eval_character(k, s, S)


def test_non_units_rejected():
    S = local_setup(2, 7, 8)
    k = Weight.classical(S, (1, 1))
    with pytest.raises(DomainError):
        eval_character(k, (S.ctx(7), S.ctx(1)), S)


def test_shift_round_trip_and_classical_agreement(quad_setup):
    S = quad_setup
    k = Weight.classical(S, (2, 3))
    moved = weight_shift(k, 1, 4, S)
    assert moved == Weight.classical(S, (2, 7))
    assert weight_shift(moved, 1, -4, S) == k


def test_restriction_adds_exponents():
    S = local_setup(2, 7, 8)
    k = Weight.classical(S, (2, 5))
    r = restrict_to_F(k, S)
    assert r.u == (S.ctx(7),) and r.n == 2
    k2 = Weight.classical(S, (1, 1))
    s = restrict_to_F(k2, S)
    assert s.u == (S.ctx(2),)


def test_restriction_matches_character_on_rationals():
    S = local_setup(2, 7, 10)
    rng = random.Random(2)
    for _ in range(5):
        k = Weight.classical(S, (rng.randrange(0, 6), rng.randrange(0, 6)))
        r = restrict_to_F(k, S)
        t = S.ctx(1 + 7 * rng.randrange(1, 100))
        rational = r.u[0]
        assert eval_character(k, (t, t), S) == t ** rational.to_int()


def test_analyticity_level():
    ctx = PadicCtx(7, 1, 8)
    assert analyticity_level(Weight((ctx(3),), (3,))) == 1
    assert analyticity_level(Weight((ctx(3),), (3,), n=2)) == 1
    with pytest.raises(DomainError):
        Weight((ctx(3),), (3,), n=0)


def test_torsion_part_of_classical_weight():
    S = local_setup(2, 7, 8)
    k = Weight.classical(S, (2, 3))
    t = S.ctx(3)
    value = eval_character(k, (t, S.ctx(1)), S)
    sigma = S.uniformizers.sigmas[0][0]
    e = (2, 3)[sigma]
    assert value == t**e
    assert (value / teichmuller(t) ** e - 1).valuation() >= 1
