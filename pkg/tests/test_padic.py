import random
from fractions import Fraction

import pytest
import sympy

from padic_hilbert.errors import DomainError, NonSimpleRoot
from padic_hilbert.padic import (
    PadicCtx,
    PadicNumber,
    hensel_root,
    padic_exp,
    padic_log,
    smallest_irreducible,
    teichmuller,
)


def _frac_mod(x: Fraction, m: int) -> int:
    return x.numerator * pow(x.denominator, -1, m) % m


def test_log_of_one_plus_p_matches_rational_partial_sum():
    ctx = PadicCtx(7, 1, 5)
    # terms 7^k / k with k large have valuation >= 5; 40 terms is plenty
    exact = sum(Fraction((-1) ** (k + 1) * 7**k, k) for k in range(1, 41))
    assert padic_log(ctx(8)).to_int() == _frac_mod(exact, 7**5)


def test_exp_inverts_log():
    ctx = PadicCtx(7, 1, 5)
    assert padic_exp(ctx.zero()) == ctx.one()
    assert padic_exp(padic_log(ctx(8))) == ctx(8)


@pytest.mark.parametrize("p,f", [(5, 1), (7, 1), (5, 2), (3, 2)])
def test_log_exp_homomorphisms(p, f):
    ctx = PadicCtx(p, f, 8)
    rng = random.Random(p * 10 + f)
    for _ in range(20):
        a = ctx.one() + ctx([rng.randrange(ctx.pM) for _ in range(f)]) * p
        b = ctx.one() + ctx([rng.randrange(ctx.pM) for _ in range(f)]) * p
        assert padic_log(a * b) == padic_log(a) + padic_log(b)
        x, y = padic_log(a), padic_log(b)
        assert padic_exp(x + y) == padic_exp(x) * padic_exp(y)
        assert padic_exp(padic_log(a)) == a


def test_log_rejects_non_principal_units():
    with pytest.raises(DomainError):
        padic_log(PadicCtx(7, 1, 5)(3))


def test_teichmuller_against_integer_fixpoint():
    ctx = PadicCtx(7, 1, 4)
    y = 3
    for _ in range(10):
        y = pow(y, 7, 7**4)
    assert teichmuller(ctx(3)).to_int() == y
    assert pow(y, 6, 7**4) == 1


@pytest.mark.parametrize("p,f", [(5, 2), (7, 2), (3, 3)])
def test_teichmuller_is_torsion(p, f):
    ctx = PadicCtx(p, f, 6)
    rng = random.Random(f)
    for _ in range(10):
        x = ctx([rng.randrange(1, p)] + [rng.randrange(p) for _ in range(f - 1)])
        t = teichmuller(x)
        assert t ** (p**f - 1) == ctx.one()
        assert t.residue() == x.residue()


def test_hensel_square_root_of_two():
    ctx = PadicCtx(7, 1, 6)
    r = hensel_root([ctx(-2), ctx(0), ctx(1)], 3)
    assert r.to_int() % 49 == 10
    assert r * r == ctx(2)
    assert hensel_root([ctx(-2), ctx(0), ctx(1)], 4) == -r


def test_hensel_linear_and_errors():
    ctx = PadicCtx(5, 1, 6)
    assert hensel_root([ctx(-17), ctx(1)], 2) == ctx(17)
    with pytest.raises(NonSimpleRoot):
        hensel_root([ctx(0), ctx(0), ctx(1)], 0)
    with pytest.raises(DomainError):
        hensel_root([ctx(-2), ctx(0), ctx(1)], 1)


def test_context_rejects_bad_parameters():
    with pytest.raises(DomainError):
        PadicCtx(2, 1, 8)
    with pytest.raises(DomainError):
        PadicCtx(9, 1, 8)
    with pytest.raises(DomainError):
        PadicCtx(7, 1, 3)


@pytest.mark.parametrize("p,f", [(3, 2), (5, 2), (7, 2), (3, 3)])
def test_defining_polynomial_is_least_irreducible(p, f):
    poly = smallest_irreducible(p, f)
    x = sympy.Symbol("x")
    assert sympy.Poly(list(reversed(poly)), x, modulus=p).is_irreducible
    # nothing earlier in the (c_{f-1}, ..., c_0) order is irreducible
    import itertools

    target = tuple(reversed(poly[:-1]))
    for cand in itertools.product(range(p), repeat=f):
        if cand == target:
            break
        if cand[-1] and sympy.Poly([1, *cand], x, modulus=p).is_irreducible:
            pytest.fail(f"{cand} precedes {target}")


@pytest.mark.parametrize("p,f", [(7, 1), (5, 2)])
def test_ring_axioms(p, f):
    ctx = PadicCtx(p, f, 8)
    rng = random.Random(5)
    elem = lambda: ctx([rng.randrange(ctx.pM) for _ in range(f)])
    for _ in range(30):
        a, b, c = elem(), elem(), elem()
        assert (a + b) - b == a
        assert a * (b + c) == a * b + a * c
        assert (a * b) * c == a * (b * c)
        if a.is_unit():
            assert a * a.inverse() == ctx.one()


def test_frobenius_lifts_pth_power():
    ctx = PadicCtx(5, 2, 6)
    rng = random.Random(9)
    for _ in range(10):
        a = ctx([rng.randrange(ctx.pM) for _ in range(2)])
        assert (a.frobenius() - a**5).valuation() >= 1
        assert a.frobenius().frobenius() == a


def test_valuation_and_division_by_p():
    ctx = PadicCtx(7, 1, 8)
    x = ctx(3 * 7**3)
    assert x.valuation() == 3
    q, _ = x.divide_by_p(3)
    assert q == ctx(3)
    assert ctx.zero().valuation() >= ctx.M
    with pytest.raises(DomainError):
        x.divide_by_p(4)


def test_padic_number_tracks_precision():
    ctx = PadicCtx(7, 1, 8)
    a = PadicNumber.from_int(ctx, 14)
    b = PadicNumber.from_int(ctx, 7)
    q = a / b
    assert q.valuation() == 0
    assert q.agrees_with(PadicNumber.from_int(ctx, 2), 6)


def test_json_round_trip():
    ctx = PadicCtx(5, 2, 6)
    x = ctx([7, 11])
    assert type(x).from_json(ctx, x.to_json()) == x
    assert PadicCtx.from_json(ctx.to_json()) is ctx or PadicCtx.from_json(ctx.to_json()).pM == ctx.pM
