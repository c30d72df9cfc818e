import random

import pytest

from padic_hilbert.errors import DomainError
from padic_hilbert.padic import PadicCtx, vp_factorial
from padic_hilbert.vbms import (
    ChartPoly,
    character_section,
    chart_z_degree,
    isotypic_check,
    isotypic_span_check,
    one_plus_power,
    torus_act,
)
from padic_hilbert.weight import Weight

CTX = PadicCtx(5, 1, 8)


def _random_poly(ctx, g, dZ, dW, rng, terms=8):
    coeffs = {}
    for _ in range(terms):
        zs = tuple(rng.randrange(dZ + 1) for _ in range(g))
        ws = tuple(rng.randrange(dW + 1) for _ in range(g))
        coeffs[(zs, ws)] = rng.randrange(ctx.pM)
    return ChartPoly(ctx, g, dZ, dW, coeffs)


def _min_val(f):
    return min((c.valuation() for c in f.coeffs.values()), default=f.ctx.M)


def _one_unit(ctx, rng, n=1):
    return ctx(1 + ctx.p**n * rng.randrange(ctx.pM))


def test_identity_action():
    f = _random_poly(CTX, 2, 4, 2, random.Random(0))
    assert torus_act((CTX.one(), CTX.one()), f) == f


def test_action_on_Z_and_W():
    lam = CTX(1 + 5 * 7)
    Z = ChartPoly.variable(CTX, 1, 4, 2, "Z", 0)
    W = ChartPoly.variable(CTX, 1, 4, 2, "W", 0)
    moved = torus_act((lam,), Z)
    assert moved.coefficient((0,), (0,)) == CTX(7)
    assert moved.coefficient((1,), (0,)) == lam
    assert torus_act((lam,), W).coefficient((0,), (1,)) == lam


def test_group_law_and_inverse():
    rng = random.Random(3)
    for _ in range(5):
        f = _random_poly(CTX, 2, 5, 2, rng)
        lam = (_one_unit(CTX, rng), _one_unit(CTX, rng))
        mu = (_one_unit(CTX, rng), _one_unit(CTX, rng))
        both = tuple(a * b for a, b in zip(lam, mu))
        # (lambda - 1)/p is known mod p^{M-1}: one digit is lost for a general 1-unit
        assert _min_val(torus_act(lam, torus_act(mu, f)) - torus_act(both, f)) >= CTX.M - 1
        inv = tuple(a.inverse() for a in lam)
        assert _min_val(torus_act(lam, torus_act(inv, f)) - f) >= CTX.M - 1


def test_generator_action_is_exact():
    rng = random.Random(4)
    gamma = (CTX(6), CTX(6))
    inv = tuple(a.inverse() for a in gamma)
    for _ in range(3):
        f = _random_poly(CTX, 2, 5, 2, rng)
        sq = torus_act(gamma, torus_act(gamma, f))
        assert sq == torus_act((CTX(36), CTX(36)), f)


def test_rejects_non_one_units():
    f = _random_poly(CTX, 1, 3, 1, random.Random(1))
    with pytest.raises(DomainError):
        torus_act((CTX(2),), f)


def test_character_section_is_isotypic():
    dZ = chart_z_degree(CTX)
    for u in (0, 1, 3, -2):
        k = Weight((CTX(u),), (u % 4,))
        assert isotypic_check(character_section(CTX, k, dZ, 2), k)


def test_p_adic_weight_section_is_isotypic():
    rng = random.Random(6)
    dZ = chart_z_degree(CTX)
    for _ in range(3):
        k = Weight((CTX(rng.randrange(CTX.pM)), CTX(rng.randrange(CTX.pM))), (0,))
        assert isotypic_check(character_section(CTX, k, dZ, 1), k)


def test_Z_alone_is_not_invariant():
    k = Weight((CTX(0),), (0,))
    Z = ChartPoly.variable(CTX, 1, chart_z_degree(CTX), 1, "Z", 0)
    assert not isotypic_check(Z, k)
    assert isotypic_check(ChartPoly(CTX, 1, 3, 1, {((0,), (0,)): 4}), k)


def test_V_times_section_matches_substitution_oracle():
    # V = W (1 + pZ)^{-1}; multiply out by hand and compare with the shifted section
    dZ = chart_z_degree(CTX)
    k = Weight((CTX(3),), (3,))
    inv = one_plus_power(CTX, CTX(-1), dZ)
    V = ChartPoly(CTX, 1, dZ, 2, {((a,), (1,)): c for a, c in enumerate(inv)})
    product = V * character_section(CTX, k, dZ, 2)
    assert product == character_section(CTX, k, dZ, 2, shift=(1,))
    assert isotypic_check(product, k)


def test_isotypy_stable_under_unit_scaling():
    dZ = chart_z_degree(CTX)
    k = Weight((CTX(2), CTX(1)), (3,))
    f = character_section(CTX, k, dZ, 2, shift=(1, 0))
    assert isotypic_check(f.scale(CTX(3)), k)


def test_span_reports():
    k1 = Weight((CTX(2),), (2,))
    r0 = isotypic_span_check(CTX, k1, 0)
    assert r0.count == 1 and r0.all_isotypic and r0.independent
    r2 = isotypic_span_check(CTX, k1, 2)
    assert r2.count == 3 and r2.all_isotypic and r2.rank_mod_p == 3
    k2 = Weight((CTX(2), CTX(4)), (1,))
    counts = [isotypic_span_check(CTX, k2, d, dZ=6).count for d in range(3)]
    assert counts == sorted(counts) == [1, 3, 6]


def test_chart_degree_is_exact():
    for p, n in ((5, 1), (7, 1), (5, 2)):
        ctx = PadicCtx(p, 1, 16)
        m = chart_z_degree(ctx, n)
        assert n * m - vp_factorial(m, p) < ctx.M
        assert all(n * j - vp_factorial(j, p) >= ctx.M for j in range(m + 1, m + 60))
    assert chart_z_degree(PadicCtx(5, 1, 16)) == 18
    assert chart_z_degree(PadicCtx(7, 1, 16)) == 17
