import math
import random
from fractions import Fraction

import pytest

from padic_hilbert.connection import (
    IterationPlan,
    binomial_direct,
    binomial_series_coefficients,
    closed_form_coefficient,
    log_nabla,
    nabla_classical,
    nabla_power_closed,
    nabla_s,
    nabla_s_report,
    nabla_sigma,
    period_difference,
    series_term_coefficient,
    tail_valuation,
    term_valuation_bound,
)
from padic_hilbert.errors import ConvergenceBudgetExceeded, NotDepleted
from padic_hilbert.hecke import deplete, random_eigendata, synthetic_eigenform
from padic_hilbert.padic import vp
from padic_hilbert.qexp import QExp, noc_from_modular, theta_sigma
from padic_hilbert.selftest import _random_noc, _random_qexp
from padic_hilbert.weight import Weight
from conftest import local_setup


def _depleted_form(S, T, seed, weight=(2, 2)):
    rng = random.Random(seed)
    g = deplete(synthetic_eigenform(random_eigendata(S, rng), S, T))
    return noc_from_modular(g, Weight.classical(S, weight))


def test_nabla_of_constant(split7):
    S = split7
    k = Weight.classical(S, (3, 4))
    one = noc_from_modular(QExp.monomial(S, 6, (0, 0)), k)
    out = nabla_sigma(one, 1)
    assert set(out.terms) == {(0, 1)}
    assert out.part((0, 1))[(0, 0)] == S.ctx(7 * 4)
    assert out.weight == Weight.classical(S, (3, 6))


def test_degree_zero_part_is_theta(split7):
    S = split7
    g = _random_qexp(S, 10, random.Random(0))
    h = nabla_sigma(noc_from_modular(g, Weight.classical(S, (2, 2))), 0)
    assert h.part((0, 0)) == theta_sigma(g, 0)
    assert h.part((1, 0)) == g.scale(7 * 2)


def test_connections_commute(quad_setup):
    S = quad_setup
    rng = random.Random(2)
    h = _random_noc(S, Weight.classical(S, (2, 3)), 10, 2, rng)
    a = nabla_sigma(nabla_sigma(h, 0), 1)
    b = nabla_sigma(nabla_sigma(h, 1), 0)
    assert a == b


def test_closed_form_coefficients():
    S = local_setup(2, 7, 8)
    u = S.ctx(5)
    # two steps by hand: nabla(theta g + p u g V) at weight u + 2 gives
    # theta^2 g + p (2u + 2) theta g V + p^2 u (u + 1) g V^2
    assert [closed_form_coefficient(2, j, u) for j in range(3)] == [S.ctx(1), S.ctx(12), S.ctx(30)]
    assert closed_form_coefficient(0, 0, u) == S.ctx(1)


@pytest.mark.parametrize("N", [0, 1, 2, 3, 4])
def test_closed_form_matches_iteration(quad_setup, N):
    S = quad_setup
    g = _random_qexp(S, 8, random.Random(N))
    k = Weight.classical(S, (3, 2))
    closed = nabla_power_closed(g, N, 1, k)
    direct = nabla_classical(noc_from_modular(g, k), (0, N))
    assert closed.same_coefficients(direct) and closed.weight == direct.weight


def test_closed_form_at_p_adic_weight(split7):
    S = split7
    rng = random.Random(8)
    k = Weight((S.ctx(rng.randrange(S.ctx.pM)), S.ctx(rng.randrange(S.ctx.pM))), (0, 0))
    g = _random_qexp(S, 8, rng)
    assert nabla_power_closed(g, 3, 0, k).same_coefficients(nabla_classical(noc_from_modular(g, k), (3, 0)))


def test_period_difference_is_divisible_by_p(quad_setup):
    S = quad_setup
    h = _depleted_form(S, 12, 3)
    for sigma in (0, 1):
        assert period_difference(h, sigma).min_valuation() >= 1


def test_non_depleted_input_rejected(split7):
    g = synthetic_eigenform(random_eigendata(split7, random.Random(1)), split7, 12)
    h = noc_from_modular(g, Weight.classical(split7, (2, 2)))
    with pytest.raises(NotDepleted):
        nabla_s(h, [IterationPlan.for_target(0, 1, 6, split7.ctx)])


def test_log_partial_sums_stabilize():
    S = local_setup(2, 7, 10)
    h = _depleted_form(S, 12, 4)
    # the J-th term has valuation >= J (1 - 1/6) on the modular part; J = 6 already gives 5
    m = next(J for J in range(1, 20) if all(tail_valuation(j, 7) >= 4 for j in range(J + 1, J + 8)))
    a, b = log_nabla(h, 0, m), log_nabla(h, 0, m + 1)
    assert (a - b).min_valuation() >= 4


def test_zero_exponent_is_identity(split7):
    h = _depleted_form(split7, 12, 5)
    out = nabla_s(h, [IterationPlan.for_target(s, 0, 10, split7.ctx) for s in (0, 1)])
    assert out.same_coefficients(h)


@pytest.mark.parametrize("t", [1, 2, 3])
def test_series_matches_direct_iteration(quad_setup, t):
    S = quad_setup
    h = _depleted_form(S, 14, 10 + t)
    plans = [IterationPlan.for_target(s, t, S.M, S.ctx) for s in (0, 1)]
    series = nabla_s(h, plans)
    direct = nabla_classical(h, (t, t))
    assert (series - direct).min_valuation() >= S.M
    assert series.weight == direct.weight


def test_series_exponents_add(split7):
    S = split7
    h = _depleted_form(S, 12, 6)
    ctx = S.ctx
    rng = random.Random(6)
    v1, v2 = ctx(rng.randrange(ctx.pM)), ctx(rng.randrange(ctx.pM))
    target = 8
    once = nabla_s(h, [IterationPlan.for_target(0, v1 + v2, target, ctx, torsion=0)])
    twice = nabla_s(
        nabla_s(h, [IterationPlan.for_target(0, v1, target, ctx, torsion=0)]),
        [IterationPlan.for_target(0, v2, target, ctx, torsion=0)],
    )
    assert (once - twice).min_valuation() >= target


def test_period_exponent_reproduces_one_period(quad_setup):
    S = quad_setup
    h = _depleted_form(S, 12, 7)
    N = S.p ** S.residue_degree(0) - 1
    series = nabla_s(h, [IterationPlan.for_target(0, N, 8, S.ctx)])
    direct = nabla_classical(h, (N, 0))
    assert (series - direct).min_valuation() >= 8


def test_term_valuation_bound_examples():
    assert term_valuation_bound((1,), 7) == 1
    assert term_valuation_bound((), 7) == 0
    assert term_valuation_bound((7,), 7) == 6
    for js in [(1, 2), (3, 1, 2), (7, 7)]:
        for a in range(len(js)):
            bumped = js[:a] + (js[a] + 1,) + js[a + 1 :]
            # monotone except across a jump in v_p(j_a)
            if vp(js[a] + 1, 7) == vp(js[a], 7):
                assert term_valuation_bound(bumped, 7) >= term_valuation_bound(js, 7)


def test_series_terms_respect_bound():
    S = local_setup(2, 7, 10)
    rng = random.Random(9)
    v = S.ctx(rng.randrange(S.ctx.pM))
    for js in [(1,), (2, 3), (7,), (1, 1, 1), (6, 7, 8)]:
        coef = series_term_coefficient(js, v, 6)
        # X^J(g) carries p^J on the modular part
        assert coef.valuation() + sum(js) >= term_valuation_bound(js, 7)


def test_binomial_series_matches_direct():
    S = local_setup(2, 7, 10)
    rng = random.Random(10)
    for _ in range(5):
        c = S.ctx(rng.randrange(S.ctx.pM))
        series = binomial_series_coefficients(c, 12)
        for J in range(13):
            assert (series[J] - binomial_direct(c, J)).valuation() >= S.M - 1


def test_binomial_direct_on_integers():
    S = local_setup(2, 5, 8)
    for n in range(0, 12):
        for J in range(0, 6):
            assert binomial_direct(S.ctx(n), J) == S.ctx(math.comb(n, J))


def test_tail_profile_is_monotone(split7):
    h = _depleted_form(split7, 12, 8)
    _, diags = nabla_s_report(h, [IterationPlan.for_target(0, 3, 10, split7.ctx)], diagnostics=True)
    prof = diags[0].tail_profile()
    assert prof == sorted(prof)
    assert diags[0].certified_precision == 10


def test_target_beyond_precision(split7):
    h = _depleted_form(split7, 8, 9)
    with pytest.raises(ConvergenceBudgetExceeded):
        nabla_s(h, [IterationPlan.for_target(0, 1, split7.M + 1, split7.ctx)])
    short = IterationPlan(0, split7.ctx(1), 1, 10, 1)
    with pytest.raises(ConvergenceBudgetExceeded):
        nabla_s(h, [short])


def test_tail_valuation_grows():
    vals = [tail_valuation(J, 7) for J in range(1, 30)]
    assert vals == sorted(vals) and vals[-1] >= 14
    assert tail_valuation(2, 7) == Fraction(1)
