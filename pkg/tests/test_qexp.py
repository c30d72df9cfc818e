import random

import pytest

from padic_hilbert.errors import DomainError, TruncationOverflow
from padic_hilbert.qexp import NOCForm, QExp, noc_from_modular, qexp_mul, theta_sigma
from padic_hilbert.selftest import _random_qexp
from padic_hilbert.weight import Weight
from conftest import local_setup


def _nonneg(b):
    m, n = b
    return m >= 0 and m * m >= 2 * n * n


def _dense_product(g, h, T):
    """Unfolded convolution over a plain lattice scan, independent of the library's fibers."""
    S = g.space
    out = {}
    for gamma in S.window(T):
        acc = S.ctx.zero()
        for m in range(gamma[0] + 1):
            for n in range(-gamma[0], gamma[0] + 1):
                beta, rest = (m, n), (gamma[0] - m, gamma[1] - n)
                if _nonneg(beta) and _nonneg(rest):
                    acc = acc + g[beta] * h[rest]
        if acc:
            out[gamma] = acc
    return QExp(S, T, out)


def test_theta_on_monomials():
    S = local_setup(2, 7, 8)
    q = QExp.monomial(S, 6, (2, 1))  # stored at the representative 2 - sqrt2
    assert set(q.coeffs) == {(2, -1)}
    assert theta_sigma(q, 1)[(2, -1)].to_int() % 49 == 12
    assert theta_sigma(q, 0)[(2, -1)].to_int() % 49 == (2 - 10) % 49
    assert theta_sigma(QExp.monomial(S, 6, (0, 0), 5), 0).is_zero()


def test_thetas_commute(quad_setup):
    g = _random_qexp(quad_setup, 12, random.Random(1))
    assert theta_sigma(theta_sigma(g, 0), 1) == theta_sigma(theta_sigma(g, 1), 0)


@pytest.mark.parametrize("T", [6, 12])
def test_product_against_dense_convolution(quad_setup, T):
    rng = random.Random(T)
    g, h = _random_qexp(quad_setup, T, rng), _random_qexp(quad_setup, T, rng)
    assert qexp_mul(g, h) == _dense_product(g, h, T)


def test_product_unit_and_commutativity(split7):
    rng = random.Random(3)
    g, h = _random_qexp(split7, 10, rng), _random_qexp(split7, 10, rng)
    one = QExp.monomial(split7, 10, (0, 0))
    assert qexp_mul(g, one) == g
    assert qexp_mul(g, h) == qexp_mul(h, g)


def test_monomial_product_unfolds_orbits(split7):
    # q^1 stands for the sum over all totally positive units; 2 = 1 + 1 is the only split of 2
    one_q = QExp.monomial(split7, 8, (1, 0))
    sq = qexp_mul(one_q, one_q)
    assert sq[(2, 0)] == split7.ctx(1)
    # 4 - 2sqrt2 = 1 + (3 - 2sqrt2), counted in both orders
    gamma = split7.rep((4, -2))
    assert sq[gamma] == split7.ctx(2)


@pytest.mark.parametrize("sigma,twist", [(0, 1), (1, -1)])
def test_theta_is_a_derivation(quad_setup, sigma, twist):
    rng = random.Random(7 + sigma)
    T = 14
    g, h = _random_qexp(quad_setup, T, rng), _random_qexp(quad_setup, T, rng)
    lhs = theta_sigma(qexp_mul(g, h), sigma)
    rhs = qexp_mul(theta_sigma(g, sigma), h, twists=(twist, 0)) + qexp_mul(g, theta_sigma(h, sigma), twists=(0, twist))
    assert lhs == rhs


def test_twisted_product_against_unfolded_oracle(split7):
    rng = random.Random(21)
    T = 12
    g, h = _random_qexp(split7, T, rng), _random_qexp(split7, T, rng)
    tg = theta_sigma(g, 0)
    S = split7
    for gamma in S.window(T):
        acc = S.ctx.zero()
        for m in range(gamma[0] + 1):
            for n in range(-gamma[0], gamma[0] + 1):
                beta, rest = (m, n), (gamma[0] - m, gamma[1] - n)
                if _nonneg(beta) and _nonneg(rest):
                    acc = acc + S.embed(beta, 0) * g[beta] * h[rest]
        assert qexp_mul(tg, h, twists=(1, 0))[gamma] == acc


def test_orbit_invariant_access(split7):
    g = _random_qexp(split7, 12, random.Random(5))
    for beta in split7.window(4):
        moved = split7.field.mul(beta, split7.field.eps_plus)
        if split7.trace(moved) <= 12:
            assert g[moved] == g[beta]


def test_validation(split7):
    with pytest.raises(DomainError):
        QExp(split7, 6, {(2, 1): 1})
    with pytest.raises(TruncationOverflow):
        QExp(split7, 2, {(2, 0): 1})
    g = _random_qexp(split7, 6, random.Random(0))
    with pytest.raises(TruncationOverflow):
        qexp_mul(g, g, trace_bound=8)


def test_arithmetic_and_json(split7):
    rng = random.Random(9)
    g, h = _random_qexp(split7, 8, rng), _random_qexp(split7, 8, rng)
    assert (g + h) - h == g
    assert g.scale(3) == g + g + g
    assert QExp.from_json(split7, g.to_json()) == g
    assert g.truncate(4).trace_bound == 4


def test_noc_from_modular(split7):
    g = _random_qexp(split7, 8, random.Random(2))
    k = Weight.classical(split7, (2, 2))
    h = noc_from_modular(g, k)
    assert isinstance(h, NOCForm)
    assert h.order() == 0 and h.modular_part() == g and h.weight == k
    assert (h + h - h).same_coefficients(h)
