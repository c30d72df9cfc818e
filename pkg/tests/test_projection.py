import random

import pytest
import sympy

from padic_hilbert.connection import nabla_sigma
from padic_hilbert.errors import DomainError, SingularWeight
from padic_hilbert.field import RationalSetup
from padic_hilbert.padic import PadicCtx
from padic_hilbert.projection import lambda_denominator, oc_project
from padic_hilbert.qexp import NOCForm, QExp, noc_from_modular, theta_sigma
from padic_hilbert.selftest import projection_input
from padic_hilbert.weight import Weight


def _space(p=7, M=10):
    return RationalSetup(PadicCtx(p, 1, M))


def _rebuild(h, h0, phi):
    N = h.order()
    out = noc_from_modular(h0, h.weight, N)
    return out + nabla_sigma(phi, 0) if N else out


def test_order_zero_input():
    S = _space()
    g = QExp(S, 8, {n: n + 1 for n in range(1, 9)})
    h0, phi, loss = oc_project(noc_from_modular(g, Weight((S.ctx(4),), (4,))))
    assert h0 == g and phi.is_zero() and loss == 0


@pytest.mark.parametrize("N", [1, 2, 3])
def test_nabla_images_project_to_zero(N):
    S = _space()
    rng = random.Random(N)
    w = S.ctx(rng.randrange(S.ctx.pM))
    while any((w - j).valuation() for j in range(N)):
        w = S.ctx(rng.randrange(S.ctx.pM))
    phi0 = NOCForm(S, Weight((w,), (0,)), 12, {(j,): QExp(S, 12, {n: rng.randrange(S.ctx.pM) for n in range(1, 13)}) for j in range(N)}, N - 1)
    h = nabla_sigma(phi0, 0)
    h0, phi, loss = oc_project(h)
    assert loss == N
    assert h0.min_valuation() >= S.M - loss
    assert (_rebuild(h, h0, phi) - h).min_valuation() >= S.M - loss


def test_single_V_term():
    S = _space()
    w = S.ctx(5)  # weight exponent 7; w is a unit
    a = QExp(S, 6, {n: 7 * (n + 3) for n in range(1, 7)})
    h = NOCForm(S, Weight((w + 2,), (0,)), 6, {(1,): a}, 1)
    h0, phi, loss = oc_project(h)
    # h0 = -theta(a / (p w)) with a / p = n + 3
    expected = QExp(S, 6, {n: -S.ctx(n * (n + 3)) * w.inverse() for n in range(1, 7)})
    assert h0 == expected and loss == 1
    assert phi.part((0,)) == QExp(S, 6, {n: S.ctx(n + 3) * w.inverse() for n in range(1, 7)})
    assert (_rebuild(h, h0, phi) - h).min_valuation() >= S.M - loss


def test_integral_lattice_is_enforced():
    S = _space()
    h = NOCForm(S, Weight((S.ctx(7),), (0,)), 4, {(1,): QExp(S, 4, {1: 1})}, 1)
    with pytest.raises(DomainError):
        oc_project(h)


@pytest.mark.parametrize("w,N,index", [(0, 1, 1), (1, 2, 2), (2, 3, 3)])
def test_singular_weights_report_degree(w, N, index):
    S = _space()
    h, _, _ = projection_input(S, random.Random(w), S.ctx(w), N, 6)
    with pytest.raises(SingularWeight) as err:
        oc_project(h)
    assert err.value.index == index


def test_lambda_denominator_examples():
    ctx = PadicCtx(7, 1, 8)
    assert lambda_denominator(Weight((ctx(5),), (5,)), 1) == ctx(5)
    assert lambda_denominator(Weight((ctx(5),), (5,)), 3) == ctx(5 * 4 * 3)
    assert lambda_denominator(Weight((ctx(3),), (3,)), 4) == ctx(0)
    rng = random.Random(0)
    for _ in range(10):
        u = ctx(rng.randrange(ctx.pM) * 7 + 5)  # u = 5 mod 7 stays away from 0, 1, 2
        assert lambda_denominator(Weight((u,), (0,)), 3).valuation() == 0


def test_idempotence():
    S = _space()
    rng = random.Random(4)
    h, _, _ = projection_input(S, rng, S.ctx(9), 2, 10)
    h0, _, _ = oc_project(h)
    again, phi, loss = oc_project(noc_from_modular(h0, h.weight))
    assert again == h0 and phi.is_zero() and loss == 0


@pytest.mark.parametrize("p,w,N", [(7, 4, 2), (7, 14, 2), (5, 3, 3), (5, 11, 1)])
def test_matches_dense_linear_solve(p, w, N):
    """Solve h = h0 + nabla(phi) over Q for all coefficients at once and reduce mod p."""
    M, T = 10, 6
    S = _space(p, M)
    rng = random.Random(p * w)
    h, _, _ = projection_input(S, rng, S.ctx(w), N, T)
    h0, phi, loss = oc_project(h)

    idx = list(range(T + 1))
    names = [("h0", n) for n in idx] + [("b", j, n) for j in range(N) for n in idx]
    col = {k: c for c, k in enumerate(names)}
    rows, rhs = [], []
    for j in range(N + 1):
        for n in idx:
            row = [0] * len(names)
            if j == 0:
                row[col[("h0", n)]] = 1
            if j < N:
                row[col[("b", j, n)]] += n  # theta
            if j >= 1:
                row[col[("b", j - 1, n)]] += p * (w - (j - 1))
            rows.append(row)
            rhs.append(h.part((j,)).get(n).to_int())
    sol = sympy.Matrix(rows).LUsolve(sympy.Matrix(rhs))
    mod = p ** (M - loss)

    def reduce(x):
        x = sympy.Rational(x)
        return int(x.p * pow(int(x.q), -1, mod)) % mod

    for n in idx:
        assert reduce(sol[col[("h0", n)]]) == h0.get(n).to_int() % mod
        for j in range(N):
            assert reduce(sol[col[("b", j, n)]]) == phi.part((j,)).get(n).to_int() % mod
