"""Overconvergent projection on the rational chart.

A form h = sum_i a_i V^i of weight exponent w + 2 is split as
h = h0 + nabla(phi) with h0 modular and phi = sum_j b_j V^j of weight w.
Comparing V-degrees in nabla(b V^j) = theta(b) V^j + p (w - j) b V^{j+1}
gives, from the top degree N down,

    b_{N-1} = a_N / (p (w - N + 1)),
    b_{j-1} = (a_j - theta b_j) / (p (w - j + 1)),
    h0      = a_0 - theta b_0.

theta is diagonal on q-expansions, so the recursion runs one index at a time.
"""

from __future__ import annotations

from typing import NamedTuple

from .errors import DomainError, SingularWeight
from .padic import UnramElem
from .qexp import NOCForm, QExp
from .weight import Weight, weight_shift


class Projection(NamedTuple):
    modular: QExp
    primitive: NOCForm
    loss_digits: int


def lambda_denominator(k: Weight, N: int) -> UnramElem:
    """prod_sigma prod_{i=0}^{N+g-2} (u_sigma - i) for the weight k of the primitive."""
    acc = k.ctx.one()
    for u in k.u:
        for i in range(N + k.g - 1):
            acc = acc * (u - i)
    return acc


class _Denominators:
    """p (w - j) for j < N, split as p^{1+e_j} times a unit."""

    def __init__(self, w: UnramElem, N: int):
        self.shifts = []
        self.inverses = []
        for j in range(N):
            d = w - j
            if not d:
                raise SingularWeight(j + 1, f"w - {j} vanishes mod p^M: V-degree {j + 1} cannot be removed")
            e = d.valuation()
            unit, _ = d.divide_by_p(e)
            self.shifts.append(1 + e)
            self.inverses.append(unit.inverse())

    @property
    def loss(self) -> int:
        return sum(self.shifts)

    def divide(self, x: UnramElem, j: int, where) -> UnramElem:
        k = self.shifts[j]
        try:
            q, _ = x.divide_by_p(k)
        except DomainError:
            raise DomainError(
                f"coefficient at {where} is not divisible by p^{k}; the input leaves the integral lattice"
            ) from None
        return q * self.inverses[j]


def project_column(values, theta: UnramElem, dens: _Denominators, where=None):
    """Run the recursion on the coefficients a_0..a_N at one index; returns (h0, [b_0..b_{N-1}])."""
    N = len(values) - 1
    bs = [None] * N
    if N == 0:
        return values[0], bs
    b = dens.divide(values[N], N - 1, where)
    bs[N - 1] = b
    for j in range(N - 1, 0, -1):
        b = dens.divide(values[j] - theta * b, j - 1, where)
        bs[j - 1] = b
    return values[0] - theta * b, bs


def oc_project(h: NOCForm) -> Projection:
    """Split h into (modular part, primitive, digits lost to the denominators)."""
    space = h.space
    if space.num_sigmas != 1:
        raise DomainError("the projection is implemented on the rational chart only")
    N = h.order()
    phi_weight = weight_shift(h.weight, 0, -2)
    if N == 0:
        empty = NOCForm(space, phi_weight, h.trace_bound, {}, 0)
        return Projection(h.modular_part(), empty, 0)
    w = h.weight.u[0] - 2
    dens = _Denominators(w, N)
    ctx = space.ctx
    zero = ctx.zero()
    parts = [h.part((i,)).coeffs for i in range(N + 1)]
    h0, phi = {}, [dict() for _ in range(N)]
    for n in sorted(h.support()):
        column = [part.get(n, zero) for part in parts]
        value, bs = project_column(column, ctx(n), dens, n)
        if value:
            h0[n] = value
        for j, b in enumerate(bs):
            if b:
                phi[j][n] = b
    T = h.trace_bound
    modular = QExp(space, T, h0, check=False)
    terms = {(j,): QExp(space, T, c, check=False) for j, c in enumerate(phi)}
    return Projection(modular, NOCForm(space, phi_weight, T, terms, N - 1), dens.loss)
