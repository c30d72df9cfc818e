"""Weights as pointwise p-adic characters of (O_L (x) Z_p)^x.

A weight is an exponent u_sigma per embedding, a torsion part given as a
Teichmuller exponent per prime above p, and an analyticity level n.  The
character sends t to  prod_i omega(t_i)^chi_i * prod_sigma <sigma(t)>^u_sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .padic import PadicCtx, UnramElem, padic_exp, padic_log, teichmuller


@dataclass(frozen=True)
class Weight:
    u: tuple  # UnramElem per embedding
    chi: tuple  # int per prime above p
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("analyticity level must be >= 1")
        if not self.u:
            raise DomainError("a weight needs at least one exponent")
        ctx = self.u[0].ctx
        if any(x.ctx is not ctx for x in self.u):
            raise DomainError("all exponents must share one context")

    @property
    def ctx(self) -> PadicCtx:
        return self.u[0].ctx

    @property
    def g(self) -> int:
        return len(self.u)

    @classmethod
    def classical(cls, setup, exponents, n: int = 1) -> "Weight":
        """Integer exponents over L, with the torsion part they force."""
        ctx = setup.ctx
        exponents = tuple(int(e) for e in exponents)
        chi = []
        for i in setup.primes:
            order = setup.p ** setup.splitting.inertia[i] - 1
            total = sum(exponents[s] * setup.p ** setup.frobenius_index(s) for s in setup.uniformizers.sigmas[i])
            chi.append(total % order)
        return cls(tuple(ctx(e) for e in exponents), tuple(chi), n)

    @classmethod
    def classical_rational(cls, ctx: PadicCtx, exponent: int, n: int = 1) -> "Weight":
        """A weight over Q with integer exponent."""
        return cls((ctx(exponent),), (exponent % (ctx.p - 1),), n)

    def with_u(self, index: int, value: UnramElem) -> "Weight":
        u = list(self.u)
        u[index] = value
        return Weight(tuple(u), self.chi, self.n)

    def classical_exponents(self):
        """Integer exponents when every u_sigma is a small integer, otherwise None."""
        out = []
        half = self.ctx.pM // 2
        for x in self.u:
            if any(x.coords[1:]):
                return None
            c = x.coords[0]
            out.append(c if c <= half else c - self.ctx.pM)
        return tuple(out)

    def to_json(self) -> dict:
        return {"u": [x.to_json()["coords"] for x in self.u], "chi": list(self.chi), "n": self.n}

    @classmethod
    def from_json(cls, ctx: PadicCtx, data: dict) -> "Weight":
        return cls(tuple(ctx([int(c) for c in coords]) for coords in data["u"]), tuple(data["chi"]), int(data["n"]))


def _one_unit_part(x: UnramElem) -> UnramElem:
    return x / teichmuller(x)


def eval_character(k: Weight, t, setup) -> UnramElem:
    """k(t) for t a tuple of units, one per prime above p."""
    if len(t) != len(k.chi):
        raise DomainError("need one unit per prime above p")
    for ti in t:
        if not ti.is_unit():
            raise DomainError(f"{ti!r} is not a unit")
    ctx = k.ctx
    value = ctx.one()
    for ti, c in zip(t, k.chi):
        value = value * teichmuller(ti) ** c
    for sigma, u in enumerate(k.u):
        i = setup.prime_of_sigma(sigma)
        t_sigma = t[i]
        for _ in range(setup.frobenius_index(sigma)):
            t_sigma = t_sigma.frobenius()
        value = value * padic_exp(u * padic_log(_one_unit_part(t_sigma)))
    return value


def weight_shift(k: Weight, sigma: int, amount: int, setup=None) -> Weight:
    """Move u_sigma by ``amount``; the torsion part moves by omega^amount at sigma's prime."""
    u = list(k.u)
    u[sigma] = u[sigma] + amount
    chi = list(k.chi)
    if setup is None:
        # over Q: one embedding, one prime, residue field F_p
        chi[0] = (chi[0] + amount) % (k.ctx.p - 1)
    else:
        i = setup.prime_of_sigma(sigma)
        order = setup.p ** setup.splitting.inertia[i] - 1
        chi[i] = (chi[i] + amount * setup.p ** setup.frobenius_index(sigma)) % order
    return Weight(tuple(u), tuple(chi), k.n)


def analyticity_level(k: Weight) -> int:
    """Least n >= 1 with val(u_sigma * log t) >= 1 whenever t = 1 mod p^n."""
    worst = min(x.valuation() for x in k.u)
    return max(1, 1 - worst)


def restrict_to_F(k: Weight, setup) -> Weight:
    """Pull back along Z_p^x -> (O_L (x) Z_p)^x: exponents add, level doubles."""
    if k.g != 2:
        raise DomainError("restriction expects a weight over the quadratic field")
    v = k.u[0] + k.u[1]
    chi = sum(k.chi) % (setup.p - 1)
    return Weight((v,), (chi,), 2 * k.n)
