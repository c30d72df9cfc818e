"""Local chart of the vector bundle with marked sections and a marked splitting.

Functions are polynomials in Z_sigma, W_sigma (one pair per embedding) with
coefficients mod p^M.  A 1-unit lambda (one per embedding, lambda = 1 mod p^n)
acts by

    Z -> (lambda - 1) / p^n + lambda Z,    W -> lambda W.

Both substitutions are affine, so the action never raises degrees and is exact
on truncated polynomials.  With V = W / (1 + p^n Z) the functions
V^i * k(1 + p^n Z) transform through the character k.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .errors import DomainError
from .padic import PadicCtx, UnramElem, padic_exp, padic_log, vp_factorial


def chart_z_degree(ctx: PadicCtx, n: int = 1) -> int:
    """Largest Z-degree m with p^{nm} / m! not divisible by p^M."""
    p, M = ctx.p, ctx.M
    # n j - (j - 1)/(p - 1) bounds n j - v_p(j!) from below and increases
    bound = 1
    while n * bound * (p - 1) - (bound - 1) < M * (p - 1):
        bound += 1
    return max((j for j in range(bound) if n * j - vp_factorial(j, p) < M), default=0)


def _key(zs, ws) -> tuple:
    return (tuple(int(a) for a in zs), tuple(int(b) for b in ws))


class ChartPoly:
    """sum c_{a,b} Z^a W^b over multi-exponents a, b (one entry per embedding)."""

    __slots__ = ("ctx", "g", "n", "dZ", "dW", "coeffs")

    def __init__(self, ctx: PadicCtx, g: int, dZ: int, dW: int, coeffs=None, n: int = 1):
        self.ctx, self.g, self.n, self.dZ, self.dW = ctx, g, n, dZ, dW
        clean = {}
        for (zs, ws), c in (coeffs or {}).items():
            key = _key(zs, ws)
            if len(key[0]) != g or len(key[1]) != g:
                raise DomainError(f"monomial {key} does not have {g} variables of each kind")
            if max(key[0]) > dZ or max(key[1]) > dW or min(key[0] + key[1]) < 0:
                continue  # truncation
            if not isinstance(c, UnramElem):
                c = ctx(c)
            if c:
                clean[key] = clean[key] + c if key in clean else c
        self.coeffs = {k: v for k, v in clean.items() if v}

    def _like(self, coeffs) -> "ChartPoly":
        return ChartPoly(self.ctx, self.g, self.dZ, self.dW, coeffs, self.n)

    @classmethod
    def variable(cls, ctx, g, dZ, dW, kind: str, sigma: int, n: int = 1) -> "ChartPoly":
        zs, ws = [0] * g, [0] * g
        (zs if kind == "Z" else ws)[sigma] = 1
        return cls(ctx, g, dZ, dW, {(tuple(zs), tuple(ws)): 1}, n)

    def __add__(self, other: "ChartPoly") -> "ChartPoly":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return self._like(out)

    def __sub__(self, other: "ChartPoly") -> "ChartPoly":
        return self + other.scale(-1)

    def scale(self, c) -> "ChartPoly":
        return self._like({k: v * c for k, v in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, ChartPoly):
            return self.scale(other)
        out: dict = {}
        for (za, wa), x in self.coeffs.items():
            for (zb, wb), y in other.coeffs.items():
                zs = tuple(a + b for a, b in zip(za, zb))
                ws = tuple(a + b for a, b in zip(wa, wb))
                if max(zs) > self.dZ or max(ws) > self.dW:
                    continue
                k = (zs, ws)
                out[k] = out[k] + x * y if k in out else x * y
        return self._like(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChartPoly):
            return NotImplemented
        return (self.g, self.dZ, self.dW) == (other.g, other.dZ, other.dW) and self.coeffs == other.coeffs

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, zs, ws) -> UnramElem:
        return self.coeffs.get(_key(zs, ws), self.ctx.zero())

    def to_json(self) -> dict:
        return {
            "g": self.g,
            "n": self.n,
            "truncation": [self.dZ, self.dW],
            "coeffs": [
                {"Z": list(z), "W": list(w), "value": self.coeffs[(z, w)].to_json()["coords"]}
                for z, w in sorted(self.coeffs)
            ],
        }

    def __repr__(self):
        return f"ChartPoly(g={self.g}, dZ={self.dZ}, dW={self.dW}, terms={len(self.coeffs)})"


def one_plus_power(ctx: PadicCtx, c: UnramElem, dZ: int, n: int = 1) -> list:
    """Coefficients of (1 + p^n Z)^c up to Z^dZ: binom(c, m) p^{nm}, exact mod p^M."""
    p = ctx.p
    out = [ctx.one()]
    falling = ctx.one()
    fact = 1
    for m in range(1, dZ + 1):
        falling = falling * (c - (m - 1))
        fact *= m
        v = vp_factorial(m, p)
        shift = n * m - v
        if shift >= ctx.M:
            out.append(ctx.zero())
            continue
        out.append(falling * p**shift * ctx(fact // p**v).inverse())
    return out


def _exponents(k) -> tuple:
    return tuple(k.u) if hasattr(k, "u") else tuple(k)


def character_section(ctx: PadicCtx, k, dZ: int, dW: int, n: int = 1, shift=None) -> ChartPoly:
    """prod_sigma W^{i_sigma} (1 + p^n Z_sigma)^{u_sigma - i_sigma}, i.e. V^i * k(1 + p^n Z)."""
    us = [x if isinstance(x, UnramElem) else ctx(x) for x in _exponents(k)]
    g = len(us)
    shift = tuple(shift or (0,) * g)
    series = [one_plus_power(ctx, u - i, dZ, n) for u, i in zip(us, shift)]
    coeffs = {}
    for zs in product(range(dZ + 1), repeat=g):
        c = ctx.one()
        for s, a in enumerate(zs):
            c = c * series[s][a]
            if not c:
                break
        if c:
            coeffs[(zs, shift)] = c
    return ChartPoly(ctx, g, dZ, dW, coeffs, n)


def _check_one_units(lams, ctx: PadicCtx, n: int) -> list:
    out = []
    for lam in lams:
        lam = lam if isinstance(lam, UnramElem) else ctx(lam)
        if (lam - 1).valuation() < n:
            raise DomainError(f"{lam!r} is not congruent to 1 mod p^{n}")
        out.append(lam)
    return out


def _affine_powers(a: UnramElem, b: UnramElem, d: int) -> list:
    """Coefficient lists of (a + b Z)^m for m = 0..d."""
    ctx = a.ctx
    powers = [[ctx.one()]]
    for _ in range(d):
        prev = powers[-1]
        nxt = [ctx.zero()] * (len(prev) + 1)
        for i, c in enumerate(prev):
            nxt[i] = nxt[i] + c * a
            nxt[i + 1] = nxt[i + 1] + c * b
        powers.append(nxt)
    return powers


def torus_act(lams, f: ChartPoly) -> ChartPoly:
    """Substitute Z -> (lambda - 1)/p^n + lambda Z and W -> lambda W in every variable."""
    ctx, n = f.ctx, f.n
    lams = _check_one_units(lams, ctx, n)
    if len(lams) != f.g:
        raise DomainError(f"need {f.g} units, got {len(lams)}")
    zpows, wpows = [], []
    for lam in lams:
        offset, _ = (lam - 1).divide_by_p(n)
        zpows.append(_affine_powers(offset, lam, f.dZ))
        wpows.append([lam**b for b in range(f.dW + 1)])
    out: dict = {}
    for (zs, ws), c in f.coeffs.items():
        wfac = c
        for s, b in enumerate(ws):
            wfac = wfac * wpows[s][b]
        expansions = [zpows[s][a] for s, a in enumerate(zs)]
        for combo in product(*[range(len(e)) for e in expansions]):
            term = wfac
            for s, i in enumerate(combo):
                term = term * expansions[s][i]
            if term:
                key = (combo, ws)
                out[key] = out[key] + term if key in out else term
    return ChartPoly(ctx, f.g, f.dZ, f.dW, out, n)


def character_value(ctx: PadicCtx, k, lams) -> UnramElem:
    """k(lambda) = prod_sigma exp(u_sigma log lambda_sigma) for 1-units lambda."""
    value = ctx.one()
    for u, lam in zip(_exponents(k), lams):
        u = u if isinstance(u, UnramElem) else ctx(u)
        lam = lam if isinstance(lam, UnramElem) else ctx(lam)
        value = value * padic_exp(u * padic_log(lam))
    return value


def generator(ctx: PadicCtx, g: int, n: int = 1) -> tuple:
    """The topological generator 1 + p^n, diagonally."""
    return tuple(ctx(1 + ctx.p**n) for _ in range(g))


def isotypic_check(f: ChartPoly, k) -> bool:
    """act(gamma, f) == k(gamma) f for gamma = 1 + p^n in every embedding."""
    gamma = generator(f.ctx, f.g, f.n)
    return torus_act(gamma, f) == f.scale(character_value(f.ctx, k, gamma))


def _rank_mod_p(rows) -> int:
    """Number of unit pivots found by elimination; equals the rank of the reduction mod p."""
    rows = [list(r) for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col].is_unit()), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = rows[rank][col].inverse()
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                factor = rows[r][col] * inv
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


@dataclass
class SpanReport:
    d: int
    g: int
    count: int
    isotypic: list
    rank_mod_p: int

    @property
    def all_isotypic(self) -> bool:
        return all(self.isotypic)

    @property
    def independent(self) -> bool:
        return self.rank_mod_p == self.count

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "g": self.g,
            "count": self.count,
            "all_isotypic": self.all_isotypic,
            "independent": self.independent,
            "rank_mod_p": self.rank_mod_p,
        }


def isotypic_span_check(ctx: PadicCtx, k, d: int, dW: int | None = None, n: int = 1, dZ: int | None = None) -> SpanReport:
    """Check each V^i k(1 + p^n Z) with |i| <= d for isotypy, then their independence mod p."""
    g = len(_exponents(k))
    dW = d if dW is None else dW
    if d > dW:
        raise DomainError("d must not exceed the W truncation")
    dZ = chart_z_degree(ctx, n) if dZ is None else dZ
    shifts = [i for i in product(range(d + 1), repeat=g) if sum(i) <= d]
    polys = [character_section(ctx, k, dZ, dW, n, i) for i in shifts]
    flags = [isotypic_check(f, k) for f in polys]
    monomials = sorted({m for f in polys for m in f.coeffs})
    rows = [[f.coefficient(*m) for m in monomials] for f in polys]
    return SpanReport(d, g, len(polys), flags, _rank_mod_p(rows))
