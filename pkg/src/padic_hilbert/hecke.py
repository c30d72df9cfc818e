"""Hecke operators at p on q-expansions, depletion, stabilization and synthetic eigenforms."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import sympy

from .errors import DomainError, InconsistentData, TruncationOverflow
from .padic import UnramElem
from .qexp import NOCForm, QExp


# -- index maps -----------------------------------------------------------------


def _uniformizer(space, i):
    return space.uniformizers.xs[i]


def _full_x(space):
    return (space.p, 0)


def _largest_embedding(space, x) -> float:
    if hasattr(space, "field"):
        return max(space.field.embeddings(x))
    return float(x[0])


def _index_up(g: QExp, x, trace_bound: int | None) -> QExp:
    """Coefficient at beta becomes the coefficient of g at rep(x * beta)."""
    space = g.space
    if trace_bound is None:
        trace_bound = int(g.trace_bound / _largest_embedding(space, x) + 1e-9)
    out = {}
    tr, rep = space.trace, space.rep
    for beta in space.window(trace_bound):
        target = rep(space.times(beta, x))
        if tr(target) > g.trace_bound:
            raise TruncationOverflow(f"needs the coefficient at {target}, beyond trace {g.trace_bound}")
        value = g.coeffs.get(target)
        if value is not None:
            out[beta] = value
    return QExp(space, trace_bound, out, check=False)


def _index_down(g: QExp, x, trace_bound: int | None) -> QExp:
    """Coefficient at gamma becomes g at rep(gamma / x) when x divides gamma, else 0."""
    space = g.space
    if hasattr(space, "field"):
        worst = max(1.0 / e for e in space.field.embeddings(x))
    else:
        worst = 1.0 / x[0]
    safe = int(g.trace_bound / worst + 1e-9)
    if trace_bound is None:
        trace_bound = safe
    elif trace_bound > safe:
        warnings.warn(f"V output window {trace_bound} truncated to {safe}", stacklevel=3)
        trace_bound = safe
    out = {}
    rep, tr = space.rep, space.trace
    for gamma in space.window(trace_bound):
        q = space.quotient(gamma, x)
        if q is None:
            continue
        src = rep(q)
        if tr(src) > g.trace_bound:
            raise TruncationOverflow(f"needs the coefficient at {src}")
        value = g.coeffs.get(src)
        if value is not None:
            out[gamma] = value
    return QExp(space, trace_bound, out, check=False)


def U_full(g: QExp, trace_bound: int | None = None) -> QExp:
    """sum a_{p beta} q^beta; the output window is the input window divided by p."""
    if trace_bound is None:
        trace_bound = g.trace_bound // g.space.p
    if trace_bound * g.space.p > g.trace_bound:
        raise TruncationOverflow(f"U to trace {trace_bound} needs input to trace {trace_bound * g.space.p}")
    return _index_up(g, _full_x(g.space), trace_bound)


def U_partial(g: QExp, i: int, trace_bound: int | None = None) -> QExp:
    """sum a_{x_i beta} q^beta."""
    return _index_up(g, _uniformizer(g.space, i), trace_bound)


def V_full(g: QExp, trace_bound: int | None = None) -> QExp:
    """sum a_beta q^{p beta}."""
    return _index_down(g, _full_x(g.space), trace_bound)


def V_partial(g: QExp, i: int, trace_bound: int | None = None) -> QExp:
    return _index_down(g, _uniformizer(g.space, i), trace_bound)


def deplete(g: QExp, primes=None) -> QExp:
    """(1 - V_i U_i) for each listed prime: drop every coefficient supported on a listed prime."""
    space = g.space
    primes = list(space.primes) if primes is None else list(primes)
    keep = {b: v for b, v in g.coeffs.items() if not any(space.in_prime(b, i) for i in primes)}
    return QExp(space, g.trace_bound, keep, check=False)


def deplete_via_operators(g: QExp, i: int) -> QExp:
    """g - V_i(U_i(g)) on the largest window where both operators are defined."""
    u = U_partial(g, i)
    vu = V_partial(u, i)
    T = min(vu.trace_bound, g.trace_bound)
    return g.truncate(T) - vu.truncate(T)


def p_stabilize(g: QExp, other_root, i: int) -> QExp:
    """g - (other root) * V_i(g): an eigenvector of U_i with the remaining root."""
    if not other_root:
        return g
    vg = V_partial(g, i, g.trace_bound) if hasattr(g.space, "field") else V_full(g, g.trace_bound)
    return g - vg.scale(other_root)


# -- operators on nearly-overconvergent forms -----------------------------------------


def unit_discrepancy(setup, i: int) -> list:
    """c_sigma = sigma(x_i) / p^{[sigma | prime i]}: the unit part of x_i at every embedding."""
    x = setup.uniformizers.xs[i]
    out = []
    for sigma in range(setup.num_sigmas):
        value = setup.embed(x, sigma)
        if sigma in setup.uniformizers.sigmas[i]:
            value, _ = value.divide_by_p(1)
            value = value.to_ctx(setup.ctx)
        out.append(value)
    return out


def _orbit_twist(exps, deg) -> int:
    """d with a(eps beta) = sigma_0(eps)^d a(beta) for the V-degree ``deg`` part.

    theta_sigma multiplies by sigma(rep), so a part carrying e_sigma factors of
    theta_sigma transforms by prod sigma(eps)^{e_sigma}; since N(eps) = 1 only
    e_0 - e_1 = (u_0 - u_1)/2 - (j_0 - j_1) matters.
    """
    if len(exps) != 2:
        return 0
    gap = exps[0] - exps[1]
    if gap % 2:
        raise DomainError("exponents of different parity have no orbit-invariant model")
    return gap // 2 - (deg[0] - deg[1])


def _untwist(moved: QExp, x, d: int) -> QExp:
    """Replace a(rep(x beta)) by a(x beta) = sigma_0(unit)^d a(rep(x beta))."""
    space = moved.space
    field = space.field
    out = {}
    for beta, value in moved.coeffs.items():
        target = space.times(beta, x)
        r = space.rep(target)
        if r != target:
            unit = space.embed(field.divide(target, r), 0)
            value = value * (unit**d if d > 0 else unit.inverse() ** (-d))
        out[beta] = value
    return QExp(space, moved.trace_bound, out, check=False)


def U_noc(h: NOCForm, i: int, trace_bound: int | None = None) -> NOCForm:
    """Normalised U at the i-th prime on a nearly-overconvergent form.

    The V-degree j part is multiplied by p^{j_P} * prod_sigma c_sigma^{j_sigma}
    (j_P is the degree in embeddings above the prime) and the whole form by
    prod_sigma c_sigma^{-floor(u_sigma / 2)}.  Over a quadratic field the
    coefficient fetched from rep(x beta) is moved back to x beta with the
    unit twist of its part.  With this normalisation U nabla^t = p^{t_P}
    nabla^t U at classical weights.
    """
    space = h.space
    p = space.p
    primes_sigmas = space.uniformizers.sigmas[i]
    if hasattr(space, "field"):
        units = [c.to_ctx(space.ctx) for c in unit_discrepancy(space, i)]
    else:
        units = [space.ctx.one()]
    exps = h.weight.classical_exponents()
    if exps is None:
        raise DomainError("normalised U is only implemented at classical weights")
    scalar = space.ctx.one()
    for c, u in zip(units, exps):
        scalar = scalar * c ** (-(u // 2))
    out = {}
    for deg, q in h.terms.items():
        factor = scalar * p ** sum(deg[s] for s in primes_sigmas)
        for s, c in enumerate(units):
            factor = factor * c ** deg[s]
        if hasattr(space, "field"):
            moved = U_partial(q, i, trace_bound)
            twist = _orbit_twist(exps, deg)
            if twist:
                moved = _untwist(moved, space.uniformizers.xs[i], twist)
        else:
            moved = U_full(q, trace_bound)
        out[deg] = moved.scale(factor)
    T = next(iter(out.values())).trace_bound if out else (trace_bound or h.trace_bound // p)
    return NOCForm(space, h.weight, T, out, h.order_bound)


# -- synthetic eigenforms --------------------------------------------------------------


@dataclass
class EigenData:
    """Hecke data of a synthetic eigenform.

    ``p_roots[i]`` are the roots (alpha, beta) of the Hecke polynomial at the
    i-th prime above p; ``chi_p[i]`` is the nebentypus value there, so that
    alpha * beta = N(P_i)^{k-1} chi_p[i].  Away from p the nebentypus is
    trivial and the eigenvalue at a prime ideal comes from ``overrides`` or a
    hash of (seed, prime).
    """

    k: int
    p_roots: list
    chi_p: list
    seed: int = 0
    overrides: dict = dc_field(default_factory=dict)
    constant: int = 0

    def check(self, setup) -> None:
        p = setup.p
        for i, (a, b) in enumerate(self.p_roots):
            norm = p ** setup.splitting.inertia[i] if hasattr(setup, "splitting") else p
            if a * b != self.chi_p[i] * norm ** (self.k - 1):
                raise InconsistentData(f"alpha*beta != N^(k-1) chi at prime {i}")
            if a == b:
                raise InconsistentData(f"Hecke polynomial at prime {i} is not separable")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "p_roots": [[a.to_json()["coords"], b.to_json()["coords"]] for a, b in self.p_roots],
            "chi_p": [c.to_json()["coords"] for c in self.chi_p],
            "seeds": {"seed": self.seed, "overrides": {str(k): v.to_json()["coords"] for k, v in self.overrides.items()}},
        }


def seeded_value(ctx, *key) -> UnramElem:
    """Deterministic pseudo-random element of the coefficient ring from a key."""
    digest = hashlib.sha256(repr(key).encode()).digest()
    coords = []
    for k in range(ctx.f):
        chunk = int.from_bytes(hashlib.sha256(digest + bytes([k])).digest(), "big")
        coords.append(chunk % ctx.pM)
    return ctx(coords)


@lru_cache(maxsize=1 << 16)
def _factor(n: int) -> tuple:
    return tuple(sorted(sympy.factorint(n).items()))


def _lift_root(r: int, trace_w: int, norm_w: int, ell: int, e: int) -> int:
    """Newton-lift a simple root of x^2 - t x + n from mod ell to mod ell^e."""
    mod = ell
    while mod < ell**e:
        mod = min(mod * mod, ell**e)
        f = r * r - trace_w * r + norm_w
        df = 2 * r - trace_w
        r = (r - f * pow(df, -1, mod)) % mod
    return r % ell**e


_FACTOR_CACHE: dict = {}


class _Ideals:
    """Prime factorisation of principal ideals of O_L, by prime ideal labels (ell, root)."""

    def __init__(self, field):
        self.field = field

    def primes_over(self, ell: int):
        return self.field._prime_ideals_over(ell)

    def factor(self, beta) -> list:
        """[((ell, root or None), exponent, norm of the prime)] for the ideal (beta)."""
        key = (self.field.D, beta)
        hit = _FACTOR_CACHE.get(key)
        if hit is None:
            hit = self._factor_uncached(beta)
            if len(_FACTOR_CACHE) < 1 << 20:
                _FACTOR_CACHE[key] = hit
        return hit

    def _factor_uncached(self, beta) -> list:
        field = self.field
        m, n = beta
        out = []
        for ell, e in _factor(abs(field.norm(beta))):
            roots = self.primes_over(ell)
            if field.disc % ell == 0:
                out.append(((ell, roots[0]), e, ell))
            elif not roots:
                out.append(((ell, None), e // 2, ell * ell))
            else:
                for r in roots:
                    rr = _lift_root(r, field.trace_w, field.norm_w, ell, e + 1)
                    val = m + n * rr
                    v = 0
                    while v <= e and val % ell ** (v + 1) == 0:
                        v += 1
                    if v:
                        out.append(((ell, r), v, ell))
        return out


class EigenformCoefficients:
    """Coefficient function beta -> a_beta of a synthetic eigenform, evaluated lazily."""

    def __init__(self, data: EigenData, space, scale: int = 1):
        self.data = data
        self.space = space
        self.ctx = space.ctx
        self.scale = scale  # over Q: the form is F(q^scale)
        data.check(space)
        self._prime_cache: dict = {}
        self._cache: dict = {}
        self._over_p = {}
        if hasattr(space, "field"):
            self._ideals = _Ideals(space.field)
            for i, x in enumerate(space.uniformizers.xs):
                if space.splitting.is_split:
                    for r in self._ideals.primes_over(space.p):
                        if (x[0] + x[1] * r) % space.p == 0:
                            self._over_p[(space.p, r)] = i
                else:
                    self._over_p[(space.p, None)] = i
        else:
            self._ideals = None
            self._over_p[(space.p, None)] = 0

    def _prime_data(self, label, norm):
        hit = self._prime_cache.get(label)
        if hit is None:
            ctx = self.ctx
            i = self._over_p.get(label)
            if i is not None:
                a, b = self.data.p_roots[i]
                hit = (a + b, a * b)
            else:
                ap = self.data.overrides.get(label)
                if ap is None:
                    ap = seeded_value(ctx, "eigen", self.data.seed, label)
                hit = (ap, ctx(norm ** (self.data.k - 1)))
            self._prime_cache[label] = hit
        return hit

    def _prime_power(self, label, norm, r: int) -> UnramElem:
        ap, psi = self._prime_data(label, norm)
        prev, cur = self.ctx.one(), ap
        if r == 0:
            return prev
        for _ in range(r - 1):
            prev, cur = cur, ap * cur - psi * prev
        return cur

    def factorization(self, beta):
        if self._ideals is not None:
            return self._ideals.factor(beta)
        return [((ell, None), e, ell) for ell, e in _factor(beta)]

    def __call__(self, beta) -> UnramElem:
        if self._ideals is None:
            if beta % self.scale:
                return self.ctx.zero()
            beta //= self.scale
        key = beta
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if beta in ((0, 0), 0):
            value = self.ctx(self.data.constant)
        else:
            value = self.ctx.one()
            for label, e, norm in self.factorization(beta):
                value = value * self._prime_power(label, norm, e)
        if len(self._cache) < 1 << 20:
            self._cache[key] = value
        return value


def synthetic_eigenform(data: EigenData, space, trace_bound: int, scale: int = 1) -> QExp:
    coeffs = EigenformCoefficients(data, space, scale)
    return QExp.from_function(space, trace_bound, coeffs)


def random_eigendata(setup, rng, k: int = 1, seed=None) -> EigenData:
    """Random unit Hecke roots at p (distinct mod p) with the nebentypus value they force.

    Unit roots force alpha * beta to be a unit, which only fits weight k = 1.
    """
    if k != 1:
        raise DomainError("random unit roots need k = 1 (alpha * beta must be a unit)")
    ctx = setup.ctx
    roots, chis = [], []
    primes = setup.primes
    for i in primes:
        while True:
            a = ctx([rng.randrange(ctx.pM) for _ in range(ctx.f)])
            b = ctx([rng.randrange(ctx.pM) for _ in range(ctx.f)])
            if a.is_unit() and b.is_unit() and (a - b).is_unit():
                break
        roots.append((a, b))
        chis.append(a * b)
    return EigenData(k, roots, chis, seed=rng.randrange(1 << 30) if seed is None else seed)
