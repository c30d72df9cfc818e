"""Real quadratic fields Q(sqrt D) of narrow class number one, with p-adic embeddings.

Elements of O_L are integer pairs (m, n) standing for m + n*w, where w is
sqrt(D) or (1 + sqrt(D))/2.  Q-expansion exponents are totally positive
elements (or 0) taken up to multiplication by totally positive units; the
canonical representative of an orbit is the one of least trace, ties going
to the smaller m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import sympy

from .errors import DomainError, NoTotallyPositiveGenerator, RamifiedPrime
from .padic import PadicCtx, UnramElem, hensel_root, vp

Elt = tuple  # (m, n) meaning m + n*w


class RealQuadField:
    """The ring of integers of Q(sqrt D) with its unit and positivity data."""

    def __init__(self, D: int):
        if not isinstance(D, int) or D <= 1 or not sympy.ntheory.factor_.core(D) == D:
            raise DomainError(f"D must be a squarefree integer > 1, got {D!r}")
        self.D = D
        if D % 4 == 1:
            self.trace_w, self.norm_w = 1, -(D - 1) // 4
            self.disc = D
            self.w_real = (1 + math.sqrt(D)) / 2
        else:
            self.trace_w, self.norm_w = 0, -D
            self.disc = 4 * D
            self.w_real = math.sqrt(D)
        self.fundamental_unit = self._find_fundamental_unit()
        eps = self.fundamental_unit
        self.eps_plus = eps if self.norm(eps) == 1 else self.mul(eps, eps)
        self.eps_plus_inv = self.conj(self.eps_plus)
        self._check_narrow_class_number_one()
        self._rep = lru_cache(maxsize=1 << 20)(self._rep_uncached)
        self._window_cache: dict[int, list] = {}

    def __repr__(self):
        return f"RealQuadField(D={self.D})"

    def __reduce__(self):
        return (RealQuadField, (self.D,))

    # -- exact arithmetic on pairs ---------------------------------------
    def mul(self, a: Elt, b: Elt) -> Elt:
        m1, n1 = a
        m2, n2 = b
        nn = n1 * n2
        return (m1 * m2 - nn * self.norm_w, m1 * n2 + m2 * n1 + nn * self.trace_w)

    def conj(self, a: Elt) -> Elt:
        m, n = a
        return (m + n * self.trace_w, -n)

    def trace(self, a: Elt) -> int:
        return 2 * a[0] + a[1] * self.trace_w

    def norm(self, a: Elt) -> int:
        m, n = a
        return m * m + m * n * self.trace_w + n * n * self.norm_w

    def embeddings(self, a: Elt) -> tuple[float, float]:
        m, n = a
        return (m + n * self.w_real, m + n * (self.trace_w - self.w_real))

    def is_totally_positive_or_zero(self, a: Elt) -> bool:
        return self.trace(a) >= 0 and self.norm(a) >= 0

    def divide(self, a: Elt, b: Elt):
        """Exact quotient a/b in O_L, or None when b does not divide a."""
        nb = self.norm(b)
        num = self.mul(a, self.conj(b))
        if num[0] % nb or num[1] % nb:
            return None
        return (num[0] // nb, num[1] // nb)

    # -- units and class number ------------------------------------------
    def _find_fundamental_unit(self) -> Elt:
        t, nw = self.trace_w, self.norm_w
        for n in range(1, 10**6):
            for target in (-1, 1):
                # m^2 + m n t + n^2 nw - target = 0
                disc = n * n * t * t - 4 * (n * n * nw - target)
                if disc < 0:
                    continue
                s = math.isqrt(disc)
                if s * s != disc:
                    continue
                for m2 in (-n * t + s, -n * t - s):
                    if m2 % 2 == 0:
                        cand = (m2 // 2, n)
                        if self.embeddings(cand)[0] > 1:
                            return cand
        raise DomainError("fundamental unit search exhausted")  # pragma: no cover

    @lru_cache(maxsize=1 << 16)
    def _prime_ideals_over(self, ell: int):
        """Roots of the minimal polynomial of w mod ell; each names a prime m + n*w with m + n*r = 0."""
        if ell == 2:
            return [r for r in range(2) if (r * r - self.trace_w * r + self.norm_w) % 2 == 0]
        disc = (self.trace_w**2 - 4 * self.norm_w) % ell
        half = pow(2, -1, ell)
        roots = sympy.sqrt_mod(disc, ell, all_roots=True)
        return sorted({(self.trace_w + s) * half % ell for s in roots})

    def _check_narrow_class_number_one(self):
        if self.norm(self.fundamental_unit) != -1:
            raise DomainError(
                f"Q(sqrt {self.D}) has a totally positive fundamental unit, so its narrow class number is even"
            )
        bound = math.isqrt(self.disc) // 2 + 1
        for ell in sympy.primerange(2, bound + 1):
            for r in self._prime_ideals_over(ell):
                if self._positive_generator(ell, r) is None:
                    raise DomainError(f"prime above {ell} is not principal: class number > 1")

    def _positive_generator(self, ell: int, r: int):
        """A totally positive element of norm ell in the prime (ell, w - r), or None."""
        eps = self.embeddings(self.eps_plus)[0]
        limit = int(math.sqrt(ell) * (math.sqrt(eps) + 1 / math.sqrt(eps))) + 2
        for tr in range(limit + 1):
            for beta in self.trace_fiber(tr):
                if self.norm(beta) == ell and (beta[0] + beta[1] * r) % ell == 0:
                    return beta
        return None

    # -- orbit representatives and enumeration ---------------------------
    def unit_orbit_rep(self, beta: Elt) -> Elt:
        return self._rep(tuple(beta))

    def _rep_uncached(self, beta: Elt) -> Elt:
        if beta == (0, 0):
            return beta
        if not self.is_totally_positive_or_zero(beta):
            raise DomainError(f"{beta} is not totally positive")
        cur, tr = beta, self.trace(beta)
        while True:
            down = self.mul(cur, self.eps_plus_inv)
            up = self.mul(cur, self.eps_plus)
            td, tu = self.trace(down), self.trace(up)
            if td < tr:
                cur, tr = down, td
            elif tu < tr:
                cur, tr = up, tu
            else:
                ties = [c for c, t in ((cur, tr), (down, td), (up, tu)) if t == tr]
                return min(ties)

    def trace_fiber(self, t: int) -> list[Elt]:
        """Every totally positive element (not only representatives) of trace t, plus 0 at t=0."""
        if t == 0:
            return [(0, 0)]
        out = []
        if self.trace_w == 0:
            if t % 2:
                return out
            m = t // 2
            k = 0
            while self.D * k * k < m * m:
                k += 1
            for n in range(-k + 1, k):
                out.append((m, n))
            return out
        # 2m + n = t; positivity via norm > 0 and trace > 0
        n_max = int(t / math.sqrt(self.D)) + 2
        for n in range(-n_max, n_max + 1):
            if (t - n) % 2:
                continue
            cand = ((t - n) // 2, n)
            if self.norm(cand) > 0:
                out.append(cand)
        return out

    def enumerate_positive(self, trace_bound: int) -> list[Elt]:
        """Orbit representatives with trace <= trace_bound, sorted by (trace, m)."""
        if trace_bound < 0:
            raise DomainError("trace bound must be nonnegative")
        cached = self._window_cache.get(trace_bound)
        if cached is not None:
            return list(cached)
        reps = []
        for t in range(trace_bound + 1):
            for beta in self.trace_fiber(t):
                if self.unit_orbit_rep(beta) == beta:
                    reps.append(beta)
        reps.sort(key=lambda b: (self.trace(b), b[0], b[1]))
        self._window_cache[trace_bound] = reps
        return list(reps)


def enumerate_positive(field: RealQuadField, trace_bound: int) -> list[Elt]:
    return field.enumerate_positive(trace_bound)


def unit_orbit_rep(field: RealQuadField, beta: Elt) -> Elt:
    return field.unit_orbit_rep(beta)


@dataclass(frozen=True)
class SplittingData:
    """How p decomposes in L, with the images of w under each p-adic embedding."""

    p: int
    kind: str  # "split" or "inert"
    ctx: PadicCtx
    roots: tuple  # UnramElem image of w, one per embedding sigma
    inertia: tuple  # residue degree per prime above p

    @property
    def is_split(self) -> bool:
        return self.kind == "split"

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "type": self.kind,
            "roots": [r.to_json() for r in self.roots],
            "inertia": list(self.inertia),
        }


def splitting_type(field: RealQuadField, p: int, ctx=16) -> SplittingData:
    """Decompose p in L; ``ctx`` is a PadicCtx or just the precision M."""
    if p == 2 or field.disc % p == 0:
        raise RamifiedPrime(f"{p} ramifies in Q(sqrt {field.D})")
    if not sympy.isprime(p):
        raise DomainError(f"{p} is not prime")
    split = sympy.legendre_symbol(field.D % p, p) == 1
    f = 1 if split else 2
    if isinstance(ctx, int):
        ctx = PadicCtx(p, f, ctx)
    if ctx.p != p or ctx.f != f:
        raise DomainError(f"p={p} needs a context with residue degree {f}, got {ctx}")
    minpoly = [field.norm_w, -field.trace_w, 1]
    if split:
        seeds = [r for r in range(p) if (r * r - field.trace_w * r + field.norm_w) % p == 0]
        roots = tuple(hensel_root(minpoly, ctx(s)) for s in sorted(seeds))
        return SplittingData(p, "split", ctx, roots, (1, 1))
    for a in range(p):
        for b in range(p):
            seed = ctx((a, b))
            value = seed * seed - seed * field.trace_w + field.norm_w
            if value.valuation() >= 1:
                r = hensel_root(minpoly, seed)
                return SplittingData(p, "inert", ctx, (r, r.frobenius()), (2,))
    raise AssertionError("no root of the minimal polynomial in the quadratic extension")  # pragma: no cover


def embed_sigma(beta: Elt, sigma: int, splitting: SplittingData) -> UnramElem:
    m, n = beta
    return splitting.roots[sigma] * n + m


@dataclass(frozen=True)
class Uniformizers:
    """Totally positive x_i, one per prime above p, with prod x_i = p.

    ``sigmas[i]`` lists the embeddings under which x_i maps into p Z_p; for a
    split prime this singles out the embedding attached to that prime.
    """

    xs: tuple
    sigmas: tuple

    def to_json(self) -> dict:
        return {"xs": [list(x) for x in self.xs], "sigmas": [list(s) for s in self.sigmas]}


def choose_uniformizers(field: RealQuadField, splitting: SplittingData) -> Uniformizers:
    p = splitting.p
    if not splitting.is_split:
        return Uniformizers(((p, 0),), ((0, 1),))
    eps = field.embeddings(field.eps_plus)[0]
    limit = int(math.sqrt(p) * (math.sqrt(eps) + 1 / math.sqrt(eps))) + 2
    found = None
    for tr in range(limit + 1):
        for beta in field.trace_fiber(tr):
            if field.norm(beta) == p:
                found = beta
                break
        if found:
            break
    if found is None:
        raise NoTotallyPositiveGenerator(f"no totally positive element of norm {p} up to trace {limit}")
    pair = sorted([found, field.conj(found)], key=lambda x: -field.embeddings(x)[0])
    assert field.mul(pair[0], pair[1]) == (p, 0)
    sigmas = []
    for x in pair:
        hit = tuple(s for s in range(2) if embed_sigma(x, s, splitting).valuation() >= 1)
        if len(hit) != 1:
            raise NoTotallyPositiveGenerator(f"{x} does not single out one prime above {p}")
        sigmas.append(hit)
    return Uniformizers(tuple(pair), tuple(sigmas))


class LocalSetup:
    """Field, p-adic context, splitting and uniformizers bundled for downstream code."""

    def __init__(self, D: int, p: int, M: int = 16):
        self.field = RealQuadField(D)
        self.splitting = splitting_type(self.field, p, M)
        self.ctx = self.splitting.ctx
        self.p = p
        self.M = M
        self.uniformizers = choose_uniformizers(self.field, self.splitting)
        self.num_sigmas = 2
        self._embed_cache: dict = {}

    def __repr__(self):
        return f"LocalSetup(D={self.field.D}, p={self.p}, M={self.M}, {self.splitting.kind})"

    @property
    def rational(self) -> "RationalSetup":
        """The base-field index space sharing this coefficient ring (one instance per setup)."""
        q = self.__dict__.get("_rational")
        if q is None:
            q = self.__dict__["_rational"] = RationalSetup(self.ctx)
        return q

    @property
    def primes(self) -> range:
        return range(len(self.uniformizers.xs))

    def prime_of_sigma(self, sigma: int) -> int:
        for i, sig in enumerate(self.uniformizers.sigmas):
            if sigma in sig:
                return i
        raise DomainError(f"no prime for embedding {sigma}")  # pragma: no cover

    def frobenius_index(self, sigma: int) -> int:
        """Position of sigma within its prime's embeddings (sigma = Frob^j o first)."""
        return self.uniformizers.sigmas[self.prime_of_sigma(sigma)].index(sigma)

    def residue_degree(self, sigma: int) -> int:
        return self.splitting.inertia[self.prime_of_sigma(sigma)]

    def embed(self, beta: Elt, sigma: int) -> UnramElem:
        key = (beta, sigma)
        hit = self._embed_cache.get(key)
        if hit is None:
            hit = embed_sigma(beta, sigma, self.splitting)
            if len(self._embed_cache) < 1 << 18:
                self._embed_cache[key] = hit
        return hit

    # -- index-space interface shared with RationalSetup -------------------
    def trace(self, beta: Elt) -> int:
        return self.field.trace(beta)

    def rep(self, beta: Elt) -> Elt:
        return self.field.unit_orbit_rep(beta)

    def window(self, trace_bound: int) -> list:
        return self.field.enumerate_positive(trace_bound)

    def is_index(self, beta) -> bool:
        return (
            isinstance(beta, tuple)
            and len(beta) == 2
            and self.field.is_totally_positive_or_zero(beta)
            and self.rep(beta) == beta
        )

    def times(self, beta: Elt, x: Elt) -> Elt:
        return self.field.mul(beta, x)

    def quotient(self, beta: Elt, x: Elt):
        return self.field.divide(beta, x)

    def index_to_json(self, beta: Elt) -> list:
        return [beta[0], beta[1]]

    def index_from_json(self, data) -> Elt:
        return (int(data[0]), int(data[1]))

    def zero_index(self) -> Elt:
        return (0, 0)

    def in_prime(self, beta: Elt, i: int) -> bool:
        """beta lies in the i-th prime above p."""
        if beta == (0, 0):
            return True
        return self.field.divide(beta, self.uniformizers.xs[i]) is not None

    def prime_valuation(self, beta: Elt, i: int) -> int:
        if beta == (0, 0):
            raise DomainError("valuation of 0")
        x = self.uniformizers.xs[i]
        v = 0
        while True:
            q = self.field.divide(beta, x)
            if q is None:
                return v
            beta, v = q, v + 1


class RationalSetup:
    """The base field Q with the same index-space interface: exponents are integers n >= 0."""

    num_sigmas = 1

    def __init__(self, ctx: PadicCtx):
        self.ctx = ctx
        self.p = ctx.p
        self.M = ctx.M
        self.uniformizers = Uniformizers(((ctx.p, 0),), ((0,),))
        self._embed_cache: dict = {}

    def __repr__(self):
        return f"RationalSetup(p={self.p}, M={self.M}, f={self.ctx.f})"

    @property
    def primes(self) -> range:
        return range(1)

    def prime_of_sigma(self, sigma: int) -> int:
        return 0

    def frobenius_index(self, sigma: int) -> int:
        return 0

    def residue_degree(self, sigma: int) -> int:
        return 1

    def embed(self, n: int, sigma: int = 0) -> UnramElem:
        return self.ctx(n)

    def trace(self, n: int) -> int:
        return n

    def rep(self, n: int) -> int:
        return n

    def window(self, trace_bound: int) -> list:
        return list(range(trace_bound + 1))

    def is_index(self, n) -> bool:
        return isinstance(n, int) and n >= 0

    def times(self, n: int, x) -> int:
        return n * (x[0] if isinstance(x, tuple) else x)

    def quotient(self, n: int, x):
        x = x[0] if isinstance(x, tuple) else x
        return n // x if n % x == 0 else None

    def in_prime(self, n: int, i: int = 0) -> bool:
        return n % self.p == 0

    def prime_valuation(self, n: int, i: int = 0) -> int:
        return vp(n, self.p)

    def index_to_json(self, n: int) -> list:
        return [n]

    def index_from_json(self, data) -> int:
        return int(data[0])

    def zero_index(self) -> int:
        return 0
