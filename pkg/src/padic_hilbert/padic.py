"""Fixed-precision arithmetic in W(F_{p^f}) = Z_p[x]/(modulus), truncated mod p^M.

Every element stores its coordinates in the power basis 1, x, ..., x^{f-1}
as integers in [0, p^M).  Operations are exact modulo p^M; anything that
divides by p says so through ``divide_by_p`` which reports the digits lost.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import sympy

from .errors import DomainError, NonSimpleRoot


def vp(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer; raises on zero."""
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_factorial(n: int, p: int) -> int:
    total, q = 0, p
    while q <= n:
        total += n // q
        q *= p
    return total


@lru_cache(maxsize=None)
def smallest_irreducible(p: int, f: int) -> tuple[int, ...]:
    """Lexicographically least monic irreducible of degree f over F_p.

    Candidates are ordered by (c_{f-1}, ..., c_0).  Returned low degree first,
    leading 1 included.
    """
    if f == 1:
        return (0, 1)
    x = sympy.Symbol("x")
    for high_to_low in itertools.product(range(p), repeat=f):
        coeffs = [1, *high_to_low]
        if coeffs[-1] == 0:
            continue
        if sympy.Poly(coeffs, x, modulus=p).is_irreducible:
            return tuple(reversed(coeffs))
    raise AssertionError("no irreducible polynomial found")  # pragma: no cover


class PadicCtx:
    """Precision context: prime p, residue degree f, working exponent M."""

    __slots__ = ("p", "f", "M", "modulus", "pM", "_frob_x", "_zero", "_one")

    _cache: dict = {}

    def __new__(cls, p: int, f: int = 1, M: int = 16):
        key = (p, f, M)
        hit = cls._cache.get(key)
        if hit is not None:
            return hit
        if not isinstance(p, int) or p < 3 or not sympy.isprime(p):
            raise DomainError(f"p must be an odd prime, got {p!r}")
        if f < 1:
            raise DomainError("residue degree must be >= 1")
        if M < 4:
            raise DomainError("working precision M must be >= 4")
        self = object.__new__(cls)
        self.p, self.f, self.M = p, f, M
        self.pM = p**M
        self.modulus = smallest_irreducible(p, f)
        self._frob_x = None
        self._zero = UnramElem._raw(self, (0,) * f)
        self._one = UnramElem._raw(self, (1,) + (0,) * (f - 1))
        cls._cache[key] = self
        return self

    def __reduce__(self):
        return (PadicCtx, (self.p, self.f, self.M))

    def __repr__(self):
        return f"PadicCtx(p={self.p}, f={self.f}, M={self.M})"

    def with_precision(self, M: int) -> "PadicCtx":
        return PadicCtx(self.p, self.f, M)

    def zero(self) -> "UnramElem":
        return self._zero

    def one(self) -> "UnramElem":
        return self._one

    def __call__(self, value) -> "UnramElem":
        """Coerce an int, Fraction with unit denominator, coordinate sequence or element."""
        if isinstance(value, UnramElem):
            if value.ctx is self:
                return value
            return value.to_ctx(self)
        if isinstance(value, int):
            return UnramElem._raw(self, (value % self.pM,) + (0,) * (self.f - 1))
        if isinstance(value, Fraction):
            if value.denominator % self.p == 0:
                raise DomainError(f"{value} is not p-integral")
            num = value.numerator * pow(value.denominator, -1, self.pM)
            return self(num)
        coords = tuple(int(c) % self.pM for c in value)
        if len(coords) != self.f:
            raise DomainError(f"expected {self.f} coordinates, got {len(coords)}")
        return UnramElem._raw(self, coords)

    def gen(self) -> "UnramElem":
        """The class of x, a generator of the residue extension."""
        if self.f == 1:
            return self(-self.modulus[0])
        return UnramElem._raw(self, (0, 1) + (0,) * (self.f - 2))

    def frobenius_of_gen(self) -> "UnramElem":
        if self._frob_x is None:
            x = self.gen()
            self._frob_x = hensel_root(self.modulus, x ** self.p)
        return self._frob_x

    def to_json(self) -> dict:
        return {"p": self.p, "f": self.f, "M": self.M, "modulus": list(self.modulus)}

    @classmethod
    def from_json(cls, data: dict) -> "PadicCtx":
        ctx = cls(int(data["p"]), int(data["f"]), int(data["M"]))
        if "modulus" in data and tuple(data["modulus"]) != ctx.modulus:
            raise DomainError("serialized modulus does not match the deterministic choice")
        return ctx


class UnramElem:
    """Element of W(F_{p^f}) modulo p^M."""

    __slots__ = ("ctx", "coords")

    def __init__(self, ctx: PadicCtx, coords):
        pM = ctx.pM
        coords = tuple(int(c) % pM for c in coords)
        if len(coords) != ctx.f:
            raise DomainError(f"expected {ctx.f} coordinates")
        self.ctx = ctx
        self.coords = coords

    @classmethod
    def _raw(cls, ctx, coords):
        obj = object.__new__(cls)
        obj.ctx = ctx
        obj.coords = coords
        return obj

    # -- coercion helpers -------------------------------------------------
    def _other(self, other):
        if isinstance(other, UnramElem):
            if other.ctx is not self.ctx:
                raise DomainError(f"context mismatch: {self.ctx} vs {other.ctx}")
            return other.coords
        if isinstance(other, int):
            return (other,) + (0,) * (self.ctx.f - 1)
        return NotImplemented

    def __add__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        pM = self.ctx.pM
        return UnramElem._raw(self.ctx, tuple((a + b) % pM for a, b in zip(self.coords, o)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        pM = self.ctx.pM
        return UnramElem._raw(self.ctx, tuple((a - b) % pM for a, b in zip(self.coords, o)))

    def __rsub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        pM = self.ctx.pM
        return UnramElem._raw(self.ctx, tuple((b - a) % pM for a, b in zip(self.coords, o)))

    def __neg__(self):
        pM = self.ctx.pM
        return UnramElem._raw(self.ctx, tuple(-a % pM for a in self.coords))

    def __mul__(self, other):
        ctx = self.ctx
        if isinstance(other, int):
            pM = ctx.pM
            return UnramElem._raw(ctx, tuple(a * other % pM for a in self.coords))
        o = self._other(other)
        if o is NotImplemented:
            return o
        return UnramElem._raw(ctx, mul_coords(ctx, self.coords, o))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        result = self.ctx.one()
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __truediv__(self, other):
        if isinstance(other, int):
            other = self.ctx(other)
        if not isinstance(other, UnramElem):
            return NotImplemented
        return self * other.inverse()

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.ctx(other)
        if not isinstance(other, UnramElem):
            return NotImplemented
        return self.ctx is other.ctx and self.coords == other.coords

    def __hash__(self):
        return hash((self.ctx.p, self.ctx.f, self.ctx.M, self.coords))

    def __bool__(self):
        return any(self.coords)

    def __repr__(self):
        if self.ctx.f == 1:
            return f"{self.coords[0]} (mod {self.ctx.p}^{self.ctx.M})"
        return f"{list(self.coords)} (mod {self.ctx.p}^{self.ctx.M})"

    # -- valuations and units ---------------------------------------------
    def valuation(self) -> int:
        """Exponent of the largest power of p dividing every coordinate; M for zero."""
        p, M = self.ctx.p, self.ctx.M
        best = M
        for c in self.coords:
            if c:
                v = 0
                while c % p == 0:
                    c //= p
                    v += 1
                if v < best:
                    best = v
        return best

    def is_unit(self) -> bool:
        return any(c % self.ctx.p for c in self.coords)

    def inverse(self) -> "UnramElem":
        if not self.is_unit():
            raise ZeroDivisionError(f"{self!r} is not a unit")
        ctx = self.ctx
        if ctx.f == 1:
            return UnramElem._raw(ctx, (pow(self.coords[0], -1, ctx.pM),))
        # x^{q-2} inverts mod p; Newton doubles the correct digits each step.
        y = self ** (ctx.p**ctx.f - 2)
        correct = 1
        while correct < ctx.M:
            y = y * (2 - self * y)
            correct *= 2
        return y

    def divide_by_p(self, k: int = 1) -> tuple["UnramElem", int]:
        """Exact division by p^k; the top k digits of the quotient are unknown and set to 0."""
        if k < 0:
            raise DomainError("k must be nonnegative")
        if k == 0:
            return self, 0
        pk = self.ctx.p**k
        if any(c % pk for c in self.coords):
            raise DomainError(f"{self!r} is not divisible by p^{k}")
        return UnramElem._raw(self.ctx, tuple(c // pk for c in self.coords)), k

    def residue(self) -> tuple[int, ...]:
        return tuple(c % self.ctx.p for c in self.coords)

    def to_ctx(self, ctx: PadicCtx) -> "UnramElem":
        """Change precision; lifting picks the representative in [0, p^M)."""
        if ctx.p != self.ctx.p or ctx.f != self.ctx.f:
            raise DomainError("can only change the precision, not the ring")
        if ctx is self.ctx:
            return self
        pM = ctx.pM
        return UnramElem._raw(ctx, tuple(c % pM for c in self.coords))

    def frobenius(self) -> "UnramElem":
        ctx = self.ctx
        if ctx.f == 1:
            return self
        phi = ctx.frobenius_of_gen()
        acc = ctx.zero()
        power = ctx.one()
        for c in self.coords:
            acc = acc + power * c
            power = power * phi
        return acc

    def to_int(self) -> int:
        """Integer representative; only defined when the element lies in Z/p^M."""
        if any(self.coords[1:]):
            raise DomainError("element is not in Z_p")
        return self.coords[0]

    def to_json(self) -> dict:
        return {"coords": [str(c) for c in self.coords], "valuation_floor": self.valuation()}

    @classmethod
    def from_json(cls, ctx: PadicCtx, data: dict) -> "UnramElem":
        return cls(ctx, [int(c) for c in data["coords"]])


def mul_coords(ctx: PadicCtx, a, b):
    pM = ctx.pM
    f = ctx.f
    if f == 1:
        return (a[0] * b[0] % pM,)
    if f == 2:
        m0, m1 = ctx.modulus[0], ctx.modulus[1]
        a0, a1 = a
        b0, b1 = b
        hi = a1 * b1
        return ((a0 * b0 - m0 * hi) % pM, (a0 * b1 + a1 * b0 - m1 * hi) % pM)
    prod = [0] * (2 * f - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] += ai * bj
    mod = ctx.modulus
    for d in range(2 * f - 2, f - 1, -1):
        c = prod[d]
        if c:
            prod[d] = 0
            for i in range(f):
                prod[d - f + i] -= c * mod[i]
    return tuple(c % pM for c in prod[:f])


def _p_log_ceiling(k: int, p: int) -> int:
    """Largest e with p^e <= k; bounds v_p(k)."""
    e, q = 0, p
    while q <= k:
        e += 1
        q *= p
    return e


def padic_log(x: UnramElem) -> UnramElem:
    """Logarithm of a principal unit.  Result exact mod p^M."""
    ctx = x.ctx
    y = x - 1
    if y.valuation() == 0:
        raise DomainError("log needs x = 1 mod p")
    if not y:
        return ctx.zero()
    v = y.valuation()
    p, M = ctx.p, ctx.M
    K = 1
    while not all(k * v - _p_log_ceiling(k, p) >= M for k in range(K + 1, K + p * p + 2)):
        K += 1
    work = ctx.with_precision(M + _p_log_ceiling(K, p) + 1)
    yy = y.to_ctx(work)
    acc = work.zero()
    power = work.one()
    for k in range(1, K + 1):
        power = power * yy
        e = vp(k, p)
        term, _ = power.divide_by_p(e)
        term = term * pow(k // p**e, -1, work.pM)
        acc = acc + term if k % 2 else acc - term
    return acc.to_ctx(ctx)


def padic_exp(x: UnramElem) -> UnramElem:
    """Exponential on p Z_p-type inputs (val >= 1, p odd).  Result exact mod p^M."""
    ctx = x.ctx
    v = x.valuation()
    if v == 0:
        raise DomainError("exp needs val(x) >= 1")
    if not x:
        return ctx.one()
    p, M = ctx.p, ctx.M
    K = 1
    while not all(k * v - vp_factorial(k, p) >= M for k in range(K + 1, K + p * p + 2)):
        K += 1
    work = ctx.with_precision(M + vp_factorial(K, p) + 1)
    xx = x.to_ctx(work)
    acc = work.one()
    power = work.one()
    for k in range(1, K + 1):
        power = power * xx
        e = vp_factorial(k, p)
        term, _ = power.divide_by_p(e)
        unit = math.factorial(k) // p**e
        acc = acc + term * pow(unit, -1, work.pM)
    return acc.to_ctx(ctx)


def teichmuller(x: UnramElem) -> UnramElem:
    """Teichmuller representative: the (p^f - 1)-th root of unity congruent to x mod p."""
    if not x.is_unit():
        raise DomainError("Teichmuller lift needs a unit")
    ctx = x.ctx
    q = ctx.p**ctx.f
    y = x
    for _ in range(ctx.M + 2):
        nxt = y**q
        if nxt == y:
            return y
        y = nxt
    raise AssertionError("Teichmuller iteration did not stabilise")  # pragma: no cover


def _eval_poly(coeffs, r: UnramElem) -> UnramElem:
    acc = r.ctx.zero()
    for c in reversed(coeffs):
        acc = acc * r + c
    return acc


def hensel_root(poly, seed) -> UnramElem:
    """Newton-lift a simple root of a monic polynomial (coefficients low degree first)."""
    if isinstance(seed, UnramElem):
        ctx = seed.ctx
    else:
        ctx = next(c.ctx for c in poly if isinstance(c, UnramElem))
        seed = ctx(seed)
    coeffs = [ctx(c) if isinstance(c, int) else c for c in poly]
    deriv = [coeffs[i] * i for i in range(1, len(coeffs))]
    r = seed
    if _eval_poly(coeffs, r).valuation() == 0:
        raise DomainError("seed is not a root modulo p")
    if not _eval_poly(deriv, r).is_unit():
        raise NonSimpleRoot("derivative vanishes modulo p at the seed")
    for _ in range(ctx.M + 2):
        value = _eval_poly(coeffs, r)
        if not value:
            return r
        r = r - value / _eval_poly(deriv, r)
    raise AssertionError("Newton iteration did not converge")  # pragma: no cover


class PadicNumber:
    """p^e * unit with an absolute precision, for scalars that need p-power denominators.

    Zero is represented with ``unit=None``; ``prec`` is the absolute precision
    (the value is known modulo p^prec).
    """

    __slots__ = ("ctx", "unit", "e", "prec")

    def __init__(self, ctx: PadicCtx, unit, e: int, prec: int):
        self.ctx = ctx
        self.unit = unit
        self.e = e
        self.prec = prec

    @classmethod
    def from_elem(cls, x: UnramElem, shift: int = 0) -> "PadicNumber":
        """The number p^shift * x, where x is known mod p^M."""
        ctx = x.ctx
        prec = ctx.M + shift
        if not x:
            return cls(ctx, None, prec, prec)
        v = x.valuation()
        unit, _ = x.divide_by_p(v)
        return cls(ctx, unit, v + shift, prec)

    @classmethod
    def from_int(cls, ctx: PadicCtx, n: int) -> "PadicNumber":
        if n == 0:
            return cls(ctx, None, ctx.M, ctx.M)
        v = vp(n, ctx.p)
        return cls(ctx, ctx(n // ctx.p**v), v, v + ctx.M)

    def is_zero(self) -> bool:
        return self.unit is None

    def valuation(self) -> int:
        return self.e

    def _rel(self) -> int:
        return max(0, min(self.ctx.M, self.prec - self.e))

    def __neg__(self):
        if self.unit is None:
            return self
        return PadicNumber(self.ctx, -self.unit, self.e, self.prec)

    def __add__(self, other):
        other = self._coerce(other)
        prec = min(self.prec, other.prec)
        if self.unit is None:
            return PadicNumber(self.ctx, other.unit, other.e, prec) if other.unit else PadicNumber(self.ctx, None, prec, prec)
        if other.unit is None:
            return PadicNumber(self.ctx, self.unit, self.e, prec)
        e = min(self.e, other.e)
        ctx = self.ctx
        s = self.unit * ctx.p ** (self.e - e) + other.unit * ctx.p ** (other.e - e)
        if not s or e + s.valuation() >= prec:
            return PadicNumber(ctx, None, prec, prec)
        v = s.valuation()
        unit, _ = s.divide_by_p(v)
        return PadicNumber(ctx, unit, e + v, prec)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.unit is None or other.unit is None:
            a = self if self.unit is None else other
            b = other if a is self else self
            prec = a.prec + (b.e if b.unit is not None else b.prec)
            return PadicNumber(self.ctx, None, prec, prec)
        e = self.e + other.e
        prec = e + min(self._rel(), other._rel())
        return PadicNumber(self.ctx, self.unit * other.unit, e, prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.unit is None:
            raise ZeroDivisionError("division by a p-adic zero")
        if self.unit is None:
            prec = self.prec - other.e
            return PadicNumber(self.ctx, None, prec, prec)
        e = self.e - other.e
        prec = e + min(self._rel(), other._rel())
        return PadicNumber(self.ctx, self.unit / other.unit, e, prec)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, n: int):
        result = PadicNumber.from_int(self.ctx, 1)
        base = self if n >= 0 else PadicNumber.from_int(self.ctx, 1) / self
        for _ in range(abs(n)):
            result = result * base
        return result

    def _coerce(self, other) -> "PadicNumber":
        if isinstance(other, PadicNumber):
            return other
        if isinstance(other, UnramElem):
            return PadicNumber.from_elem(other)
        if isinstance(other, int):
            return PadicNumber.from_int(self.ctx, other)
        raise TypeError(f"cannot combine PadicNumber with {type(other).__name__}")

    def agrees_with(self, other, digits: int) -> bool:
        """True when the difference is zero modulo p^digits (and both are known that far)."""
        diff = self - self._coerce(other)
        if diff.prec < digits:
            return False
        return diff.unit is None or diff.e >= digits

    def to_elem(self) -> UnramElem:
        """Integral value as an element mod p^M (requires e >= 0)."""
        if self.unit is None:
            return self.ctx.zero()
        if self.e < 0:
            raise DomainError("value is not integral")
        return self.unit * self.ctx.p**self.e

    def __repr__(self):
        if self.unit is None:
            return f"O(p^{self.prec})"
        return f"p^{self.e}*{self.unit!r} + O(p^{self.prec})"

    def to_json(self) -> dict:
        if self.unit is None:
            return {"zero": True, "prec": self.prec}
        known = self.ctx.p ** max(self.prec - self.e, 0)  # digits above prec are noise
        unit = self.unit.to_json()
        unit["coords"] = [str(int(c) % known) for c in unit["coords"]]
        return {"unit": unit, "exponent": self.e, "prec": self.prec}
