"""Truncated q-expansions and nearly-overconvergent forms built on them.

A ``QExp`` is a sparse map from orbit representatives (exponents) to
coefficients, valid for every exponent of trace at most ``trace_bound``.
Absent keys are zero.  A ``NOCForm`` is a polynomial in the variables
V_sigma whose coefficients are q-expansions sharing one trace bound.
"""

from __future__ import annotations

from .errors import DomainError, TruncationOverflow
from .padic import UnramElem


class QExp:
    __slots__ = ("space", "trace_bound", "coeffs")

    def __init__(self, space, trace_bound: int, coeffs=None, check: bool = True):
        self.space = space
        self.trace_bound = int(trace_bound)
        clean = {}
        if coeffs:
            for beta, value in coeffs.items():
                if check:
                    if not space.is_index(beta):
                        raise DomainError(f"{beta!r} is not a canonical exponent")
                    if space.trace(beta) > self.trace_bound:
                        raise TruncationOverflow(f"{beta!r} lies beyond trace bound {self.trace_bound}")
                    if not isinstance(value, UnramElem):
                        value = space.ctx(value)
                if value:
                    clean[beta] = value
        self.coeffs = clean

    @classmethod
    def monomial(cls, space, trace_bound: int, beta, value=1) -> "QExp":
        beta = space.rep(beta)
        return cls(space, trace_bound, {beta: value})

    @classmethod
    def from_function(cls, space, trace_bound: int, fn) -> "QExp":
        """Coefficients fn(beta) on every representative of the window."""
        return cls(space, trace_bound, {b: fn(b) for b in space.window(trace_bound)}, check=False)

    @property
    def ctx(self):
        return self.space.ctx

    def __getitem__(self, beta) -> UnramElem:
        return self.coeffs.get(self.space.rep(beta), self.space.ctx.zero())

    def get(self, beta) -> UnramElem:
        """Coefficient at a canonical representative (no reduction)."""
        return self.coeffs.get(beta, self.space.ctx.zero())

    def _aligned(self, other: "QExp") -> int:
        if other.space is not self.space:
            raise DomainError("q-expansions over different index spaces")
        return min(self.trace_bound, other.trace_bound)

    def __add__(self, other: "QExp") -> "QExp":
        T = self._aligned(other)
        out = {b: v for b, v in self.coeffs.items() if self.space.trace(b) <= T}
        for b, v in other.coeffs.items():
            if self.space.trace(b) <= T:
                out[b] = out[b] + v if b in out else v
        return QExp(self.space, T, out, check=False)

    def __neg__(self) -> "QExp":
        return QExp(self.space, self.trace_bound, {b: -v for b, v in self.coeffs.items()}, check=False)

    def __sub__(self, other: "QExp") -> "QExp":
        return self + (-other)

    def scale(self, c) -> "QExp":
        return QExp(self.space, self.trace_bound, {b: v * c for b, v in self.coeffs.items()}, check=False)

    def __mul__(self, c) -> "QExp":
        if isinstance(c, QExp):
            return qexp_mul(self, c)
        return self.scale(c)

    __rmul__ = scale

    def map_coeffs(self, fn) -> "QExp":
        """Apply fn(beta, value) to each stored coefficient."""
        return QExp(self.space, self.trace_bound, {b: fn(b, v) for b, v in self.coeffs.items()}, check=False)

    def truncate(self, trace_bound: int) -> "QExp":
        if trace_bound > self.trace_bound:
            raise TruncationOverflow(f"cannot extend bound {self.trace_bound} to {trace_bound}")
        tr = self.space.trace
        return QExp(self.space, trace_bound, {b: v for b, v in self.coeffs.items() if tr(b) <= trace_bound}, check=False)

    def is_zero(self) -> bool:
        return not self.coeffs

    def support(self) -> set:
        return set(self.coeffs)

    def min_valuation(self) -> int:
        if not self.coeffs:
            return self.space.ctx.M
        return min(v.valuation() for v in self.coeffs.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, QExp):
            return NotImplemented
        return self.space is other.space and self.trace_bound == other.trace_bound and self.coeffs == other.coeffs

    __hash__ = None

    def __repr__(self):
        items = sorted(self.coeffs.items(), key=lambda kv: (self.space.trace(kv[0]), kv[0]))[:6]
        body = ", ".join(f"{b}: {v.coords if v.ctx.f > 1 else v.coords[0]}" for b, v in items)
        more = ", ..." if len(self.coeffs) > 6 else ""
        return f"QExp(T={self.trace_bound}, {{{body}{more}}})"

    def to_json(self) -> dict:
        sp = self.space
        keys = sorted(self.coeffs, key=lambda b: (sp.trace(b), b))
        return {
            "trace_bound": self.trace_bound,
            "coeffs": [{"beta": sp.index_to_json(b), "value": self.coeffs[b].to_json()} for b in keys],
        }

    @classmethod
    def from_json(cls, space, data: dict) -> "QExp":
        coeffs = {
            space.index_from_json(item["beta"]): UnramElem.from_json(space.ctx, item["value"])
            for item in data["coeffs"]
        }
        return cls(space, data["trace_bound"], coeffs)


def theta_sigma(g: QExp, sigma: int) -> QExp:
    """Multiply the coefficient at beta by sigma(beta)."""
    embed = g.space.embed
    return QExp(g.space, g.trace_bound, {b: v * embed(b, sigma) for b, v in g.coeffs.items()}, check=False)


def qexp_add(g: QExp, h: QExp) -> QExp:
    return g + h


def qexp_scale(g: QExp, c) -> QExp:
    return g.scale(c)


def _sub_positive(space, gamma):
    """All pairs (beta, gamma - beta) of totally positive-or-zero elements summing to gamma."""
    if not hasattr(space, "field"):
        return [(b, gamma - b) for b in range(gamma + 1)]
    field = space.field
    out = []
    for t in range(field.trace(gamma) + 1):
        for beta in field.trace_fiber(t):
            rest = (gamma[0] - beta[0], gamma[1] - beta[1])
            if field.is_totally_positive_or_zero(rest):
                out.append((beta, rest))
    return out


def _unit_power(space, beta, d):
    """sigma_0(beta / rep(beta))^d: how a twist-d coefficient moves off its orbit rep."""
    r = space.rep(beta)
    if d == 0 or r == beta:
        return None
    unit = space.embed(space.field.divide(beta, r), 0)
    return unit**d if d > 0 else unit.inverse() ** (-d)


def qexp_mul(g: QExp, h: QExp, trace_bound: int | None = None, twists: tuple = (0, 0)) -> QExp:
    """Product of q-expansions: c_gamma = sum over beta + beta' = gamma of a_beta b_beta'.

    A factor of twist d has a(eps beta) = sigma_0(eps)^d a(beta) (theta_0 raises d
    by one, theta_1 lowers it); the product then has twist d_g + d_h.
    """
    available = g._aligned(h)
    T = available if trace_bound is None else trace_bound
    if T > available:
        raise TruncationOverflow(f"product needs inputs to trace {T}, have {available}")
    space = g.space
    rep = space.rep
    dg, dh = twists if hasattr(space, "field") else (0, 0)
    zero = space.ctx.zero()
    out = {}
    for gamma in space.window(T):
        acc = zero
        for beta, rest in _sub_positive(space, gamma):
            a = g.coeffs.get(rep(beta))
            if a is None:
                continue
            b = h.coeffs.get(rep(rest))
            if b is None:
                continue
            term = a * b
            for idx, d in ((beta, dg), (rest, dh)):
                f = _unit_power(space, idx, d)
                if f is not None:
                    term = term * f
            acc = acc + term
        if acc:
            out[gamma] = acc
    return QExp(space, T, out, check=False)


def _degree_key(deg) -> tuple:
    return tuple(int(d) for d in deg)


class NOCForm:
    """sum_i a_i * prod_sigma V_sigma^{i_sigma}, tagged with a weight."""

    __slots__ = ("space", "weight", "order_bound", "trace_bound", "terms")

    def __init__(self, space, weight, trace_bound: int, terms=None, order_bound: int | None = None):
        self.space = space
        self.weight = weight
        self.trace_bound = int(trace_bound)
        clean = {}
        for deg, q in (terms or {}).items():
            deg = _degree_key(deg)
            if len(deg) != space.num_sigmas or min(deg) < 0:
                raise DomainError(f"bad multidegree {deg}")
            if q.trace_bound != self.trace_bound:
                q = q.truncate(self.trace_bound)
            if not q.is_zero():
                clean[deg] = q
        self.terms = clean
        order = max((sum(d) for d in clean), default=0)
        self.order_bound = order if order_bound is None else int(order_bound)
        if order > self.order_bound:
            raise TruncationOverflow(f"order {order} exceeds bound {self.order_bound}")

    @property
    def ctx(self):
        return self.space.ctx

    def zero_degree(self) -> tuple:
        return (0,) * self.space.num_sigmas

    def order(self) -> int:
        return max((sum(d) for d in self.terms), default=0)

    def part(self, deg) -> QExp:
        deg = _degree_key(deg)
        return self.terms.get(deg, QExp(self.space, self.trace_bound))

    def modular_part(self) -> QExp:
        return self.part(self.zero_degree())

    def _combine(self, other: "NOCForm", sign: int) -> "NOCForm":
        if other.space is not self.space:
            raise DomainError("forms over different index spaces")
        T = min(self.trace_bound, other.trace_bound)
        out = {d: q.truncate(T) for d, q in self.terms.items()}
        for d, q in other.terms.items():
            q = q.truncate(T)
            if sign < 0:
                q = -q
            out[d] = out[d] + q if d in out else q
        return NOCForm(self.space, self.weight, T, out, max(self.order_bound, other.order_bound))

    def __add__(self, other: "NOCForm") -> "NOCForm":
        return self._combine(other, 1)

    def __sub__(self, other: "NOCForm") -> "NOCForm":
        return self._combine(other, -1)

    def __neg__(self) -> "NOCForm":
        return self.map_parts(lambda d, q: -q)

    def scale(self, c) -> "NOCForm":
        return self.map_parts(lambda d, q: q.scale(c))

    def map_parts(self, fn, weight=None) -> "NOCForm":
        return NOCForm(
            self.space,
            self.weight if weight is None else weight,
            self.trace_bound,
            {d: fn(d, q) for d, q in self.terms.items()},
            self.order_bound,
        )

    def with_weight(self, weight) -> "NOCForm":
        return NOCForm(self.space, weight, self.trace_bound, self.terms, self.order_bound)

    def truncate(self, trace_bound: int) -> "NOCForm":
        return NOCForm(
            self.space,
            self.weight,
            trace_bound,
            {d: q.truncate(trace_bound) for d, q in self.terms.items()},
            self.order_bound,
        )

    def is_zero(self) -> bool:
        return not self.terms

    def min_valuation(self) -> int:
        return min((q.min_valuation() for q in self.terms.values()), default=self.ctx.M)

    def support(self) -> set:
        out = set()
        for q in self.terms.values():
            out |= q.support()
        return out

    def same_coefficients(self, other: "NOCForm") -> bool:
        """Equality of all coefficients, ignoring weight tags and order bounds."""
        return self.trace_bound == other.trace_bound and self.terms == other.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, NOCForm):
            return NotImplemented
        return self.weight == other.weight and self.same_coefficients(other)

    __hash__ = None

    def __repr__(self):
        degs = sorted(self.terms)
        return f"NOCForm(T={self.trace_bound}, degrees={degs}, weight={self.weight})"

    def to_json(self) -> dict:
        return {
            "trace_bound": self.trace_bound,
            "order_bound": self.order_bound,
            "weight": self.weight.to_json() if self.weight is not None else None,
            "terms": [{"deg": list(d), "qexp": self.terms[d].to_json()} for d in sorted(self.terms)],
        }


def noc_from_modular(g: QExp, k, order_bound: int = 0) -> NOCForm:
    """The modular form g as a nearly-overconvergent form of order 0."""
    zero = (0,) * g.space.num_sigmas
    return NOCForm(g.space, k, g.trace_bound, {zero: g}, order_bound)
