"""Diagonal restriction, Euler factors, eigencomponent pairing and the
depletion identities relating depleted and undepleted triple products.

Everything on the base field lives on the rational index space of the
quadratic setup (``setup.rational``).  The identity checks evaluate the
pipeline  form -> nabla^t -> diagonal restriction -> projection  only at the
rational indices they need, by restricting the input to the trace fibers
above those indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .connection import nabla_classical
from .errors import ConvergenceBudgetExceeded, DomainError, IdentityViolation, IllConditioned, NotInSpan, TruncationOverflow
from .hecke import EigenData, EigenformCoefficients, V_full, _orbit_twist, seeded_value
from .padic import PadicNumber, UnramElem
from .projection import oc_project
from .qexp import NOCForm, QExp, _unit_power, noc_from_modular
from .weight import Weight, restrict_to_F


# -- diagonal restriction ---------------------------------------------------------


def diag_restrict(h, indices=None):
    """Sum coefficients over trace fibers; V_1^a V_2^b becomes V^{a+b}.

    Every element of a fiber contributes, including unit translates of a
    representative; on a form the V-degree parts are unfolded with their
    orbit twist (see U_noc), so theta factors use sigma(beta) itself.

    Accepts a q-expansion or a nearly-overconvergent form over the quadratic
    field.  With ``indices`` only those rational coefficients are computed and
    the result carries nothing else.
    """
    space = h.space
    if not hasattr(space, "field"):
        raise DomainError("diagonal restriction starts from the quadratic field")
    Q = space.rational
    T = h.trace_bound
    idx = range(T + 1) if indices is None else sorted(set(int(m) for m in indices))
    for m in idx:
        if m > T:
            raise TruncationOverflow(f"rational index {m} needs trace {m} > {T}")
    rep = space.rep
    fibers = {m: [(b, rep(b)) for b in space.field.trace_fiber(m)] for m in idx}

    def restrict(q: QExp, d: int = 0) -> dict:
        out = {}
        get = q.coeffs.get
        for m, fiber in fibers.items():
            acc = None
            for b, r in fiber:
                v = get(r)
                if v is None:
                    continue
                f = _unit_power(space, b, d)
                if f is not None:
                    v = v * f
                acc = v if acc is None else acc + v
            if acc:
                out[m] = acc
        return out

    if isinstance(h, QExp):
        return QExp(Q, T, restrict(h), check=False)
    exps = h.weight.classical_exponents()
    collected: dict = {}
    for deg, q in h.terms.items():
        j = sum(deg)
        part = collected.setdefault(j, {})
        # parts carrying theta factors are not orbit-invariant; unfold with their twist
        twist = _orbit_twist(exps, deg) if exps is not None else 0
        for m, v in restrict(q, twist).items():
            part[m] = part[m] + v if m in part else v
    terms = {(j,): QExp(Q, T, c, check=False) for j, c in collected.items()}
    return NOCForm(Q, restrict_to_F(h.weight, space), T, terms, h.order_bound)


# -- Euler factors ------------------------------------------------------------------


def _as_number(ctx, x) -> PadicNumber:
    if isinstance(x, PadicNumber):
        return x
    if isinstance(x, int):
        return PadicNumber.from_int(ctx, x)
    return PadicNumber.from_elem(x if isinstance(x, UnramElem) else ctx(x))


def euler_E(x, y) -> UnramElem:
    """1 - x / y."""
    if not y.is_unit():
        raise DomainError("E(x, y) needs y to be a unit")
    return 1 - x * y.inverse()


class Mat2:
    """2x2 matrix over the coefficient ring."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def identity(cls, ctx) -> "Mat2":
        return cls(ctx.one(), ctx.zero(), ctx.zero(), ctx.one())

    def __mul__(self, o):
        if not isinstance(o, Mat2):
            return Mat2(self.a * o, self.b * o, self.c * o, self.d * o)
        return Mat2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def __add__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "Mat2":
        det = self.det()
        if not det.is_unit():
            raise DomainError("matrix is not invertible over the coefficient ring")
        inv = det.inverse()
        return Mat2(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv)

    def apply(self, v):
        return (self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1])

    def __pow__(self, n: int) -> "Mat2":
        base = self if n >= 0 else self.inverse()
        out = Mat2.identity(self.a.ctx)
        for _ in range(abs(n)):
            out = out * base
        return out


class RationalFactor:
    """A ratio of Laurent polynomials in T, coefficients stored as {power of T: PadicNumber}."""

    def __init__(self, ctx, num: dict, den: dict | None = None):
        self.ctx = ctx
        self.num = {int(e): _as_number(ctx, c) for e, c in num.items()}
        self.den = {0: PadicNumber.from_int(ctx, 1)} if den is None else {int(e): _as_number(ctx, c) for e, c in den.items()}

    @staticmethod
    def _mul(a: dict, b: dict) -> dict:
        out: dict = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                e = e1 + e2
                out[e] = out[e] + c1 * c2 if e in out else c1 * c2
        return out

    def __mul__(self, other: "RationalFactor") -> "RationalFactor":
        return RationalFactor(self.ctx, self._mul(self.num, other.num), self._mul(self.den, other.den))

    def __truediv__(self, other: "RationalFactor") -> "RationalFactor":
        return RationalFactor(self.ctx, self._mul(self.num, other.den), self._mul(self.den, other.num))

    @staticmethod
    def _eval(poly: dict, T: PadicNumber) -> PadicNumber:
        acc = None
        for e, c in poly.items():
            term = c * T**e
            acc = term if acc is None else acc + term
        return acc if acc is not None else PadicNumber.from_int(T.ctx, 0)

    def __call__(self, T) -> PadicNumber:
        T = _as_number(self.ctx, T)
        if T.is_zero():
            raise DomainError("evaluate at a nonzero T")
        den = self._eval(self.den, T)
        if den.is_zero():
            raise ZeroDivisionError("denominator vanishes at this point")
        return self._eval(self.num, T) / den

    def inverse_degree(self) -> int:
        """Highest power of 1/T in the numerator."""
        return max((-e for e in self.num if e < 0), default=0)

    def coefficient(self, power: int) -> PadicNumber:
        return self.num.get(power, PadicNumber.from_int(self.ctx, 0))

    def _matrix(self, poly: dict, A: Mat2) -> Mat2:
        out = Mat2.identity(self.ctx) * self.ctx.zero()
        for e, c in poly.items():
            out = out + (A**e) * c.to_elem()
        return out

    def evaluate_matrix(self, A: Mat2) -> Mat2:
        """The factor with T replaced by an invertible matrix (integral coefficients only)."""
        return self._matrix(self.num, A) * self._matrix(self.den, A).inverse()

    def __repr__(self):
        return f"RationalFactor(num={sorted(self.num)}, den={sorted(self.den)})"


def _linear_factor_product(ctx, roots) -> dict:
    """prod (1 - r T^{-1}) as {power: coefficient}."""
    poly = {0: PadicNumber.from_int(ctx, 1)}
    for r in roots:
        poly = RationalFactor._mul(poly, {0: PadicNumber.from_int(ctx, 1), -1: -_as_number(ctx, r)})
    return poly


def euler_E1(a_star, chi_p, k_exp: int, q_p: int) -> RationalFactor:
    """1 - a* chi(p) T / (p^{k_exp} (q_p + 1))."""
    ctx = a_star.ctx
    c = _as_number(ctx, a_star * chi_p) / PadicNumber.from_int(ctx, ctx.p**k_exp * (q_p + 1))
    return RationalFactor(ctx, {0: 1, 1: -c})


def euler_Ep(g_roots, t_p: int, split: bool) -> RationalFactor:
    """Inert: (1 - p^t alpha/T)(1 - p^t beta/T); split: prod over bullet, star of (1 - p^t bullet_1 star_2 / T)."""
    if split:
        (a1, b1), (a2, b2) = g_roots
        ctx = a1.ctx
        roots = [x * y for x in (a1, b1) for y in (a2, b2)]
    else:
        a, b = g_roots[0] if isinstance(g_roots[0], tuple) else g_roots
        ctx = a.ctx
        roots = [a, b]
    scale = ctx.p**t_p
    return RationalFactor(ctx, _linear_factor_product(ctx, [r * scale for r in roots]))


def euler_E0(g_roots, t_p: int) -> RationalFactor:
    """1 - p^{2t} alpha_1 alpha_2 beta_1 beta_2 T^{-2} at a split prime."""
    (a1, b1), (a2, b2) = g_roots
    ctx = a1.ctx
    return RationalFactor(ctx, {0: 1, -2: -(a1 * b1 * a2 * b2 * ctx.p ** (2 * t_p))})


def interpolation_factor(Ep: RationalFactor, E1: RationalFactor, alpha_f, beta_f, E0: RationalFactor | None = None) -> PadicNumber:
    """E_p(alpha) E_1(beta) / E(beta, alpha) + E_p(beta) E_1(alpha) / E(alpha, beta), divided by E_0 when given."""

    def side(x, y):
        value = Ep(x) * E1(y) / _as_number(x.ctx, euler_E(y, x))
        if E0 is not None:
            value = value / E0(x)
        return value

    return side(alpha_f, beta_f) + side(beta_f, alpha_f)


# -- eigencomponent pairing --------------------------------------------------------------


@dataclass
class PairingResult:
    coords: list
    loss: int
    residual_valuation: int

    def to_json(self) -> dict:
        return {
            "coords": [c.to_json()["coords"] for c in self.coords],
            "loss": self.loss,
            "residual_valuation": self.residual_valuation,
        }


def pairing(h, basis, budget: int = 4, window=None) -> PairingResult:
    """Coordinates of h in the span of ``basis`` on a common window, with digit accounting.

    The f-coordinate of h is the model of <h, f> / <f, f> on a finite span.
    """
    if isinstance(h, NOCForm):
        if h.order() != 0:
            raise DomainError("pairing takes forms of order 0")
        h = h.modular_part()
    if not basis:
        raise DomainError("empty basis")
    ctx = h.space.ctx
    if window is None:
        T = min([h.trace_bound] + [b.trace_bound for b in basis])
        window = h.space.window(T)
    k = len(basis)
    rows = [[b[n] for b in basis] + [h[n]] for n in window]
    loss = 0
    r = 0
    pivots = []
    for c in range(k):
        best, best_v = None, ctx.M
        for i in range(r, len(rows)):
            v = rows[i][c].valuation()
            if v < best_v:
                best, best_v = i, v
        if best is None:
            raise IllConditioned(f"basis vector {c} is dependent on the others over this window")
        loss += best_v
        if loss > budget:
            raise IllConditioned(f"solve loses {loss} digits, budget {budget}")
        rows[r], rows[best] = rows[best], rows[r]
        unit, _ = rows[r][c].divide_by_p(best_v)
        inv = unit.inverse()
        for i in range(r + 1, len(rows)):
            x = rows[i][c]
            if x:
                factor = x.divide_by_p(best_v)[0] * inv
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        pivots.append((r, best_v, inv))
        r += 1
    coords = [ctx.zero()] * k
    for c in range(k - 1, -1, -1):
        row, v, inv = pivots[c]
        acc = rows[row][k]
        for c2 in range(c + 1, k):
            acc = acc - rows[row][c2] * coords[c2]
        try:
            q, _ = acc.divide_by_p(v)
        except DomainError:
            raise NotInSpan(f"coordinate {c} is not integral; h leaves the span") from None
        coords[c] = q * inv
    residual = ctx.M
    for n in window:
        diff = h[n]
        for b, x in zip(basis, coords):
            diff = diff - b[n] * x
        residual = min(residual, diff.valuation())
    if residual < ctx.M - loss:
        raise NotInSpan(f"residual valuation {residual} below {ctx.M - loss}")
    return PairingResult(coords, loss, residual)


# -- lazily evaluated forms over the quadratic field ---------------------------------------------


class LazyForm:
    """A q-expansion over the quadratic field given by its coefficient function.

    Every form built here depends only on the ideal generated by the index,
    so values are memoised per orbit representative.
    """

    def __init__(self, setup, fn):
        self.setup = setup
        self._fn = fn
        self._memo: dict = {}

    @classmethod
    def eigenform(cls, data: EigenData, setup) -> "LazyForm":
        return cls(setup, EigenformCoefficients(data, setup))

    def __call__(self, beta) -> UnramElem:
        r = self.setup.rep(beta)
        hit = self._memo.get(r)
        if hit is None:
            hit = self._memo[r] = self._fn(r)
        return hit

    def deplete(self, *primes) -> "LazyForm":
        zero = self.setup.ctx.zero()
        in_prime = self.setup.in_prime
        return LazyForm(self.setup, lambda b: zero if any(in_prime(b, i) for i in primes) else self(b))

    def V(self, x) -> "LazyForm":
        zero = self.setup.ctx.zero()
        divide = self.setup.field.divide

        def fn(b):
            q = divide(b, x)
            return zero if q is None else self(q)

        return LazyForm(self.setup, fn)

    def U(self, x) -> "LazyForm":
        mul = self.setup.field.mul
        return LazyForm(self.setup, lambda b: self(mul(b, x)))

    def combine(self, *pairs) -> "LazyForm":
        """self + sum c * form over the given (c, form) pairs."""
        return LazyForm(self.setup, lambda b: _lin(self(b), [(c, f(b)) for c, f in pairs]))

    def scale(self, c) -> "LazyForm":
        return LazyForm(self.setup, lambda b: self(b) * c)

    def materialize(self, reps, trace_bound: int) -> QExp:
        values = {r: self(r) for r in reps}
        return QExp(self.setup, trace_bound, {r: v for r, v in values.items() if v}, check=False)


def _lin(base, pairs):
    for c, v in pairs:
        base = base + c * v
    return base


# -- the depletion identities -------------------------------------------------------------


@dataclass
class IdentityCheck:
    name: str
    passed: bool
    residual_valuation: int
    required: int
    where: object = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "residual_valuation": self.residual_valuation,
            "required": self.required,
            "first_failure": self.where,
        }


@dataclass
class IdentityReport:
    kind: str
    D: int
    p: int
    M: int
    t: int
    g_weight: int
    checks: list = dc_field(default_factory=list)
    digits_budget: int = 0
    factor_left: PadicNumber | None = None
    factor_right: PadicNumber | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        def num(x):
            return None if x is None else x.to_json()

        return {
            "kind": self.kind,
            "D": self.D,
            "p": self.p,
            "M": self.M,
            "t": self.t,
            "g_weight": self.g_weight,
            "passed": self.passed,
            "digits_budget": self.digits_budget,
            "max_residual_valuation": min((c.residual_valuation for c in self.checks), default=self.M),
            "checks": [c.to_json() for c in self.checks],
            "factor_left": num(self.factor_left),
            "factor_right": num(self.factor_right),
        }


def default_g_weight(p: int, t: int) -> int:
    """Smallest parallel exponent u >= 1 for which every projection denominator is a unit.

    After nabla^t and restriction the rational exponent is 2u + 4t, so the
    denominators are w - j with w = 2u + 4t - 2 and 0 <= j < 2t.
    """
    for u in range(1, 10 * p):
        w = 2 * u + 4 * t - 2
        if all((w - j) % p for j in range(2 * t)):
            return u
    raise DomainError("no admissible weight")  # pragma: no cover


def _poly_from_roots(roots) -> list:
    """Coefficients (low to high) of prod (U - r)."""
    ctx = roots[0].ctx
    poly = [ctx.one()]
    for r in roots:
        nxt = [ctx.zero()] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i + 1] = nxt[i + 1] + c
            nxt[i] = nxt[i] - c * r
        poly = nxt
    return poly


class _Pipeline:
    """Evaluates H(nabla^t restricted form) at chosen rational indices."""

    def __init__(self, setup, t: int, g_weight: int):
        self.setup = setup
        self.t = t
        self.k = Weight.classical(setup, (g_weight, g_weight))
        self.loss = 0
        self._fibers: dict = {}

    def fiber_reps(self, m: int) -> list:
        hit = self._fibers.get(m)
        if hit is None:
            rep = self.setup.rep
            hit = self._fibers[m] = [rep(b) for b in self.setup.field.trace_fiber(m)]
        return hit

    def restricted(self, form: LazyForm, indices) -> NOCForm:
        """diag_restrict(nabla^t form) at the given indices."""
        indices = sorted(set(indices))
        reps = {r for m in indices for r in self.fiber_reps(m)}
        g = form.materialize(reps, max(indices))
        h = nabla_classical(noc_from_modular(g, self.k), (self.t, self.t))
        return diag_restrict(h, indices)

    def project(self, form: LazyForm, indices) -> dict:
        z = self.restricted(form, indices)
        h0, _, loss = oc_project(z)
        self.loss = max(self.loss, loss)
        zero = self.setup.ctx.zero()
        return {m: h0.coeffs.get(m, zero) for m in sorted(set(indices))}


def _compare(name, lhs: dict, rhs: dict, required: int, M: int) -> IdentityCheck:
    """Smallest valuation of lhs - rhs; ``where`` is the first index attaining it."""
    worst, where = M, None
    for m in sorted(lhs):
        v = (lhs[m] - rhs[m]).valuation()
        if v < worst:
            worst, where = v, m
    return IdentityCheck(name, worst >= required, worst, required, where)


def _companion_data(f_data: EigenData, ctx) -> EigenData:
    """A second weight-one eigenform over Q, used as the complement of the old space of f."""
    a = seeded_value(ctx, "companion", f_data.seed, 0)
    b = seeded_value(ctx, "companion", f_data.seed, 1)
    a = a if a.is_unit() else a + 1
    b = b if (b.is_unit() and (a - b).is_unit()) else a + 1
    return EigenData(1, [(a, b)], [a * b], seed=f_data.seed + 1)


def _apply_U(poly, Y: dict, p: int, indices) -> dict:
    """(sum_k c_k U^k Y) at each index n: sum c_k Y[p^k n]."""
    return {n: _lin(poly[0] * Y[n], [(c, Y[p**k * n]) for k, c in enumerate(poly) if k]) for n in indices}


def _apply_V(poly, Y: dict, p: int, indices) -> dict:
    """(sum_k c_k V^k Y) at each index m: sum c_k Y[m / p^k] over the k with p^k | m."""
    out = {}
    for m in indices:
        acc = poly[0] * Y[m]
        for k, c in enumerate(poly):
            if k and m % p**k == 0:
                acc = acc + c * Y[m // p**k]
        out[m] = acc
    return out


def _pairing_factor(setup, ratio_poly, f_data: EigenData, other_data: EigenData, k_exp: int, T_f: int, budget: int):
    """Left route: e(X) = (matrix of the Euler ratio at U^{-1}) e(Y) on the old space of f, read by the pairing.

    Returns (ratio, total loss).
    """
    Q = setup.rational
    ctx = setup.ctx
    p = setup.p
    f = QExp.from_function(Q, T_f, EigenformCoefficients(f_data, Q))
    f2 = QExp.from_function(Q, T_f, EigenformCoefficients(other_data, Q))
    Vf, Vf2 = V_full(f, T_f), V_full(f2, T_f)
    basis = [f, Vf, f2, Vf2]
    loss = 0
    # matrix of U on span{f, Vf}, read off q-expansions
    Tu = T_f // p
    small = [b.truncate(Tu) for b in basis]
    cols = []
    from .hecke import U_full

    for b in (f, Vf):
        res = pairing(U_full(b, Tu), small, budget)
        loss = max(loss, res.loss)
        if any(res.coords[2:]):
            raise NotInSpan("U does not preserve the old space of f on this window")
        cols.append(res.coords[:2])
    A = Mat2(cols[0][0], cols[1][0], cols[0][1], cols[1][1])
    # e(Y): the f-component of a model vector y f + (other eigencomponents)
    y, z, w = (seeded_value(ctx, "pairing", f_data.seed, tag) for tag in ("y", "z", "w"))
    y = y if y.is_unit() else y + 1
    hY = f.scale(y) + f2.scale(z) + Vf2.scale(w)
    res = pairing(hY, basis, budget)
    loss = max(loss, res.loss)
    eY = tuple(res.coords[:2])
    eX = ratio_poly.evaluate_matrix(A).apply(eY)
    hX = f.scale(eX[0]) + Vf.scale(eX[1]) + f2.scale(z)
    res = pairing(hX, basis, budget)
    loss = max(loss, res.loss)
    a_star = f_data.p_roots[0][0] + f_data.p_roots[0][1]
    c = _as_number(ctx, a_star * f_data.chi_p[0]) / PadicNumber.from_int(ctx, p**k_exp * (p + 1))
    ell = lambda coords: _as_number(ctx, coords[0]) + c * coords[1]  # noqa: E731
    return ell(res.coords) / ell(eY), loss


def verify_depletion_identities(
    setup,
    g_data: EigenData,
    f_data: EigenData,
    t: int,
    other_data: EigenData | None = None,
    g_weight: int | None = None,
    k_exp: int = 0,
    min_digits: int = 6,
    base_index: int = 2,
    raise_on_failure: bool = False,
) -> IdentityReport:
    """Run both sides of the depletion identities and the interpolation factor.

    The left side always goes deplete -> nabla^t -> restrict -> project; the
    right side uses stabilisations and Euler-factor algebra.  Comparisons are
    made modulo p^{M - budget} and must reach ``min_digits``.
    """
    if t < 0:
        raise DomainError("t must be a nonnegative integer")
    if base_index <= 0 or not setup.field.trace_fiber(base_index):
        raise DomainError("base index must be a positive trace of some totally positive element")
    ctx, p, M = setup.ctx, setup.p, setup.ctx.M
    split = setup.splitting.is_split
    u = default_g_weight(p, t) if g_weight is None else g_weight
    pipe = _Pipeline(setup, t, u)
    report = IdentityReport("split" if split else "inert", setup.field.D, p, M, t, u)
    t_p = 2 * t
    scale = ctx(p**t_p)
    g = LazyForm.eigenform(g_data, setup)
    if other_data is None:
        other_data = _companion_data(f_data, ctx)

    checks = []
    if split:
        xs = setup.uniformizers.xs
        full = (p, 0)
        small = [base_index * n for n in range(1, 6)]
        up1 = [p * n for n in small]
        # U restrict(nabla^t V_i g^[j]) = 0
        for i, j in ((0, 1), (1, 0)):
            z = pipe.restricted(g.deplete(j).V(xs[i]), up1)
            zero = {m: ctx.zero() for m in up1}
            for deg in range(z.order_bound + 1):
                part = z.part((deg,))
                vals = {m: part.get(m) for m in up1}
                checks.append(_compare(f"U kills restriction of nabla^t V_{i} g^[{j}] (V-degree {deg})", vals, zero, M, M))
        # U H(V_i g) = U H(V_p U_j g)
        for i, j in ((0, 1), (1, 0)):
            lhs = pipe.project(g.V(xs[i]), up1)
            rhs = pipe.project(g.U(xs[j]).V(full), up1)
            checks.append(_compare(f"V_{i} g versus V_p U_{j} g after U", lhs, rhs, M, M))
        X1 = pipe.project(g.deplete(0, 1), up1)
        stabilised = {}
        for i, j in ((0, 1), (1, 0)):
            alpha, beta = g_data.p_roots[i]
            for name, root, other in (("alpha", alpha, beta), ("beta", beta, alpha)):
                form = g.combine((-other, g.V(xs[i])))
                stabilised[(i, name)] = (form, root)
                lhs = pipe.project(form.deplete(j), up1)
                checks.append(_compare(f"stabilised at prime {i} ({name}) then depleted at {j} equals full depletion, after U", lhs, X1, M, M))
        # U^2 H(g^[i]) = (U - bullet c alpha_j)(U - bullet c beta_j) H(g_bullet)
        base2 = small[:3]
        idx2 = sorted({p**k * n for n in base2 for k in range(3)})
        for i, j in ((0, 1), (1, 0)):
            lhs_all = pipe.project(g.deplete(i), idx2)
            lhs = {n: lhs_all[p * p * n] for n in base2}
            aj, bj = g_data.p_roots[j]
            for name in ("alpha", "beta"):
                form, root = stabilised[(i, name)]
                Yb = pipe.project(form, idx2)
                poly = _poly_from_roots([root * scale * aj, root * scale * bj])
                rhs = _apply_U(poly, Yb, p, base2)
                checks.append(_compare(f"U^2 H(g^[{i}]) against the {name}-stabilisation at prime {i}", lhs, rhs, M, M))
        # U^4 E_p(U) Y = U^4 E_0(U) X
        idx5 = [base_index * p**k for k in range(5)]
        Y = pipe.project(g, idx5)
        X = pipe.project(g.deplete(0, 1), idx5)
        (a1, b1), (a2, b2) = g_data.p_roots
        ep = _poly_from_roots([scale * x * y for x in (a1, b1) for y in (a2, b2)])
        e0 = [ctx.zero(), ctx.zero(), -(scale * scale * a1 * b1 * a2 * b2), ctx.zero(), ctx.one()]
        lhs = _apply_U(ep, Y, p, [base_index])
        rhs = _apply_U(e0, X, p, [base_index])
        checks.append(_compare("U^4 E_p(U) H(g) = U^4 E_0(U) H(g^[p])", lhs, rhs, M, M))
        Ep = euler_Ep(g_data.p_roots, t_p, True)
        E0 = euler_E0(g_data.p_roots, t_p)
        ratio = Ep / E0
    else:
        window = [m for m in range(0, 12 * p + 1) if m % 2 == 0]
        alpha, beta = g_data.p_roots[0]
        full = (p, 0)
        dep = g.deplete(0)
        reps = setup.window(6 * p)
        X = pipe.project(dep, window)
        Y = pipe.project(g, window)
        Ys = {}
        for name, root, other in (("alpha", alpha, beta), ("beta", beta, alpha)):
            form = g.combine((-other, g.V(full)))
            same = dep.materialize(reps, 6 * p) == form.deplete(0).materialize(reps, 6 * p)
            checks.append(IdentityCheck(f"depleting the {name}-stabilisation gives g^[p]", same, M if same else 0, M))
            Ys[name] = pipe.project(form, window)
            rhs = _apply_V([ctx.one(), -(root * scale)], Ys[name], p, window)
            checks.append(_compare(f"H(g^[p]) = (1 - {name} p^(2t) V) H(g_{name})", X, rhs, M, M))
        inv = (alpha - beta).inverse()
        combo = {m: (alpha * Ys["alpha"][m] - beta * Ys["beta"][m]) * inv for m in window}
        checks.append(_compare("H(g) = (alpha H(g_alpha) - beta H(g_beta)) / (alpha - beta)", Y, combo, M, M))
        poly = [ctx.one(), -(scale * (alpha + beta)), scale * scale * alpha * beta]
        rhs = _apply_V(poly, Y, p, window)
        checks.append(_compare("E_p(V) H(g) = H(g^[p])", X, rhs, M, M))
        Ep = euler_Ep(g_data.p_roots, t_p, False)
        E0 = None
        ratio = Ep

    budget = pipe.loss
    required = max(min_digits, M - budget)
    for c in checks:
        c.required = min(c.required, required)
        c.passed = c.residual_valuation >= c.required
    # interpolation factor: pairing route against the closed bracket
    alpha_f, beta_f = f_data.p_roots[0]
    E1 = euler_E1(alpha_f + beta_f, f_data.chi_p[0], k_exp, p)
    right = interpolation_factor(Ep, E1, alpha_f, beta_f, E0)
    T_f = p * 24
    left, ploss = _pairing_factor(setup, ratio, f_data, other_data, k_exp, T_f, budget=4)
    budget = max(budget, ploss)
    digits = min(left.prec, right.prec)
    need = max(min_digits, min(M, digits) - budget)
    if need > digits:
        raise ConvergenceBudgetExceeded(f"interpolation factor known to {digits} digits, need {need}")
    diff = left - right
    resid = diff.prec if diff.is_zero() else diff.valuation()
    checks.append(IdentityCheck("interpolation factor: pairing route equals Euler bracket", resid >= need, resid, need))
    report.checks = checks
    report.digits_budget = budget
    report.factor_left, report.factor_right = left, right
    if raise_on_failure and not report.passed:
        bad = report.failures()[0]
        raise IdentityViolation(bad.name, bad.where, bad.residual_valuation)
    return report


def random_draw(setup, rng, k_f: int = 1):
    """Random unit Hecke data for g over the quadratic field and two forms over Q.

    Draws are rejected until every Euler denominator is a unit.
    """
    from .hecke import random_eigendata

    Q = setup.rational
    while True:
        g = random_eigendata(setup, rng)
        f = random_eigendata(Q, rng)
        other = random_eigendata(Q, rng)
        a, b = f.p_roots[0]
        if not (a - b).is_unit():
            continue
        if setup.splitting.is_split:
            (a1, b1), (a2, b2) = g.p_roots
            prod = a1 * b1 * a2 * b2
            if not all((x * x - prod).is_unit() for x in (a, b)):
                continue
        return g, f, other
