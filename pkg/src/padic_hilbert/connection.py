"""The Gauss-Manin connection on q-expansions and its p-adic iterates.

On a term a * V^i at weight k the operator for the embedding sigma is

    nabla(a V^i) = theta_sigma(a) V^i + p (u_sigma - i_sigma) a V_sigma V^i,

landing in weight k + 2 sigma.  For a form supported away from the prime of
sigma, nabla^{N} - id (N = p^f - 1) is divisible by p, which makes

    nabla^s = sum_J binom(v/N, J) (nabla^N - id)^J

converge.  The binomial coefficients are produced from the exp/log
expansion exp(c log(1 + x)) = sum_i c^i log(1 + x)^i / i!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConvergenceBudgetExceeded, DomainError, NotDepleted, TruncationOverflow
from .padic import PadicCtx, PadicNumber, UnramElem, teichmuller, vp, vp_factorial
from .qexp import NOCForm, QExp, theta_sigma
from .weight import Weight, weight_shift


def _shift_weight(space, k: Weight, sigma: int, amount: int) -> Weight:
    return weight_shift(k, sigma, amount, space if hasattr(space, "splitting") else None)


def _bump(deg: tuple, sigma: int, by: int = 1) -> tuple:
    return deg[:sigma] + (deg[sigma] + by,) + deg[sigma + 1 :]


# -- one step and its direct powers --------------------------------------------


def nabla_sigma(h: NOCForm, sigma: int, order_bound: int | None = None) -> NOCForm:
    """One application of the connection in the direction sigma."""
    space = h.space
    p = space.p
    u = h.weight.u[sigma]
    out: dict = {}
    for deg, q in h.terms.items():
        th = theta_sigma(q, sigma)
        out[deg] = out[deg] + th if deg in out else th
        coef = (u - deg[sigma]) * p
        if coef:
            nd = _bump(deg, sigma)
            up = q.scale(coef)
            out[nd] = out[nd] + up if nd in out else up
    bound = h.order_bound + 1 if order_bound is None else order_bound
    order = max((sum(d) for d, q in out.items() if not q.is_zero()), default=0)
    if order > bound:
        raise TruncationOverflow(f"V-order {order} exceeds bound {bound}")
    return NOCForm(space, _shift_weight(space, h.weight, sigma, 2), h.trace_bound, out, bound)


def nabla_power(h: NOCForm, sigma: int, times: int) -> NOCForm:
    for _ in range(times):
        h = nabla_sigma(h, sigma)
    return h


def nabla_classical(h: NOCForm, exponents) -> NOCForm:
    """prod_sigma nabla(sigma)^{t_sigma} by direct iteration."""
    for sigma, t in enumerate(exponents):
        h = nabla_power(h, sigma, t)
    return h


def closed_form_coefficient(N: int, j: int, u: UnramElem, start: int = 0) -> UnramElem:
    """binom(N, j) * prod_{i=0}^{j-1} (u - start + N - 1 - i)."""
    acc = u.ctx(math.comb(N, j))
    for i in range(j):
        acc = acc * (u - start + (N - 1 - i))
    return acc


def nabla_power_closed(g: QExp, N: int, sigma: int, k: Weight) -> NOCForm:
    """nabla(sigma)^N of a modular form, from the closed formula for its V-expansion."""
    space = g.space
    p = space.p
    u = k.u[sigma]
    zero = (0,) * space.num_sigmas
    thetas = [g]
    for _ in range(N):
        thetas.append(theta_sigma(thetas[-1], sigma))
    terms = {}
    for j in range(N + 1):
        coef = closed_form_coefficient(N, j, u) * p**j
        terms[_bump(zero, sigma, j)] = thetas[N - j].scale(coef)
    return NOCForm(space, _shift_weight(space, k, sigma, 2 * N), g.trace_bound, terms, N)


def period(space, sigma: int) -> int:
    """N = p^f - 1 for the residue degree f of sigma's prime."""
    return space.p ** space.residue_degree(sigma) - 1


def period_difference(g: NOCForm, sigma: int) -> NOCForm:
    """(nabla^N - id)(g) by direct iteration; differences taken on coefficients."""
    moved = nabla_power(g, sigma, period(g.space, sigma))
    return (moved - g.with_weight(moved.weight)).with_weight(g.weight)


def check_depleted(g: NOCForm, sigma: int) -> None:
    space = g.space
    for beta in g.support():
        if not space.embed(beta, sigma).is_unit():
            raise NotDepleted(f"coefficient at {beta} lies on the prime of embedding {sigma}")


# -- series coefficients ---------------------------------------------------------


@lru_cache(maxsize=None)
def log_power_table(J_max: int) -> tuple:
    """r[i][J] = [x^J] log(1+x)^i / i!, exact rationals.

    [x^J] log(1+x)^i is the sum over compositions J = j_1 + ... + j_i of
    prod (-1)^{j_a - 1}/j_a, so sum_i c^i r[i][J] regroups the series
    sum_i c^i/i! * sum_{j_1..j_i} prod (-1)^{j_a-1}/j_a by total degree.
    """
    log_series = [Fraction(0)] + [Fraction((-1) ** (j - 1), j) for j in range(1, J_max + 1)]
    table = []
    power = [Fraction(1)] + [Fraction(0)] * J_max
    for i in range(J_max + 1):
        fact = math.factorial(i)
        table.append(tuple(c / fact for c in power))
        nxt = [Fraction(0)] * (J_max + 1)
        for a, ca in enumerate(power):
            if ca:
                for b in range(1, J_max + 1 - a):
                    nxt[a + b] += ca * log_series[b]
        power = nxt
    return tuple(table)


def denominator_digits(J_max: int, p: int) -> int:
    """Largest power of p in any denominator of the table up to J_max."""
    worst = 0
    for row in log_power_table(J_max):
        for c in row:
            if c:
                worst = max(worst, vp(c.denominator, p))
    return worst


def binomial_series_coefficients(c: UnramElem, J_max: int) -> list:
    """b_J = sum_i c^i r[i][J] for J <= J_max, which equals binom(c, J).

    The sum is formed over p^e * r[i][J] (integral) and divided by p^e at the
    end, so the result is exact modulo p^(M - e).
    """
    ctx = c.ctx
    p = ctx.p
    table = log_power_table(J_max)
    e = denominator_digits(J_max, p)
    pe = p**e
    powers = [ctx.one()]
    for _ in range(J_max):
        powers.append(powers[-1] * c)
    out = []
    for J in range(J_max + 1):
        acc = ctx.zero()
        for i in range(J + 1):
            r = table[i][J]
            if r:
                scaled = r * pe
                acc = acc + powers[i] * (scaled.numerator * pow(scaled.denominator, -1, ctx.pM))
        q, _ = acc.divide_by_p(e)
        out.append(q)
    return out


def binomial_direct(c: UnramElem, J: int) -> UnramElem:
    """binom(c, J) = prod (c - i) / J!, for cross-checking the series form."""
    ctx = c.ctx
    p = ctx.p
    num = ctx.one()
    for i in range(J):
        num = num * (c - i)
    e = vp_factorial(J, p)
    q, _ = num.divide_by_p(e)
    return q * pow(math.factorial(J) // p**e, -1, ctx.pM)


def term_valuation_bound(js, p: int) -> Fraction:
    """Lower bound for the valuation of the (j_1, ..., j_i) term of the series.

    v^i / (i! N^i) * prod 1/j_a * X^{sum j}(g), with X^J(g) divisible by p^J:
    the bound is sum j_a - v_p(i!) - sum v_p(j_a), never below
    sum j_a * (1 - 1/(p-1)).
    """
    js = tuple(js)
    if p < 3:
        raise DomainError("p must be odd")
    if not js:
        return Fraction(0)
    if min(js) < 1:
        raise DomainError("parts must be positive")
    return Fraction(sum(js) - vp_factorial(len(js), p) - sum(vp(j, p) for j in js))


def term_valuation_floor(js, p: int) -> Fraction:
    """The simplified bound sum j_a (1 - 1/(p-1))."""
    return Fraction(sum(js)) * Fraction(p - 2, p - 1)


def series_term_coefficient(js, v: UnramElem, N: int) -> PadicNumber:
    """v^i / (i! N^i) * prod (-1)^{j_a - 1} / j_a as a p-adic number."""
    ctx = v.ctx
    i = len(js)
    value = PadicNumber.from_elem(v) ** i
    value = value / PadicNumber.from_int(ctx, math.factorial(i) * N**i)
    for j in js:
        value = value / PadicNumber.from_int(ctx, (-1) ** (j - 1) * j)
    return value


def tail_valuation(J: int, p: int) -> Fraction:
    """Guaranteed valuation of the J-th series term b_J * Delta^J(y).

    On the modular part the differences are divisible by p^J, which gives
    the bound J(1 - 1/(p-1)).  Higher V-degrees mix weights: the entry of
    relative degree j is p^j times a polynomial of degree 2j in the orbit
    index times a geometric factor, so Delta^J only guarantees
    max(j, J - j) >= ceil(J/2).
    """
    return min(Fraction(J * (p - 2), p - 1), Fraction((J + 1) // 2))


def terms_for_target(target: int, p: int) -> int:
    """Least m such that every term beyond J = m has valuation >= target."""
    m = 0
    while tail_valuation(m + 1, p) < target:
        m += 1
    return m


@dataclass(frozen=True)
class IterationPlan:
    sigma: int
    v: UnramElem
    m_max: int
    target: int
    torsion: int = 0  # Teichmuller exponent; torsion = t turns the series into nabla^t

    @classmethod
    def for_target(cls, sigma: int, v, target: int, ctx: PadicCtx, torsion: int | None = None) -> "IterationPlan":
        """Plan with one term beyond what the valuation bound requires."""
        if isinstance(v, int):
            if torsion is None:
                torsion = v
            v = ctx(v)
        return cls(sigma, v, terms_for_target(target, ctx.p) + 1, target, torsion or 0)

    def predicted_tail(self, p: int) -> Fraction:
        return tail_valuation(self.m_max + 1, p)


@dataclass
class SeriesDiagnostics:
    sigma: int
    period: int
    terms_used: int
    guard_digits: int
    certified_precision: int
    valuation_profile: list = dc_field(default_factory=list)
    stable_digits: int = 0

    def tail_profile(self) -> list:
        """Entry J bounds the valuation of everything from term J on; nondecreasing.

        Single terms are not monotone (v_p(J) enters the denominators), so the
        suffix minima are the meaningful precision curve.
        """
        out, low = [], None
        for v in reversed(self.valuation_profile):
            low = v if low is None else min(low, v)
            out.append(low)
        return out[::-1]

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma,
            "period": self.period,
            "terms_used": self.terms_used,
            "guard_digits": self.guard_digits,
            "certified_precision": self.certified_precision,
            "valuation_profile": list(self.valuation_profile),
            "tail_profile": self.tail_profile(),
            "stable_digits": self.stable_digits,
        }


# -- vectorised column arithmetic ----------------------------------------------


class _Vec:
    """Many elements of W(F_q) at once: f numpy object arrays of coordinates."""

    def __init__(self, ctx: PadicCtx):
        self.ctx = ctx
        self.f = ctx.f
        self.mod = ctx.pM
        self.modulus = ctx.modulus

    def from_elems(self, elems) -> tuple:
        return tuple(np.array([e.coords[k] for e in elems], dtype=object) for k in range(self.f))

    def to_elem(self, vec, idx) -> UnramElem:
        return UnramElem._raw(self.ctx, tuple(int(a[idx]) for a in vec))

    def zeros(self, n: int) -> tuple:
        return tuple(np.zeros(n, dtype=object) for _ in range(self.f))

    def add(self, a, b):
        mod = self.mod
        return tuple((x + y) % mod for x, y in zip(a, b))

    def sub(self, a, b):
        mod = self.mod
        return tuple((x - y) % mod for x, y in zip(a, b))

    def mul(self, a, b):
        mod = self.mod
        if self.f == 1:
            return ((a[0] * b[0]) % mod,)
        if self.f == 2:
            m0, m1 = self.modulus[0], self.modulus[1]
            hi = a[1] * b[1]
            return ((a[0] * b[0] - m0 * hi) % mod, (a[0] * b[1] + a[1] * b[0] - m1 * hi) % mod)
        prod = [0] * (2 * self.f - 1)
        for i in range(self.f):
            for j in range(self.f):
                prod[i + j] = prod[i + j] + a[i] * b[j]
        for d in range(2 * self.f - 2, self.f - 1, -1):
            c = prod[d]
            for i in range(self.f):
                prod[d - self.f + i] = prod[d - self.f + i] - c * self.modulus[i]
        return tuple(x % mod for x in prod[: self.f])

    def smul(self, a, s: UnramElem):
        if self.f == 1:
            return ((a[0] * s.coords[0]) % self.mod,)
        return self.mul(a, tuple(np.full(len(a[0]), c, dtype=object) for c in s.coords))

    def is_zero(self, a) -> bool:
        return not any(np.any(x != 0) for x in a)

    def min_valuation(self, a, p: int, cap: int) -> int:
        best = cap
        for arr in a:
            for x in arr:
                if x:
                    v = 0
                    while x % p == 0 and v < best:
                        x //= p
                        v += 1
                    best = min(best, v)
        return best


def _period_orbit(vec: _Vec, lams, starts, u: UnramElem, steps_per_block: int, blocks: int, depth: int):
    """y_l = nabla^{l * N} applied to unit columns, for l = 0..blocks.

    Column c starts as V^{starts[c]}; ``lams`` holds sigma(beta) per column.
    Degrees are tracked up to max(starts) + depth; coefficients further out
    are divisible by p^depth and vanish at the working precision.
    """
    ctx = vec.ctx
    p = ctx.p
    n = len(starts)
    top = max(starts) + depth
    cur = [vec.zeros(n) for _ in range(top + 1)]
    for c, s in enumerate(starts):
        for arr_k, arr in enumerate(cur[s]):
            arr[c] = 1 if arr_k == 0 else 0
    low, high = min(starts), max(starts)
    ys = [cur]
    uu = u
    for _ in range(blocks):
        for _ in range(steps_per_block):
            nxt_high = min(top, high + 1)
            nxt = [None] * (top + 1)
            for j in range(low, nxt_high + 1):
                term = vec.mul(lams, cur[j]) if j <= high else vec.zeros(n)
                if j > low:
                    shift = (uu - (j - 1)) * p
                    term = vec.add(term, vec.smul(cur[j - 1], shift))
                nxt[j] = term
            for j in range(top + 1):
                if nxt[j] is None:
                    nxt[j] = vec.zeros(n) if (j < low or j > nxt_high) else nxt[j]
            cur, high = nxt, nxt_high
            uu = uu + 2
        ys.append(cur)
    return ys, top


def _combine(vec: _Vec, ys, weights, top: int):
    out = []
    for j in range(top + 1):
        acc = None
        for y, w in zip(ys, weights):
            if not w:
                continue
            term = vec.smul(y[j], w)
            acc = term if acc is None else vec.add(acc, term)
        out.append(acc if acc is not None else vec.zeros(len(ys[0][0][0])))
    return out


def _difference_weights(ctx: PadicCtx, coeffs) -> list:
    """Turn sum_J coeffs[J] X^J into sum_l w_l y_l with X^J = sum_l binom(J,l)(-1)^{J-l} y_l."""
    m = len(coeffs) - 1
    weights = []
    for l in range(m + 1):
        acc = ctx.zero()
        for J in range(l, m + 1):
            if coeffs[J]:
                acc = acc + coeffs[J] * ((-1) ** (J - l) * math.comb(J, l))
        weights.append(acc)
    return weights


def _columns(g: NOCForm, sigma: int):
    """Group coefficients into columns (beta, degrees off sigma) with sigma-degree entries."""
    cols: dict = {}
    for deg, q in g.terms.items():
        rest = deg[:sigma] + (0,) + deg[sigma + 1 :]
        for beta, value in q.coeffs.items():
            cols.setdefault((beta, rest), {})[deg[sigma]] = value
    return cols


def _apply_series(g: NOCForm, plan: IterationPlan, diagnostics: bool):
    space = g.space
    ctx = g.ctx
    p = ctx.p
    sigma = plan.sigma
    N = period(space, sigma)
    check_depleted(g, sigma)
    if plan.target > ctx.M:
        raise ConvergenceBudgetExceeded(f"target p^{plan.target} beyond working precision p^{ctx.M}")
    needed = terms_for_target(plan.target, p)
    if plan.m_max < needed + 1:
        raise ConvergenceBudgetExceeded(
            f"m_max={plan.m_max} but the valuation bound needs {needed} terms plus one confirming term"
        )
    m = needed + 1
    guard = denominator_digits(m, p) + 2
    work = ctx.with_precision(ctx.M + guard)
    vec = _Vec(work)
    v = plan.v.to_ctx(work)
    u = g.weight.u[sigma].to_ctx(work)

    cols = _columns(g, sigma)
    block_index: dict = {}
    block_lams, block_starts = [], []
    for (beta, _rest), entries in cols.items():
        for start in entries:
            key = (beta, start)
            if key not in block_index:
                block_index[key] = len(block_starts)
                block_lams.append(space.embed(beta, sigma).to_ctx(work))
                block_starts.append(start)
    new_weight = _shift_weight(space, g.weight, sigma, 2 * plan.torsion).with_u(sigma, g.weight.u[sigma] + plan.v * 2)
    diag = SeriesDiagnostics(sigma, N, m, guard, plan.target)
    if not block_starts:
        return NOCForm(space, new_weight, g.trace_bound, {}, g.order_bound), diag

    lams = vec.from_elems(block_lams)
    ys, top = _period_orbit(vec, lams, block_starts, u, N, m, work.M)
    c = v * work(N).inverse()
    b = binomial_series_coefficients(c, m)
    b_work = [x.to_ctx(work) for x in b]  # exact mod p^(work.M - e): enough for p^M
    full = _combine(vec, ys, _difference_weights(work, b_work), top)
    prev = _combine(vec, ys, _difference_weights(work, b_work[:m] + [work.zero()]), top)
    stable = min(vec.min_valuation(vec.sub(a, z), p, work.M) for a, z in zip(full, prev))
    diag.stable_digits = stable
    if stable < plan.target:
        raise ConvergenceBudgetExceeded(f"last series term has valuation {stable} < target {plan.target}")
    if diagnostics:
        diffs = list(ys)
        for J in range(m + 1):
            term = [vec.smul(arr, b_work[J]) for arr in diffs[0]]
            diag.valuation_profile.append(min(vec.min_valuation(a, p, work.M) for a in term))
            diffs = [[vec.sub(a1, a0) for a0, a1 in zip(y0, y1)] for y0, y1 in zip(diffs, diffs[1:])]
    twist = None
    if plan.torsion % N:
        twist = [teichmuller(lam) ** (plan.torsion % N) for lam in block_lams]

    out: dict = {}
    zero = ctx.zero()
    for (beta, rest), entries in cols.items():
        for start, value in entries.items():
            idx = block_index[(beta, start)]
            scale = value.to_ctx(work)
            if twist is not None:
                scale = scale * twist[idx]
            for j in range(start, top + 1):
                entry = vec.to_elem(full[j], idx)
                if not entry:
                    continue
                coeff = (entry * scale).to_ctx(ctx)
                if not coeff:
                    continue
                deg = _bump(rest, sigma, j)
                bucket = out.setdefault(deg, {})
                bucket[beta] = bucket.get(beta, zero) + coeff
    terms = {d: QExp(space, g.trace_bound, q, check=False) for d, q in out.items()}
    order = max((sum(d) for d, q in terms.items() if not q.is_zero()), default=0)
    return NOCForm(space, new_weight, g.trace_bound, terms, max(order, g.order_bound)), diag


def nabla_s(g: NOCForm, plans) -> NOCForm:
    """prod_sigma nabla(sigma)^{s_sigma}(g), each factor from its series plan."""
    return nabla_s_report(g, plans)[0]


def nabla_s_report(g: NOCForm, plans, diagnostics: bool = False):
    """nabla_s together with per-embedding series diagnostics."""
    if isinstance(plans, IterationPlan):
        plans = [plans]
    seen = set()
    for plan in plans:
        if plan.sigma in seen:
            raise DomainError(f"two plans for embedding {plan.sigma}")
        seen.add(plan.sigma)
        check_depleted(g, plan.sigma)
    reports = []
    for plan in sorted(plans, key=lambda pl: pl.sigma):
        g, diag = _apply_series(g, plan, diagnostics)
        reports.append(diag)
    return g, reports


def log_nabla(g: NOCForm, sigma: int, m: int) -> NOCForm:
    """Partial sum sum_{j=1}^m (-1)^{j-1} (nabla^N - id)^j(g) / j.

    The iterates live at different weights; the differences are taken on
    coefficients and the result keeps the weight tag of g.
    """
    space = g.space
    ctx = g.ctx
    p = ctx.p
    N = period(space, sigma)
    check_depleted(g, sigma)
    if m < 1 or g.is_zero():
        return NOCForm(space, g.weight, g.trace_bound, {}, g.order_bound)
    guard = max(vp(j, p) for j in range(1, m + 1)) + 1
    work = ctx.with_precision(ctx.M + guard)
    vec = _Vec(work)
    u = g.weight.u[sigma].to_ctx(work)
    cols = _columns(g, sigma)
    keys = sorted({(beta, s) for (beta, _r), ent in cols.items() for s in ent})
    index = {k: i for i, k in enumerate(keys)}
    lams = vec.from_elems([space.embed(beta, sigma).to_ctx(work) for beta, _s in keys])
    ys, top = _period_orbit(vec, lams, [s for _b, s in keys], u, N, m, work.M)
    total = [vec.zeros(len(keys)) for _ in range(top + 1)]
    diffs = list(ys)
    for j in range(1, m + 1):
        diffs = [[vec.sub(a1, a0) for a0, a1 in zip(y0, y1)] for y0, y1 in zip(diffs, diffs[1:])]
        e = vp(j, p)
        unit = pow((j // p**e) * (-1) ** (j - 1), -1, work.pM)
        for d in range(top + 1):
            arrs = diffs[0][d]
            pe = p**e
            if any(np.any(a % pe != 0) for a in arrs):
                raise NotDepleted("iterate difference not divisible as expected; input not depleted")
            q = tuple((a // pe) * unit % work.pM for a in arrs)
            total[d] = vec.add(total[d], q)
    out: dict = {}
    zero = ctx.zero()
    for (beta, rest), entries in cols.items():
        for start, value in entries.items():
            idx = index[(beta, start)]
            for j in range(start, top + 1):
                entry = vec.to_elem(total[j], idx)
                if entry:
                    coeff = (entry.to_ctx(ctx)) * value
                    if coeff:
                        bucket = out.setdefault(_bump(rest, sigma, j), {})
                        bucket[beta] = bucket.get(beta, zero) + coeff
    terms = {d: QExp(space, g.trace_bound, q, check=False) for d, q in out.items()}
    order = max((sum(d) for d in terms), default=0)
    return NOCForm(space, g.weight, g.trace_bound, terms, max(order, g.order_bound))
