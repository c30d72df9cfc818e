"""Command-line driver: self-test, series iteration, Euler-factor tables, projection and depletion.

Exit codes: 0 success, 1 identity violation, 2 configuration error,
3 precision budget exceeded.
"""

from __future__ import annotations

import csv
import io
import json
import random
import sys
from functools import wraps

import click

from .config import load_config, suite_config
from .connection import IterationPlan, nabla_classical, nabla_s_report
from .errors import ConfigError, ConvergenceBudgetExceeded, IdentityViolation, SingularWeight
from .field import LocalSetup, RationalSetup
from .hecke import deplete, deplete_via_operators, random_eigendata, synthetic_eigenform
from .padic import PadicCtx
from .projection import lambda_denominator, oc_project
from .qexp import noc_from_modular
from .selftest import _random_qexp, projection_input, run_suite
from .triple import euler_E1, euler_E0, euler_Ep, interpolation_factor, random_draw, verify_depletion_identities
from .weight import Weight

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


# -- output --------------------------------------------------------------------


def _number(x) -> str:
    """A p-adic number as 'p^e * (unit coordinates) + O(p^prec)' in plain text."""
    if x.is_zero():
        return f"O(p^{x.prec})"
    digits = x.ctx.p ** max(x.prec - x.e, 0)
    coords = ";".join(str(c % digits) for c in x.unit.coords)
    return f"p^{x.e}*[{coords}]+O(p^{x.prec})"


def _emit(ctx: click.Context, document: dict, rows: list) -> None:
    opts = ctx.obj
    if opts["format"] == "json":
        text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        text = buf.getvalue()
    if opts["out"]:
        with open(opts["out"], "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _qexp_rows(space, q, **extra) -> list:
    rows = []
    for beta in sorted(q.coeffs, key=lambda b: (space.trace(b), b)):
        value = q.coeffs[beta]
        rows.append({**extra, "index": json.dumps(space.index_to_json(beta)), "value": ";".join(str(c) for c in value.coords)})
    return rows


def _noc_rows(form) -> list:
    rows = []
    for deg in sorted(form.terms):
        rows.extend(_qexp_rows(form.space, form.terms[deg], degree=json.dumps(list(deg))))
    return rows


# -- shared options --------------------------------------------------------------


def _command(fn):
    """Attach the common options and translate library errors into exit codes."""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML configuration file.")
    @click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None, help="Write output here instead of stdout.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
    @click.option("--seed", type=int, default=None, help="Override the configured seed.")
    @click.option("--oracle", type=click.Choice(["direct", "none"]), default="direct", show_default=True,
                  help="Cross-check against a direct computation.")
    @click.pass_context
    @wraps(fn)
    def wrapper(ctx, config_path, out, fmt, seed, oracle, **kwargs):
        ctx.obj = {"out": out, "format": fmt, "oracle": oracle}
        try:
            cfg = load_config(config_path, seed)
            code = fn(ctx, cfg, **kwargs)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)
        except SingularWeight as exc:
            click.echo(f"configuration error: singular weight ({exc})", err=True)
            ctx.exit(EXIT_CONFIG)
        except ConvergenceBudgetExceeded as exc:
            click.echo(f"precision budget exceeded: {exc}", err=True)
            ctx.exit(EXIT_BUDGET)
        except IdentityViolation as exc:
            click.echo(f"identity violation: {exc}", err=True)
            ctx.exit(EXIT_VIOLATION)
        ctx.exit(code or EXIT_OK)

    return wrapper


def _setup(cfg) -> LocalSetup:
    return LocalSetup(cfg["field"]["D"], cfg["prime"], cfg["precision"])


def _setup_json(S: LocalSetup) -> dict:
    return {"D": S.field.D, "p": S.p, "M": S.M, "kind": S.splitting.kind, "uniformizers": S.uniformizers.to_json()}


@click.group()
def main():
    """p-adic Hilbert modular forms over a real quadratic field: experiments and self-test."""


# -- commands --------------------------------------------------------------------


@main.command()
@click.option("--jobs", type=int, default=None, help="Worker processes (overrides selftest.jobs).")
@_command
def selftest(ctx, cfg, jobs):
    """Run the acceptance suite and emit a report."""
    suite = suite_config(cfg)
    results = run_suite(suite, only=cfg["selftest"]["criteria"], jobs=jobs or cfg["selftest"]["jobs"])
    for r in results:
        click.echo(r.line(), err=True)
    passed = all(r.passed for r in results)
    doc = {"seed": suite.seed, "config": suite.to_json(), "passed": passed, "criteria": [r.to_json() for r in results]}
    rows = [{"criterion": r.number, "title": r.title, "passed": r.passed, "cases": r.cases} for r in results]
    _emit(ctx, doc, rows)
    return EXIT_OK if passed else EXIT_VIOLATION


@main.command()
@_command
def iterate(ctx, cfg):
    """Apply nabla^s to a depleted form through its series and report diagnostics."""
    it = cfg["iterate"]
    S = _setup(cfg)
    rng = random.Random(cfg["seed"])
    T = it["trace_bound"]
    if it["form"] == "eigenform":
        g = synthetic_eigenform(random_eigendata(S, rng), S, T)
    else:
        g = _random_qexp(S, T, rng)
    g = deplete(g)
    h = noc_from_modular(g, Weight.classical(S, it["weight"]))
    target = it["target"] or cfg["precision"]
    plans = [IterationPlan.for_target(s, v, target, S.ctx) for s, v in enumerate(it["exponent"])]
    result, diags = nabla_s_report(h, plans, diagnostics=True)
    certified = min(d.certified_precision for d in diags)
    doc = {
        "setup": _setup_json(S),
        "weight": list(it["weight"]),
        "exponent": list(it["exponent"]),
        "input": g.to_json(),
        "output": result.to_json(),
        "certified_precision": certified,
        "diagnostics": [d.to_json() for d in diags],
    }
    code = EXIT_OK
    if ctx.obj["oracle"] == "direct":
        direct = nabla_classical(h, it["exponent"])
        resid = (result - direct).min_valuation()
        agrees = resid >= certified and result.weight == direct.weight
        doc["oracle"] = {"mode": "direct", "residual_valuation": resid, "agrees": agrees}
        if not agrees:
            click.echo(f"identity violation: series and direct iteration differ at valuation {resid}", err=True)
            code = EXIT_VIOLATION
    _emit(ctx, doc, _noc_rows(result))
    return code


@main.command()
@_command
def euler(ctx, cfg):
    """Tabulate interpolation factors over t and random Hecke data, checked through both routes."""
    eu = cfg["euler"]
    S = _setup(cfg)
    rng = random.Random(cfg["seed"])
    rows, reports = [], []
    failed = False
    for t in eu["t"]:
        for n in range(eu["draws"]):
            g, f, other = random_draw(S, rng)
            split = S.splitting.is_split
            Ep = euler_Ep(g.p_roots, 2 * t, split)
            E0 = euler_E0(g.p_roots, 2 * t) if split else None
            a, b = f.p_roots[0]
            E1 = euler_E1(a + b, f.chi_p[0], 0, S.p)
            right = interpolation_factor(Ep, E1, a, b, E0)
            row = {"kind": S.splitting.kind, "p": S.p, "t": t, "draw": n, "bracket": _number(right)}
            if ctx.obj["oracle"] == "direct":
                report = verify_depletion_identities(S, g, f, t, other_data=other, min_digits=eu["min_digits"])
                reports.append(report.to_json())
                row.update({
                    "pairing": _number(report.factor_left),
                    "passed": report.passed,
                    "min_residual_valuation": min(c.residual_valuation for c in report.checks),
                    "digits_budget": report.digits_budget,
                })
                failed |= not report.passed
            rows.append(row)
    doc = {"setup": _setup_json(S), "rows": rows, "reports": reports}
    _emit(ctx, doc, rows)
    return EXIT_VIOLATION if failed else EXIT_OK


@main.command()
@_command
def project(ctx, cfg):
    """Split a random nearly-overconvergent form over Q into modular part plus nabla image."""
    pr = cfg["project"]
    p, M = cfg["prime"], cfg["precision"]
    space = RationalSetup(PadicCtx(p, 1, M))
    rng = random.Random(cfg["seed"])
    w = space.ctx(pr["weight"] - 2)
    N = pr["order"]
    h, g0, _ = projection_input(space, rng, w, N, pr["trace_bound"])
    h0, phi, loss = oc_project(h)
    lam = lambda_denominator(Weight((w,), (0,)), N).valuation() if N else 0
    doc = {
        "setup": {"p": p, "M": M},
        "weight": pr["weight"],
        "order": N,
        "input": h.to_json(),
        "modular": h0.to_json(),
        "primitive": phi.to_json(),
        "loss_digits": loss,
        "expected_loss_digits": N + lam if N else 0,
    }
    code = EXIT_OK
    if ctx.obj["oracle"] == "direct":
        from .connection import nabla_sigma

        rebuilt = noc_from_modular(h0, h.weight, N) + (nabla_sigma(phi, 0) if N else h.scale(0))
        resid = (rebuilt - h).min_valuation()
        agrees = resid >= M - loss and (g0 is None or (h0 - g0).min_valuation() >= M - loss)
        doc["oracle"] = {"mode": "direct", "residual_valuation": resid, "required": M - loss, "agrees": agrees}
        if not agrees:
            code = EXIT_VIOLATION
    rows = _qexp_rows(space, h0, part="modular") + [dict(r, part="primitive") for r in _noc_rows(phi)]
    rows = [{"part": r["part"], "degree": r.get("degree", "[]"), "index": r["index"], "value": r["value"]} for r in rows]
    _emit(ctx, doc, rows)
    return code


@main.command(name="deplete")
@_command
def deplete_cmd(ctx, cfg):
    """Deplete a synthetic eigenform at the chosen primes above p."""
    de = cfg["deplete"]
    S = _setup(cfg)
    primes = list(S.primes) if de["primes"] is None else de["primes"]
    if any(i not in S.primes for i in primes):
        raise ConfigError(f"deplete.primes must be drawn from {list(S.primes)}")
    rng = random.Random(cfg["seed"])
    g = synthetic_eigenform(random_eigendata(S, rng), S, de["trace_bound"])
    dep = deplete(g, primes)
    expected = {b for b in g.support() if not any(S.in_prime(b, i) for i in primes)}
    doc = {
        "setup": _setup_json(S),
        "primes": primes,
        "input": g.to_json(),
        "output": dep.to_json(),
        "support_matches": dep.support() == expected,
    }
    code = EXIT_OK if doc["support_matches"] else EXIT_VIOLATION
    if ctx.obj["oracle"] == "direct":
        checks = []
        for i in primes:
            via = deplete_via_operators(g, i)
            checks.append({"prime": i, "window": via.trace_bound, "agrees": deplete(g, [i]).truncate(via.trace_bound) == via})
        doc["oracle"] = {"mode": "direct", "per_prime": checks, "agrees": all(c["agrees"] for c in checks)}
        if not doc["oracle"]["agrees"]:
            code = EXIT_VIOLATION
    _emit(ctx, doc, _qexp_rows(S, dep))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
