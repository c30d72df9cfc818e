"""YAML run configuration: defaults, merging and validation.

Validation only inspects the configuration; nothing is computed before it
succeeds, so a bad prime or field is reported as a configuration error.
"""

from __future__ import annotations

import copy
from pathlib import Path

import sympy
import yaml

from .errors import ConfigError, DomainError

DEFAULTS: dict = {
    "field": {"D": 2},
    "prime": 7,
    "precision": 16,
    "seed": 20261015,
    "selftest": {"primes": [7, 5], "criteria": list(range(1, 11)), "jobs": 1},
    "iterate": {
        "weight": [2, 2],
        "exponent": [2, 2],
        "trace_bound": 30,
        "target": None,  # defaults to the working precision
        "form": "eigenform",
    },
    "euler": {"t": [0, 1, 2], "draws": 3, "min_digits": 6},
    "project": {"weight": 7, "order": 2, "trace_bound": 20},
    "deplete": {"trace_bound": 30, "primes": None},
}


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _int(value, name: str, low: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer, got {value!r}")
    if low is not None and value < low:
        raise ConfigError(f"'{name}' must be >= {low}, got {value}")
    return value


def _int_list(value, name: str, low: int | None = None) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{name}' must be a nonempty list")
    return [_int(v, f"{name}[{i}]", low) for i, v in enumerate(value)]


def _check_prime(p, name: str) -> int:
    p = _int(p, name)
    if p == 2:
        raise ConfigError(f"'{name}' = 2 is not supported; use an odd prime")
    if p < 3 or not sympy.isprime(p):
        raise ConfigError(f"'{name}' must be an odd prime, got {p}")
    return p


def _check_field(D) -> int:
    D = _int(D, "field.D", 2)
    if sympy.factorint(D) and max(sympy.factorint(D).values()) > 1:
        raise ConfigError(f"field.D = {D} is not squarefree")
    return D


def _check_unramified(D: int, p: int, name: str) -> None:
    disc = D if D % 4 == 1 else 4 * D
    if disc % p == 0:
        raise ConfigError(f"'{name}' = {p} ramifies in Q(sqrt {D})")


def validate(cfg: dict) -> dict:
    """Type and range checks; returns cfg unchanged or raises ConfigError."""
    p = _check_prime(cfg["prime"], "prime")
    st = cfg["selftest"]
    for i, q in enumerate(st["primes"] if isinstance(st["primes"], list) else [None]):
        _check_prime(q, f"selftest.primes[{i}]")
    D = _check_field(cfg["field"]["D"])
    for name, q in [("prime", p)] + [(f"selftest.primes[{i}]", q) for i, q in enumerate(st["primes"])]:
        _check_unramified(D, q, name)
    M = _int(cfg["precision"], "precision", 4)
    _int(cfg["seed"], "seed", 0)
    from .field import RealQuadField

    try:
        RealQuadField(D)
    except DomainError as exc:
        raise ConfigError(f"field.D = {D}: {exc}") from None
    crit = _int_list(st["criteria"], "selftest.criteria", 1)
    if max(crit) > 10:
        raise ConfigError("selftest.criteria entries must lie in 1..10")
    _int(st["jobs"], "selftest.jobs", 1)
    defaults = _suite_defaults()
    for key, value in st.items():
        if key in ("primes", "criteria", "jobs"):
            continue
        if key not in defaults or key in ("D", "M", "seed"):
            raise ConfigError(f"unknown configuration key 'selftest.{key}'")
        if isinstance(defaults[key], tuple):
            _int_list(value, f"selftest.{key}")
        else:
            _int(value, f"selftest.{key}", 0)

    it = cfg["iterate"]
    _int_list(it["weight"], "iterate.weight")
    _int_list(it["exponent"], "iterate.exponent", 0)
    if len(it["weight"]) != 2 or len(it["exponent"]) != 2:
        raise ConfigError("iterate.weight and iterate.exponent need one entry per embedding (2)")
    _int(it["trace_bound"], "iterate.trace_bound", 1)
    target = M if it["target"] is None else _int(it["target"], "iterate.target", 1)
    if target > M:
        raise ConfigError(f"iterate.target = {target} exceeds precision {M}")
    if it["form"] not in ("eigenform", "random"):
        raise ConfigError("iterate.form must be 'eigenform' or 'random'")

    eu = cfg["euler"]
    _int_list(eu["t"], "euler.t", 0)
    _int(eu["draws"], "euler.draws", 1)
    _int(eu["min_digits"], "euler.min_digits", 1)

    pr = cfg["project"]
    _int(pr["weight"], "project.weight")
    _int(pr["order"], "project.order", 0)
    _int(pr["trace_bound"], "project.trace_bound", 1)

    de = cfg["deplete"]
    _int(de["trace_bound"], "deplete.trace_bound", 1)
    if de["primes"] is not None:
        _int_list(de["primes"], "deplete.primes", 0)
    return cfg


def _suite_defaults() -> dict:
    from .selftest import SuiteConfig

    return SuiteConfig().__dict__


def load_config(path: str | Path | None = None, seed: int | None = None) -> dict:
    """Defaults, overlaid with the YAML file at ``path`` and the seed override, then validated."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a mapping")
    base = copy.deepcopy(DEFAULTS)
    # the selftest section also accepts any suite parameter
    extra_suite = {k: v for k, v in (data.get("selftest") or {}).items() if k not in base["selftest"]}
    base["selftest"].update({k: None for k in extra_suite})
    cfg = _merge(base, data)
    for k, v in extra_suite.items():
        cfg["selftest"][k] = v
    if seed is not None:
        cfg["seed"] = seed
    return validate(cfg)


def suite_config(cfg: dict):
    """The SuiteConfig described by a validated configuration."""
    from .selftest import SuiteConfig

    fields = SuiteConfig.__dataclass_fields__
    kwargs = {"D": cfg["field"]["D"], "M": cfg["precision"], "seed": cfg["seed"], "primes": tuple(cfg["selftest"]["primes"])}
    for key, value in cfg["selftest"].items():
        if key in fields and key not in kwargs:
            kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return SuiteConfig(**kwargs)
    except TypeError as exc:  # pragma: no cover - guarded by validate
        raise ConfigError(str(exc)) from None
