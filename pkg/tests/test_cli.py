import csv
import io
import json

import pytest
import yaml
from click.testing import CliRunner

from padic_hilbert.cli import main
from padic_hilbert.config import DEFAULTS, load_config
from padic_hilbert.errors import ConfigError


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def invoke(args, config=None):
        full = list(args)
        if config is not None:
            path = tmp_path / "cfg.yaml"
            path.write_text(yaml.safe_dump(config))
            full += ["--config", str(path)]
        return runner.invoke(main, full)

    return invoke


SMALL = {"precision": 8}


def test_iterate_succeeds_and_is_deterministic(run):
    cfg = {**SMALL, "iterate": {"trace_bound": 12, "exponent": [1, 1]}}
    a = run(["iterate"], cfg)
    b = run(["iterate"], cfg)
    assert a.exit_code == 0, a.output
    assert a.stdout == b.stdout
    doc = json.loads(a.stdout)
    assert doc["oracle"]["agrees"] and doc["certified_precision"] == 8


def test_seed_changes_output(run):
    cfg = {**SMALL, "iterate": {"trace_bound": 12, "exponent": [1, 0]}}
    a = run(["iterate", "--seed", "1"], cfg)
    b = run(["iterate", "--seed", "2"], cfg)
    assert a.exit_code == b.exit_code == 0
    assert json.loads(a.stdout)["input"] != json.loads(b.stdout)["input"]


def test_csv_output(run):
    res = run(["deplete", "--format", "csv"], {**SMALL, "deplete": {"trace_bound": 16}})
    assert res.exit_code == 0
    rows = list(csv.DictReader(io.StringIO(res.stdout)))
    assert rows and set(rows[0]) == {"index", "value"}


def test_out_file(run, tmp_path):
    out = tmp_path / "o.json"
    res = run(["deplete", "--out", str(out)], {**SMALL, "deplete": {"trace_bound": 16}})
    assert res.exit_code == 0 and res.stdout == ""
    doc = json.loads(out.read_text())
    assert doc["support_matches"] and doc["oracle"]["agrees"]


def test_project_round_trip(run):
    res = run(["project"], {**SMALL, "project": {"weight": 7, "order": 2, "trace_bound": 10}})
    assert res.exit_code == 0, res.output
    doc = json.loads(res.stdout)
    assert doc["oracle"]["agrees"] and doc["loss_digits"] == doc["expected_loss_digits"]


def test_euler_both_routes(run):
    res = run(["euler"], {"precision": 12, "euler": {"t": [0, 1], "draws": 1, "min_digits": 6}})
    assert res.exit_code == 0, res.output
    rows = json.loads(res.stdout)["rows"]
    assert all(r["passed"] and r["pairing"] == r["bracket"] for r in rows)


def test_euler_without_oracle_skips_pairing(run):
    res = run(["euler", "--oracle", "none"], {"precision": 12, "euler": {"t": [1], "draws": 1}})
    assert res.exit_code == 0
    rows = json.loads(res.stdout)["rows"]
    assert "pairing" not in rows[0] and "bracket" in rows[0]


def test_inert_prime(run):
    res = run(["euler"], {"prime": 5, "precision": 12, "euler": {"t": [1], "draws": 1}})
    assert res.exit_code == 0, res.output
    assert json.loads(res.stdout)["setup"]["kind"] == "inert"


@pytest.mark.parametrize(
    "cfg",
    [
        {"prime": 2},
        {"prime": 9},
        {"field": {"D": 3}},
        {"field": {"D": 8}},
        {"prime": 7, "field": {"D": 7}},
        {"precision": 3},
        {"bogus": 1},
        {"iterate": {"weight": [2]}},
        {"iterate": {"target": 40}},
        {"selftest": {"criteria": [11]}},
        {"selftest": {"primes": [7, 2]}},
    ],
)
def test_configuration_errors_exit_2(run, cfg):
    res = run(["iterate"], cfg)
    assert res.exit_code == 2
    assert "configuration error" in res.stderr


def test_singular_projection_weight_exit_2(run):
    res = run(["project"], {**SMALL, "project": {"weight": 3, "order": 2, "trace_bound": 6}})
    assert res.exit_code == 2
    assert "singular weight" in res.stderr


def test_budget_exceeded_exit_3(run):
    res = run(["euler"], {"precision": 5, "euler": {"t": [2], "draws": 1}})
    assert res.exit_code == 3
    assert "precision budget" in res.stderr


def test_oracle_disagreement_exit_1(run, monkeypatch):
    import padic_hilbert.cli as cli

    real = cli.nabla_classical
    monkeypatch.setattr(cli, "nabla_classical", lambda h, e: real(h, e).scale(2))
    res = run(["iterate"], {**SMALL, "iterate": {"trace_bound": 12, "exponent": [1, 0]}})
    assert res.exit_code == 1
    assert json.loads(res.stdout)["oracle"]["agrees"] is False


def test_identity_violation_exit_1(run, monkeypatch):
    import padic_hilbert.cli as cli
    from padic_hilbert.errors import IdentityViolation

    def boom(*args, **kwargs):
        raise IdentityViolation("forced", 3, 0)

    monkeypatch.setattr(cli, "verify_depletion_identities", boom)
    res = run(["euler"], {"precision": 12, "euler": {"t": [0], "draws": 1}})
    assert res.exit_code == 1
    assert "identity violation" in res.stderr


def test_deplete_prime_out_of_range(run):
    res = run(["deplete"], {**SMALL, "deplete": {"trace_bound": 16, "primes": [3]}})
    assert res.exit_code == 2


def test_unreadable_or_invalid_config(run, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("prime: [unclosed")
    res = CliRunner().invoke(main, ["iterate", "--config", str(bad)])
    assert res.exit_code == 2
    res = CliRunner().invoke(main, ["iterate", "--config", str(tmp_path / "missing.yaml")])
    assert res.exit_code == 2


def test_selftest_subset(run):
    res = run(["selftest"], {"selftest": {"criteria": [4, 10], "kernel_draws": 20, "closed_form_draws": 2}})
    assert res.exit_code == 0, res.output
    doc = json.loads(res.stdout)
    assert [c["number"] for c in doc["criteria"]] == [4, 10] and doc["passed"]
    assert "criterion  4 [PASS]" in res.stderr


def test_load_config_defaults_and_overrides(tmp_path):
    cfg = load_config(None)
    assert cfg["prime"] == DEFAULTS["prime"] and cfg["iterate"]["target"] is None
    assert load_config(None, seed=5)["seed"] == 5
    path = tmp_path / "c.yaml"
    path.write_text("selftest:\n  kernel_draws: 7\n")
    assert load_config(path)["selftest"]["kernel_draws"] == 7
    path.write_text("selftest:\n  nope: 7\n")
    with pytest.raises(ConfigError):
        load_config(path)
