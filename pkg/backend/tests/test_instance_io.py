import json

import numpy as np
import pandas as pd
import pytest

from app.core.config import DEFAULT_CAP_N, get_settings
from app.core.errors import ConfigError, InstanceParseError, MassNotOneError
from app.crud.instance import (
    SWEEP_COLUMNS,
    dumps_report,
    load_instance,
    load_report,
    read_plan_csv,
    write_plan_csv,
    write_report,
    write_sweep_csv,
)
from app.models.grid import make_grid, monotone_plan
from app.schemas import CheckResult, SweepRow, SweepSummary, VerifyReport


def _write(tmp_path, payload, name="instance.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


# ---------------- Instances ----------------
def test_bundled_instances_load(instances_dir):
    for path in sorted(instances_dir.glob("*.json")):
        instance, mu, nu = load_instance(path)
        assert mu.total_mass == pytest.approx(1.0, abs=1e-12)
        assert nu.total_mass == pytest.approx(1.0, abs=1e-12)


def test_inline_samples(tmp_path):
    path = _write(tmp_path, {
        "mu": {"samples": [0.0, 0.25, 0.75, 1.0], "bin_count": 2},
        "nu": {"breakpoints": [0.0, 1.0], "densities": [1.0]},
    })
    _, mu, _ = load_instance(path)
    np.testing.assert_allclose(mu.densities, [1.0, 1.0])


def test_samples_file_is_relative_to_instance(tmp_path):
    (tmp_path / "draws.txt").write_text("# draws\n0.0\n0.25\n0.75\n1.0\n")
    path = _write(tmp_path, {
        "mu": {"samples_file": "draws.txt", "bin_count": 2},
        "nu": {"breakpoints": [0.0, 1.0], "densities": [1.0]},
    })
    _, mu, _ = load_instance(path)
    np.testing.assert_allclose(mu.densities, [1.0, 1.0])


def test_malformed_json(tmp_path):
    with pytest.raises(InstanceParseError, match="malformed JSON"):
        load_instance(_write(tmp_path, "{ not json"))


def test_missing_file(tmp_path):
    with pytest.raises(InstanceParseError, match="no such file"):
        load_instance(tmp_path / "nowhere.json")


def test_invalid_field_is_named(tmp_path):
    path = _write(tmp_path, {
        "mu": {"breakpoints": [0.0, 1.0], "densities": [1.0]},
        "nu": {"breakpoints": [0.0, 1.0]},
    })
    with pytest.raises(InstanceParseError, match="'nu'"):
        load_instance(path)


def test_measure_errors_name_the_measure(tmp_path):
    path = _write(tmp_path, {
        "mu": {"breakpoints": [0.0, 1.0], "densities": [2.0]},
        "nu": {"breakpoints": [0.0, 1.0], "densities": [1.0]},
    })
    with pytest.raises(MassNotOneError, match="^mu: "):
        load_instance(path)


# ---------------- Reports ----------------
def _verify_report():
    return VerifyReport(label="x", quick=True, passed=False, checks=[
        CheckResult(name="a", passed=True, value=1.0, threshold=1e-9),
        CheckResult(name="b", passed=False, value=float("nan"), detail="why"),
    ])


def test_report_float_format():
    text = dumps_report(_verify_report())
    assert '"value": 1.0,' in text
    assert '"threshold": 1.0000000000000001e-09' in text
    assert '"value": NaN' in text
    assert text.index('"label"') < text.index('"quick"') < text.index('"checks"')


def test_report_round_trip(tmp_path):
    report = VerifyReport(label="x", quick=False, passed=True,
                          checks=[CheckResult(name="a", passed=True, value=0.1 + 0.2, threshold=0.3)])
    path = tmp_path / "report.json"
    write_report(report, path)
    assert load_report(path, VerifyReport) == report
    assert path.read_text() == dumps_report(report)


# ---------------- CSV ----------------
def test_plan_csv_round_trip(tmp_path, e3):
    plan = monotone_plan(make_grid(*e3, 16))
    path = tmp_path / "plan.csv"
    write_plan_csv(plan, path)
    assert path.read_text().splitlines()[0] == "# n=16 hull=0.0,1.5"
    masses, n, hull = read_plan_csv(path)
    assert n == 16
    assert hull == (0.0, 1.5)
    np.testing.assert_array_equal(masses, plan.masses)


def test_sweep_csv_columns(tmp_path):
    row = SweepRow(eps=0.1, n=256, j_min=1.0, r=0.5, tv=0.01, iters=40, cost_gap=0.0)
    summary = SweepSummary(w1=1.0, massA=0.0, minF_reference=0.0, minF_extrapolated=0.0, slope=0.0,
                           converged=True, records=[row])
    single = tmp_path / "one.csv"
    write_sweep_csv([summary], single)
    assert list(pd.read_csv(single).columns) == SWEEP_COLUMNS
    several = tmp_path / "two.csv"
    write_sweep_csv([summary, summary.model_copy(update={"label": "b"})], several)
    frame = pd.read_csv(several, keep_default_na=False)
    assert list(frame.columns) == ["label"] + SWEEP_COLUMNS
    assert list(frame["label"]) == ["", "b"]


# ---------------- Settings ----------------
def test_settings_defaults(monkeypatch):
    for name in ("MONGE1D_CAP_N", "MONGE1D_TOL", "MONGE1D_MAX_ITER", "MONGE1D_SEED", "MONGE1D_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    settings = get_settings()
    assert settings.cap_n == DEFAULT_CAP_N
    assert settings.log_level == "WARNING"


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("MONGE1D_CAP_N", "512")
    monkeypatch.setenv("MONGE1D_LOG_LEVEL", "debug")
    settings = get_settings()
    assert settings.cap_n == 512
    assert settings.log_level == "DEBUG"


def test_settings_reject_bad_value(monkeypatch):
    monkeypatch.setenv("MONGE1D_TOL", "-1")
    with pytest.raises(ConfigError, match="MONGE1D_TOL"):
        get_settings()
