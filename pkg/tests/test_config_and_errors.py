# tests/test_config_and_errors.py

import math

import numpy as np
import pytest

from error_handler import (
    BranchDomainError,
    ConvergenceError,
    DomainError,
    RootFindingError,
    UsageError,
    clear_error_history,
    exit_code_for,
    get_error_history,
    handle_error,
)
from gd_fractal_config import ExperimentConfig, RasterSettings, Settings, load_key_value_file
from quotient_dynamics import Q, QuotientParams, QuotientState, QuotientTolerances
from scalar_dynamics import LOSS_TOL_PRESETS


# =========================================================================
# 例外と終了コード
# =========================================================================

@pytest.mark.parametrize("error, code", [
    (UsageError("x"), 2),
    (DomainError("x"), 3),
    (BranchDomainError("x"), 3),
    (RootFindingError("x"), 4),
    (ConvergenceError("x"), 4),
    (FileNotFoundError("x"), 5),
    (RuntimeError("x"), 1),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code


def test_handle_error_records_history():
    clear_error_history()
    code = handle_error(DomainError("η が範囲外"), {"eta": 2.0, "grid": np.zeros((40, 40))})
    assert code == 3
    history = get_error_history()
    assert len(history) == 1
    assert history[0]["error_type"] == "DomainError"
    assert history[0]["context"]["grid"] == "ndarray(shape=(40, 40), dtype=float64)"


def test_error_history_is_bounded():
    clear_error_history()
    for k in range(15):
        handle_error(UsageError(f"e{k}"))
    history = get_error_history()
    assert len(history) == 10
    assert history[-1]["error_message"] == "e14"


def test_branch_error_reports_step():
    e = BranchDomainError("G1 が定義されません", branch="G1", step=4)
    assert str(e).endswith("(step=4)")
    assert e.branch == "G1"
    assert isinstance(e, DomainError)


def test_root_finding_error_reports_residuals():
    e = RootFindingError("求根に失敗", [1e-3, 2e-5])
    assert "1.000e-03" in str(e)
    assert e.residuals == [1e-3, 2e-5]

# =========================================================================
# 設定
# =========================================================================

def test_default_settings_are_valid():
    status = Settings().get_validation_status()
    assert status["valid"], status["errors"]


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("GDFRACTAL_THREADS", "3")
    monkeypatch.setenv("GDFRACTAL_DEBUG", "true")
    monkeypatch.setenv("GDFRACTAL_OUTPUT_DIR", str(tmp_path))
    s = Settings()
    assert s.raster.workers == 3
    assert s.app.debug_mode is True
    assert s.app.output_dir == str(tmp_path)


def test_bad_thread_count_is_ignored(monkeypatch):
    monkeypatch.setenv("GDFRACTAL_THREADS", "many")
    assert Settings().raster.workers == RasterSettings().workers


def test_env_override_is_kept_over_later_updates(monkeypatch):
    monkeypatch.setenv("GDFRACTAL_THREADS", "3")
    s = Settings()
    assert s.is_env_override("raster.workers")
    s.update_setting("raster", "workers", "8")
    assert s.raster.workers == 3
    assert not s.is_env_override("raster.rows_per_block")


def test_geometry_settings_become_tolerances():
    s = Settings()
    s.update_setting("geometry", "branch_tie_tol", "1e-10")
    assert s.geometry.as_tolerances() == QuotientTolerances(1e-9, 1e-12, 1e-12, 1e-10)


def test_radicand_clamp_setting_changes_domain_check():
    q = QuotientParams(0.5, 0.1)
    # w² − 16μz = −1e-9
    s = QuotientState(1.0, math.sqrt(8.0 - 1e-9))
    with pytest.raises(DomainError):
        Q(q, s, Settings().geometry.as_tolerances())
    loose = Settings()
    loose.update_setting("geometry", "radicand_clamp", 1e-6)
    assert Q(q, s, loose.geometry.as_tolerances()) == pytest.approx(s.w)


def test_jacobi_settings_kwargs():
    s = Settings()
    s.update_setting("jacobi", "max_sweeps", "7")
    assert s.jacobi.as_kwargs() == {"max_sweeps": 7, "off_tol": 1e-13}


def test_loss_tol_preset_setting():
    s = Settings()
    assert s.simulation.as_step_kwargs()["loss_tol"] == 1e-8
    s.update_setting("simulation", "loss_tol_preset", "experiment")
    assert s.simulation.as_step_kwargs()["loss_tol"] == LOSS_TOL_PRESETS["experiment"]
    s.update_setting("simulation", "loss_tol_preset", "loose")
    assert not s.get_validation_status()["valid"]


def test_loss_tol_preset_from_environment(monkeypatch):
    monkeypatch.setenv("GDFRACTAL_LOSS_TOL_PRESET", "experiment")
    assert Settings().simulation.as_step_kwargs()["loss_tol"] == LOSS_TOL_PRESETS["experiment"]


def test_update_setting_coerces_strings():
    s = Settings()
    s.update_setting("simulation", "max_iters", "250")
    s.update_setting("simulation", "eta", "0.25")
    s.update_setting("app", "debug_mode", "true")
    assert s.simulation.max_iters == 250
    assert s.simulation.eta == 0.25
    assert s.app.debug_mode is True


def test_update_setting_rejects_unknown_or_bad_values():
    s = Settings()
    with pytest.raises(ValueError):
        s.update_setting("simulation", "nope", 1)
    with pytest.raises(UsageError):
        s.update_setting("simulation", "max_iters", "ten")


def test_invalid_values_show_in_validation_status():
    s = Settings()
    s.update_setting("simulation", "eta", -1.0)
    assert not s.get_validation_status()["valid"]


def test_save_and_load_settings(tmp_path):
    s = Settings()
    s.update_setting("raster", "rows_per_block", 7)
    path = tmp_path / "settings.json"
    s.save_to_file(str(path))
    loaded = Settings()
    loaded.load_from_file(str(path))
    assert loaded.raster.rows_per_block == 7

# =========================================================================
# key=value 設定ファイル
# =========================================================================

def test_key_value_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# 基本設定\n"
        "eta = 0.2\n"
        "x-min=-4.5   # 窓\n"
        "simulation.max_iters=123\n"
        "\n",
        encoding="utf-8",
    )
    s = Settings()
    params = load_key_value_file(str(path), s)
    assert params == {"eta": "0.2", "x_min": "-4.5"}
    assert s.simulation.max_iters == 123


def test_key_value_file_errors(tmp_path):
    with pytest.raises(UsageError):
        load_key_value_file(str(tmp_path / "missing.conf"))
    bad = tmp_path / "bad.conf"
    bad.write_text("just words\n", encoding="utf-8")
    with pytest.raises(UsageError):
        load_key_value_file(str(bad))
    unknown = tmp_path / "unknown.conf"
    unknown.write_text("simulation.nope=1\n", encoding="utf-8")
    with pytest.raises(UsageError):
        load_key_value_file(str(unknown), Settings())

# =========================================================================
# 実験パラメータ
# =========================================================================

def test_experiment_config_getters():
    cfg = ExperimentConfig("critical-eta", {"y": "1", "u": "1, 0", "nx": "40"})
    assert cfg.get_float("y") == 1.0
    assert cfg.get_floats("u") == [1.0, 0.0]
    assert cfg.get_int("nx") == 40
    assert cfg.get_float("eta", 0.5) == 0.5
    with pytest.raises(UsageError):
        cfg.get_float("eta")
    with pytest.raises(UsageError):
        ExperimentConfig("x", {"u": "a,b"}).get_floats("u")


@pytest.mark.parametrize("params", [
    {"nx": 0},
    {"d": "0"},
    {"eta": -0.1},
    {"lam": -1},
    {"period": 13},
    {"x_min": 1.0, "x_max": 0.0},
])
def test_experiment_config_validate_rejects(params):
    with pytest.raises(UsageError):
        ExperimentConfig("basin", params).validate()


def test_experiment_config_validate_seed_and_workers():
    with pytest.raises(UsageError):
        ExperimentConfig("basin", rng_seed=-1).validate()
    with pytest.raises(UsageError):
        ExperimentConfig("basin", workers=0).validate()
    cfg = ExperimentConfig("basin", {"nx": 10, "period": 3}, rng_seed=5)
    cfg.validate()
    assert cfg.to_metadata() == {"command": "basin", "rng_seed": 5, "params": {"nx": 10, "period": 3}}
