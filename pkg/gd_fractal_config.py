# gd_fractal_config.py - 統合設定管理
"""
勾配降下ダイナミクス実験ツール - 設定管理
環境変数・設定ファイル（JSON / key=value）・設定検証を提供
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

from error_handler import UsageError
from quotient_dynamics import QuotientTolerances
from scalar_dynamics import LOSS_TOL_PRESETS

logger = logging.getLogger(__name__)

# =========================================================================
# 設定データクラス定義
# =========================================================================

@dataclass
class SimulationSettings:
    """GD軌道シミュレーションの停止規則

    loss_tol_preset を指定すると loss_tol はプリセットの値になる。
    """
    eta: float = 0.2
    max_iters: int = 1000
    loss_tol: float = 1e-8
    divergence_threshold: float = 100.0
    saddle_tol: float = 1e-8
    loss_tol_preset: Optional[str] = None

    def as_step_kwargs(self) -> Dict[str, Any]:
        loss_tol = self.loss_tol
        if self.loss_tol_preset is not None:
            if self.loss_tol_preset not in LOSS_TOL_PRESETS:
                raise UsageError(f"不明な loss_tol プリセット: {self.loss_tol_preset}"
                                 f"（有効: {', '.join(LOSS_TOL_PRESETS)}）")
            loss_tol = LOSS_TOL_PRESETS[self.loss_tol_preset]
        return {
            "eta": self.eta,
            "max_iters": self.max_iters,
            "loss_tol": loss_tol,
            "divergence_threshold": self.divergence_threshold,
            "saddle_tol": self.saddle_tol,
        }


@dataclass
class GeometrySettings:
    """商力学系の許容誤差"""
    tol_verify: float = 1e-9
    tol_geom: float = 1e-12
    radicand_clamp: float = 1e-12
    branch_tie_tol: float = 1e-12

    def as_tolerances(self) -> QuotientTolerances:
        return QuotientTolerances(
            tol_verify=self.tol_verify,
            tol_geom=self.tol_geom,
            radicand_clamp=self.radicand_clamp,
            branch_tie=self.branch_tie_tol,
        )


@dataclass
class RasterSettings:
    """ラスタ化の並列設定"""
    workers: int = 1
    rows_per_block: int = 64
    progress: bool = True


@dataclass
class BoxCountSettings:
    """ボックスカウントの幅 2^-min_exponent ... 2^-max_exponent"""
    min_exponent: int = 2
    max_exponent: int = 8

    @property
    def widths(self) -> List[float]:
        return [2.0 ** -k for k in range(self.min_exponent, self.max_exponent + 1)]


@dataclass
class JacobiSettings:
    """Jacobi SVD の反復上限"""
    max_sweeps: int = 100
    off_tol: float = 1e-13

    def as_kwargs(self) -> Dict[str, Any]:
        return {"max_sweeps": self.max_sweeps, "off_tol": self.off_tol}


@dataclass
class AppSettings:
    """アプリケーション設定"""
    debug_mode: bool = False
    output_dir: str = "outputs"
    rng_seed: int = 0
    colormap: str = "viridis"


# =========================================================================
# 統合設定クラス
# =========================================================================

_SECTIONS = ("simulation", "geometry", "raster", "boxcount", "jacobi", "app")


@dataclass
class Settings:
    """統合設定管理クラス"""
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    geometry: GeometrySettings = field(default_factory=GeometrySettings)
    raster: RasterSettings = field(default_factory=RasterSettings)
    boxcount: BoxCountSettings = field(default_factory=BoxCountSettings)
    jacobi: JacobiSettings = field(default_factory=JacobiSettings)
    app: AppSettings = field(default_factory=AppSettings)

    # メタデータ
    version: str = "1.0.0"
    environment: str = "development"

    def __post_init__(self):
        """初期化後処理"""
        self._load_from_environment()
        self._validate_settings()

    def _load_from_environment(self):
        """環境変数から設定を読み込み（反映したキーは env_overrides に残す）"""
        self._env_overrides: Set[str] = set()
        threads = os.getenv("GDFRACTAL_THREADS")
        if threads:
            try:
                self.raster.workers = int(threads)
                self._env_overrides.add("raster.workers")
            except ValueError:
                logger.warning(f"⚠️ GDFRACTAL_THREADS が整数ではありません: {threads!r}")
        if os.getenv("GDFRACTAL_LOSS_TOL_PRESET"):
            self.simulation.loss_tol_preset = os.getenv("GDFRACTAL_LOSS_TOL_PRESET")
            self._env_overrides.add("simulation.loss_tol_preset")
        if os.getenv("GDFRACTAL_DEBUG"):
            self.app.debug_mode = os.getenv("GDFRACTAL_DEBUG").lower() == "true"
        if os.getenv("GDFRACTAL_OUTPUT_DIR"):
            self.app.output_dir = os.getenv("GDFRACTAL_OUTPUT_DIR")
        if os.getenv("GDFRACTAL_ENV"):
            self.environment = os.getenv("GDFRACTAL_ENV")

    def _validate_settings(self):
        """設定値の検証"""
        errors = []
        warnings = []

        sim = self.simulation
        if sim.eta <= 0:
            errors.append("simulation.eta は正の値が必要です")
        if sim.loss_tol <= 0:
            errors.append("simulation.loss_tol は正の値が必要です")
        if sim.divergence_threshold <= sim.loss_tol:
            errors.append("simulation.divergence_threshold は loss_tol より大きくしてください")
        if sim.max_iters < 0:
            errors.append("simulation.max_iters は 0 以上が必要です")

        if self.raster.workers < 1:
            errors.append("raster.workers は 1 以上が必要です")
        elif self.raster.workers > (os.cpu_count() or 1) * 4:
            warnings.append(f"raster.workers={self.raster.workers} は CPU 数に比べて多すぎます")
        if self.raster.rows_per_block < 1:
            errors.append("raster.rows_per_block は 1 以上が必要です")

        bc = self.boxcount
        if bc.max_exponent - bc.min_exponent < 1:
            errors.append("boxcount は 2 種類以上の幅が必要です")

        if sim.loss_tol_preset is not None and sim.loss_tol_preset not in LOSS_TOL_PRESETS:
            errors.append(f"simulation.loss_tol_preset は {', '.join(LOSS_TOL_PRESETS)} のいずれかです")

        if self.jacobi.max_sweeps < 1:
            errors.append("jacobi.max_sweeps は 1 以上が必要です")
        if self.jacobi.off_tol <= 0:
            errors.append("jacobi.off_tol は正の値が必要です")
        if not 0 <= self.app.rng_seed < 2 ** 64:
            errors.append("app.rng_seed は 64bit 非負整数で指定してください")

        for name in ("tol_verify", "tol_geom", "radicand_clamp"):
            if getattr(self.geometry, name) <= 0:
                errors.append(f"geometry.{name} は正の値が必要です")
        if self.geometry.tol_verify > 1e-6:
            warnings.append("geometry.tol_verify が緩すぎます（逆像検証の信頼性が下がります）")

        self._validation_errors = errors
        self._validation_warnings = warnings

        if errors and self.app.debug_mode:
            logger.debug(f"設定エラー: {errors}")
        if warnings and self.app.debug_mode:
            logger.debug(f"設定警告: {warnings}")

    def get_validation_status(self) -> Dict[str, Any]:
        """検証ステータス取得"""
        return {
            "valid": len(self._validation_errors) == 0,
            "errors": getattr(self, '_validation_errors', []),
            "warnings": getattr(self, '_validation_warnings', []),
        }

    def to_dict(self) -> Dict[str, Any]:
        """辞書形式で設定を出力"""
        return dataclasses.asdict(self)

    def save_to_file(self, filepath: str):
        """設定をJSONファイルに保存"""
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)

    def load_from_file(self, filepath: str):
        """JSONファイルから設定を読み込み"""
        if not Path(filepath).exists():
            return

        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)

        for section in _SECTIONS:
            for key, value in data.get(section, {}).items():
                target = getattr(self, section)
                if hasattr(target, key):
                    setattr(target, key, value)

        self.version = data.get('version', self.version)
        self.environment = data.get('environment', self.environment)

        # 環境変数を優先
        self._load_from_environment()
        self._validate_settings()

    def is_env_override(self, name: str) -> bool:
        """`section.key` が環境変数で決まっているか"""
        return name in getattr(self, "_env_overrides", set())

    def update_setting(self, section: str, key: str, value: Any):
        """動的設定更新（文字列は既存値の型に合わせて変換。環境変数で決まったキーは変えない）"""
        if section not in _SECTIONS or not hasattr(getattr(self, section), key):
            raise ValueError(f"不正な設定: {section}.{key}")
        if self.is_env_override(f"{section}.{key}"):
            logger.info(f"ℹ️ {section}.{key} は環境変数の値を優先します（{value!r} は無視）")
            return
        target = getattr(self, section)
        setattr(target, key, _coerce(value, getattr(target, key), f"{section}.{key}"))
        self._validate_settings()

        if self.app.debug_mode:
            logger.debug(f"設定更新: {section}.{key} = {value}")


def _coerce(value: Any, current: Any, name: str) -> Any:
    """key=value 由来の文字列を既存値の型へ変換"""
    if not isinstance(value, str):
        return value
    try:
        if isinstance(current, bool):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(value)
            return value.lower() in ("true", "1")
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
    except ValueError:
        raise UsageError(f"{name} の値を解釈できません: {value!r}")
    return value


# =========================================================================
# 実験パラメータ（key=value 設定ファイル対応）
# =========================================================================

@dataclass
class ExperimentConfig:
    """コマンドごとのパラメータ記録（rng_seed は常に保持）"""
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    rng_seed: int = 0
    workers: int = 1

    def get(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        value = self.params.get(key, default)
        if value is None:
            raise UsageError(f"--{key.replace('_', '-')} が必要です")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise UsageError(f"{key} は数値で指定してください: {value!r}")

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        value = self.params.get(key, default)
        if value is None:
            raise UsageError(f"--{key.replace('_', '-')} が必要です")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise UsageError(f"{key} は整数で指定してください: {value!r}")

    def get_floats(self, key: str, default: Optional[List[float]] = None) -> List[float]:
        """カンマ区切りの数値列"""
        value = self.params.get(key, default)
        if value is None:
            raise UsageError(f"--{key.replace('_', '-')} が必要です")
        if isinstance(value, str):
            try:
                return [float(v) for v in value.split(",") if v.strip()]
            except ValueError:
                raise UsageError(f"{key} はカンマ区切りの数値で指定してください: {value!r}")
        return [float(v) for v in value]

    def validate(self):
        """駆動する演算の前提条件に照らして数値を検査"""
        if not 0 <= self.rng_seed < 2 ** 64:
            raise UsageError("rng_seed は 64bit 非負整数で指定してください")
        if self.workers < 1:
            raise UsageError("workers は 1 以上が必要です")
        for key in ("nx", "ny", "d"):
            if key in self.params and self.get_int(key) < 1:
                raise UsageError(f"{key} は 1 以上が必要です: {self.params[key]}")
        for key in ("eta",):
            if key in self.params and self.get_float(key) <= 0:
                raise UsageError(f"{key} は正の値が必要です")
        for key in ("lam", "n_steps", "iterations"):
            if key in self.params and self.get_float(key) < 0:
                raise UsageError(f"{key} は 0 以上が必要です")
        if "period" in self.params and not 1 <= self.get_int("period") <= 12:
            raise UsageError("period は 1 から 12 の範囲で指定してください")
        for lo, hi in (("x_min", "x_max"), ("y_min", "y_max")):
            if lo in self.params and hi in self.params and self.get_float(lo) >= self.get_float(hi):
                raise UsageError(f"{lo} < {hi} が必要です")

    def to_metadata(self) -> Dict[str, Any]:
        return {"command": self.command, "rng_seed": self.rng_seed, "params": dict(self.params)}


def load_key_value_file(filepath: str, settings: Optional["Settings"] = None) -> Dict[str, str]:
    """key=value 形式の設定ファイルを読み込む

    `section.key=value` は settings の該当セクションへ反映し、
    それ以外の `key=value` は実験パラメータとして返す。
    """
    path = Path(filepath)
    if not path.exists():
        raise UsageError(f"設定ファイルが見つかりません: {filepath}")

    params: Dict[str, str] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{filepath}:{lineno} は key=value 形式ではありません: {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if "." in key and settings is not None:
                section, name = key.split(".", 1)
                try:
                    settings.update_setting(section, name, value)
                except ValueError as e:
                    if isinstance(e, UsageError):
                        raise
                    raise UsageError(f"{filepath}:{lineno} {e}")
            else:
                params[key.replace("-", "_")] = value
    return params


# =========================================================================
# 設定管理ユーティリティ
# =========================================================================

class ConfigManager:
    """設定管理マネージャー"""

    def __init__(self, config_path: str = "config/settings.json"):
        self._settings: Optional[Settings] = None
        self._config_path = config_path

    def get_settings(self) -> Settings:
        """設定インスタンス取得（シングルトン）"""
        if self._settings is None:
            self._settings = Settings()
            if Path(self._config_path).exists():
                self._settings.load_from_file(self._config_path)
        return self._settings


config_manager = ConfigManager()
