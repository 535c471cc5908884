# experiment_runner.py
"""
実験コマンドの実行部

CLI の各サブコマンド（basin, quotient-basin, dimension, histogram, slice, orbits,
verify, critical-eta, saddle-basin）の本体。どのコマンドも ExperimentConfig と Settings を
受け取り、成果物（PGM / PPM / CSV）を書き出して結果の辞書を返す。
結果の辞書は main.py が JSON として標準出力へ書く。
"""

import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from boundary_chaos import conjugacy_to_pl, lap_entropy, periodic_orbits, periodic_points
from charting import colorize_channel, colorize_labels, overlay_mask
from criticality import (
    bisect_critical_step,
    critical_step_size,
    prior_step_bound,
    q_bar,
    small_step_thresholds,
)
from data_processing import (
    read_basin_csv,
    write_basin_csv,
    write_basin_pgm,
    write_ppm,
    write_table_csv,
)
from diagnostics import run_suite
from error_handler import UsageError
from fractal_geometry import (
    BasinGrid,
    GridSpec,
    SliceEmbedding,
    box_counting,
    boundary_points,
    count_components,
    extract_boundary,
    occupied_fraction,
    quotient_classifier,
    rasterize,
    scalar_classifier,
    self_similarity_check,
)
from gd_fractal_config import ExperimentConfig, Settings
from matrix_factorization import (
    MatrixProblem,
    deep_slice_classifier,
    matrix_slice_classifier,
    random_frame,
    saddle_basin_points,
    unstable_basin_points,
    w_plane_embedding,
)
from quotient_dynamics import QuotientParams
from scalar_dynamics import LOSS_TOL_PRESETS, OutcomeKind, ScalarProblem, ScalarState, StepConfig, simulate_batch

logger = logging.getLogger(__name__)

# =========================================================================
# 公開済み設定の再現プリセット
# =========================================================================

PRESETS: Dict[str, Dict[str, Any]] = {
    "ellipse": {
        "commands": ("basin",),
        "params": {"y": 1.0, "eta": 0.2, "x_min": -4.5, "x_max": 4.5, "y_min": -4.5, "y_max": 4.5,
                   "nx": 800, "ny": 800, "channel": "norm"},
    },
    "high-dim": {
        "commands": ("basin",),
        "params": {"y": 1.0, "lam": 0.6, "d": 5, "eta": 1.0, "x_min": -4.0, "x_max": 4.0,
                   "y_min": -4.0, "y_max": 4.0, "nx": 600, "ny": 600, "max_iters": 1000,
                   "loss_tol": 1e-6, "divergence_threshold": 100.0, "channel": "u"},
    },
    "lambda-sweep": {
        "commands": ("basin",),
        "params": {"y": 0.8, "lams": "0,0.01,0.1,0.5", "eta": 1.0, "x_min": -4.0, "x_max": 4.0,
                   "y_min": -4.0, "y_max": 4.0, "nx": 600, "ny": 600, "max_iters": 1000,
                   "loss_tol": 1e-6, "fit_dimension": "true"},
    },
    "regularized-basin": {
        "commands": ("basin",),
        "params": {"y": 0.5, "lam": 0.2, "eta": 1.0, "x_min": -4.0, "x_max": 4.0,
                   "y_min": -4.0, "y_max": 4.0, "nx": 800, "ny": 800, "max_iters": 100,
                   "loss_tol": 1e-5, "mode": "selection"},
    },
    "window-histogram": {
        "commands": ("histogram",),
        "params": {"y": 1.0, "eta": 0.2, "x_min": -0.9, "x_max": -0.6, "y_min": -4.55, "y_max": -4.25,
                   "samples_x": 800, "samples_y": 800, "max_iters": 250, "loss_tol": 1e-8,
                   "divergence_threshold": 100.0},
    },
    "quotient-fractal": {
        "commands": ("quotient-basin", "dimension"),
        "params": {"y": 0.5, "lam": 0.2, "eta": 1.0, "x_min": -2.5, "x_max": 3.0, "y_min": 0.0,
                   "y_max": 10.0, "nx": 2000, "ny": 2000, "iterations": 200, "loss_tol": 1e-5},
    },
    "unstable-saddle": {
        "commands": ("saddle-basin",),
        "params": {"y": 1.0, "eta": 0.2, "x_min": -4.5, "x_max": 4.5, "y_min": -4.5, "y_max": 4.5,
                   "nx": 800, "ny": 800, "n_steps": 6},
    },
    "matrix-slices": {
        "commands": ("slice",),
        "params": {"kind": "matrix", "d": 5, "d_y": 4, "lam": 0.0, "eta": 1.0, "x_min": -2.0,
                   "x_max": 2.0, "y_min": -2.0, "y_max": 2.0, "nx": 400, "ny": 400, "loss_tol": 1e-6},
    },
    "matrix-slices-reg": {
        "commands": ("slice",),
        "params": {"kind": "matrix", "d": 5, "y_diag": "0.9,0.8", "lam": 0.5, "eta": 1.0,
                   "x_min": -2.0, "x_max": 2.0, "y_min": -2.0, "y_max": 2.0, "nx": 400, "ny": 400,
                   "loss_tol": 1e-6},
    },
    "deep-slices": {
        "commands": ("slice",),
        "params": {"kind": "deep", "shapes": "2x2,2x2,2x2", "y_diag": "0.9,0.5", "lam": 0.0,
                   "eta": 1.0, "x_min": -2.0, "x_max": 2.0, "y_min": -2.0, "y_max": 2.0,
                   "nx": 400, "ny": 400, "loss_tol": 1e-6},
    },
    "deep-slices-reg": {
        "commands": ("slice",),
        "params": {"kind": "deep", "shapes": "2x2,2x2,2x2", "y_diag": "0.9,0.5", "lam": 0.1,
                   "eta": 1.0, "x_min": -2.0, "x_max": 2.0, "y_min": -2.0, "y_max": 2.0,
                   "nx": 400, "ny": 400, "loss_tol": 1e-6},
    },
}


def apply_preset(name: str, command: str) -> Dict[str, Any]:
    """プリセットのパラメータ（コマンドが対応していなければ UsageError）"""
    if name not in PRESETS:
        raise UsageError(f"不明なプリセット: {name}（有効: {', '.join(PRESETS)}）")
    preset = PRESETS[name]
    if command not in preset["commands"]:
        raise UsageError(f"プリセット {name} は {', '.join(preset['commands'])} 用です")
    return dict(preset["params"])

# =========================================================================
# 共通ヘルパー
# =========================================================================

def _flag(cfg: ExperimentConfig, key: str, default: bool = False) -> bool:
    value = cfg.get(key, default)
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def build_step_config(cfg: ExperimentConfig, settings: Settings, **defaults) -> StepConfig:
    """settings.simulation（loss_tol_preset を含む）を基に、プリセット → パラメータの順で上書きした StepConfig"""
    kwargs = settings.simulation.as_step_kwargs()
    kwargs.update(defaults)
    preset = cfg.get("loss_tol_preset")
    if preset is not None:
        if preset not in LOSS_TOL_PRESETS:
            raise UsageError(f"不明な loss_tol プリセット: {preset}（有効: {', '.join(LOSS_TOL_PRESETS)}）")
        kwargs["loss_tol"] = LOSS_TOL_PRESETS[preset]
    for key in ("eta", "loss_tol", "divergence_threshold", "saddle_tol"):
        if key in cfg.params:
            kwargs[key] = cfg.get_float(key)
    if "max_iters" in cfg.params:
        kwargs["max_iters"] = cfg.get_int("max_iters")
    return StepConfig(**kwargs)


def build_grid(cfg: ExperimentConfig, defaults: Tuple[float, float, float, float, int, int]) -> GridSpec:
    x_min, x_max, y_min, y_max, nx, ny = defaults
    nx, ny = cfg.get_int("nx", nx), cfg.get_int("ny", ny)
    if nx < 1 or ny < 1:
        raise UsageError(f"格子は 1×1 以上が必要です: {nx}×{ny}")
    x_min, x_max = cfg.get_float("x_min", x_min), cfg.get_float("x_max", x_max)
    y_min, y_max = cfg.get_float("y_min", y_min), cfg.get_float("y_max", y_max)
    if not (x_min < x_max and y_min < y_max):
        raise UsageError(f"窓の範囲が不正です: [{x_min}, {x_max}]×[{y_min}, {y_max}]")
    return GridSpec(x_min, x_max, y_min, y_max, nx, ny)


def _output_prefix(cfg: ExperimentConfig, settings: Settings) -> Path:
    out = cfg.get("out")
    if out:
        return Path(out)
    return Path(settings.app.output_dir) / cfg.command.replace("-", "_")


def _raster_kwargs(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    return {
        "workers": cfg.workers,
        "rows_per_block": settings.raster.rows_per_block,
        "progress": settings.raster.progress,
    }


def _save_grid(grid: BasinGrid, prefix: Path, cfg: ExperimentConfig, settings: Settings) -> Dict[str, str]:
    files = {
        "pgm": str(write_basin_pgm(grid, prefix.with_suffix(".pgm"))),
        "csv": str(write_basin_csv(grid, prefix.with_suffix(".csv"), cfg.rng_seed)),
    }
    if grid.channel is not None:
        files["ppm"] = str(write_ppm(colorize_channel(grid, cmap=settings.app.colormap), prefix.with_suffix(".ppm")))
    return files


def _fit_boundary(grid: BasinGrid, settings: Settings, widths: Optional[List[float]] = None,
                  label: int = 1) -> Optional[Dict[str, Any]]:
    mask = extract_boundary(grid, label)
    if not mask.any():
        logger.warning(f"⚠️ ラベル {label} の境界セルがありません")
        return None
    fit = box_counting(boundary_points(grid.spec, mask), widths or settings.boxcount.widths,
                       progress=settings.raster.progress)
    result = fit.to_dict()
    result["boundary_cells"] = int(mask.sum())
    return result


def _dprime_mismatch(p: ScalarProblem, eta: float, grid: BasinGrid) -> float:
    """収束ラベルと解析的な D'_η の食い違うセルの割合"""
    xs, ys = grid.spec.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    S = X * X + Y * Y
    radicand = np.maximum(S * S - 16.0 * p.y * (X * Y - p.y), 0.0)
    inside = S + np.sqrt(radicand) < 8.0 / eta
    return float(np.mean(inside != (grid.labels == 1)))

# =========================================================================
# basin
# =========================================================================

def _basin_embedding(p: ScalarProblem, cfg: ExperimentConfig) -> SliceEmbedding:
    if p.d == 1:
        return SliceEmbedding.scalar_plane(1)
    # d > 1 はシード付きのランダムな 2 次元スライス
    return SliceEmbedding.from_frame(random_frame(2 * p.d, 2, cfg.rng_seed))


def _basin_run(cfg: ExperimentConfig, settings: Settings, lam: float, prefix: Path,
               fit_dimension: bool) -> Dict[str, Any]:
    p = ScalarProblem(y=cfg.get_float("y"), lam=lam, d=cfg.get_int("d", 1))
    c = build_step_config(cfg, settings)
    spec = build_grid(cfg, (-4.0, 4.0, -4.0, 4.0, 600, 600))
    mode = cfg.get("mode", "outcome")
    channel = cfg.get("channel")
    embedding = _basin_embedding(p, cfg)
    logger.info(f"🧪 basin: y={p.y}, λ={lam}, d={p.d}, η={c.eta}, 格子 {spec.nx}×{spec.ny}")

    grid = rasterize(
        spec, scalar_classifier(p, c, embedding, mode=mode, channel=channel),
        meta={"y": p.y, "lam": lam, "d": p.d, "eta": c.eta, "mode": mode},
        **_raster_kwargs(cfg, settings),
    )
    run: Dict[str, Any] = {
        "lam": lam,
        "grid": spec.to_dict(),
        "converged_fraction": grid.fraction(1) if mode == "outcome" else 1.0 - grid.fraction(0),
        "files": _save_grid(grid, prefix, cfg, settings),
    }
    if mode == "outcome":
        run["saddle_fraction"] = grid.fraction(2)
    else:
        run["p_minus_fraction"] = grid.fraction(1)
        run["p_plus_fraction"] = grid.fraction(2)
        rgb = colorize_labels(grid)
        run["files"]["labels_ppm"] = str(write_ppm(rgb, prefix.with_name(prefix.name + "_labels.ppm")))
    if lam == 0 and p.d == 1 and c.eta * abs(p.y) < 1 and mode == "outcome":
        run["dprime_mismatch_fraction"] = _dprime_mismatch(p, c.eta, grid)
    if fit_dimension:
        run["dimension"] = _fit_boundary(grid, settings)
    return run


def cmd_basin(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """(u, v) 平面の収束ラベルのラスタ（lams を与えると λ ごとに実行）"""
    lams = cfg.get_floats("lams") if "lams" in cfg.params else [cfg.get_float("lam", 0.0)]
    prefix = _output_prefix(cfg, settings)
    sweep = len(lams) > 1
    runs = []
    for lam in lams:
        run_prefix = prefix.with_name(f"{prefix.name}_lam{lam:g}".replace(".", "p")) if sweep else prefix
        runs.append(_basin_run(cfg, settings, lam, run_prefix, sweep or _flag(cfg, "fit_dimension")))
    return {"metadata": cfg.to_metadata(), "runs": runs}

# =========================================================================
# quotient-basin / dimension
# =========================================================================

def _quotient_grid(cfg: ExperimentConfig, settings: Settings) -> Tuple[BasinGrid, ScalarProblem, float]:
    p = ScalarProblem(y=cfg.get_float("y"), lam=cfg.get_float("lam", 0.0))
    eta = cfg.get_float("eta", 1.0)
    spec = build_grid(cfg, (-2.5, 3.0, 0.0, 10.0, 500, 500))
    classify = quotient_classifier(p, eta, n_iters=cfg.get_int("iterations", 200),
                                   loss_tol=cfg.get_float("loss_tol", 1e-5))
    logger.info(f"🧪 quotient-basin: y={p.y}, λ={p.lam}, η={eta}, 格子 {spec.nx}×{spec.ny}")
    grid = rasterize(spec, classify, meta={"y": p.y, "lam": p.lam, "eta": eta, "coordinates": "raw"},
                     **_raster_kwargs(cfg, settings))
    return grid, p, eta


def cmd_quotient_basin(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """(u·v, ‖u‖²+‖v‖²) 平面で F を反復した収束ラベルのラスタ"""
    grid, _, _ = _quotient_grid(cfg, settings)
    prefix = _output_prefix(cfg, settings)
    files = _save_grid(grid, prefix, cfg, settings)
    mask = extract_boundary(grid, 1)
    rgb = overlay_mask(colorize_labels(grid), mask)
    files["boundary_ppm"] = str(write_ppm(rgb, prefix.with_name(prefix.name + "_boundary.ppm")))
    return {
        "metadata": cfg.to_metadata(),
        "grid": grid.spec.to_dict(),
        "converged_fraction": grid.fraction(1),
        "boundary_cells": int(mask.sum()),
        "files": files,
    }


def cmd_dimension(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """商ラスタの収束境界のボックスカウント次元（input で既存の CSV も使える）"""
    if cfg.get("input"):
        grid = read_basin_csv(cfg.get("input"))
        p = ScalarProblem(y=cfg.get_float("y", 0.0), lam=cfg.get_float("lam", 0.0))
        eta = cfg.get_float("eta", 1.0)
    else:
        grid, p, eta = _quotient_grid(cfg, settings)

    widths = cfg.get_floats("widths") if "widths" in cfg.params else None
    fit = _fit_boundary(grid, settings, widths)
    if fit is None:
        raise UsageError("境界が空のため次元を推定できません（窓や反復回数を見直してください）")
    result: Dict[str, Any] = {"metadata": cfg.to_metadata(), "grid": grid.spec.to_dict(), "fit": fit}

    if _flag(cfg, "self_similarity"):
        # 生の座標 (u·v, S) → スケール座標 (η(u·v − y), ηS)
        q = QuotientParams.from_problem(p, eta)
        raw = boundary_points(grid.spec, extract_boundary(grid, 1))
        scaled = np.column_stack([eta * (raw[:, 0] - p.y), eta * raw[:, 1]])
        s = grid.spec
        window = GridSpec(eta * (s.x_min - p.y), eta * (s.x_max - p.y), eta * s.y_min, eta * s.y_max, s.nx, s.ny)
        report = self_similarity_check(q, scaled, window=window, tol=settings.geometry.as_tolerances())
        result["self_similarity"] = report.to_dict()
        result["self_similarity"]["cell_diagonal"] = window.cell_diagonal
    return result

# =========================================================================
# histogram
# =========================================================================

HISTOGRAM_COLUMNS = ["x", "y", "outcome", "iterations", "squared_norm", "imbalance"]


def cmd_histogram(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """境界近くの小さな窓から GD を走らせ、収束点のノルム・インバランス・反復回数を表にする"""
    p = ScalarProblem(y=cfg.get_float("y", 1.0), lam=cfg.get_float("lam", 0.0))
    c = build_step_config(cfg, settings, eta=0.2, max_iters=250)
    nx, ny = cfg.get_int("samples_x", 800), cfg.get_int("samples_y", 800)
    if nx < 0 or ny < 0:
        raise UsageError("サンプル数は 0 以上が必要です")
    x_lo, x_hi = cfg.get_float("x_min", -0.9), cfg.get_float("x_max", -0.6)
    y_lo, y_hi = cfg.get_float("y_min", -4.55), cfg.get_float("y_max", -4.25)

    if nx * ny == 0:
        df = pd.DataFrame({col: pd.Series(dtype=float) for col in HISTOGRAM_COLUMNS})
    else:
        X, Y = np.meshgrid(np.linspace(x_lo, x_hi, nx), np.linspace(y_lo, y_hi, ny))
        batch = simulate_batch(p, c, X.reshape(-1, 1), Y.reshape(-1, 1))
        U, V = batch.final_u[:, 0], batch.final_v[:, 0]
        converged = batch.converged
        df = pd.DataFrame({
            "x": X.ravel(),
            "y": Y.ravel(),
            "outcome": pd.Series(batch.kinds).map(lambda code: OutcomeKind.from_code(code).value),
            "iterations": batch.iterations,
            "squared_norm": np.where(converged, U * U + V * V, np.nan),
            "imbalance": np.where(converged, U * U - V * V, np.nan),
        })

    path = _output_prefix(cfg, settings).with_suffix(".csv")
    write_table_csv(df, path, "histogram", cfg.rng_seed)

    norms = df["squared_norm"].dropna()
    bound = 2.0 / c.eta
    summary: Dict[str, Any] = {
        "samples": int(len(df)),
        "converged": int(len(norms)),
        "norm_bound": bound,
    }
    if len(norms):
        lower = 2.0 * abs(p.y)
        summary.update({
            "max_squared_norm": float(norms.max()),
            "min_squared_norm": float(norms.min()),
            "within_bound": bool(norms.max() <= bound + math.sqrt(2.0 * c.loss_tol) * bound),
            "support_fraction": float((norms.max() - norms.min()) / (bound - lower)) if bound > lower else None,
            "median_iterations": float(df.loc[norms.index, "iterations"].median()),
        })
    return {"metadata": cfg.to_metadata(), "summary": summary, "files": {"csv": str(path)}}

# =========================================================================
# slice
# =========================================================================

def _parse_shapes(text: str) -> List[Tuple[int, int]]:
    shapes = []
    for item in str(text).split(","):
        try:
            a, b = item.lower().split("x")
            shapes.append((int(a), int(b)))
        except ValueError:
            raise UsageError(f"shapes は 2x2,2x3 の形式で指定してください: {text!r}")
    return shapes


def _matrix_problem(cfg: ExperimentConfig) -> MatrixProblem:
    if "y_diag" in cfg.params:
        y_diag = cfg.get_floats("y_diag")
    else:
        # 対角成分を [0, 1] から一様に
        y_diag = np.random.default_rng(cfg.rng_seed).uniform(0.0, 1.0, cfg.get_int("d_y", 4)).tolist()
    return MatrixProblem(np.asarray(y_diag), cfg.get_float("lam", 0.0), cfg.get_int("d", len(y_diag)))


def cmd_slice(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """行列・深い分解のパラメータ空間の 2 次元スライス"""
    kind = cfg.get("kind", "matrix")
    c = build_step_config(cfg, settings, eta=1.0)
    spec = build_grid(cfg, (-2.0, 2.0, -2.0, 2.0, 400, 400))
    plane = cfg.get("plane", "random")
    result: Dict[str, Any] = {"metadata": cfg.to_metadata(), "kind": kind, "plane": plane}

    if kind == "matrix":
        p = _matrix_problem(cfg)
        if plane == "w":
            column = cfg.get_int("column", 0)
            embedding = w_plane_embedding(p, column)
        elif plane == "random":
            embedding = SliceEmbedding.from_frame(random_frame(p.n_params, 2, cfg.rng_seed))
        else:
            raise UsageError(f"plane は random か w を指定してください: {plane}")
        classify = matrix_slice_classifier(p, c, embedding)
        result["y_diag"] = p.y_diag.tolist()
        meta = {"kind": kind, "d": p.d, "d_y": p.d_y, "lam": p.lam, "eta": c.eta}
    elif kind == "deep":
        if plane != "random":
            raise UsageError("深い分解のスライスは plane=random のみ対応しています")
        shapes = _parse_shapes(cfg.get("shapes", "2x2,2x2,2x2"))
        y_diag = cfg.get_floats("y_diag", [0.9, 0.5])
        lam = cfg.get_float("lam", 0.0)
        n_params = sum(a * b for a, b in shapes)
        embedding = SliceEmbedding.from_frame(random_frame(n_params, 2, cfg.rng_seed))
        classify = deep_slice_classifier(shapes, y_diag, lam, c, embedding)
        meta = {"kind": kind, "shapes": [f"{a}x{b}" for a, b in shapes], "lam": lam, "eta": c.eta}
    else:
        raise UsageError(f"kind は matrix か deep を指定してください: {kind}")

    logger.info(f"🧪 slice: {kind} ({plane}), 格子 {spec.nx}×{spec.ny}, seed={cfg.rng_seed}")
    grid = rasterize(spec, classify, meta=meta, **_raster_kwargs(cfg, settings))
    result.update({
        "grid": spec.to_dict(),
        "converged_fraction": grid.fraction(1),
        "converged_components": count_components(grid.labels == 1),
        "files": _save_grid(grid, _output_prefix(cfg, settings), cfg, settings),
    })

    if kind == "matrix" and plane == "w":
        # 同じ平面をスカラー問題として直接ラスタ化して比較
        column = cfg.get_int("column", 0)
        scalar = ScalarProblem(y=float(p.y_diag[column]), lam=p.lam)
        direct = rasterize(spec, scalar_classifier(scalar, c), **_raster_kwargs(cfg, settings))
        result["scalar_mismatch_fraction"] = float(np.mean(direct.labels != grid.labels))
    return result

# =========================================================================
# orbits / verify / critical-eta
# =========================================================================

def cmd_orbits(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """境界写像 z³ − 3z の素周期 n の周期軌道とラップ数"""
    n = cfg.get_int("period", 3)
    orbits = periodic_orbits(n)
    laps, entropy = lap_entropy(n)
    result: Dict[str, Any] = {
        "metadata": cfg.to_metadata(),
        "period": n,
        "n_periodic_points": int(periodic_points(n).size),
        "n_prime_orbits": len(orbits),
        "orbits": [o.to_dict() for o in orbits],
        "laps": laps,
        "lap_entropy": entropy,
        "max_cyclic_residual": max((o.max_residual() for o in orbits), default=0.0),
    }
    if n == 3:
        target = float(conjugacy_to_pl(-5.0 / 7.0))
        result["li_yorke_point"] = target
        result["li_yorke_present"] = any(min(abs(z - target) for z in o.points) <= 1e-9 for o in orbits)
    return result


def cmd_verify(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """検証スイートの実行（passed が False なら main は非 0 で終了する）"""
    report = run_suite(cfg.get("suite", "all"), seed=cfg.rng_seed, scale=cfg.get_float("scale", 1.0),
                       settings=settings)
    report["metadata"] = cfg.to_metadata()
    return report


def cmd_critical_eta(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """初期点 (u0, v0) の臨界ステップサイズ η*（λ>0 では小ステップの閾値）"""
    y = cfg.get_float("y")
    u0 = np.asarray(cfg.get_floats("u"))
    v0 = np.asarray(cfg.get_floats("v"))
    if u0.shape != v0.shape:
        raise UsageError(f"u と v の長さが一致しません: {u0.size} vs {v0.size}")
    lam = cfg.get_float("lam", 0.0)
    s0 = ScalarState(u0, v0)
    result: Dict[str, Any] = {"metadata": cfg.to_metadata(), "q_bar": q_bar(y, s0)}

    if lam == 0:
        eta_star = critical_step_size(y, u0, v0)
        result.update({
            "eta_star": eta_star,
            "prior_bound": prior_step_bound(y, u0, v0),
        })
        if _flag(cfg, "bisect"):
            result["eta_bisection"] = bisect_critical_step(ScalarProblem(y=y, d=u0.size), s0)
    else:
        converge, select = small_step_thresholds(y, lam, s0)
        result.update({"eta_converge": converge, "eta_select_p_minus": select})
    return result

# =========================================================================
# saddle-basin
# =========================================================================

def _basin_sets(p: ScalarProblem, eta: float, spec: GridSpec, n_steps: int, which: str) -> Dict[str, np.ndarray]:
    sets = {}
    if which in ("saddle", "both"):
        sets["saddle"] = saddle_basin_points(p, eta, spec, n_steps)
    if which in ("unstable", "both"):
        if p.lam == 0:
            sets["unstable"] = unstable_basin_points(p, eta, spec, n_steps)
        elif which == "unstable":
            raise UsageError("unstable の抽出は λ=0 の問題のみ対応しています")
    return sets


def cmd_saddle_basin(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    """鞍点・不安定最小点の吸引域を輪郭として抽出する（refine で解像度 2 倍と比較）"""
    p = ScalarProblem(y=cfg.get_float("y", 1.0), lam=cfg.get_float("lam", 0.0))
    eta = cfg.get_float("eta", 0.2)
    n_steps = cfg.get_int("n_steps", 6)
    which = cfg.get("which", "both")
    if which not in ("saddle", "unstable", "both"):
        raise UsageError(f"which は saddle / unstable / both のいずれかです: {which}")
    spec = build_grid(cfg, (-4.5, 4.5, -4.5, 4.5, 800, 800))

    sets = _basin_sets(p, eta, spec, n_steps, which)
    frames = [pd.DataFrame({"x": pts[:, 0], "y": pts[:, 1], "set": name}) for name, pts in sets.items()]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["x", "y", "set"])
    path = _output_prefix(cfg, settings).with_suffix(".csv")
    write_table_csv(df, path, "basin_points", cfg.rng_seed)

    result: Dict[str, Any] = {
        "metadata": cfg.to_metadata(),
        "grid": spec.to_dict(),
        "sets": {name: {"points": int(pts.shape[0]), "occupied_fraction": occupied_fraction(spec, pts)}
                 for name, pts in sets.items()},
        "files": {"csv": str(path)},
    }
    if _flag(cfg, "refine"):
        fine = spec.refined(2)
        for name, pts in _basin_sets(p, eta, fine, n_steps, which).items():
            coarse = result["sets"][name]["occupied_fraction"]
            fine_frac = occupied_fraction(fine, pts)
            result["sets"][name]["refined_occupied_fraction"] = fine_frac
            result["sets"][name]["refinement_ratio"] = coarse / fine_frac if fine_frac > 0 else None
    return result

# =========================================================================
# ディスパッチ
# =========================================================================

COMMANDS: Dict[str, Callable[[ExperimentConfig, Settings], Dict[str, Any]]] = {
    "basin": cmd_basin,
    "quotient-basin": cmd_quotient_basin,
    "dimension": cmd_dimension,
    "histogram": cmd_histogram,
    "slice": cmd_slice,
    "orbits": cmd_orbits,
    "verify": cmd_verify,
    "critical-eta": cmd_critical_eta,
    "saddle-basin": cmd_saddle_basin,
}


def run_command(cfg: ExperimentConfig, settings: Settings) -> Dict[str, Any]:
    if cfg.command not in COMMANDS:
        raise UsageError(f"不明なコマンド: {cfg.command}")
    cfg.validate()
    result = COMMANDS[cfg.command](cfg, settings)
    result.setdefault("command", cfg.command)
    result.setdefault("rng_seed", cfg.rng_seed)
    return result
