# data_processing.py
"""
結果ファイルの入出力

BasinGrid ⇔ PGM (P5) / CSV (x, y, label)、カラー画像 PPM (P6)、
ヒストグラムなどの表 CSV、結果 JSON。CSV は先頭のコメント行でスキーマと版を示し、
JSON は schema_version を持つ。
"""

import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd
from PIL import Image

from error_handler import UsageError
from fractal_geometry import BasinGrid, GridSpec

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PathLike = Union[str, Path]

_SCHEMA_LINE = re.compile(r"^#\s*schema:\s*(?P<name>[\w\-]+)\s+v(?P<version>\d+)\s*$")
_GRID_LINE = re.compile(r"^#\s*grid:\s*(?P<body>.+)$")


def _ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path

# =========================================================================
# 画像（Pillow）
# =========================================================================

def write_basin_pgm(grid: BasinGrid, path: PathLike) -> Path:
    """ラベルを 1 画素 1 バイトの PGM (P5) で保存する（画像の上端が y_max）"""
    path = _ensure_parent(path)
    Image.fromarray(np.ascontiguousarray(np.flipud(grid.labels).astype(np.uint8))).save(path, format="PPM")
    logger.info(f"💾 PGM を保存しました: {path}")
    return path


def read_pgm_labels(path: PathLike) -> np.ndarray:
    """write_basin_pgm で保存したラベル配列（行は y の昇順）"""
    with Image.open(path) as img:
        if img.mode != "L":
            raise UsageError(f"PGM (グレースケール) ではありません: {path} (mode={img.mode})")
        return np.flipud(np.asarray(img, dtype=np.uint8)).copy()


def write_ppm(rgb: np.ndarray, path: PathLike) -> Path:
    """ny×nx×3 の配列を PPM (P6) で保存する（行 0 が y_min）"""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise UsageError(f"RGB 配列の形状が不正です: {rgb.shape}")
    path = _ensure_parent(path)
    Image.fromarray(np.ascontiguousarray(np.flipud(rgb).astype(np.uint8))).save(path, format="PPM")
    logger.info(f"💾 PPM を保存しました: {path}")
    return path

# =========================================================================
# CSV（pandas）
# =========================================================================

def _write_commented_csv(df: pd.DataFrame, path_or_stream: Union[PathLike, TextIO],
                         header_lines: Sequence[str]):
    if hasattr(path_or_stream, "write"):
        stream = path_or_stream
        for line in header_lines:
            stream.write(f"# {line}\n")
        df.to_csv(stream, index=False, float_format="%.17g")
        return None
    path = _ensure_parent(path_or_stream)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        df.to_csv(f, index=False, float_format="%.17g")
    logger.info(f"💾 CSV を保存しました: {path} ({len(df)} 行)")
    return path


def _read_header_lines(path: PathLike) -> List[str]:
    lines = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            lines.append(line.rstrip("\n"))
    return lines


def _check_schema(lines: List[str], expected: str, path: PathLike):
    for line in lines:
        m = _SCHEMA_LINE.match(line)
        if m:
            if m.group("name") != expected:
                raise UsageError(f"スキーマが異なります: {path} ({m.group('name')} ≠ {expected})")
            if int(m.group("version")) > SCHEMA_VERSION:
                raise UsageError(f"未対応のスキーマ版です: v{m.group('version')}")
            return
    raise UsageError(f"スキーマ行がありません: {path}")


def _require_columns(df: pd.DataFrame, required: Sequence[str], path: PathLike):
    missing = [col for col in required if col not in df.columns]
    if missing:
        raise UsageError(f"CSV に必須列がありません: {', '.join(missing)} ({path})")


def write_basin_csv(grid: BasinGrid, path: PathLike, seed: Optional[int] = None) -> Path:
    """セル中心ごとに x, y, label（channel があれば value も）を書き出す"""
    xs, ys = grid.spec.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    data = {"x": X.ravel(), "y": Y.ravel(), "label": grid.labels.ravel().astype(int)}
    if grid.channel is not None:
        data["value"] = np.asarray(grid.channel, dtype=float).ravel()
    s = grid.spec
    header = [
        f"schema: basin_grid v{SCHEMA_VERSION}",
        f"grid: x_min={float(s.x_min)!r} x_max={float(s.x_max)!r} y_min={float(s.y_min)!r} "
        f"y_max={float(s.y_max)!r} nx={int(s.nx)} ny={int(s.ny)}",
    ]
    if seed is not None:
        header.append(f"rng_seed: {seed}")
    return _write_commented_csv(pd.DataFrame(data), path, header)


def _parse_grid_line(lines: List[str], path: PathLike) -> GridSpec:
    for line in lines:
        m = _GRID_LINE.match(line)
        if m:
            fields = dict(item.split("=", 1) for item in m.group("body").split())
            try:
                return GridSpec(
                    float(fields["x_min"]), float(fields["x_max"]),
                    float(fields["y_min"]), float(fields["y_max"]),
                    int(fields["nx"]), int(fields["ny"]),
                )
            except (KeyError, ValueError) as e:
                raise UsageError(f"grid 行を解釈できません: {path}: {e}")
    raise UsageError(f"grid 行がありません: {path}")


def read_basin_csv(path: PathLike) -> BasinGrid:
    """write_basin_csv の逆。ラベルはセル位置から並べ直す"""
    lines = _read_header_lines(path)
    _check_schema(lines, "basin_grid", path)
    spec = _parse_grid_line(lines, path)
    df = pd.read_csv(path, comment="#")
    _require_columns(df, ["x", "y", "label"], path)
    if len(df) != spec.nx * spec.ny:
        raise UsageError(f"行数 {len(df)} が格子 {spec.nx}×{spec.ny} と一致しません")

    j = np.clip(np.floor((df["x"].to_numpy() - spec.x_min) / spec.dx), 0, spec.nx - 1).astype(int)
    i = np.clip(np.floor((df["y"].to_numpy() - spec.y_min) / spec.dy), 0, spec.ny - 1).astype(int)
    labels = np.zeros((spec.ny, spec.nx), dtype=np.uint8)
    labels[i, j] = df["label"].to_numpy().astype(np.uint8)
    channel = None
    if "value" in df.columns:
        channel = np.full((spec.ny, spec.nx), np.nan)
        channel[i, j] = df["value"].to_numpy(dtype=float)
    return BasinGrid(spec, labels, {"source": str(path)}, channel)


def write_table_csv(df: pd.DataFrame, path_or_stream: Union[PathLike, TextIO], schema: str,
                    seed: Optional[int] = None):
    header = [f"schema: {schema} v{SCHEMA_VERSION}"]
    if seed is not None:
        header.append(f"rng_seed: {seed}")
    return _write_commented_csv(df, path_or_stream, header)


def read_table_csv(path: PathLike, schema: str, required_columns: Sequence[str]) -> pd.DataFrame:
    _check_schema(_read_header_lines(path), schema, path)
    df = pd.read_csv(path, comment="#")
    _require_columns(df, required_columns, path)
    return df

# =========================================================================
# JSON
# =========================================================================

def _to_jsonable(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"JSON に変換できない型です: {type(value).__name__}")


def _clean_floats(value: Any):
    """inf / nan は JSON で表せないので文字列化する"""
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _clean_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean_floats(v) for v in value]
    return value


def to_json_text(payload: Dict[str, Any]) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    normalized = json.loads(json.dumps(body, default=_to_jsonable, allow_nan=True))
    return json.dumps(_clean_floats(normalized), ensure_ascii=False, indent=2, sort_keys=False)


def write_json(payload: Dict[str, Any], path: Optional[PathLike] = None) -> Optional[Path]:
    """path が None なら標準出力へ書く"""
    text = to_json_text(payload)
    if path is None:
        sys.stdout.write(text + "\n")
        sys.stdout.flush()
        return None
    path = _ensure_parent(path)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"💾 JSON を保存しました: {path}")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if "schema_version" not in data:
        raise UsageError(f"schema_version がありません: {path}")
    return data
