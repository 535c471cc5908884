# charting.py
"""
ラスタの着色

収束ラベルと収束点の量（チャネル）を RGB 配列に変換する。
非収束のセルは灰色。チャネルの色は matplotlib のカラーマップから取り、
PPM に書ける uint8 配列だけを作る（図は描かない）。
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from matplotlib import colormaps

from error_handler import DomainError, UsageError
from fractal_geometry import BasinGrid

logger = logging.getLogger(__name__)

GRAY = (128, 128, 128)

DEFAULT_CMAP = "viridis"

LABEL_PALETTE: Dict[int, Tuple[int, int, int]] = {
    0: GRAY,
    1: (31, 119, 180),
    2: (255, 127, 14),
    3: (44, 160, 44),
    4: (214, 39, 40),
}


def colormap(values: np.ndarray, cmap: str = DEFAULT_CMAP) -> np.ndarray:
    """[0, 1] の値をカラーマップ cmap で RGB (uint8) に"""
    if cmap not in colormaps:
        raise UsageError(f"不明なカラーマップ: {cmap}")
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    return np.asarray(colormaps[cmap](values, bytes=True))[..., :3]


def colorize_labels(grid: BasinGrid, palette: Optional[Dict[int, Tuple[int, int, int]]] = None) -> np.ndarray:
    palette = palette or LABEL_PALETTE
    rgb = np.zeros(grid.labels.shape + (3,), dtype=np.uint8)
    for label in np.unique(grid.labels):
        color = palette.get(int(label))
        if color is None:
            raise DomainError(f"ラベル {label} の色が定義されていません")
        rgb[grid.labels == label] = color
    return rgb


def colorize_channel(grid: BasinGrid, value_range: Optional[Sequence[float]] = None,
                     cmap: str = DEFAULT_CMAP) -> np.ndarray:
    """収束セルをチャネル値で着色し、それ以外を灰色にする"""
    if grid.channel is None:
        raise DomainError("このラスタには着色用のチャネルがありません")
    values = np.asarray(grid.channel, dtype=float)
    valid = (grid.labels > 0) & np.isfinite(values)

    if value_range is None:
        if np.any(valid):
            lo, hi = float(np.min(values[valid])), float(np.max(values[valid]))
        else:
            lo, hi = 0.0, 1.0
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
    span = hi - lo if hi > lo else 1.0

    rgb = np.empty(values.shape + (3,), dtype=np.uint8)
    rgb[...] = GRAY
    rgb[valid] = colormap((values[valid] - lo) / span, cmap)
    logger.debug(f"チャネル着色: {cmap}, 範囲 [{lo:.4g}, {hi:.4g}], 着色セル {int(valid.sum())}")
    return rgb


def overlay_mask(rgb: np.ndarray, mask: np.ndarray, color: Tuple[int, int, int] = (0, 0, 0)) -> np.ndarray:
    """境界などのマスクを単色で重ねる"""
    out = np.array(rgb, copy=True)
    out[np.asarray(mask, dtype=bool)] = color
    return out
