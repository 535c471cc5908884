# fractal_geometry.py
"""
収束領域のラスタ化とフラクタル幾何

2 次元スライス上の分類ラスタ、境界抽出（4 近傍の収縮）、ボックスカウント次元、
逆分枝による自己相似性の検証、y=0 での指数錐の不変性証明書を提供する。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from sklearn.metrics import r2_score
from tqdm import tqdm

from error_handler import ConvergenceError, DomainError
from quotient_dynamics import (
    BranchId,
    QuotientParams,
    DEFAULT_TOLERANCES,
    F_map,
    Q_field,
    QuotientTolerances,
    branch_inverse_batch,
    quotient_outcomes,
)
from scalar_dynamics import OutcomeKind, ScalarProblem, StepConfig, simulate_batch

logger = logging.getLogger(__name__)

# (labels, channel) を返す分類関数。channel は None 可
Classifier = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, Optional[np.ndarray]]]

# =========================================================================
# 型定義
# =========================================================================

@dataclass(frozen=True)
class GridSpec:
    """矩形窓とセル数（評価はセル中心）"""
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise DomainError(f"nx, ny は 1 以上が必要です: nx={self.nx}, ny={self.ny}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DomainError(
                f"窓の範囲が不正です: [{self.x_min}, {self.x_max}]×[{self.y_min}, {self.y_max}]"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_diagonal(self) -> float:
        return math.hypot(self.dx, self.dy)

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.x_min, self.x_max, self.y_min, self.y_max, self.nx * factor, self.ny * factor)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x_min": self.x_min, "x_max": self.x_max,
            "y_min": self.y_min, "y_max": self.y_max,
            "nx": self.nx, "ny": self.ny,
        }


@dataclass(eq=False)
class BasinGrid:
    """ラベル配列（行 i は y の昇順, 列 j は x の昇順）

    0 は非収束（Undecided / Diverged）、k > 0 は収束クラス k。
    """
    spec: GridSpec
    labels: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)
    channel: Optional[np.ndarray] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.shape != (self.spec.ny, self.spec.nx):
            raise DomainError(
                f"ラベル配列の形状 {self.labels.shape} が窓 ({self.spec.ny}, {self.spec.nx}) と一致しません"
            )
        if self.channel is not None and np.shape(self.channel) != self.labels.shape:
            raise DomainError("channel の形状がラベル配列と一致しません")

    def fraction(self, label: int) -> float:
        return float(np.mean(self.labels == label))


@dataclass(frozen=True)
class DimensionFit:
    """log N(ε) と log(1/ε) の最小二乗フィット"""
    dimension: float
    intercept: float
    r_squared: float
    box_widths: List[float]
    counts: List[int]
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "intercept": self.intercept,
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "box_widths": list(self.box_widths),
            "counts": list(self.counts),
            "degenerate": self.degenerate,
        }

# =========================================================================
# ラスタ化
# =========================================================================

def _evaluate_rows(spec: GridSpec, classify: Classifier, row_start: int, row_stop: int):
    xs, ys = spec.cell_centers()
    X, Y = np.meshgrid(xs, ys[row_start:row_stop])
    labels, channel = classify(X.ravel(), Y.ravel())
    shape = (row_stop - row_start, spec.nx)
    labels = np.asarray(labels).reshape(shape)
    if channel is not None:
        channel = np.asarray(channel, dtype=float).reshape(shape)
    return labels, channel


def rasterize(spec: GridSpec, classify: Classifier, workers: int = 1, rows_per_block: int = 64,
              progress: bool = False, meta: Optional[Dict[str, Any]] = None) -> BasinGrid:
    """全セル中心で classify を評価する

    行ブロック単位で並列に評価し、ブロック番号順に組み立てるので
    結果はワーカー数に依存しない。
    """
    blocks = [(r, min(r + rows_per_block, spec.ny)) for r in range(0, spec.ny, max(1, rows_per_block))]
    results: List[Any] = [None] * len(blocks)
    bar = tqdm(total=len(blocks), desc="rasterize", unit="block", disable=not progress)

    if workers <= 1:
        for k, (r0, r1) in enumerate(blocks):
            results[k] = _evaluate_rows(spec, classify, r0, r1)
            bar.update(1)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_evaluate_rows, spec, classify, r0, r1): k
                       for k, (r0, r1) in enumerate(blocks)}
            for future, k in futures.items():
                results[k] = future.result()
                bar.update(1)
    bar.close()

    labels = np.vstack([r[0] for r in results])
    channel = None
    if results and results[0][1] is not None:
        channel = np.vstack([r[1] for r in results])
    grid = BasinGrid(spec, labels, dict(meta or {}), channel)
    logger.info(f"✅ ラスタ化完了: {spec.nx}×{spec.ny}, 収束セル率 {1.0 - grid.fraction(0):.4f}")
    return grid


def point_classifier(fn: Callable[[float, float], int]) -> Classifier:
    """1 点ずつの分類関数をラスタ用に包む"""
    def classify(X: np.ndarray, Y: np.ndarray):
        return np.array([fn(float(x), float(y)) for x, y in zip(X, Y)], dtype=np.uint8), None
    return classify

# =========================================================================
# 分類関数
# =========================================================================

@dataclass(frozen=True, eq=False)
class SliceEmbedding:
    """平面座標 (x, y) ↦ θ = origin + x·axis_x + y·axis_y ∈ R^{2d}（前半 d 成分が u）"""
    origin: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray

    @property
    def d(self) -> int:
        return self.origin.shape[0] // 2

    @classmethod
    def scalar_plane(cls, d: int = 1) -> "SliceEmbedding":
        """u = x·e1, v = y·e1 の平面"""
        basis = np.eye(2 * d)
        return cls(np.zeros(2 * d), basis[0], basis[d])

    @classmethod
    def from_frame(cls, frame: np.ndarray, origin: Optional[np.ndarray] = None) -> "SliceEmbedding":
        """n×2 の正規直交枠から原点を通る（または origin を通る）平面を作る"""
        frame = np.asarray(frame, dtype=float)
        if frame.ndim != 2 or frame.shape[1] != 2:
            raise DomainError(f"枠は n×2 が必要です: {frame.shape}")
        base = np.zeros(frame.shape[0]) if origin is None else np.asarray(origin, dtype=float)
        return cls(base, frame[:, 0].copy(), frame[:, 1].copy())

    def states(self, X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        theta = self.origin[None, :] + X[:, None] * self.axis_x[None, :] + Y[:, None] * self.axis_y[None, :]
        return theta[:, :self.d], theta[:, self.d:]


_OUTCOME_LABELS = {
    OutcomeKind.CONVERGED_MINIMIZER.code: 1,
    OutcomeKind.CONVERGED_SADDLE.code: 2,
}


def scalar_classifier(p: ScalarProblem, c: StepConfig, embedding: Optional[SliceEmbedding] = None,
                      mode: str = "outcome", channel: Optional[str] = None) -> Classifier:
    """スカラー問題の GD 結果でラベル付けする

    mode="outcome": 最小点 1 / 鞍点 2 / その他 0
    mode="selection": p⁻ へ収束 1 / p⁺ へ収束 2 / その他 0（λ < |y| のみ）
    channel="norm" は収束点の ‖u‖²+‖v‖²、"u" は収束点の u の第 1 成分。
    """
    embedding = embedding or SliceEmbedding.scalar_plane(p.d)
    if embedding.d != p.d:
        raise DomainError(f"スライスの次元 {embedding.d} が問題の次元 {p.d} と一致しません")
    if mode not in ("outcome", "selection"):
        raise DomainError(f"不明な分類モード: {mode}")
    if mode == "selection" and not (0 < p.lam < abs(p.y)):
        raise DomainError("selection モードは 0 < λ < |y| の問題でのみ使えます")
    if channel not in (None, "norm", "u"):
        raise DomainError(f"不明なチャネル: {channel}")

    def classify(X: np.ndarray, Y: np.ndarray):
        U0, V0 = embedding.states(X, Y)
        batch = simulate_batch(p, c, U0, V0)
        converged = batch.converged
        if mode == "outcome":
            labels = np.zeros(X.shape[0], dtype=np.uint8)
            for code, label in _OUTCOME_LABELS.items():
                labels[batch.kinds == code] = label
        else:
            labels = _selection_labels(p, U0, V0, batch.final_u, batch.final_v, converged)

        values = None
        if channel == "norm":
            sq = np.sum(batch.final_u ** 2, axis=1) + np.sum(batch.final_v ** 2, axis=1)
            values = np.where(converged, sq, np.nan)
        elif channel == "u":
            values = np.where(converged, batch.final_u[:, 0], np.nan)
        return labels, values

    return classify


def _selection_labels(p: ScalarProblem, U0, V0, U, V, converged) -> np.ndarray:
    r = np.sqrt(abs(p.y) - p.lam)
    direction = U0 + p.sign * V0
    norm = np.linalg.norm(direction, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = direction / norm
    d_minus = np.sum((U - r * n) ** 2 + (V - p.sign * r * n) ** 2, axis=1)
    d_plus = np.sum((U + r * n) ** 2 + (V + p.sign * r * n) ** 2, axis=1)
    labels = np.zeros(U.shape[0], dtype=np.uint8)
    ok = converged & (norm[:, 0] > 1e-12)
    labels[ok & (d_minus <= d_plus)] = 1
    labels[ok & (d_minus > d_plus)] = 2
    return labels


def quotient_classifier(p: ScalarProblem, eta: float, n_iters: int = 200, loss_tol: float = 1e-5,
                        early_stop: bool = False) -> Classifier:
    """スケール前の (u·v, ‖u‖²+‖v‖²) 平面上で F を反復してラベル付けする

    Ω の外（w < 2|z|）のセルは 0。n_iters 回反復後に損失が L_min + loss_tol 未満なら 1。
    """
    q = QuotientParams.from_problem(p, eta)

    def classify(X: np.ndarray, Y: np.ndarray):
        labels = np.zeros(X.shape[0], dtype=np.uint8)
        inside = Y >= 2.0 * np.abs(X)
        if np.any(inside):
            z = eta * (X[inside] - p.y)
            w = eta * Y[inside]
            codes = quotient_outcomes(q, eta, z, w, n_iters, loss_tol, early_stop=early_stop)
            labels[np.flatnonzero(inside)[codes == 1]] = 1
        return labels, None

    return classify

# =========================================================================
# 境界抽出
# =========================================================================

_FOUR_NEIGHBORS = ndimage.generate_binary_structure(2, 1)


def extract_boundary(g: BasinGrid, target_label: int) -> np.ndarray:
    """target_label のセルのうち、4 近傍に別ラベルを持つもの

    窓の外は target 扱い（border_value=1）なので窓の枠は境界にならない。
    """
    mask = g.labels == target_label
    return mask_boundary(mask)


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    eroded = ndimage.binary_erosion(mask, structure=_FOUR_NEIGHBORS, border_value=1)
    return mask & ~eroded


def boundary_points(spec: GridSpec, mask: np.ndarray) -> np.ndarray:
    """真のセルの中心座標 (N×2)"""
    xs, ys = spec.cell_centers()
    rows, cols = np.nonzero(mask)
    return np.column_stack([xs[cols], ys[rows]])


def count_components(mask: np.ndarray) -> int:
    """4 連結成分の数"""
    _, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_FOUR_NEIGHBORS)
    return int(n)


def contour_zero_crossings(spec: GridSpec, values: np.ndarray, return_cells: bool = False):
    """セル中心の値の零点を、隣接セル間の線形補間で求める (N×2)

    return_cells=True のときは各点を挟む 2 セルの添字 (i1, j1, i2, j2) も返す。
    """
    values = np.asarray(values, dtype=float)
    xs, ys = spec.cell_centers()
    points = []
    cells = []

    exact = np.isfinite(values) & (values == 0.0)
    if np.any(exact):
        rows, cols = np.nonzero(exact)
        points.append(np.column_stack([xs[cols], ys[rows]]))
        cells.append(np.column_stack([rows, cols, rows, cols]))

    # 横方向
    a, b = values[:, :-1], values[:, 1:]
    hit = np.isfinite(a) & np.isfinite(b) & (a * b < 0)
    rows, cols = np.nonzero(hit)
    if rows.size:
        t = a[rows, cols] / (a[rows, cols] - b[rows, cols])
        points.append(np.column_stack([xs[cols] + t * spec.dx, ys[rows]]))
        cells.append(np.column_stack([rows, cols, rows, cols + 1]))

    # 縦方向
    a, b = values[:-1, :], values[1:, :]
    hit = np.isfinite(a) & np.isfinite(b) & (a * b < 0)
    rows, cols = np.nonzero(hit)
    if rows.size:
        t = a[rows, cols] / (a[rows, cols] - b[rows, cols])
        points.append(np.column_stack([xs[cols], ys[rows] + t * spec.dy]))
        cells.append(np.column_stack([rows, cols, rows + 1, cols]))

    if not points:
        out = np.empty((0, 2)), np.empty((0, 4), dtype=np.int64)
    else:
        out = np.vstack(points), np.vstack(cells).astype(np.int64)
    return out if return_cells else out[0]


def occupied_fraction(spec: GridSpec, points: np.ndarray) -> float:
    """点が 1 つ以上入るセルの割合"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        return 0.0
    j = np.clip(np.floor((points[:, 0] - spec.x_min) / spec.dx), 0, spec.nx - 1).astype(np.int64)
    i = np.clip(np.floor((points[:, 1] - spec.y_min) / spec.dy), 0, spec.ny - 1).astype(np.int64)
    occupied = np.unique(i * spec.nx + j).size
    return occupied / float(spec.nx * spec.ny)

# =========================================================================
# ボックスカウント
# =========================================================================

def default_widths(min_exponent: int = 2, max_exponent: int = 8) -> List[float]:
    return [2.0 ** -k for k in range(min_exponent, max_exponent + 1)]


def normalize_points(points: np.ndarray) -> np.ndarray:
    """最小値を原点へ移し、最大の幅で割る（縦横比を保って [0,1]² に収める）"""
    shifted = points - points.min(axis=0)
    extent = float(np.max(shifted.max(axis=0)))
    if extent == 0.0:
        return np.zeros_like(shifted)
    return shifted / extent


def box_counting(points, widths: Optional[Sequence[float]] = None,
                 offset: Tuple[float, float] = (0.0, 0.0), progress: bool = False) -> DimensionFit:
    """原点基準の ε 格子で占有ボックスを数え、log N を log(1/ε) に回帰する"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        raise DomainError("ボックスカウントの点集合が空です")
    widths = sorted({float(w) for w in (widths if widths is not None else default_widths())}, reverse=True)
    if len(widths) < 2:
        raise DomainError("ボックス幅は異なる値を 2 つ以上指定してください")
    if widths[-1] <= 0:
        raise DomainError("ボックス幅は正の値が必要です")

    unit = normalize_points(points)
    shift = np.asarray(offset, dtype=float)
    counts = []
    for eps in tqdm(widths, desc="box counting", unit="width", disable=not progress):
        idx = np.floor((unit + shift) / eps).astype(np.int64)
        if not np.any(shift):
            # x = 1 の点は最後のボックスへ
            n_boxes = int(math.ceil(1.0 / eps - 1e-12))
            idx = np.minimum(idx, n_boxes - 1)
        counts.append(int(np.unique(idx, axis=0).shape[0]))

    log_inv = np.log(1.0 / np.asarray(widths))
    log_n = np.log(np.asarray(counts, dtype=float))
    if len(set(counts)) == 1:
        logger.warning("⚠️ 全ての幅でボックス数が同じです（次元 0 として扱います）")
        return DimensionFit(0.0, float(log_n[0]), float("nan"), widths, counts, degenerate=True)

    slope, intercept = np.polyfit(log_inv, log_n, 1)
    r2 = r2_score(log_n, slope * log_inv + intercept)
    logger.info(f"📐 ボックスカウント次元 {slope:.4f} (r²={r2:.4f}, 点数 {points.shape[0]})")
    return DimensionFit(float(slope), float(intercept), float(r2), widths, counts)

# =========================================================================
# 自己相似性
# =========================================================================

@dataclass(frozen=True)
class SelfSimilarityReport:
    cover_dist: float
    disjointness_margin: float
    n_checked: int
    n_images: Dict[str, int]
    n_branch_failures: int
    min_q: float

    def __iter__(self):
        return iter((self.cover_dist, self.disjointness_margin))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cover_dist": self.cover_dist,
            "disjointness_margin": self.disjointness_margin,
            "n_checked": self.n_checked,
            "n_images": dict(self.n_images),
            "n_branch_failures": self.n_branch_failures,
            "min_q": self.min_q,
        }


def self_similarity_check(q: QuotientParams, boundary_pts, window: Optional[GridSpec] = None,
                          edge_margin: Optional[float] = None,
                          tol: QuotientTolerances = DEFAULT_TOLERANCES) -> SelfSimilarityReport:
    """境界点集合 B が G0(B) ∪ G1(B) ∪ G2(B) で覆われているかを測る

    boundary_pts はスケール座標 (z, w) の N×2 配列。
    cover_dist は F(b) が窓の内側（edge_margin だけ縮めた窓）に入る b についての
    b から像集合への最短距離の最大値。
    disjointness_margin は各分枝の z 範囲の内部にある像どうしの最短距離。
    G1 は Q ≥ 6 − 4ν の点にだけ適用する。分枝の失敗は数えるだけで例外にしない。
    tol は逆像の検証と分枝の z 範囲の判定に使う。
    """
    pts = np.asarray(boundary_pts, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise DomainError("境界点集合が空です")
    q.check_branch_regime()

    if window is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        window = GridSpec(lo[0], lo[0] + span[0], lo[1], lo[1] + span[1], 1, 1)
    if edge_margin is None:
        edge_margin = 3.0 * window.cell_diagonal if (window.nx > 1 or window.ny > 1) else 0.0

    images: Dict[BranchId, np.ndarray] = {}
    failures = 0
    for b in BranchId:
        zi, wi, ok = branch_inverse_batch(q, b, pts[:, 0], pts[:, 1], tol)
        failures += int(np.count_nonzero(~ok))
        images[b] = np.column_stack([zi[ok], wi[ok]])
        logger.debug(f"{b.value}: 像 {int(ok.sum())} 点 / 定義域外 {int((~ok).sum())} 点")

    cloud = np.vstack([im for im in images.values() if im.shape[0]]) if any(
        im.shape[0] for im in images.values()) else np.empty((0, 2))
    if cloud.shape[0] == 0:
        raise DomainError("どの分枝でも像が得られませんでした")

    fz, fw = F_map(q, pts[:, 0], pts[:, 1])
    inside = ((fz >= window.x_min + edge_margin) & (fz <= window.x_max - edge_margin)
              & (fw >= window.y_min + edge_margin) & (fw <= window.y_max - edge_margin))
    checked = pts[inside]
    if checked.shape[0] == 0:
        raise DomainError("F(b) が窓の内側に入る境界点がありません")
    dist, _ = cKDTree(cloud).query(checked)
    cover = float(np.max(dist))

    a = q.alpha
    interior_gap = edge_margin if edge_margin > 0 else 1e-9
    ranges = {
        BranchId.G0: lambda z: z < -a - interior_gap,
        BranchId.G1: lambda z: np.abs(z) < a - interior_gap,
        BranchId.G2: lambda z: z > a + interior_gap,
    }
    interior = {b: im[ranges[b](im[:, 0])] for b, im in images.items()}
    margin = float("inf")
    branches = list(BranchId)
    for i, bi in enumerate(branches):
        for bj in branches[i + 1:]:
            if interior[bi].shape[0] and interior[bj].shape[0]:
                d, _ = cKDTree(interior[bj]).query(interior[bi])
                margin = min(margin, float(np.min(d)))

    qv = Q_field(q, pts[:, 0], pts[:, 1])
    report = SelfSimilarityReport(
        cover_dist=cover,
        disjointness_margin=margin,
        n_checked=int(checked.shape[0]),
        n_images={b.value: int(im.shape[0]) for b, im in images.items()},
        n_branch_failures=failures,
        min_q=float(np.nanmin(qv)) if np.any(np.isfinite(qv)) else float("nan"),
    )
    logger.info(f"🔁 自己相似性: cover_dist={cover:.3e}, margin={margin:.3e}, 検査点 {report.n_checked}")
    return report

# =========================================================================
# 指数錐の証明書（y = 0）
# =========================================================================

def _cone_samples(a: float, b: float, n_samples: int, w_max: float, rng: np.random.Generator):
    half = n_samples // 2
    w = np.concatenate([
        rng.uniform(0.0, w_max, half),
        np.exp(rng.uniform(np.log(1e-6), np.log(w_max), n_samples - half)),
    ])
    # Ω = {w ≥ 2|z|} と錐 {|z| < a·e^{−bw}} の共通部分
    z_max = np.minimum(a * np.exp(-b * w), 0.5 * w)
    z = z_max * rng.uniform(-1.0, 1.0, n_samples)
    return z, w


def _cone_step_ok(q: QuotientParams, a: float, b: float, z: np.ndarray, w: np.ndarray) -> bool:
    z1, w1 = F_map(q, z, w)
    with np.errstate(divide="ignore"):
        in_cone = (z1 == 0.0) | (np.log(np.abs(z1)) < math.log(a) - b * w1)
    # μ = 0 では Q = 2w
    return bool(np.all(in_cone) and np.all(w1 <= w))


def cone_certificate(nu: float, n_samples: int = 10_000, w_max: float = 1e3,
                     seed: int = 0) -> Tuple[float, float]:
    """{|z| < a·exp(−bw)} が F で前方不変となる (a, b) を探す

    十分条件 b > α/((1−α²)α²), a² < 1 − α² (α = 1 − ν) を満たす格子を順に試し、
    サンプル点が 1 ステップ後も錐内にあり Q が増えないものを返す。
    """
    if not 0.0 < nu < 1.0:
        raise DomainError(f"cone_certificate には 0 < ν < 1 が必要です (ν={nu})")
    q = QuotientParams(0.0, nu)
    alpha = 1.0 - nu
    b_min = alpha / ((1.0 - alpha * alpha) * alpha * alpha)
    a_max = math.sqrt(1.0 - alpha * alpha)
    rng = np.random.default_rng(seed)

    for b_factor in (1.01, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0):
        b = b_min * b_factor
        for a_factor in (0.99, 0.9, 0.75, 0.5, 0.25, 0.1, 0.01):
            a = a_max * a_factor
            z, w = _cone_samples(a, b, n_samples, w_max, rng)
            if _cone_step_ok(q, a, b, z, w):
                logger.info(f"✅ 錐の証明書: ν={nu}, a={a:.4g}, b={b:.4g}")
                return a, b
            logger.debug(f"錐の候補 (a={a:.4g}, b={b:.4g}) は検証に失敗")
    raise ConvergenceError(f"ν={nu} で錐の証明書が見つかりませんでした")


def cone_convergence_fraction(nu: float, a: float, b: float, n_samples: int = 10_000,
                              w_max: float = 1e3, max_steps: int = 10_000, seed: int = 1,
                              tol: float = 1e-12) -> float:
    """錐内のサンプル点のうち F の反復で原点へ収束する割合"""
    q = QuotientParams(0.0, nu)
    z, w = _cone_samples(a, b, n_samples, w_max, np.random.default_rng(seed))
    done = np.zeros(n_samples, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_steps):
            done |= (np.abs(z) < tol) & (np.abs(w) < tol)
            if done.all():
                break
            z, w = F_map(q, z, w)
    return float(np.mean(done))
