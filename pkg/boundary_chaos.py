# boundary_chaos.py
"""
不変境界上の一次元力学系

境界 ∂D'_η 上では商写像 F が三次写像 z³ − 3z に一致する。
    z = 2x で Chebyshev 写像 4x³ − 3x と共役、
    z = 2 sin(πx/2) で傾き 3 の区分線形写像と半共役。
区分線形写像の合成を区間ごとに厳密に追跡し、全周期の周期軌道と
ラップ数によるエントロピーを求める。
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from criticality import q_bar
from error_handler import DomainError
from quotient_dynamics import QuotientParams, QuotientState, lift_to_fiber
from scalar_dynamics import ScalarProblem, ScalarState, gd_step

logger = logging.getLogger(__name__)

MAX_PERIOD = 12
PERIOD_TOL = 1e-9
_INTERVAL_SLACK = 1e-12

# =========================================================================
# 写像と共役
# =========================================================================

def _check_interval(x, bound: float, name: str):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(np.abs(x) > bound + _INTERVAL_SLACK):
        raise DomainError(f"{name} の入力は [−{bound:g}, {bound:g}] に限られます")
    return np.clip(x, -bound, bound)


def _as_output(x, like):
    return float(x) if np.ndim(like) == 0 else x


def cubic_map(z):
    """境界上の F: z ↦ z³ − 3z  ([−2, 2] → [−2, 2])"""
    zc = _check_interval(z, 2.0, "cubic_map")
    return _as_output(zc ** 3 - 3.0 * zc, z)


def chebyshev_map(x):
    """4x³ − 3x  ([−1, 1] → [−1, 1])"""
    xc = _check_interval(x, 1.0, "chebyshev_map")
    return _as_output(4.0 * xc ** 3 - 3.0 * xc, x)


def halve_to_boundary(x):
    """Chebyshev 座標 → 境界座標 z = 2x"""
    xc = _check_interval(x, 1.0, "halve_to_boundary")
    return _as_output(2.0 * xc, x)


def halve_from_boundary(z):
    zc = _check_interval(z, 2.0, "halve_from_boundary")
    return _as_output(0.5 * zc, z)


def conjugacy_to_pl(x_pl):
    """区分線形座標 → 境界座標 z = 2 sin(πx/2)"""
    xc = _check_interval(x_pl, 1.0, "conjugacy_to_pl")
    return _as_output(2.0 * np.sin(0.5 * np.pi * xc), x_pl)


def conjugacy_from_pl(z):
    """境界座標 → 区分線形座標 (2/π)·asin(z/2)"""
    zc = _check_interval(z, 2.0, "conjugacy_from_pl")
    return _as_output((2.0 / np.pi) * np.arcsin(0.5 * zc), z)


def pl_map(x):
    """傾き 3 の区分線形写像: 3x+2 / −3x / 3x−2"""
    xc = _check_interval(x, 1.0, "pl_map")
    out = np.where(xc <= -1.0 / 3.0, 3.0 * xc + 2.0,
                   np.where(xc < 1.0 / 3.0, -3.0 * xc, 3.0 * xc - 2.0))
    return _as_output(np.clip(out, -1.0, 1.0), x)


def semiconjugacy_residuals(n_grid: int = 1000) -> Tuple[float, float]:
    """(Chebyshev 段の残差, 正弦段の残差) を格子上の最大値で返す"""
    x = np.linspace(-1.0, 1.0, n_grid)
    halving = np.max(np.abs(cubic_map(halve_to_boundary(x)) - halve_to_boundary(chebyshev_map(x))))
    sine = np.max(np.abs(cubic_map(conjugacy_to_pl(x)) - conjugacy_to_pl(pl_map(x))))
    return float(halving), float(sine)


def period_three_witness() -> Tuple[List[float], List[float]]:
    """周期 3 の軌道 −5/7 → −1/7 → 3/7 を区分線形座標と境界座標で返す"""
    orbit = [-5.0 / 7.0]
    for _ in range(2):
        orbit.append(float(pl_map(orbit[-1])))
    return orbit, [float(conjugacy_to_pl(x)) for x in orbit]

# =========================================================================
# 区分線形写像の合成
# =========================================================================

_BASE_PIECES = (
    (3.0, 2.0, -1.0, -1.0 / 3.0),
    (-3.0, 0.0, -1.0 / 3.0, 1.0 / 3.0),
    (3.0, -2.0, 1.0 / 3.0, 1.0),
)


def _check_period(n: int, max_period: int):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"周期は正の整数で指定してください: {n}")
    if n > max_period:
        raise DomainError(f"周期 {n} は上限 {max_period} を超えています（3ⁿ 区間の列挙）")


def pl_pieces(n: int, max_period: int = MAX_PERIOD) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """pl_map の n 回合成の線形区間 (slope, intercept, lo, hi)、lo の昇順

    各区間は [−1, 1] 全体へ写るので、次の合成では基本区間の逆像で 3 分割される。
    """
    _check_period(n, max_period)
    slope = np.array([1.0])
    intercept = np.array([0.0])
    lo = np.array([-1.0])
    hi = np.array([1.0])

    for _ in range(n):
        parts = []
        for bs, bb, blo, bhi in _BASE_PIECES:
            x1 = (blo - intercept) / slope
            x2 = (bhi - intercept) / slope
            parts.append((bs * slope, bs * intercept + bb, np.minimum(x1, x2), np.maximum(x1, x2)))
        slope = np.concatenate([p[0] for p in parts])
        intercept = np.concatenate([p[1] for p in parts])
        lo = np.concatenate([p[2] for p in parts])
        hi = np.concatenate([p[3] for p in parts])
        order = np.argsort(lo, kind="stable")
        slope, intercept, lo, hi = slope[order], intercept[order], lo[order], hi[order]
    return slope, intercept, lo, hi


def _pl_fixed_points(n: int, max_period: int) -> np.ndarray:
    slope, intercept, lo, hi = pl_pieces(n, max_period)
    x = intercept / (1.0 - slope)
    inside = (x >= lo - _INTERVAL_SLACK) & (x <= hi + _INTERVAL_SLACK)
    x = np.sort(np.clip(x[inside], -1.0, 1.0))
    if x.size > 1:
        # 隣接区間の共有端点で重複する
        keep = np.concatenate([[True], np.diff(x) > _INTERVAL_SLACK])
        x = x[keep]
    return x


def _pl_orbit_matrix(x: np.ndarray, n: int) -> np.ndarray:
    rows = [x]
    for _ in range(n - 1):
        rows.append(pl_map(rows[-1]))
    return np.vstack(rows)

# =========================================================================
# 周期軌道
# =========================================================================

@dataclass(frozen=True)
class BoundaryOrbit:
    """三次写像の周期軌道（points は軌道順、最小点から開始）"""
    period: int
    points: Tuple[float, ...]
    prime: bool

    def max_residual(self) -> float:
        pts = np.array(self.points)
        images = cubic_map(pts)
        return float(np.max(np.abs(images - np.roll(pts, -1))))

    def to_dict(self) -> dict:
        return {"period": self.period, "prime": self.prime, "points": list(self.points)}


def periodic_points(n: int, max_period: int = MAX_PERIOD) -> np.ndarray:
    """周期が n を割り切る点すべて（境界座標、昇順）"""
    return np.sort(conjugacy_to_pl(_pl_fixed_points(n, max_period)))


def periodic_orbits(n: int, max_period: int = MAX_PERIOD, tol: float = PERIOD_TOL) -> List[BoundaryOrbit]:
    """素周期 n の軌道をすべて返す"""
    x = _pl_fixed_points(n, max_period)
    orbits = _pl_orbit_matrix(x, n)

    prime = np.ones(x.shape[0], dtype=bool)
    for m in range(1, n):
        if n % m == 0:
            prime &= np.abs(orbits[m] - x) > tol
    orbits = orbits[:, prime]

    result: List[BoundaryOrbit] = []
    seen = set()
    digits = max(0, int(-math.log10(tol)))
    for j in range(orbits.shape[1]):
        column = orbits[:, j]
        key = round(float(column.min()), digits)
        if key in seen:
            continue
        seen.add(key)
        start = int(np.argmin(column))
        ordered = np.roll(column, -start)
        result.append(BoundaryOrbit(
            period=n,
            points=tuple(float(v) for v in conjugacy_to_pl(ordered)),
            prime=True,
        ))

    if not result:
        logger.warning(f"⚠️ 素周期 {n} の軌道が見つかりませんでした")
    logger.debug(f"周期 {n}: 周期点 {x.shape[0]} 個, 素周期軌道 {len(result)} 本")
    return result


def lap_entropy(n: int, max_period: int = MAX_PERIOD) -> Tuple[int, float]:
    """(n 回合成のラップ数, log(ラップ数)/n)"""
    slope, _, _, _ = pl_pieces(n, max_period)
    # 単調区間は傾きの符号が変わるところで区切られる
    laps = int(np.count_nonzero(np.diff(np.sign(slope))) + 1)
    return laps, math.log(laps) / n

# =========================================================================
# 境界上の状態と方向の保存
# =========================================================================

def boundary_state(p: ScalarProblem, eta: float, t: float,
                   e1: Optional[np.ndarray] = None, e2: Optional[np.ndarray] = None) -> ScalarState:
    """∂D'_η 上の状態。t ∈ [0, 1] が境界座標 z = −2 + 4t を与える

    スケール座標で ∂D'_η は {w = 4 + μz, |z| ≤ 2}。
    """
    if p.lam != 0:
        raise DomainError("∂D'_η は非正則化問題（λ=0）でのみ定義されます")
    if not eta * abs(p.y) < 1.0:
        raise DomainError(f"∂D'_η には η|y| < 1 が必要です (η={eta}, y={p.y})")
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t は [0, 1] で指定してください: {t}")
    q = QuotientParams.from_problem(p, eta)
    z = -2.0 + 4.0 * t
    return lift_to_fiber(p, eta, QuotientState(z, 4.0 + q.mu * z), e1, e2)


def boundary_invariance_residual(p: ScalarProblem, eta: float, s: ScalarState, steps: int = 1) -> float:
    """GD を steps 回適用した後の |η·Q̄ − 8| / 8"""
    for _ in range(steps):
        s = gd_step(p, eta, s)
    return abs(eta * q_bar(p.y, s) - 8.0) / 8.0


def direction_drift(p: ScalarProblem, eta: float, s0: ScalarState, n_steps: int) -> float:
    """(u + sgn(y)v)/‖·‖ の初期方向からのずれの最大値（符号反転は同一視）"""
    def direction(s: ScalarState) -> Optional[np.ndarray]:
        vec = s.u + p.sign * s.v
        norm = np.linalg.norm(vec)
        return None if norm == 0 else vec / norm

    n0 = direction(s0)
    if n0 is None:
        raise DomainError("u + sgn(y)v = 0 の初期点では方向が定まりません")
    drift = 0.0
    s = s0
    for _ in range(n_steps):
        s = gd_step(p, eta, s)
        if not s.is_finite:
            break
        nk = direction(s)
        if nk is None:
            break
        drift = max(drift, min(np.linalg.norm(nk - n0), np.linalg.norm(nk + n0)))
    return float(drift)
