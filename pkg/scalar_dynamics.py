# scalar_dynamics.py
"""
スカラー因子分解の勾配降下

L(u, v) = ½(u·v − y)² + (λ/2)(‖u‖² + ‖v‖²),  u, v ∈ R^d
損失・勾配・GD更新・軌道シミュレーション・Hessianスペクトルを提供する。
型はすべて不変な値オブジェクトで、関数は純粋（スレッド間で共有可）。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from error_handler import DomainError

logger = logging.getLogger(__name__)

# 収束判定の許容誤差プリセット
LOSS_TOL_PRESETS: Dict[str, float] = {
    "strict": 1e-8,
    "experiment": 1e-6,
}

# =========================================================================
# 型定義
# =========================================================================

@dataclass(frozen=True)
class ScalarProblem:
    """損失の定義（ターゲット y・正則化 λ・次元 d）"""
    y: float
    lam: float = 0.0
    d: int = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d は正の整数が必要です: {self.d}")
        if not self.lam >= 0:
            raise DomainError(f"lam は 0 以上が必要です: {self.lam}")
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "d", int(self.d))

    @property
    def sign(self) -> float:
        """sgn(y)（y=0 は +1 扱い）"""
        return -1.0 if self.y < 0 else 1.0


def _frozen_vector(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarState:
    """パラメータ点 (u, v)"""
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _frozen_vector(self.u)
        v = _frozen_vector(self.v)
        if u.shape != v.shape:
            raise DomainError(f"u と v の長さが一致しません: {u.shape} vs {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.u.shape[0]

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.u @ self.u + self.v @ self.v))

    @property
    def squared_norm(self) -> float:
        return float(self.u @ self.u + self.v @ self.v)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    @classmethod
    def from_vector(cls, theta: np.ndarray) -> "ScalarState":
        theta = np.asarray(theta, dtype=float)
        d = theta.shape[0] // 2
        return cls(theta[:d], theta[d:])

    @classmethod
    def zeros(cls, d: int) -> "ScalarState":
        return cls(np.zeros(d), np.zeros(d))


@dataclass(frozen=True)
class StepConfig:
    """定数ステップGDの設定と停止規則"""
    eta: float
    max_iters: int = 1000
    loss_tol: float = LOSS_TOL_PRESETS["strict"]
    divergence_threshold: float = 100.0
    saddle_tol: float = 1e-8

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta は正の値が必要です: {self.eta}")
        if not self.loss_tol > 0:
            raise DomainError(f"loss_tol は正の値が必要です: {self.loss_tol}")
        if not self.divergence_threshold > self.loss_tol:
            raise DomainError("divergence_threshold は loss_tol より大きくしてください")
        if self.max_iters < 0:
            raise DomainError(f"max_iters は 0 以上が必要です: {self.max_iters}")

    @classmethod
    def preset(cls, name: str, eta: float, **overrides) -> "StepConfig":
        """名前付き許容誤差プリセット（strict=1e-8 / experiment=1e-6）"""
        if name not in LOSS_TOL_PRESETS:
            raise DomainError(f"不明なプリセット: {name}（有効: {', '.join(LOSS_TOL_PRESETS)}）")
        overrides.setdefault("loss_tol", LOSS_TOL_PRESETS[name])
        return cls(eta=eta, **overrides)


class OutcomeKind(Enum):
    """軌道の終端分類"""
    CONVERGED_MINIMIZER = "ConvergedMinimizer"
    CONVERGED_SADDLE = "ConvergedSaddle"
    DIVERGED = "Diverged"
    UNDECIDED = "Undecided"

    @property
    def code(self) -> int:
        return _OUTCOME_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "OutcomeKind":
        return _CODE_TO_OUTCOME[int(code)]


_OUTCOME_CODES = {
    OutcomeKind.UNDECIDED: 0,
    OutcomeKind.CONVERGED_MINIMIZER: 1,
    OutcomeKind.CONVERGED_SADDLE: 2,
    OutcomeKind.DIVERGED: 3,
}
_CODE_TO_OUTCOME = {v: k for k, v in _OUTCOME_CODES.items()}


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    final_state: ScalarState
    iterations: int
    final_loss: float


@dataclass(frozen=True, eq=False)
class BatchOutcome:
    """simulate_batch の結果（kinds は OutcomeKind.code の配列）"""
    kinds: np.ndarray
    iterations: np.ndarray
    final_u: np.ndarray
    final_v: np.ndarray
    final_loss: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.kinds == OutcomeKind.CONVERGED_MINIMIZER.code

    def outcome(self, i: int) -> Outcome:
        return Outcome(
            kind=OutcomeKind.from_code(self.kinds[i]),
            final_state=ScalarState(self.final_u[i], self.final_v[i]),
            iterations=int(self.iterations[i]),
            final_loss=float(self.final_loss[i]),
        )


# =========================================================================
# 損失・勾配・GD更新
# =========================================================================

def _check_dims(p: ScalarProblem, s: ScalarState):
    if s.d != p.d:
        raise DomainError(f"次元が一致しません: problem d={p.d}, state d={s.d}")


def scalar_loss(p: ScalarProblem, s: ScalarState) -> float:
    _check_dims(p, s)
    r = s.u @ s.v - p.y
    return float(0.5 * r * r + 0.5 * p.lam * (s.u @ s.u + s.v @ s.v))


def scalar_gradient(p: ScalarProblem, s: ScalarState) -> Tuple[np.ndarray, np.ndarray]:
    """(∇_u L, ∇_v L)"""
    _check_dims(p, s)
    r = s.u @ s.v - p.y
    return r * s.v + p.lam * s.u, r * s.u + p.lam * s.v


def gd_step(p: ScalarProblem, eta: float, s: ScalarState) -> ScalarState:
    """θ − η∇L(θ)（両ブロックとも更新前の値から同時に計算）"""
    if not eta > 0:
        raise DomainError(f"eta は正の値が必要です: {eta}")
    gu, gv = scalar_gradient(p, s)
    return ScalarState(s.u - eta * gu, s.v - eta * gv)


def global_min(p: ScalarProblem) -> float:
    """大域最小値（閉形式）"""
    if p.lam == 0:
        return 0.0
    ay = abs(p.y)
    if p.lam >= ay:
        return 0.5 * p.y * p.y
    return p.lam * ay - 0.5 * p.lam * p.lam


# =========================================================================
# 軌道シミュレーション
# =========================================================================

def simulate(p: ScalarProblem, c: StepConfig, s0: ScalarState) -> Outcome:
    """停止規則に達するまで gd_step を反復する

    判定順: 非有限 → 最小点収束 → 鞍点捕捉 → 発散 → 反復上限
    """
    _check_dims(p, s0)
    gmin = global_min(p)
    saddle_possible = p.lam < abs(p.y)
    s = s0
    loss = float("nan")
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(c.max_iters + 1):
            loss = scalar_loss(p, s)
            if not np.isfinite(loss) or not s.is_finite:
                return Outcome(OutcomeKind.DIVERGED, s, t, float("inf"))
            if loss <= gmin + c.loss_tol:
                return Outcome(OutcomeKind.CONVERGED_MINIMIZER, s, t, loss)
            if saddle_possible and s.norm <= c.saddle_tol:
                return Outcome(OutcomeKind.CONVERGED_SADDLE, s, t, loss)
            if loss >= c.divergence_threshold:
                return Outcome(OutcomeKind.DIVERGED, s, t, loss)
            if t == c.max_iters:
                break
            s = gd_step(p, c.eta, s)
    return Outcome(OutcomeKind.UNDECIDED, s, c.max_iters, loss)


def simulate_batch(p: ScalarProblem, c: StepConfig, U: np.ndarray, V: np.ndarray) -> BatchOutcome:
    """N 個の初期点 (N×d 配列) をまとめて simulate する

    停止規則は simulate と同一。停止した点は以降の更新から外す。
    """
    U = np.array(U, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    if U.ndim == 1:
        U = U[:, None]
        V = V[:, None]
    if U.shape != V.shape or U.shape[1] != p.d:
        raise DomainError(f"初期点の形状が不正です: U{U.shape}, V{V.shape}, d={p.d}")

    n = U.shape[0]
    kinds = np.full(n, OutcomeKind.UNDECIDED.code, dtype=np.int8)
    iterations = np.full(n, c.max_iters, dtype=np.int64)
    losses = np.full(n, np.nan)
    gmin = global_min(p)
    saddle_possible = p.lam < abs(p.y)
    active = np.arange(n)

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(c.max_iters + 1):
            if active.size == 0:
                break
            u = U[active]
            v = V[active]
            r = np.einsum("ij,ij->i", u, v) - p.y
            sq = np.einsum("ij,ij->i", u, u) + np.einsum("ij,ij->i", v, v)
            loss = 0.5 * r * r + 0.5 * p.lam * sq

            finite = np.isfinite(loss)
            conv = finite & (loss <= gmin + c.loss_tol)
            if saddle_possible:
                saddle = finite & ~conv & (np.sqrt(sq) <= c.saddle_tol)
            else:
                saddle = np.zeros_like(conv)
            div = ~finite | (~conv & ~saddle & (loss >= c.divergence_threshold))

            for mask, kind in ((conv, OutcomeKind.CONVERGED_MINIMIZER),
                               (saddle, OutcomeKind.CONVERGED_SADDLE),
                               (div, OutcomeKind.DIVERGED)):
                idx = active[mask]
                kinds[idx] = kind.code
                iterations[idx] = t
                losses[idx] = np.where(finite[mask], loss[mask], np.inf)

            done = conv | saddle | div
            if t == c.max_iters:
                losses[active[~done]] = loss[~done]
                break

            keep = ~done
            u, v, r = u[keep], v[keep], r[keep, None]
            active = active[keep]
            U[active] = u - c.eta * (r * v + p.lam * u)
            V[active] = v - c.eta * (r * u + p.lam * v)

    return BatchOutcome(kinds, iterations, U, V, losses)


# =========================================================================
# Hessian・インバランス
# =========================================================================

def scalar_hessian(p: ScalarProblem, s: ScalarState) -> np.ndarray:
    """解析的 Hessian [[vvᵀ+λI, rI+vuᵀ], [rI+uvᵀ, uuᵀ+λI]]"""
    _check_dims(p, s)
    u, v = s.u, s.v
    r = u @ v - p.y
    eye = np.eye(p.d)
    return np.block([
        [np.outer(v, v) + p.lam * eye, r * eye + np.outer(v, u)],
        [r * eye + np.outer(u, v), np.outer(u, u) + p.lam * eye],
    ])


def hessian_eigenvalues_unregularized(p: ScalarProblem, s: ScalarState) -> List[float]:
    """λ=0 の Hessian 固有値（閉形式, 昇順, 長さ 2d）

    ±(u·v − y) が各 d−1 重、残り 2 つは
    ½(S ± √(S² + 4r² + 8r·u·v)),  S = ‖u‖²+‖v‖², r = u·v − y
    """
    if p.lam != 0:
        raise DomainError("hessian_eigenvalues_unregularized は lam=0 専用です")
    _check_dims(p, s)
    uv = float(s.u @ s.v)
    r = uv - p.y
    S = s.squared_norm
    disc = max(S * S + 4.0 * r * r + 8.0 * r * uv, 0.0)
    root = np.sqrt(disc)
    eigs = [r] * (p.d - 1) + [-r] * (p.d - 1) + [0.5 * (S + root), 0.5 * (S - root)]
    return sorted(float(e) for e in eigs)


def imbalance(s: ScalarState) -> float:
    """‖uuᵀ − vvᵀ‖_F = √(‖u‖⁴ + ‖v‖⁴ − 2(u·v)²)"""
    uu = s.u @ s.u
    vv = s.v @ s.v
    uv = s.u @ s.v
    return float(np.sqrt(max(uu * uu + vv * vv - 2.0 * uv * uv, 0.0)))
