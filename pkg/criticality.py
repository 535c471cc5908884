# criticality.py
"""
臨界ステップサイズと収束領域

η* の閉形式、D'_η の判定、小ステップでの選択閾値、最小点集合 M と
最近・最遠の解 p⁻ / p⁺、シミュレーション結果の分類、境界近傍の感度の証拠を扱う。
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from error_handler import BranchDomainError, DomainError
from quotient_dynamics import (
    DEFAULT_TOLERANCES,
    BranchId,
    QuotientParams,
    QuotientState,
    QuotientTolerances,
    branch_inverse,
    escape_branch,
    lift_to_fiber,
    minimizer_image,
    reach_initial,
)
from scalar_dynamics import (
    Outcome,
    OutcomeKind,
    ScalarProblem,
    ScalarState,
    StepConfig,
    imbalance,
    simulate,
)

logger = logging.getLogger(__name__)

# =========================================================================
# 最小点集合
# =========================================================================

class MinimizerKind(Enum):
    SPHERE = "Sphere"
    ORIGIN_ONLY = "OriginOnly"
    HYPERBOLOID = "Hyperboloid"


@dataclass(frozen=True)
class MinimizerSet:
    """大域最小点の集合 M"""
    kind: MinimizerKind
    radius_sq: float = 0.0
    sign: float = 1.0

    @classmethod
    def from_problem(cls, p: ScalarProblem) -> "MinimizerSet":
        if p.lam == 0:
            return cls(MinimizerKind.HYPERBOLOID, 0.0, p.sign)
        if p.lam >= abs(p.y):
            return cls(MinimizerKind.ORIGIN_ONLY, 0.0, p.sign)
        return cls(MinimizerKind.SPHERE, abs(p.y) - p.lam, p.sign)

    def point(self, direction: np.ndarray) -> ScalarState:
        """方向 n の Sphere 上の点 (r·n, sgn(y)·r·n)"""
        if self.kind is not MinimizerKind.SPHERE:
            raise DomainError(f"{self.kind.value} には方向で決まる点がありません")
        n = np.asarray(direction, dtype=float)
        n = n / np.linalg.norm(n)
        r = np.sqrt(self.radius_sq)
        return ScalarState(r * n, self.sign * r * n)


# =========================================================================
# 臨界ステップサイズ
# =========================================================================

def q_bar(y: float, s: ScalarState) -> float:
    """スケール前の Q: S + √(S² − 16y(u·v − y)),  S = ‖u‖² + ‖v‖²"""
    S = s.squared_norm
    radicand = S * S - 16.0 * y * (float(s.u @ s.v) - y)
    return S + float(np.sqrt(max(radicand, 0.0)))


def critical_step_size(y: float, u0, v0) -> float:
    """η* = min{1/|y|, 8/Q̄(u0, v0)}（λ=0, 1/0 = +∞）"""
    s = ScalarState(u0, v0)
    first = float("inf") if y == 0 else 1.0 / abs(y)
    qb = q_bar(y, s)
    second = float("inf") if qb == 0 else 8.0 / qb
    return min(first, second)


def prior_step_bound(y: float, u0, v0) -> float:
    """比較用の従来の閾値 min{1/(3|y|), 4/(S + 4|y|)}"""
    s = ScalarState(u0, v0)
    first = float("inf") if y == 0 else 1.0 / (3.0 * abs(y))
    denom = s.squared_norm + 4.0 * abs(y)
    second = float("inf") if denom == 0 else 4.0 / denom
    return min(first, second)


def in_domain_Dprime(y: float, eta: float, s: ScalarState) -> bool:
    """s ∈ D'_η ⇔ Q̄(s) < 8/η"""
    if not eta * abs(y) < 1.0:
        raise DomainError(f"in_domain_Dprime には η|y| < 1 が必要です (η={eta}, y={y})")
    return q_bar(y, s) < 8.0 / eta


def small_step_thresholds(y: float, lam: float, s: ScalarState) -> Tuple[float, float]:
    """(8/(4λ+Q̄), 4/(4λ+Q̄)): 前者で収束、後者で p⁻ への収束を保証"""
    denom = 4.0 * lam + q_bar(y, s)
    if denom == 0:
        return float("inf"), float("inf")
    return 8.0 / denom, 4.0 / denom


def bisect_critical_step(p: ScalarProblem, s0: ScalarState, base: Optional[StepConfig] = None,
                         rel_tol: float = 1e-4, eta_max: Optional[float] = None) -> float:
    """シミュレーション結果の二分法による経験的 η*

    収束（ConvergedMinimizer）する最大の η を [0, eta_max] で探す。
    eta_max の既定は 1/|y|（y=0 なら収束しなくなるまで倍々に広げる）。
    """
    base = base or StepConfig(eta=1.0, max_iters=50000, loss_tol=1e-10)

    def converges(eta: float) -> bool:
        return simulate(p, replace(base, eta=eta), s0).kind is OutcomeKind.CONVERGED_MINIMIZER

    if eta_max is None:
        if p.y != 0:
            eta_max = 1.0 / abs(p.y)
        else:
            eta_max = 1.0
            while converges(eta_max) and eta_max < 1e6:
                eta_max *= 2.0

    lo, hi = 0.0, eta_max
    if converges(hi * (1.0 - rel_tol)):
        return hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# =========================================================================
# 最近・最遠の最小点
# =========================================================================

def p_minus_p_plus(m: MinimizerSet, s: ScalarState, tol: float = 1e-12) -> Tuple[ScalarState, ScalarState]:
    """(p⁻, p⁺) = (±r·n, ±sgn(y)·r·n),  n = (u + sgn(y)v)/‖u + sgn(y)v‖"""
    if m.kind is not MinimizerKind.SPHERE:
        raise DomainError(f"p± は Sphere 型の最小点集合でのみ定義されます（{m.kind.value}）")
    direction = s.u + m.sign * s.v
    norm = float(np.linalg.norm(direction))
    if norm < tol:
        raise DomainError("u + sgn(y)v = 0 のため p± が定まりません")
    n = direction / norm
    r = np.sqrt(m.radius_sq)
    return ScalarState(r * n, m.sign * r * n), ScalarState(-r * n, -m.sign * r * n)


def state_distance(a: ScalarState, b: ScalarState) -> float:
    return float(np.linalg.norm(a.as_vector() - b.as_vector()))


# =========================================================================
# 結果の分類
# =========================================================================

class Selection(Enum):
    P_MINUS = "p-"
    P_PLUS = "p+"


@dataclass(frozen=True)
class ClassifiedOutcome:
    """simulate の結果に収束先の診断を付けたもの"""
    outcome: Outcome
    squared_norm: Optional[float] = None
    imbalance: Optional[float] = None
    stable: Optional[bool] = None
    selection: Optional[Selection] = None
    selection_distance: Optional[float] = None

    @property
    def kind(self) -> OutcomeKind:
        return self.outcome.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.outcome.kind.value,
            "iterations": self.outcome.iterations,
            "final_loss": self.outcome.final_loss,
            "squared_norm": self.squared_norm,
            "imbalance": self.imbalance,
            "stable": self.stable,
            "selection": self.selection.value if self.selection else None,
            "selection_distance": self.selection_distance,
        }


def classify_outcome(p: ScalarProblem, c: StepConfig, s0: ScalarState) -> ClassifiedOutcome:
    """simulate を実行し、収束点のノルム・インバランス・安定性・p± の別を付与"""
    out = simulate(p, c, s0)
    if out.kind is not OutcomeKind.CONVERGED_MINIMIZER:
        return ClassifiedOutcome(out)

    final = out.final_state
    sq = final.squared_norm
    selection = None
    selection_distance = None
    m = MinimizerSet.from_problem(p)
    if m.kind is MinimizerKind.SPHERE:
        try:
            p_minus, p_plus = p_minus_p_plus(m, s0)
        except DomainError:
            logger.debug("p± が定まらない初期点のため選択判定を省略")
        else:
            d_minus = state_distance(final, p_minus)
            d_plus = state_distance(final, p_plus)
            if d_minus <= d_plus:
                selection, selection_distance = Selection.P_MINUS, d_minus
            else:
                selection, selection_distance = Selection.P_PLUS, d_plus

    return ClassifiedOutcome(
        outcome=out,
        squared_norm=sq,
        imbalance=imbalance(final),
        stable=sq < 2.0 / c.eta,
        selection=selection,
        selection_distance=selection_distance,
    )


# =========================================================================
# 感度の構成的な証拠
# =========================================================================

@dataclass(frozen=True)
class WitnessPair:
    """近接した 2 初期点と、それぞれの収束先"""
    suffix: Tuple[str, ...]
    n_g0: int
    first: ScalarState
    second: ScalarState
    separation: float
    first_outcome: ClassifiedOutcome
    second_outcome: ClassifiedOutcome
    certified: bool

    def to_dict(self) -> dict:
        return {
            "suffix": list(self.suffix),
            "n_g0": self.n_g0,
            "separation": self.separation,
            "first": self.first_outcome.to_dict(),
            "second": self.second_outcome.to_dict(),
            "certified": self.certified,
        }


def _witness_targets(p: ScalarProblem, q: QuotientParams) -> Tuple[QuotientState, QuotientState]:
    """前方反復で行き着く 2 つのターゲット（商座標）"""
    if p.lam == 0:
        # 安定な最小点 (0, w), 2|μ| ≤ w < 2 から離れた 2 点
        lo, hi = 2.0 * abs(q.mu), 2.0
        span = hi - lo
        return QuotientState(0.0, lo + 0.1 * span), QuotientState(0.0, hi - 0.1 * span)
    m_star = minimizer_image(q)
    # 一方だけ z > 1−ν（μ<0 では鏡映で z < ν−1）を 1 回通過させる
    flip = BranchId.G2 if q.mu >= 0 else BranchId.G0
    return branch_inverse(q, flip, m_star), m_star


def _certify(p: ScalarProblem, a: ClassifiedOutcome, b: ClassifiedOutcome, norm_gap: float) -> bool:
    if a.kind is not OutcomeKind.CONVERGED_MINIMIZER or b.kind is not OutcomeKind.CONVERGED_MINIMIZER:
        return False
    if p.lam == 0:
        return abs(a.squared_norm - b.squared_norm) >= norm_gap
    return a.selection is not None and b.selection is not None and a.selection is not b.selection


def sensitivity_witnesses(p: ScalarProblem, eta: float, suffixes: Sequence[Sequence[BranchId]],
                          eps: float = 1e-4, config: Optional[StepConfig] = None,
                          n_max: int = 80, norm_gap: float = 10.0,
                          tol: QuotientTolerances = DEFAULT_TOLERANCES) -> List[WitnessPair]:
    """境界近傍で eps 以内に近い 2 初期点が異なる最小点へ収束する組を構成する

    λ=0 では二乗ノルムが norm_gap 以上異なる最小点、λ>0 では p⁻ と p⁺。
    分枝の定義域を外れた suffix は記録して飛ばす。
    """
    q = QuotientParams.from_problem(p, eta)
    if not (0.0 <= q.nu < min(0.5, 1.0 - abs(q.mu))):
        raise DomainError(f"感度の構成には 0 ≤ ν < min(½, 1 − |μ|) が必要です (μ={q.mu}, ν={q.nu})")
    config = config or StepConfig(eta=eta, max_iters=20000, loss_tol=1e-12)
    target_a, target_b = _witness_targets(p, q)
    if p.lam == 0 and abs(target_a.w - target_b.w) / eta < norm_gap:
        logger.warning(f"⚠️ η={eta} ではノルム差 {norm_gap} の証拠を作れません（η を小さくしてください）")

    branch = escape_branch(q)
    pairs: List[WitnessPair] = []
    for suffix in suffixes:
        suffix = list(suffix)
        a, b = target_a, target_b
        found = None
        for n in range(n_max + 1):
            try:
                xa = reach_initial(q, a, suffix, 0, tol)
                xb = reach_initial(q, b, suffix, 0, tol)
                sa = lift_to_fiber(p, eta, xa)
                sb = lift_to_fiber(p, eta, xb)
            except (BranchDomainError, DomainError) as e:
                logger.debug(f"suffix={[s.value for s in suffix]} n_g0={n}: {e}")
                sa = sb = None
            if sa is not None and state_distance(sa, sb) < eps:
                found = (n, sa, sb)
                break
            try:
                a = branch_inverse(q, branch, a, tol)
                b = branch_inverse(q, branch, b, tol)
            except (BranchDomainError, DomainError) as e:
                logger.debug(f"脱出分枝の適用に失敗 (n={n}): {e}")
                break

        if found is None:
            logger.info(f"⚠️ suffix={[s.value for s in suffix]} では {eps} 以内の組を作れませんでした")
            continue

        n, sa, sb = found
        oa = classify_outcome(p, config, sa)
        ob = classify_outcome(p, config, sb)
        pairs.append(WitnessPair(
            suffix=tuple(s.value for s in suffix),
            n_g0=n,
            first=sa,
            second=sb,
            separation=state_distance(sa, sb),
            first_outcome=oa,
            second_outcome=ob,
            certified=_certify(p, oa, ob, norm_gap),
        ))
    return pairs
