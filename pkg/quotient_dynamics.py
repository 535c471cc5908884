# quotient_dynamics.py
"""
商力学系 (z, w) = T(u, v)

射影 T、平面写像 f / F、Lyapunov 的関数 Q、領域判定、逆像の五次方程式、
3 本の逆分枝 G0 / G1 / G2 と境界到達の構成を提供する。

スケール済み座標 (z, w) = (η(u·v − y), η(‖u‖²+‖v‖²)) 上で F は
    z' = z³ + μz² + ((1−ν)² − w + νw)z + ν²μ − 2μν
    w' = ((1−ν)² + z²)w − 4z(1−ν)(z + μ)
と書ける（μ = ηy, ν = ηλ）。状態空間は錐 Ω = {w ≥ 2|z + μ|}。
倍精度のみで計算する。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from error_handler import BranchDomainError, DomainError, RootFindingError
from scalar_dynamics import ScalarProblem, ScalarState, global_min

logger = logging.getLogger(__name__)

# =========================================================================
# 型定義
# =========================================================================

@dataclass(frozen=True)
class QuotientParams:
    """F のパラメータ μ = ηy, ν = ηλ"""
    mu: float
    nu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "nu", float(self.nu))

    @classmethod
    def from_problem(cls, p: ScalarProblem, eta: float) -> "QuotientParams":
        return cls(mu=eta * p.y, nu=eta * p.lam)

    @property
    def alpha(self) -> float:
        return 1.0 - self.nu

    @property
    def sign(self) -> float:
        return -1.0 if self.mu < 0 else 1.0

    @property
    def in_branch_regime(self) -> bool:
        return 0.0 <= self.nu < 1.0 - abs(self.mu)

    def check_branch_regime(self):
        if not self.in_branch_regime:
            raise DomainError(
                f"逆分枝には 0 ≤ ν < 1 − |μ| が必要です (μ={self.mu}, ν={self.nu})"
            )


@dataclass(frozen=True)
class QuotientState:
    """Ω 上の点 (z, w)（所属は omega_membership で判定し、生成時には強制しない）"""
    z: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "w", float(self.w))

    def as_array(self) -> np.ndarray:
        return np.array([self.z, self.w])

    def distance(self, other: "QuotientState") -> float:
        return float(np.hypot(self.z - other.z, self.w - other.w))


class BranchId(Enum):
    G0 = "G0"
    G1 = "G1"
    G2 = "G2"


class OmegaRegion(Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    OUTSIDE = "Outside"


class Monotonicity(Enum):
    DECREASE = "Decrease"
    INCREASE = "Increase"
    INVARIANT_SET = "InvariantSet"


@dataclass(frozen=True)
class QuotientTolerances:
    tol_verify: float = 1e-9
    tol_geom: float = 1e-12
    radicand_clamp: float = 1e-12
    branch_tie: float = 1e-12


DEFAULT_TOLERANCES = QuotientTolerances()

# =========================================================================
# 射影と写像
# =========================================================================

def project_raw(s: ScalarState) -> Tuple[float, float]:
    """T(u, v) = (u·v, ‖u‖² + ‖v‖²)"""
    return float(s.u @ s.v), s.squared_norm


def project_scaled(s: ScalarState, p: ScalarProblem, eta: float) -> QuotientState:
    """F が作用する座標 (η(u·v − y), η(‖u‖² + ‖v‖²))"""
    if not eta > 0:
        raise DomainError(f"eta は正の値が必要です: {eta}")
    z, w = project_raw(s)
    return QuotientState(eta * (z - p.y), eta * w)


def f_step(eta: float, y: float, lam: float, zw: Tuple[float, float]) -> Tuple[float, float]:
    """スケール前の商写像 f（z は u·v − y）"""
    z, w = zw
    e2 = eta * eta
    a = 1.0 - eta * lam
    z_next = (e2 * z ** 3 + e2 * y * z ** 2 + (a * a - eta * w + e2 * lam * w) * z
              + y * e2 * lam * lam - 2.0 * y * eta * lam)
    w_next = (a * a + e2 * z * z) * w - 4.0 * eta * z * a * (z + y)
    return z_next, w_next


def F_map(q: QuotientParams, z, w):
    """配列対応の F"""
    a = q.alpha
    z_next = z ** 3 + q.mu * z ** 2 + (a * a - a * w) * z + q.nu * q.nu * q.mu - 2.0 * q.mu * q.nu
    w_next = (a * a + z * z) * w - 4.0 * z * a * (z + q.mu)
    return z_next, w_next


def F_step(q: QuotientParams, s: QuotientState) -> QuotientState:
    z, w = F_map(q, s.z, s.w)
    return QuotientState(z, w)


def F_jacobian(q: QuotientParams, z: float, w: float) -> np.ndarray:
    a = q.alpha
    return np.array([
        [3.0 * z * z + 2.0 * q.mu * z + a * a - a * w, -a * z],
        [2.0 * z * w - 4.0 * a * (2.0 * z + q.mu), a * a + z * z],
    ])


def F_iterate(q: QuotientParams, s: QuotientState, n: int) -> QuotientState:
    z, w = s.z, s.w
    for _ in range(n):
        z, w = F_map(q, z, w)
    return QuotientState(z, w)

# =========================================================================
# Q 関数と領域判定
# =========================================================================

def Q_field(q: QuotientParams, z, w, clamp: float = DEFAULT_TOLERANCES.radicand_clamp):
    """配列対応の Q = w + √(w² − 16μz)。根号内が −clamp 未満の点は nan"""
    radicand = np.asarray(w * w - 16.0 * q.mu * z, dtype=float)
    scale = np.maximum(1.0, np.asarray(w * w, dtype=float))
    bad = radicand < -clamp * scale
    root = np.sqrt(np.maximum(radicand, 0.0))
    return np.where(bad, np.nan, w + root)


def Q(q: QuotientParams, s: QuotientState, tol: QuotientTolerances = DEFAULT_TOLERANCES) -> float:
    radicand = s.w * s.w - 16.0 * q.mu * s.z
    if radicand < -tol.radicand_clamp * max(1.0, s.w * s.w):
        raise DomainError(f"Q の根号内が負です（Ω の外）: z={s.z}, w={s.w}, radicand={radicand:.3e}")
    return s.w + float(np.sqrt(max(radicand, 0.0)))


def omega_margin(q: QuotientParams, z, w):
    """w − 2|z + μ|（Ω 内で非負）"""
    return w - 2.0 * np.abs(z + q.mu)


def omega_membership(q: QuotientParams, s: QuotientState,
                     tol: float = DEFAULT_TOLERANCES.tol_geom) -> OmegaRegion:
    g = omega_margin(q, s.z, s.w)
    if g > tol:
        return OmegaRegion.INTERIOR
    if g >= -tol:
        return OmegaRegion.BOUNDARY
    return OmegaRegion.OUTSIDE


def monotonicity_class(q: QuotientParams, s: QuotientState,
                       tol: float = DEFAULT_TOLERANCES.tol_geom) -> Monotonicity:
    """Q∘F − Q の符号による分類

    ν=0: 不変集合 Z = {w=μz+4} ∪ {z=0} ∪ {Q=4|μ|} 上は InvariantSet、
         それ以外は sign(w − μz − 4)。
    ν>0: z² ≤ 2ν−ν² または w ≤ −μ(z²−2ν+ν²)/(z(ν−1)) − 4z²(ν−1)/(ν²−2ν+z²) なら Decrease。
    """
    z, w, mu, nu = s.z, s.w, q.mu, q.nu
    if omega_membership(q, s, tol) is OmegaRegion.OUTSIDE:
        raise DomainError(f"Ω の外の点です: z={z}, w={w}")

    if nu == 0.0:
        gap = w - mu * z - 4.0
        on_level_floor = abs(Q(q, s) - 4.0 * abs(mu)) <= tol * max(1.0, abs(w))
        if abs(gap) <= tol * max(1.0, abs(w)) or abs(z) <= tol or on_level_floor:
            return Monotonicity.INVARIANT_SET
        return Monotonicity.DECREASE if gap < 0 else Monotonicity.INCREASE

    c = 2.0 * nu - nu * nu
    z2 = z * z
    if z2 <= c:
        return Monotonicity.DECREASE
    bound = -mu * (z2 - c) / (z * (nu - 1.0)) - 4.0 * z2 * (nu - 1.0) / (z2 - c)
    return Monotonicity.DECREASE if w <= bound else Monotonicity.INCREASE

# =========================================================================
# 逆像（五次方程式）
# =========================================================================

def preimage_polynomial(q: QuotientParams, target: QuotientState) -> np.ndarray:
    """逆像の z が満たす五次多項式の係数（降冪, モニック）

    N(z) = z³ + μz² + a²z + c,  c = ν²μ − 2μν − z₀,  a = 1 − ν として
    p(z) = N(z)(z² + a²) − az(4az(z + μ) + w₀)
    """
    return _preimage_coefficients(q, np.array([target.z]), np.array([target.w]))[0]


def _preimage_coefficients(q: QuotientParams, z0: np.ndarray, w0: np.ndarray) -> np.ndarray:
    a = q.alpha
    a2 = a * a
    mu = q.mu
    c = q.nu * q.nu * mu - 2.0 * mu * q.nu - z0
    n = z0.shape[0]
    coeffs = np.empty((n, 6))
    coeffs[:, 0] = 1.0
    coeffs[:, 1] = mu
    coeffs[:, 2] = -2.0 * a2
    coeffs[:, 3] = c - 3.0 * a2 * mu
    coeffs[:, 4] = a2 * a2 - a * w0
    coeffs[:, 5] = a2 * c
    return coeffs


def _horner(coeffs: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """各行の多項式とその導関数を x (N×k) で評価"""
    p = np.ones_like(x) * coeffs[:, :1]
    dp = np.zeros_like(x)
    for j in range(1, coeffs.shape[1]):
        dp = dp * x + p
        p = p * x + coeffs[:, j:j + 1]
    return p, dp


def _recover_w(q: QuotientParams, z: np.ndarray, w0: np.ndarray) -> np.ndarray:
    a = q.alpha
    return (4.0 * z * a * (z + q.mu) + w0) / (z * z + a * a)


def preimage_batch(q: QuotientParams, z0, w0,
                   tol: QuotientTolerances = DEFAULT_TOLERANCES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """N 個のターゲットの逆像候補をまとめて求める

    Returns:
        (zc, wc, valid): いずれも N×5。valid は検証済みかつ重複除去済みの候補。
    """
    q.check_branch_regime()
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    n = z0.shape[0]
    coeffs = _preimage_coefficients(q, z0, w0)

    companion = np.zeros((n, 5, 5))
    companion[:, 0, :] = -coeffs[:, 1:]
    companion[:, 1:, :-1] = np.eye(4)
    try:
        roots = np.linalg.eigvals(companion)
    except np.linalg.LinAlgError as e:
        raise RootFindingError(f"コンパニオン行列の固有値計算に失敗しました: {e}")

    real = np.abs(roots.imag) <= 1e-6 * (1.0 + np.abs(roots.real))
    zc = roots.real.copy()

    # 多項式上の Newton 法（2 回, 改善した場合のみ採用）
    for _ in range(2):
        p, dp = _horner(coeffs, zc)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0.0, p / dp, 0.0)
        candidate = zc - step
        p_new, _ = _horner(coeffs, candidate)
        improve = np.isfinite(candidate) & (np.abs(p_new) <= np.abs(p))
        zc = np.where(improve, candidate, zc)

    wc = _recover_w(q, zc, w0[:, None])
    zc, wc = _refine_on_system(q, zc, wc, z0[:, None], w0[:, None])

    if not np.all(np.isfinite(zc[real])):
        p, _ = _horner(coeffs, np.where(np.isfinite(zc), zc, 0.0))
        raise RootFindingError("実根の精密化が収束しませんでした", residuals=list(np.abs(p[real]).ravel()))

    scale = np.maximum(1.0, np.maximum(np.abs(z0), np.abs(w0)))[:, None]
    fz, fw = F_map(q, zc, wc)
    residual = np.maximum(np.abs(fz - z0[:, None]), np.abs(fw - w0[:, None]))
    in_omega = omega_margin(q, zc, wc) >= -tol.tol_verify * np.maximum(1.0, np.abs(wc))
    valid = real & np.isfinite(residual) & (residual <= tol.tol_verify * scale) & in_omega

    # 重根による重複を除去
    for i in range(1, 5):
        for j in range(i):
            dup = (valid[:, i] & valid[:, j]
                   & (np.abs(zc[:, i] - zc[:, j]) <= 1e-7 * (1.0 + np.abs(zc[:, j])))
                   & (np.abs(wc[:, i] - wc[:, j]) <= 1e-7 * (1.0 + np.abs(wc[:, j]))))
            valid[:, i] &= ~dup
    return zc, wc, valid


def _refine_on_system(q: QuotientParams, zc: np.ndarray, wc: np.ndarray,
                      z0: np.ndarray, w0: np.ndarray, rounds: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """F(z, w) = target に対する 2 次元 Newton 法（残差が減る場合のみ採用）"""
    a = q.alpha
    with np.errstate(all="ignore"):
        for _ in range(rounds):
            fz, fw = F_map(q, zc, wc)
            rz, rw = fz - z0, fw - w0
            j11 = 3.0 * zc * zc + 2.0 * q.mu * zc + a * a - a * wc
            j12 = -a * zc
            j21 = 2.0 * zc * wc - 4.0 * a * (2.0 * zc + q.mu)
            j22 = a * a + zc * zc
            det = j11 * j22 - j12 * j21
            ok = np.abs(det) > 1e-14
            dz = np.where(ok, (j22 * rz - j12 * rw) / np.where(ok, det, 1.0), 0.0)
            dw = np.where(ok, (-j21 * rz + j11 * rw) / np.where(ok, det, 1.0), 0.0)
            z_new, w_new = zc - dz, wc - dw
            fz2, fw2 = F_map(q, z_new, w_new)
            better = (np.isfinite(z_new) & np.isfinite(w_new)
                      & (np.maximum(np.abs(fz2 - z0), np.abs(fw2 - w0))
                         < np.maximum(np.abs(rz), np.abs(rw))))
            zc = np.where(better, z_new, zc)
            wc = np.where(better, w_new, wc)
    return zc, wc


def preimage_all(q: QuotientParams, target: QuotientState,
                 tol: QuotientTolerances = DEFAULT_TOLERANCES) -> List[QuotientState]:
    """F の逆像をすべて返す（z の昇順）"""
    q.check_branch_regime()
    if omega_membership(q, target, tol.tol_verify) is OmegaRegion.OUTSIDE:
        raise DomainError(f"ターゲットが Ω の外です: {target}")

    zc, wc, valid = preimage_batch(q, [target.z], [target.w], tol)
    found = [QuotientState(z, w) for z, w, ok in zip(zc[0], wc[0], valid[0]) if ok]

    # z=0 は元の連立方程式で個別に確認
    a = q.alpha
    zero = QuotientState(0.0, target.w / (a * a))
    image = F_step(q, zero)
    scale = max(1.0, abs(target.z), abs(target.w))
    if (max(abs(image.z - target.z), abs(image.w - target.w)) <= tol.tol_verify * scale
            and omega_membership(q, zero, tol.tol_verify) is not OmegaRegion.OUTSIDE
            and all(abs(x.z) > 1e-7 for x in found)):
        found.append(zero)

    return sorted(found, key=lambda x: x.z)

# =========================================================================
# 逆分枝 G0 / G1 / G2
# =========================================================================

def branch_of(q: QuotientParams, z: float, tol: float = DEFAULT_TOLERANCES.branch_tie) -> BranchId:
    """z の範囲による分枝ラベル（境界 z = ±(1−ν) は G1）"""
    a = q.alpha
    if abs(z) <= a + tol:
        return BranchId.G1
    return BranchId.G0 if z < 0 else BranchId.G2


def branch_inverse_batch(q: QuotientParams, b: BranchId, z0, w0,
                         tol: QuotientTolerances = DEFAULT_TOLERANCES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """分枝 b の逆像をまとめて求める。ok=False の点は分枝の定義域外"""
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    zc, wc, valid = preimage_batch(q, z0, w0, tol)
    a = q.alpha
    tie = tol.branch_tie + 1e-9 * np.maximum(1.0, np.abs(zc))

    if b is BranchId.G0:
        in_range = valid & (zc <= -a + tie)
        key = np.where(in_range, zc, np.inf)
        pick = np.argmin(key, axis=1)
    elif b is BranchId.G2:
        in_range = valid & (zc >= a - tie)
        key = np.where(in_range, zc, -np.inf)
        pick = np.argmax(key, axis=1)
    else:
        in_range = valid & (np.abs(zc) <= a + tie)
        qv = Q_field(q, z0, w0, tol.radicand_clamp)
        in_range &= (qv >= 6.0 - 4.0 * q.nu - tol.tol_verify * np.maximum(1.0, np.abs(w0)))[:, None]
        key = np.where(in_range, np.abs(zc), np.inf)
        pick = np.argmin(key, axis=1)

    rows = np.arange(z0.shape[0])
    ok = in_range[rows, pick]
    return zc[rows, pick], wc[rows, pick], ok


def branch_inverse(q: QuotientParams, b: BranchId, target: QuotientState,
                   tol: QuotientTolerances = DEFAULT_TOLERANCES) -> QuotientState:
    """分枝 b の逆像（G0: z ≤ ν−1, G1: |z| ≤ 1−ν, G2: z ≥ 1−ν）"""
    if omega_membership(q, target, tol.tol_verify) is OmegaRegion.OUTSIDE:
        raise DomainError(f"ターゲットが Ω の外です: {target}")
    if b is BranchId.G1:
        q_target = Q(q, target, tol)
        if q_target < 6.0 - 4.0 * q.nu - tol.tol_verify * max(1.0, abs(target.w)):
            raise BranchDomainError(
                f"G1 は Q ≥ 6 − 4ν でのみ定義されます (Q={q_target:.6g})", branch=b.value
            )
    z, w, ok = branch_inverse_batch(q, b, [target.z], [target.w], tol)
    if not ok[0]:
        raise BranchDomainError(f"{b.value} の z 範囲に逆像がありません: {target}", branch=b.value)
    return QuotientState(z[0], w[0])

# =========================================================================
# 境界到達の構成
# =========================================================================

def escape_branch(q: QuotientParams) -> BranchId:
    """極限点へ向かう分枝（μ ≥ 0 なら G0, μ < 0 なら鏡映で G2）"""
    return BranchId.G0 if q.mu >= 0 else BranchId.G2


def limit_point(q: QuotientParams) -> QuotientState:
    """G0^N（μ<0 では G2^N）の極限 ξ。∂Ω 上にあり Q(ξ) = 8 − 4ν"""
    if q.mu >= 0:
        return QuotientState(-2.0 + q.nu, 4.0 - 2.0 * (q.nu + q.mu))
    return QuotientState(2.0 - q.nu, 4.0 - 2.0 * (q.nu - q.mu))


def minimizer_image(q: QuotientParams) -> QuotientState:
    """正則化問題の最小点集合の像"""
    if q.nu == 0.0:
        raise DomainError("ν=0 では最小点集合の像は直線 {z=0} で、1 点に定まりません")
    if abs(q.mu) <= q.nu:
        return QuotientState(-q.mu, 0.0)
    return QuotientState(-q.sign * q.nu, 2.0 * (abs(q.mu) - q.nu))


def g0_limit(q: QuotientParams, start: QuotientState, n: int,
             tol: QuotientTolerances = DEFAULT_TOLERANCES) -> QuotientState:
    """G0 を n 回適用（μ<0 は G2）。n → ∞ で limit_point(q) に近づく"""
    if not (0.0 <= q.nu < min(0.5, 1.0 - abs(q.mu))):
        raise DomainError(f"g0_limit には 0 ≤ ν < min(½, 1 − |μ|) が必要です (μ={q.mu}, ν={q.nu})")
    branch = escape_branch(q)
    x = start
    for k in range(n):
        try:
            x = branch_inverse(q, branch, x, tol)
        except BranchDomainError as e:
            raise BranchDomainError(str(e), branch=branch.value, step=k)
    return x


def reach_initial(q: QuotientParams, target: QuotientState, suffix: Sequence[BranchId], n_g0: int,
                  tol: QuotientTolerances = DEFAULT_TOLERANCES) -> QuotientState:
    """G_suffix ∘ G0^n_g0 (target) を返す

    suffix[0] が最初に適用される。返した点から F を n_g0 + len(suffix) 回
    適用すると target に戻る。
    """
    branch = escape_branch(q)
    x = target
    steps = [branch] * n_g0 + list(suffix)
    for k, b in enumerate(steps):
        try:
            x = branch_inverse(q, b, x, tol)
        except BranchDomainError as e:
            raise BranchDomainError(f"{b.value} の適用に失敗: {e}", branch=b.value, step=k)
    return x


def forward_residual(q: QuotientParams, start: QuotientState, target: QuotientState, n: int) -> float:
    return F_iterate(q, start, n).distance(target)

# =========================================================================
# ファイバー持ち上げ
# =========================================================================

def lift_to_fiber(p: ScalarProblem, eta: float, x: QuotientState,
                  e1: Optional[np.ndarray] = None, e2: Optional[np.ndarray] = None,
                  signs: Tuple[int, int] = (1, 1)) -> ScalarState:
    """project_scaled が x に一致するスカラー状態を作る

    u + σv = ±√(W + 2σZ)·e1,  u − σv = ±√(W − 2σZ)·e2  （Z, W はスケール前, σ = sgn(y)）
    e1, e2 は単位ベクトルなら何でもよい（省略時は第 1 基底）。
    """
    sigma = p.sign
    Z = x.z / eta + p.y
    W = x.w / eta
    plus_sq = W + 2.0 * sigma * Z
    minus_sq = W - 2.0 * sigma * Z
    slack = 1e-9 * max(1.0, abs(W))
    if plus_sq < -slack or minus_sq < -slack:
        raise DomainError(f"Ω の外の点は持ち上げられません: {x}")

    if e1 is None:
        e1 = np.eye(p.d)[0]
    if e2 is None:
        e2 = e1
    e1 = np.asarray(e1, dtype=float) / np.linalg.norm(e1)
    e2 = np.asarray(e2, dtype=float) / np.linalg.norm(e2)

    P = signs[0] * np.sqrt(max(plus_sq, 0.0)) * e1
    M = signs[1] * np.sqrt(max(minus_sq, 0.0)) * e2
    return ScalarState(0.5 * (P + M), sigma * 0.5 * (P - M))

# =========================================================================
# 商空間でのまとめ反復
# =========================================================================

def quotient_loss(q: QuotientParams, eta: float, z, w):
    """スケール座標で表した損失 ½(z/η)² + (λ/2)(w/η)"""
    lam = q.nu / eta
    return 0.5 * (z / eta) ** 2 + 0.5 * lam * (w / eta)


def quotient_global_min(q: QuotientParams, eta: float) -> float:
    return global_min(ScalarProblem(y=q.mu / eta, lam=q.nu / eta))


def quotient_outcomes(q: QuotientParams, eta: float, z, w, n_iters: int, loss_tol: float,
                      divergence_threshold: float = 1e12, early_stop: bool = True) -> np.ndarray:
    """F を反復して各点を分類（1: 収束, 3: 発散, 0: 未決）

    early_stop=False のときは n_iters 回適用してから損失で判定する。
    """
    z = np.array(z, dtype=float, copy=True).ravel()
    w = np.array(w, dtype=float, copy=True).ravel()
    gmin = quotient_global_min(q, eta)
    codes = np.zeros(z.shape[0], dtype=np.int8)

    with np.errstate(all="ignore"):
        if not early_stop:
            for _ in range(n_iters):
                z, w = F_map(q, z, w)
            loss = quotient_loss(q, eta, z, w)
            codes[np.isfinite(loss) & (loss < gmin + loss_tol)] = 1
            codes[~np.isfinite(loss) | (loss >= divergence_threshold)] = 3
            return codes

        active = np.arange(z.shape[0])
        for t in range(n_iters + 1):
            if active.size == 0:
                break
            zt, wt = z[active], w[active]
            loss = quotient_loss(q, eta, zt, wt)
            conv = np.isfinite(loss) & (loss <= gmin + loss_tol)
            div = ~np.isfinite(loss) | (~conv & (loss >= divergence_threshold))
            codes[active[conv]] = 1
            codes[active[div]] = 3
            keep = ~(conv | div)
            active = active[keep]
            if t == n_iters:
                break
            z[active], w[active] = F_map(q, zt[keep], wt[keep])
    return codes
