# matrix_factorization.py
"""
行列分解の勾配降下

L(U, V) = ½‖UᵀV − Y‖²_F + (λ/2)(‖U‖²_F + ‖V‖²_F) の GD、
目標行列の対角化（両側 Jacobi SVD）、直交スライス W と列ごとのスカラー問題への分離、
鞍点・不安定最小点の吸引域の抽出、GD 写像のヤコビ行列式、深い（多因子）分解。
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from criticality import critical_step_size
from error_handler import ConvergenceError, DomainError
from fractal_geometry import (
    Classifier,
    GridSpec,
    SliceEmbedding,
    contour_zero_crossings,
)
from scalar_dynamics import (
    OutcomeKind,
    ScalarProblem,
    ScalarState,
    StepConfig,
    gd_step,
    global_min,
    simulate_batch,
)

logger = logging.getLogger(__name__)

MAX_DENSE_PARAMS = 1000

# =========================================================================
# 型定義
# =========================================================================

@dataclass(frozen=True, eq=False)
class MatrixProblem:
    """目標 Y（対角成分 y_diag、または一般の正方行列 target_full）と正則化 λ"""
    y_diag: np.ndarray
    lam: float = 0.0
    d: int = 1
    target_full: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y_diag, dtype=float)).copy()
        y.setflags(write=False)
        object.__setattr__(self, "y_diag", y)
        if self.d < 1 or y.size < 1:
            raise DomainError(f"d ≥ 1, d_y ≥ 1 が必要です (d={self.d}, d_y={y.size})")
        if self.lam < 0:
            raise DomainError(f"lam は 0 以上が必要です: {self.lam}")
        if self.target_full is not None:
            full = np.asarray(self.target_full, dtype=float).copy()
            if full.shape != (y.size, y.size):
                raise DomainError(f"target_full の形状 {full.shape} が d_y={y.size} と一致しません")
            full.setflags(write=False)
            object.__setattr__(self, "target_full", full)

    @property
    def d_y(self) -> int:
        return int(self.y_diag.size)

    @property
    def target(self) -> np.ndarray:
        if self.target_full is not None:
            return self.target_full
        return np.diag(self.y_diag)

    @property
    def n_params(self) -> int:
        return 2 * self.d * self.d_y

    @classmethod
    def from_target(cls, Y_full, lam: float = 0.0, d: Optional[int] = None) -> "MatrixProblem":
        Y_full = np.asarray(Y_full, dtype=float)
        _, sigma, _ = diagonalize_target(Y_full)
        return cls(sigma, lam, d or Y_full.shape[0], Y_full)

    def column_problem(self, i: int) -> ScalarProblem:
        return ScalarProblem(y=float(self.y_diag[i]), lam=self.lam, d=self.d)


@dataclass(frozen=True, eq=False)
class MatrixState:
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=float, copy=True)
        V = np.array(self.V, dtype=float, copy=True)
        if U.ndim != 2 or U.shape != V.shape:
            raise DomainError(f"U, V は同じ形状の 2 次元配列が必要です: {U.shape}, {V.shape}")
        U.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.V)))

    @property
    def squared_norm(self) -> float:
        return float(np.sum(self.U ** 2) + np.sum(self.V ** 2))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.U.ravel(), self.V.ravel()])

    @classmethod
    def from_vector(cls, theta: np.ndarray, d: int, d_y: int) -> "MatrixState":
        n = d * d_y
        return cls(theta[:n].reshape(d, d_y), theta[n:].reshape(d, d_y))

    def imbalance(self) -> float:
        """‖UUᵀ − VVᵀ‖_F"""
        return float(np.linalg.norm(self.U @ self.U.T - self.V @ self.V.T))


def _check_shape(p: MatrixProblem, s: MatrixState):
    if s.U.shape != (p.d, p.d_y):
        raise DomainError(f"状態の形状 {s.U.shape} が問題 ({p.d}, {p.d_y}) と一致しません")

# =========================================================================
# 損失・勾配・GD
# =========================================================================

def matrix_loss(p: MatrixProblem, s: MatrixState) -> float:
    _check_shape(p, s)
    R = s.U.T @ s.V - p.target
    return float(0.5 * np.sum(R * R) + 0.5 * p.lam * (np.sum(s.U * s.U) + np.sum(s.V * s.V)))


def matrix_gradient(p: MatrixProblem, s: MatrixState) -> Tuple[np.ndarray, np.ndarray]:
    """(V Rᵀ + λU, U R + λV),  R = UᵀV − Y"""
    _check_shape(p, s)
    R = s.U.T @ s.V - p.target
    return s.V @ R.T + p.lam * s.U, s.U @ R + p.lam * s.V


def matrix_gd_step(p: MatrixProblem, eta: float, s: MatrixState) -> MatrixState:
    if not eta > 0:
        raise DomainError(f"eta は正の値が必要です: {eta}")
    gU, gV = matrix_gradient(p, s)
    return MatrixState(s.U - eta * gU, s.V - eta * gV)


def matrix_global_min(p: MatrixProblem) -> float:
    """特異値ごとのスカラー問題の最小値の和（d ≥ d_y）"""
    sigma = p.y_diag if p.target_full is None else diagonalize_target(p.target_full)[1]
    return float(sum(global_min(ScalarProblem(y=float(y), lam=p.lam)) for y in sigma))


@dataclass(frozen=True)
class MatrixOutcome:
    kind: OutcomeKind
    final_state: MatrixState
    iterations: int
    final_loss: float


def matrix_simulate(p: MatrixProblem, c: StepConfig, s0: MatrixState) -> MatrixOutcome:
    """スカラー版 simulate と同じ停止規則"""
    _check_shape(p, s0)
    gmin = matrix_global_min(p)
    saddle_possible = p.lam < float(np.max(np.abs(p.y_diag)))
    s = s0
    loss = float("nan")
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(c.max_iters + 1):
            loss = matrix_loss(p, s) if s.is_finite else float("inf")
            if not math.isfinite(loss):
                return MatrixOutcome(OutcomeKind.DIVERGED, s, t, float("inf"))
            if loss <= gmin + c.loss_tol:
                return MatrixOutcome(OutcomeKind.CONVERGED_MINIMIZER, s, t, loss)
            if saddle_possible and math.sqrt(s.squared_norm) <= c.saddle_tol:
                return MatrixOutcome(OutcomeKind.CONVERGED_SADDLE, s, t, loss)
            if loss >= c.divergence_threshold:
                return MatrixOutcome(OutcomeKind.DIVERGED, s, t, loss)
            if t == c.max_iters:
                break
            s = matrix_gd_step(p, c.eta, s)
    return MatrixOutcome(OutcomeKind.UNDECIDED, s, c.max_iters, loss)


def matrix_simulate_batch(p: MatrixProblem, c: StepConfig, U: np.ndarray, V: np.ndarray):
    """(N, d, d_y) の初期点をまとめて反復する（停止規則は matrix_simulate と同じ）

    戻り値は (kinds, final_U, final_V)。
    """
    U = np.array(U, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    Y = p.target
    gmin = matrix_global_min(p)
    saddle_possible = p.lam < float(np.max(np.abs(p.y_diag)))
    n = U.shape[0]
    kinds = np.full(n, OutcomeKind.UNDECIDED.code, dtype=np.int8)
    active = np.arange(n)

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(c.max_iters + 1):
            if active.size == 0:
                break
            u, v = U[active], V[active]
            R = np.matmul(np.swapaxes(u, 1, 2), v) - Y
            loss = 0.5 * np.sum(R * R, axis=(1, 2)) + 0.5 * p.lam * (
                np.sum(u * u, axis=(1, 2)) + np.sum(v * v, axis=(1, 2)))
            finite = np.isfinite(loss)
            conv = finite & (loss <= gmin + c.loss_tol)
            saddle = np.zeros_like(conv)
            if saddle_possible:
                norm = np.sqrt(np.sum(u * u, axis=(1, 2)) + np.sum(v * v, axis=(1, 2)))
                saddle = finite & ~conv & (norm <= c.saddle_tol)
            div = ~finite | (~conv & ~saddle & (loss >= c.divergence_threshold))
            kinds[active[conv]] = OutcomeKind.CONVERGED_MINIMIZER.code
            kinds[active[saddle]] = OutcomeKind.CONVERGED_SADDLE.code
            kinds[active[div]] = OutcomeKind.DIVERGED.code
            keep = ~(conv | saddle | div)
            if t == c.max_iters:
                break
            u, v, R = u[keep], v[keep], R[keep]
            active = active[keep]
            U[active] = u - c.eta * (np.matmul(v, np.swapaxes(R, 1, 2)) + p.lam * u)
            V[active] = v - c.eta * (np.matmul(u, R) + p.lam * v)
    return kinds, U, V

# =========================================================================
# Hessian とヤコビ行列式
# =========================================================================

def matrix_hessian_vector(p: MatrixProblem, s: MatrixState, dU: np.ndarray, dV: np.ndarray):
    """Hessian と方向 (dU, dV) の積"""
    _check_shape(p, s)
    U, V = s.U, s.V
    R = U.T @ V - p.target
    dR = dU.T @ V + U.T @ dV
    hU = dV @ R.T + V @ dR.T + p.lam * dU
    hV = dU @ R + U @ dR + p.lam * dV
    return hU, hV


def matrix_hessian(p: MatrixProblem, s: MatrixState) -> np.ndarray:
    """as_vector の並び（U, V の行優先）での密な Hessian"""
    n = p.n_params
    if n > MAX_DENSE_PARAMS:
        raise DomainError(f"密な Hessian はパラメータ数 {MAX_DENSE_PARAMS} までです ({n})")
    H = np.empty((n, n))
    basis = np.eye(n)
    for k in range(n):
        e = MatrixState.from_vector(basis[k], p.d, p.d_y)
        hU, hV = matrix_hessian_vector(p, s, e.U, e.V)
        H[:, k] = np.concatenate([hU.ravel(), hV.ravel()])
    return 0.5 * (H + H.T)


def gd_jacobian_det(p: MatrixProblem, eta: float, s: MatrixState) -> float:
    """det(I − ηH)。0 になる点が GD 写像の臨界集合"""
    H = matrix_hessian(p, s)
    sign, logdet = np.linalg.slogdet(np.eye(H.shape[0]) - eta * H)
    return float(sign * np.exp(logdet))


def gd_map_jacobian_fd(p: MatrixProblem, eta: float, s: MatrixState, h: float = 1e-6) -> np.ndarray:
    """GD 写像のヤコビ行列（中心差分）"""
    theta = s.as_vector()
    n = theta.size
    J = np.empty((n, n))
    for k in range(n):
        step = np.zeros(n)
        step[k] = h
        plus = matrix_gd_step(p, eta, MatrixState.from_vector(theta + step, p.d, p.d_y)).as_vector()
        minus = matrix_gd_step(p, eta, MatrixState.from_vector(theta - step, p.d, p.d_y)).as_vector()
        J[:, k] = (plus - minus) / (2.0 * h)
    return J

# =========================================================================
# 目標行列の対角化（両側 Jacobi SVD）
# =========================================================================

def _schur_2x2(m11: float, m12: float, m22: float) -> Tuple[float, float]:
    """対称 2×2 を対角化する回転 (c, s)"""
    if m12 == 0.0:
        return 1.0, 0.0
    tau = (m22 - m11) / (2.0 * m12)
    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c


def jacobi_svd(A: np.ndarray, max_sweeps: int = 100, off_tol: float = 1e-13):
    """正方行列の特異値分解 A = P·diag(σ)·Qmᵀ（σ は非負・降順）

    各 (p, q) 組で左回転により 2×2 小行列を対称化し、対称 Schur 回転で対角化する。
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"jacobi_svd は正方行列のみ扱います: {A.shape}")
    n = A.shape[0]
    P = np.eye(n)
    Qm = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(A)))

    def off_norm(M):
        return float(np.sqrt(np.sum(M * M) - np.sum(np.diag(M) ** 2)))

    for sweep in range(max_sweeps):
        if off_norm(A) <= off_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                x, y, z, w = A[p, p], A[p, q], A[q, p], A[q, q]
                phi = math.atan2(z - y, x + w)
                c1, s1 = math.cos(phi), math.sin(phi)
                G = np.array([[c1, s1], [-s1, c1]])
                M = G @ np.array([[x, y], [z, w]])
                c2, s2 = _schur_2x2(M[0, 0], 0.5 * (M[0, 1] + M[1, 0]), M[1, 1])
                J = np.array([[c2, s2], [-s2, c2]])
                L = J.T @ G
                idx = [p, q]
                A[idx, :] = L @ A[idx, :]
                A[:, idx] = A[:, idx] @ J
                P[:, idx] = P[:, idx] @ L.T
                Qm[:, idx] = Qm[:, idx] @ J
    else:
        if off_norm(A) > off_tol * scale:
            raise ConvergenceError(f"Jacobi SVD が {max_sweeps} スイープで収束しませんでした")

    sigma = np.diag(A).copy()
    negative = sigma < 0
    P[:, negative] *= -1.0
    sigma = np.abs(sigma)
    order = np.argsort(-sigma, kind="stable")
    return P[:, order], sigma[order], Qm[:, order]


def diagonalize_target(Y_full: np.ndarray, max_sweeps: int = 100, off_tol: float = 1e-13):
    """Y = P·diag(Σ)·Qmᵀ。Ũ = UP, Ṽ = VQm で対角目標の問題に移る"""
    return jacobi_svd(Y_full, max_sweeps, off_tol)


def rotate_state(s: MatrixState, P: np.ndarray, Qm: np.ndarray) -> MatrixState:
    return MatrixState(s.U @ P, s.V @ Qm)


def rotation_equivalence(Y_full: np.ndarray, lam: float, eta: float, s0: MatrixState, steps: int,
                         max_sweeps: int = 100, off_tol: float = 1e-13) -> float:
    """元の座標と対角化した座標での GD 軌道のずれ（回転で比較した最大値）"""
    P, sigma, Qm = diagonalize_target(Y_full, max_sweeps, off_tol)
    d = s0.U.shape[0]
    full = MatrixProblem(sigma, lam, d, Y_full)
    diag = MatrixProblem(sigma, lam, d)
    a, b = s0, rotate_state(s0, P, Qm)
    worst = 0.0
    for _ in range(steps):
        a = matrix_gd_step(full, eta, a)
        b = matrix_gd_step(diag, eta, b)
        worst = max(worst, float(np.max(np.abs(rotate_state(a, P, Qm).as_vector() - b.as_vector()))))
    return worst

# =========================================================================
# 直交スライス W
# =========================================================================

def random_frame(n: int, k: int, seed: int) -> np.ndarray:
    """n×k の正規直交枠（シード付き正規乱数を修正 Gram–Schmidt で直交化）"""
    if k > n:
        raise DomainError(f"{n} 次元に {k} 本の正規直交ベクトルは作れません")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, k))
    Qf = np.zeros((n, k))
    for j in range(k):
        v = A[:, j].copy()
        for i in range(j):
            v -= (Qf[:, i] @ v) * Qf[:, i]
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise DomainError("乱数行列がランク落ちしました（別のシードを指定してください）")
        Qf[:, j] = v / norm
    return Qf


def slice_w_init(columns: Sequence[Tuple[Sequence[float], Sequence[float]]], frame: np.ndarray) -> MatrixState:
    """列ごとのスカラー初期値 (u_i, v_i の係数) から W 内の状態を作る

    frame は d×(k·d_y) の正規直交枠（k = 係数の長さ）。列 i は枠の
    i·k … i·k+k−1 列を使うので列どうしは直交する。
    """
    frame = np.asarray(frame, dtype=float)
    d_y = len(columns)
    if d_y == 0:
        raise DomainError("列が指定されていません")
    k = len(columns[0][0])
    if frame.ndim != 2 or frame.shape[1] != k * d_y:
        raise DomainError(f"枠の列数 {frame.shape} は k·d_y = {k * d_y} が必要です")
    d = frame.shape[0]
    if d < d_y:
        raise DomainError(f"W の構成には d ≥ d_y が必要です (d={d}, d_y={d_y})")
    gram = frame.T @ frame
    if np.max(np.abs(gram - np.eye(gram.shape[0]))) > 1e-10:
        raise DomainError("枠が正規直交ではありません（ランク落ちの可能性）")

    U = np.zeros((d, d_y))
    V = np.zeros((d, d_y))
    for i, (u_coef, v_coef) in enumerate(columns):
        if len(u_coef) != k or len(v_coef) != k:
            raise DomainError("全列の係数の長さを揃えてください")
        block = frame[:, i * k:(i + 1) * k]
        U[:, i] = block @ np.asarray(u_coef, dtype=float)
        V[:, i] = block @ np.asarray(v_coef, dtype=float)
    s = MatrixState(U, V)
    err = w_membership_error(s)
    if err > 1e-12:
        raise DomainError(f"構成した状態が W に入っていません (交差内積 {err:.3e})")
    return s


def identity_init(d: int, alpha: float, beta: float) -> MatrixState:
    """Ū = αI, V̄ = βI"""
    return MatrixState(alpha * np.eye(d), beta * np.eye(d))


def w_membership_error(s: MatrixState) -> float:
    """異なる列どうしの内積 ⟨uᶦ,uʲ⟩, ⟨uᶦ,vʲ⟩, ⟨vᶦ,vʲ⟩ の絶対値の最大"""
    d_y = s.U.shape[1]
    if d_y < 2:
        return 0.0
    off = ~np.eye(d_y, dtype=bool)
    grams = (s.U.T @ s.U, s.U.T @ s.V, s.V.T @ s.V)
    return float(max(np.max(np.abs(g[off])) for g in grams))


def decoupling_check(p: MatrixProblem, eta: float, s0: MatrixState, steps: int,
                     require_w: bool = True) -> float:
    """行列 GD と列ごとのスカラー GD の軌道のずれの最大値"""
    _check_shape(p, s0)
    if p.target_full is not None:
        raise DomainError("decoupling_check は対角目標の問題に使います")
    if require_w and w_membership_error(s0) > 1e-10:
        raise DomainError("初期点が W に入っていません")

    scalars = [(p.column_problem(i), ScalarState(s0.U[:, i], s0.V[:, i])) for i in range(p.d_y)]
    s = s0
    worst = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            s = matrix_gd_step(p, eta, s)
            scalars = [(sp, gd_step(sp, eta, st)) for sp, st in scalars]
            U = np.column_stack([st.u for _, st in scalars])
            V = np.column_stack([st.v for _, st in scalars])
            dev = max(float(np.max(np.abs(U - s.U))), float(np.max(np.abs(V - s.V))))
            if not math.isfinite(dev):
                return float("inf")
            worst = max(worst, dev)
    return worst


def matrix_critical_step_size(p: MatrixProblem, s0: MatrixState) -> float:
    """W 内の初期点での η* = 列ごとの η* の最小値（λ=0）"""
    if p.lam != 0:
        raise DomainError("matrix_critical_step_size は λ=0 の問題にのみ定義されます")
    return min(critical_step_size(float(p.y_diag[i]), s0.U[:, i], s0.V[:, i]) for i in range(p.d_y))


def matrix_bisect_critical_step(p: MatrixProblem, s0: MatrixState, base: Optional[StepConfig] = None,
                                rel_tol: float = 1e-4) -> float:
    """matrix_simulate による経験的 η*"""
    base = base or StepConfig(eta=1.0, max_iters=50000, loss_tol=1e-10)

    def converges(eta: float) -> bool:
        return matrix_simulate(p, replace(base, eta=eta), s0).kind is OutcomeKind.CONVERGED_MINIMIZER

    hi = 1.0 / float(np.max(np.abs(p.y_diag)))
    lo = 0.0
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
# 鞍点・不安定最小点の吸引域
# =========================================================================

def _run_steps(p: ScalarProblem, eta: float, U: np.ndarray, V: np.ndarray, n_steps: int):
    U = np.array(U, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            r = np.einsum("ij,ij->i", U, V)[:, None] - p.y
            U, V = U - eta * (r * V + p.lam * U), V - eta * (r * U + p.lam * V)
    return U, V


def _grid_states(spec: GridSpec):
    xs, ys = spec.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    return X, Y


def saddle_basin_points(p: ScalarProblem, eta: float, spec: GridSpec, n_steps: int,
                        config: Optional[StepConfig] = None) -> np.ndarray:
    """(u, v) 平面（d=1）で鞍点へ向かう初期点の集合を輪郭抽出する

    n_steps 後の (u + sgn(y)v)/√2（{u = −sgn(y)v} までの符号付き距離）の零点を求め、
    λ=0 では D'_η に入る点、λ>0 では両隣のセルが最小点へ収束する点だけを残す。
    """
    if p.d != 1:
        raise DomainError("saddle_basin_points は d=1 の問題に使います")
    X, Y = _grid_states(spec)
    U, V = _run_steps(p, eta, X.reshape(-1, 1), Y.reshape(-1, 1), n_steps)
    field_ = ((U[:, 0] + p.sign * V[:, 0]) / math.sqrt(2.0)).reshape(X.shape)
    field_[~np.isfinite(field_)] = np.nan
    points, cells = contour_zero_crossings(spec, field_, return_cells=True)
    if points.shape[0] == 0:
        return points

    if p.lam == 0:
        u, v = points[:, 0], points[:, 1]
        S = u * u + v * v
        radicand = np.maximum(S * S - 16.0 * p.y * (u * v - p.y), 0.0)
        keep = S + np.sqrt(radicand) < 8.0 / eta
    else:
        c = config or StepConfig(eta=eta, max_iters=max(1000, n_steps))
        batch = simulate_batch(p, c, X.reshape(-1, 1), Y.reshape(-1, 1))
        converged = batch.converged.reshape(X.shape)
        keep = converged[cells[:, 0], cells[:, 1]] & converged[cells[:, 2], cells[:, 3]]
    logger.info(f"🧭 鞍点吸引域: 候補 {points.shape[0]} 点 → {int(keep.sum())} 点")
    return points[keep]


def unstable_basin_points(p: ScalarProblem, eta: float, spec: GridSpec, n_steps: int,
                          residual_tol: float = 0.05, norm_slack: float = 1e-6) -> np.ndarray:
    """n_steps 以内に不安定な最小点（‖u‖²+‖v‖² ≥ 2/η）へ到達する初期点を輪郭抽出する

    n_steps 後の u·v − y の零点を求め、各点を再度 n_steps 進めて
    |u·v − y| ≤ residual_tol かつ二乗ノルムが 2/η 以上のものを残す。
    """
    if p.lam != 0:
        raise DomainError("unstable_basin_points は λ=0 の問題に使います")
    if p.d != 1:
        raise DomainError("unstable_basin_points は d=1 の問題に使います")
    X, Y = _grid_states(spec)
    U, V = _run_steps(p, eta, X.reshape(-1, 1), Y.reshape(-1, 1), n_steps)
    residual = (U[:, 0] * V[:, 0] - p.y).reshape(X.shape)
    residual[~np.isfinite(residual)] = np.nan
    points = contour_zero_crossings(spec, residual)
    if points.shape[0] == 0:
        return points

    Uf, Vf = _run_steps(p, eta, points[:, :1], points[:, 1:], n_steps)
    final_res = Uf[:, 0] * Vf[:, 0] - p.y
    sq = Uf[:, 0] ** 2 + Vf[:, 0] ** 2
    keep = np.isfinite(final_res) & (np.abs(final_res) <= residual_tol) & (sq >= 2.0 / eta - norm_slack)
    logger.info(f"🧭 不安定最小点の吸引域: 候補 {points.shape[0]} 点 → {int(keep.sum())} 点")
    return points[keep]

# =========================================================================
# 深い分解
# =========================================================================

def _chain(mats: Sequence[np.ndarray], dim: int) -> np.ndarray:
    out = np.eye(dim)
    for m in mats:
        out = out @ m
    return out


def _deep_target(factors: Sequence[np.ndarray], y_diag) -> np.ndarray:
    rows, cols = factors[0].shape[0], factors[-1].shape[1]
    y = np.atleast_1d(np.asarray(y_diag, dtype=float))
    if y.size > min(rows, cols):
        raise DomainError(f"y_diag の長さ {y.size} が積の形状 ({rows}, {cols}) に収まりません")
    Y = np.zeros((rows, cols))
    Y[np.arange(y.size), np.arange(y.size)] = y
    return Y


def _check_chain(factors: Sequence[np.ndarray]):
    if len(factors) < 1:
        raise DomainError("因子が空です")
    for a, b in zip(factors[:-1], factors[1:]):
        if a.shape[1] != b.shape[0]:
            raise DomainError(f"因子の形状が連結できません: {a.shape} × {b.shape}")


def deep_loss(factors: Sequence[np.ndarray], y_diag, lam: float = 0.0) -> float:
    factors = [np.asarray(f, dtype=float) for f in factors]
    _check_chain(factors)
    R = _chain(factors, factors[0].shape[0]) - _deep_target(factors, y_diag)
    reg = sum(float(np.sum(f * f)) for f in factors)
    return float(0.5 * np.sum(R * R) + 0.5 * lam * reg)


def deep_gradient(factors: Sequence[np.ndarray], y_diag, lam: float = 0.0) -> List[np.ndarray]:
    """因子 i の勾配 (W₁…W_{i−1})ᵀ R (W_{i+1}…W_k)ᵀ + λWᵢ"""
    factors = [np.asarray(f, dtype=float) for f in factors]
    _check_chain(factors)
    R = _chain(factors, factors[0].shape[0]) - _deep_target(factors, y_diag)
    grads = []
    for i, f in enumerate(factors):
        left = _chain(factors[:i], factors[0].shape[0])
        right = _chain(factors[i + 1:], f.shape[1])
        grads.append(left.T @ R @ right.T + lam * f)
    return grads


def deep_gd_step(factors: Sequence[np.ndarray], y_diag, eta: float, lam: float = 0.0) -> List[np.ndarray]:
    if not eta > 0:
        raise DomainError(f"eta は正の値が必要です: {eta}")
    grads = deep_gradient(factors, y_diag, lam)
    return [np.asarray(f, dtype=float) - eta * g for f, g in zip(factors, grads)]


def deep_global_min(y_diag, lam: float, depth: int) -> float:
    """各特異値で min_{x≥0} ½(x − |y|)² + (kλ/2)·x^{2/k} を解いた和（k = depth）"""
    if depth < 1:
        raise DomainError(f"depth は 1 以上が必要です: {depth}")
    total = 0.0
    for y in np.atleast_1d(np.asarray(y_diag, dtype=float)):
        target = abs(float(y))

        def objective(x: float) -> float:
            return 0.5 * (x - target) ** 2 + 0.5 * depth * lam * max(x, 0.0) ** (2.0 / depth)

        best = objective(0.0)
        if target > 0:
            res = minimize_scalar(objective, bounds=(0.0, target), method="bounded",
                                  options={"xatol": 1e-12})
            best = min(best, float(res.fun), objective(target))
        total += best
    return total


def deep_simulate_batch(factors: Sequence[np.ndarray], y_diag, lam: float, c: StepConfig,
                        gmin: Optional[float] = None) -> np.ndarray:
    """(N, m_i, n_i) の因子列をまとめて反復し、OutcomeKind.code を返す"""
    factors = [np.array(f, dtype=float, copy=True) for f in factors]
    single = [f[0] for f in factors]
    _check_chain(single)
    Y = _deep_target(single, y_diag)
    if gmin is None:
        gmin = deep_global_min(y_diag, lam, len(factors))
    n = factors[0].shape[0]
    kinds = np.full(n, OutcomeKind.UNDECIDED.code, dtype=np.int8)
    active = np.arange(n)

    def chain(fs, dim, count):
        out = np.broadcast_to(np.eye(dim), (count, dim, dim)).copy()
        for f in fs:
            out = np.matmul(out, f)
        return out

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(c.max_iters + 1):
            if active.size == 0:
                break
            fs = [f[active] for f in factors]
            m = active.size
            R = chain(fs, Y.shape[0], m) - Y
            loss = 0.5 * np.sum(R * R, axis=(1, 2)) + 0.5 * lam * sum(np.sum(f * f, axis=(1, 2)) for f in fs)
            finite = np.isfinite(loss)
            conv = finite & (loss <= gmin + c.loss_tol)
            div = ~finite | (~conv & (loss >= c.divergence_threshold))
            kinds[active[conv]] = OutcomeKind.CONVERGED_MINIMIZER.code
            kinds[active[div]] = OutcomeKind.DIVERGED.code
            if t == c.max_iters:
                break
            keep = ~(conv | div)
            fs = [f[keep] for f in fs]
            R = R[keep]
            active = active[keep]
            m = active.size
            grads = []
            for i, f in enumerate(fs):
                left = chain(fs[:i], Y.shape[0], m)
                right = chain(fs[i + 1:], f.shape[2], m)
                grads.append(np.matmul(np.matmul(np.swapaxes(left, 1, 2), R), np.swapaxes(right, 1, 2)) + lam * f)
            for i, (f, g) in enumerate(zip(fs, grads)):
                factors[i][active] = f - c.eta * g
    return kinds

# =========================================================================
# ランダムスライスの分類関数
# =========================================================================

def matrix_slice_classifier(p: MatrixProblem, c: StepConfig, embedding: SliceEmbedding) -> Classifier:
    """行列パラメータ空間の平面で、大域最小へ収束したら 1（チャネルは収束点のインバランス）"""
    if embedding.origin.shape[0] != p.n_params:
        raise DomainError(f"スライスの次元 {embedding.origin.shape[0]} がパラメータ数 {p.n_params} と一致しません")

    def classify(X: np.ndarray, Y: np.ndarray):
        Uf, Vf = embedding.states(X, Y)
        U0 = Uf.reshape(-1, p.d, p.d_y)
        V0 = Vf.reshape(-1, p.d, p.d_y)
        kinds, U, V = matrix_simulate_batch(p, c, U0, V0)
        converged = kinds == OutcomeKind.CONVERGED_MINIMIZER.code
        gap = np.matmul(U, np.swapaxes(U, 1, 2)) - np.matmul(V, np.swapaxes(V, 1, 2))
        with np.errstate(invalid="ignore"):
            imb = np.sqrt(np.sum(gap * gap, axis=(1, 2)))
        return converged.astype(np.uint8), np.where(converged, imb, np.nan)

    return classify


def deep_slice_classifier(shapes: Sequence[Tuple[int, int]], y_diag, lam: float, c: StepConfig,
                          embedding: SliceEmbedding) -> Classifier:
    """深い分解のパラメータ空間（因子を順に行優先で並べたもの）の平面"""
    sizes = [a * b for a, b in shapes]
    total = sum(sizes)
    if embedding.origin.shape[0] != total:
        raise DomainError(f"スライスの次元 {embedding.origin.shape[0]} がパラメータ数 {total} と一致しません")
    gmin = deep_global_min(y_diag, lam, len(shapes))

    def classify(X: np.ndarray, Y: np.ndarray):
        theta = (embedding.origin[None, :] + X[:, None] * embedding.axis_x[None, :]
                 + Y[:, None] * embedding.axis_y[None, :])
        factors = []
        start = 0
        for (a, b), size in zip(shapes, sizes):
            factors.append(theta[:, start:start + size].reshape(-1, a, b))
            start += size
        kinds = deep_simulate_batch(factors, y_diag, lam, c, gmin)
        return (kinds == OutcomeKind.CONVERGED_MINIMIZER.code).astype(np.uint8), None

    return classify


def w_plane_embedding(p: MatrixProblem, column: int) -> SliceEmbedding:
    """列 column の (u, v) を e_column 方向に動かし、他の列を最小点に置いた平面

    この平面上の収束判定は列 column のスカラー問題 (d=1) と一致する。
    """
    if p.d < p.d_y:
        raise DomainError("W の平面には d ≥ d_y が必要です")
    if p.target_full is not None:
        raise DomainError("w_plane_embedding は対角目標の問題に使います")
    U = np.zeros((p.d, p.d_y))
    V = np.zeros((p.d, p.d_y))
    for j in range(p.d_y):
        if j == column:
            continue
        y = float(p.y_diag[j])
        r = math.sqrt(max(abs(y) - p.lam, 0.0))
        U[j, j] = r
        V[j, j] = (1.0 if y >= 0 else -1.0) * r
    origin = MatrixState(U, V).as_vector()
    ex = np.zeros((p.d, p.d_y))
    ex[column, column] = 1.0
    zero = np.zeros((p.d, p.d_y))
    axis_x = MatrixState(ex, zero).as_vector()
    axis_y = MatrixState(zero, ex).as_vector()
    return SliceEmbedding(origin, axis_x, axis_y)
