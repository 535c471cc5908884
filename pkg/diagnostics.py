# diagnostics.py
"""
検証スイート

理論的性質を数値的に確かめるチェック群。各チェックは合否と指標を返し、
run_suite がスイート単位でまとめる（cmd_verify から呼ばれる）。
"""

import logging
import math
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from boundary_chaos import (
    boundary_invariance_residual,
    boundary_state,
    conjugacy_to_pl,
    cubic_map,
    direction_drift,
    lap_entropy,
    period_three_witness,
    periodic_orbits,
    semiconjugacy_residuals,
)
from criticality import (
    Selection,
    bisect_critical_step,
    classify_outcome,
    critical_step_size,
    prior_step_bound,
    sensitivity_witnesses,
    small_step_thresholds,
)
from error_handler import ConvergenceError, UsageError
from fractal_geometry import (
    box_counting,
    cone_certificate,
    cone_convergence_fraction,
    mask_boundary,
)
from gd_fractal_config import Settings
from matrix_factorization import (
    MatrixProblem,
    MatrixState,
    decoupling_check,
    deep_gradient,
    deep_loss,
    diagonalize_target,
    gd_jacobian_det,
    gd_map_jacobian_fd,
    matrix_bisect_critical_step,
    matrix_critical_step_size,
    matrix_gd_step,
    matrix_gradient,
    matrix_loss,
    random_frame,
    rotation_equivalence,
    slice_w_init,
    w_membership_error,
)
from quotient_dynamics import (
    BranchId,
    F_step,
    Q_field,
    QuotientParams,
    QuotientState,
    f_step,
    preimage_all,
    project_raw,
    project_scaled,
    quotient_outcomes,
)
from scalar_dynamics import (
    ScalarProblem,
    ScalarState,
    StepConfig,
    gd_step,
    hessian_eigenvalues_unregularized,
    scalar_gradient,
    scalar_hessian,
    scalar_loss,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _count(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _fd_gradient(f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(theta)
    for k in range(theta.size):
        step = np.zeros_like(theta)
        step[k] = h
        grad[k] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return grad


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))

# =========================================================================
# 勾配・Hessian
# =========================================================================

def check_gradients(rng: np.random.Generator, scale: float = 1.0,
                    settings: Optional[Settings] = None) -> List[CheckResult]:
    n = _count(100, scale)
    worst = {"scalar": 0.0, "matrix": 0.0, "deep": 0.0}

    for _ in range(n):
        d = int(rng.choice([1, 2, 5]))
        p = ScalarProblem(y=rng.uniform(-2, 2), lam=rng.uniform(0, 1), d=d)
        theta = rng.uniform(-1.5, 1.5, 2 * d)
        gu, gv = scalar_gradient(p, ScalarState.from_vector(theta))
        fd = _fd_gradient(lambda t: scalar_loss(p, ScalarState.from_vector(t)), theta)
        worst["scalar"] = max(worst["scalar"], _rel_err(np.concatenate([gu, gv]), fd))

        d_y = int(rng.integers(1, 4))
        d = d_y + int(rng.integers(0, 3))
        mp = MatrixProblem(np.ones(d_y), rng.uniform(0, 1), d, rng.uniform(-1, 1, (d_y, d_y)))
        theta = rng.uniform(-1, 1, mp.n_params)
        gU, gV = matrix_gradient(mp, MatrixState.from_vector(theta, d, d_y))
        fd = _fd_gradient(lambda t: matrix_loss(mp, MatrixState.from_vector(t, d, d_y)), theta)
        worst["matrix"] = max(worst["matrix"], _rel_err(np.concatenate([gU.ravel(), gV.ravel()]), fd))

        shapes = [(2, 2), (2, 3), (3, 2)]
        sizes = [a * b for a, b in shapes]
        y_diag = rng.uniform(-1, 1, 2)
        lam = rng.uniform(0, 0.5)
        theta = rng.uniform(-1, 1, sum(sizes))

        def unpack(t):
            out, start = [], 0
            for (a, b), size in zip(shapes, sizes):
                out.append(t[start:start + size].reshape(a, b))
                start += size
            return out

        grads = deep_gradient(unpack(theta), y_diag, lam)
        fd = _fd_gradient(lambda t: deep_loss(unpack(t), y_diag, lam), theta)
        worst["deep"] = max(worst["deep"], _rel_err(np.concatenate([g.ravel() for g in grads]), fd))

    return [CheckResult(f"gradient_fd_{k}", v <= 1e-5, {"max_rel_err": v, "instances": n})
            for k, v in worst.items()]


def check_hessian(rng: np.random.Generator, scale: float = 1.0,
                  settings: Optional[Settings] = None) -> List[CheckResult]:
    n = _count(100, scale)
    worst = 0.0
    for _ in range(n):
        d = int(rng.choice([1, 2, 3, 5]))
        p = ScalarProblem(y=rng.uniform(-2, 2), d=d)
        s = ScalarState.from_vector(rng.uniform(-2, 2, 2 * d))
        closed = np.array(hessian_eigenvalues_unregularized(p, s))
        numeric = np.linalg.eigvalsh(scalar_hessian(p, s))
        worst = max(worst, float(np.max(np.abs(closed - numeric))))
    return [CheckResult("hessian_closed_form_spectrum", worst <= 1e-6, {"max_abs_err": worst, "instances": n})]

# =========================================================================
# 境界の一次元力学
# =========================================================================

def check_conjugacy(rng: np.random.Generator, scale: float = 1.0,
                    settings: Optional[Settings] = None) -> List[CheckResult]:
    halving, sine = semiconjugacy_residuals(_count(1000, scale))
    pl_orbit, z_orbit = period_three_witness()
    expected = [-5.0 / 7.0, -1.0 / 7.0, 3.0 / 7.0]
    pl_err = max(abs(a - b) for a, b in zip(pl_orbit, expected))
    z = np.array(z_orbit)
    z_err = float(np.max(np.abs(cubic_map(z) - np.roll(z, -1))))

    # (η·z, η·w) で写すと f が F に一致する
    n = _count(1000, scale)
    worst = 0.0
    for _ in range(n):
        eta = rng.uniform(0.05, 1.5)
        y = rng.uniform(-2, 2)
        lam = rng.uniform(0, 0.5)
        s = ScalarState.from_vector(rng.uniform(-2, 2, 2 * int(rng.integers(1, 4))))
        zr, wr = project_raw(s)
        zn, wn = f_step(eta, y, lam, (zr - y, wr))
        image = F_step(QuotientParams(eta * y, eta * lam), QuotientState(eta * (zr - y), eta * wr))
        mag = max(1.0, eta * (abs(zr - y) + wr)) ** 3
        err = max(abs(eta * zn - image.z), abs(eta * wn - image.w)) / mag
        worst = max(worst, err)
    return [
        CheckResult("semiconjugacy_halving", halving <= 1e-12, {"residual": halving}),
        CheckResult("semiconjugacy_sine", sine <= 1e-12, {"residual": sine}),
        CheckResult("period_three_witness", pl_err <= 1e-12 and z_err <= 1e-9,
                    {"pl_error": pl_err, "cubic_residual": z_err, "z_orbit": z_orbit}),
        CheckResult("quotient_scaling_conjugacy", worst <= 1e-12, {"max_rel_residual": worst, "samples": n}),
    ]


def check_orbits(rng: np.random.Generator, scale: float = 1.0,
                 settings: Optional[Settings] = None) -> List[CheckResult]:
    results = []
    max_period = 10
    counts, residual = {}, 0.0
    for n in range(1, max_period + 1):
        orbits = periodic_orbits(n)
        counts[n] = len(orbits)
        if orbits:
            residual = max(residual, max(o.max_residual() for o in orbits))
    results.append(CheckResult(
        "prime_orbits_every_period",
        all(c >= 1 for c in counts.values()) and residual <= 1e-9,
        {"orbit_counts": counts, "max_cyclic_residual": residual},
    ))

    entropy_err, laps_ok = 0.0, True
    for n in range(1, 13):
        laps, h = lap_entropy(n)
        laps_ok &= laps == 3 ** n
        entropy_err = max(entropy_err, abs(h - math.log(3.0)))
    results.append(CheckResult("lap_entropy_log3", laps_ok and entropy_err <= 1e-12,
                               {"max_entropy_err": entropy_err}))

    target = float(conjugacy_to_pl(-5.0 / 7.0))
    found = any(min(abs(p - target) for p in o.points) <= 1e-9 for o in periodic_orbits(3))
    results.append(CheckResult("li_yorke_orbit_present", found, {"point": target}))
    return results


def check_boundary(rng: np.random.Generator, scale: float = 1.0,
                   settings: Optional[Settings] = None) -> List[CheckResult]:
    n = _count(100, scale)
    worst_inv, worst_drift = 0.0, 0.0
    for _ in range(n):
        d = int(rng.integers(1, 4))
        eta = rng.uniform(0.05, 0.5)
        y = rng.uniform(-0.9, 0.9) / eta
        p = ScalarProblem(y=y, d=d)
        e1 = rng.standard_normal(d)
        e2 = rng.standard_normal(d)
        s = boundary_state(p, eta, rng.uniform(0, 1), e1, e2)
        worst_inv = max(worst_inv, boundary_invariance_residual(p, eta, s))

        d = int(rng.integers(2, 5))
        p = ScalarProblem(y=rng.uniform(-2, 2), lam=rng.choice([0.0, rng.uniform(0, 0.5)]), d=d)
        s0 = ScalarState.from_vector(rng.uniform(-1, 1, 2 * d))
        worst_drift = max(worst_drift, direction_drift(p, 0.05, s0, 50))
    return [
        CheckResult("boundary_forward_invariance", worst_inv <= 1e-9, {"max_rel_residual": worst_inv}),
        CheckResult("direction_preserved", worst_drift <= 1e-12, {"max_drift": worst_drift}),
    ]

# =========================================================================
# 商力学系
# =========================================================================

def check_quotient(rng: np.random.Generator, scale: float = 1.0,
                   settings: Optional[Settings] = None) -> List[CheckResult]:
    results = []
    tol = (settings or Settings()).geometry.as_tolerances()

    n = _count(200, scale)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 5))
        eta = rng.uniform(0.05, 0.5)
        p = ScalarProblem(y=rng.uniform(-2, 2), lam=rng.uniform(0, 0.5), d=d)
        q = QuotientParams.from_problem(p, eta)
        s = ScalarState.from_vector(rng.uniform(-1.5, 1.5, 2 * d))
        lhs = project_scaled(gd_step(p, eta, s), p, eta)
        rhs = F_step(q, project_scaled(s, p, eta))
        worst = max(worst, lhs.distance(rhs) / max(1.0, abs(rhs.z), abs(rhs.w)))
    results.append(CheckResult("projection_commutes", worst <= 1e-9, {"max_rel_err": worst}))

    per_mu = _count(1000, scale)
    below_total = below_ok = above_total = above_ok = 0
    for mu in np.linspace(-0.9, 0.9, 10):
        q = QuotientParams(mu, 0.0)
        z = rng.uniform(-3.0, 3.0, per_mu)
        w = 2.0 * np.abs(z + mu) + rng.uniform(0.0, 10.0, per_mu)
        qv = Q_field(q, z, w)
        codes = quotient_outcomes(q, 1.0, z, w, n_iters=10_000, loss_tol=1e-12)
        below = qv < 8.0
        above = qv > 8.0
        below_total += int(below.sum())
        below_ok += int(np.sum(codes[below] == 1))
        above_total += int(above.sum())
        above_ok += int(np.sum(codes[above] == 3))
    frac_below = below_ok / max(1, below_total)
    frac_above = above_ok / max(1, above_total)
    results.append(CheckResult(
        "q_dichotomy", frac_below >= 0.999 and frac_above >= 0.999,
        {"converged_fraction_q_lt_8": frac_below, "diverged_fraction_q_gt_8": frac_above,
         "samples": below_total + above_total},
    ))

    n = _count(100, scale)
    worst = 0.0
    for _ in range(n):
        mu = rng.uniform(-0.6, 0.6)
        nu = rng.uniform(0.0, 0.3)
        q = QuotientParams(mu, nu)
        z = rng.uniform(-2, 2)
        target = QuotientState(z, 2.0 * abs(z + mu) + rng.uniform(0.1, 6.0))
        for pre in preimage_all(q, target, tol):
            img = F_step(q, pre)
            worst = max(worst, img.distance(target) / max(1.0, abs(target.w)))
    results.append(CheckResult("preimage_round_trip", worst <= 1e-8, {"max_rel_residual": worst}))
    return results

# =========================================================================
# 臨界ステップと選択
# =========================================================================

def check_criticality(rng: np.random.Generator, scale: float = 1.0,
                      settings: Optional[Settings] = None) -> List[CheckResult]:
    n = _count(200, scale)
    worst, prior_ok, failures = 0.0, True, []
    for k in range(n):
        d = int(rng.choice([1, 2, 5, 10]))
        y = float(rng.choice([-1, 1]) * rng.uniform(0.2, 2.0))
        u0, v0 = rng.uniform(-2, 2, d), rng.uniform(-2, 2, d)
        p = ScalarProblem(y=y, d=d)
        theory = critical_step_size(y, u0, v0)
        empirical = bisect_critical_step(p, ScalarState(u0, v0))
        rel = abs(empirical - theory) / theory
        worst = max(worst, rel)
        if rel > 1e-3:
            failures.append({"y": y, "u0": u0.tolist(), "v0": v0.tolist(), "theory": theory, "bisection": empirical})
            logger.warning(f"⚠️ η* の不一致 (#{k}): 理論 {theory:.6g}, 二分法 {empirical:.6g}")
        prior_ok &= prior_step_bound(y, u0, v0) < theory
    return [
        CheckResult("critical_step_bisection", not failures,
                    {"max_rel_err": worst, "instances": n, "failures": failures[:5]}),
        CheckResult("improves_prior_bound", bool(prior_ok), {}),
    ]


def check_selection(rng: np.random.Generator, scale: float = 1.0,
                    settings: Optional[Settings] = None) -> List[CheckResult]:
    n = _count(1000, scale)
    p_minus_ok, any_min_ok, worst_dist = 0, 0, 0.0
    for _ in range(n):
        d = int(rng.integers(1, 4))
        y = float(rng.choice([-1, 1]) * rng.uniform(0.6, 2.0))
        lam = abs(y) * rng.uniform(0.35, 0.65)
        p = ScalarProblem(y=y, lam=lam, d=d)
        s0 = ScalarState.from_vector(rng.uniform(-2, 2, 2 * d))
        converge_eta, select_eta = small_step_thresholds(y, lam, s0)

        c = StepConfig(eta=0.95 * select_eta, max_iters=20000, loss_tol=1e-13)
        out = classify_outcome(p, c, s0)
        if out.selection is Selection.P_MINUS and out.selection_distance <= 1e-6:
            p_minus_ok += 1
        if out.selection_distance is not None:
            worst_dist = max(worst_dist, out.selection_distance)

        c = StepConfig(eta=0.95 * converge_eta, max_iters=20000, loss_tol=1e-13)
        out = classify_outcome(p, c, s0)
        if out.selection is not None and out.selection_distance <= 1e-6:
            any_min_ok += 1
    return [
        CheckResult("small_step_selects_p_minus", p_minus_ok == n,
                    {"p_minus": p_minus_ok, "instances": n, "max_distance": worst_dist}),
        CheckResult("small_step_converges", any_min_ok == n, {"converged_to_p_pm": any_min_ok, "instances": n}),
    ]


def _witness_suffixes(max_len: int = 3) -> List[List[BranchId]]:
    words: List[List[BranchId]] = [[]]
    for length in range(1, max_len + 1):
        words.extend(list(w) for w in product((BranchId.G1, BranchId.G2), repeat=length))
    return words


def check_witnesses(rng: np.random.Generator, scale: float = 1.0, settings: Optional[Settings] = None,
                    required: int = 10) -> List[CheckResult]:
    results = []
    tol = (settings or Settings()).geometry.as_tolerances()
    setups = (
        ("unregularized", ScalarProblem(y=1.0), 0.05),
        ("regularized", ScalarProblem(y=0.5, lam=0.2), 1.0),
    )
    for name, p, eta in setups:
        pairs = sensitivity_witnesses(p, eta, _witness_suffixes(), eps=1e-4, tol=tol)
        certified = [w for w in pairs if w.certified and w.separation < 1e-4]
        need = min(required, len(_witness_suffixes()))
        results.append(CheckResult(
            f"sensitivity_witnesses_{name}", len(certified) >= need,
            {"certified": len(certified), "constructed": len(pairs), "required": need,
             "pairs": [w.to_dict() for w in certified[:3]]},
        ))
    return results

# =========================================================================
# 行列分解
# =========================================================================

def check_matrix(rng: np.random.Generator, scale: float = 1.0,
                 settings: Optional[Settings] = None) -> List[CheckResult]:
    results = []

    d, d_y = 5, 3
    worst_dev, worst_w = 0.0, 0.0
    for trial in range(_count(5, scale)):
        y_diag = rng.uniform(0.5, 1.5, d_y)
        frame = random_frame(d, d_y, int(rng.integers(2 ** 32)))
        columns = [([rng.uniform(0.2, 1.2)], [rng.uniform(0.2, 1.2)]) for _ in range(d_y)]
        s0 = slice_w_init(columns, frame)
        p = MatrixProblem(y_diag, 0.0, d)
        eta = 0.5 * matrix_critical_step_size(p, s0)
        worst_dev = max(worst_dev, decoupling_check(p, eta, s0, 500))
        s = s0
        for _ in range(1000):
            s = matrix_gd_step(p, eta, s)
        worst_w = max(worst_w, w_membership_error(s))
    results.append(CheckResult("decoupling", worst_dev <= 1e-9, {"max_deviation": worst_dev}))
    results.append(CheckResult("w_forward_invariance", worst_w <= 1e-9, {"max_cross_inner": worst_w}))

    p = MatrixProblem(rng.uniform(0.5, 1.5, d_y), 0.0, d)
    s0 = slice_w_init([([rng.uniform(0.2, 1.2)], [rng.uniform(0.2, 1.2)]) for _ in range(d_y)],
                      random_frame(d, d_y, int(rng.integers(2 ** 32))))
    theory = matrix_critical_step_size(p, s0)
    empirical = matrix_bisect_critical_step(p, s0)
    rel = abs(theory - empirical) / theory
    results.append(CheckResult("matrix_critical_step", rel <= 1e-3,
                               {"theory": theory, "bisection": empirical}))

    worst = 0.0
    for _ in range(_count(10, scale)):
        d_y = int(rng.integers(1, 3))
        mp = MatrixProblem(rng.uniform(-1, 1, d_y), rng.uniform(0, 0.3), d_y + 1)
        s = MatrixState(rng.uniform(-1, 1, (mp.d, d_y)), rng.uniform(-1, 1, (mp.d, d_y)))
        eta = rng.uniform(0.05, 0.5)
        analytic = gd_jacobian_det(mp, eta, s)
        numeric = float(np.linalg.det(gd_map_jacobian_fd(mp, eta, s)))
        worst = max(worst, abs(analytic - numeric) / max(1e-3, abs(numeric)))
    results.append(CheckResult("gd_jacobian_det", worst <= 1e-4, {"max_rel_err": worst}))
    return results


def check_jacobi(rng: np.random.Generator, scale: float = 1.0,
                 settings: Optional[Settings] = None) -> List[CheckResult]:
    """Jacobi SVD（jacobi.max_sweeps / off_tol を使う）と回転による同値性"""
    jacobi = (settings or Settings()).jacobi.as_kwargs()
    results = []
    for n in (2, 4):
        Y = rng.uniform(-1, 1, (n, n))
        try:
            P, sigma, Qm = diagonalize_target(Y, **jacobi)
        except ConvergenceError as e:
            results.append(CheckResult(f"jacobi_svd_{n}x{n}", False, {"error": str(e), **jacobi}))
            continue
        eye = np.eye(n)
        recon = float(np.max(np.abs(P @ np.diag(sigma) @ Qm.T - Y)))
        ortho = float(max(np.max(np.abs(P.T @ P - eye)), np.max(np.abs(Qm.T @ Qm - eye))))
        ordered = bool(np.all(np.diff(sigma) <= 0) and np.all(sigma >= 0))
        results.append(CheckResult(f"jacobi_svd_{n}x{n}", recon <= 1e-10 and ortho <= 1e-10 and ordered,
                                   {"reconstruction": recon, "orthogonality": ortho}))

    Y = rng.uniform(-1, 1, (2, 2))
    s0 = MatrixState(rng.uniform(-0.5, 0.5, (2, 2)), rng.uniform(-0.5, 0.5, (2, 2)))
    try:
        dev = rotation_equivalence(Y, 0.1, 0.1, s0, 50, **jacobi)
        results.append(CheckResult("rotation_equivalence", dev <= 1e-9, {"max_deviation": dev}))
    except ConvergenceError as e:
        results.append(CheckResult("rotation_equivalence", False, {"error": str(e), **jacobi}))
    return results

# =========================================================================
# 幾何
# =========================================================================

def check_geometry(rng: np.random.Generator, scale: float = 1.0,
                   settings: Optional[Settings] = None) -> List[CheckResult]:
    results = []
    g = np.linspace(0.0, 1.0, 512)
    X, Y = np.meshgrid(g, g)
    square = box_counting(np.column_stack([X.ravel(), Y.ravel()]))
    t = np.linspace(0.0, 1.0, 4096)
    segment = box_counting(np.column_stack([t, 0.3 * t]))
    results.append(CheckResult("box_counting_square", abs(square.dimension - 2.0) <= 0.05, square.to_dict()))
    results.append(CheckResult("box_counting_segment", abs(segment.dimension - 1.0) <= 0.05, segment.to_dict()))

    mask = np.zeros((20, 30), dtype=bool)
    mask[5:12, 4:20] = True
    ring = mask_boundary(mask)
    expected = 2 * 7 + 2 * 16 - 4
    results.append(CheckResult("boundary_ring", int(ring.sum()) == expected
                               and not np.any(mask_boundary(ring) & ~ring),
                               {"cells": int(ring.sum()), "expected": expected}))

    for nu in (0.1, 0.3, 0.5):
        a, b = cone_certificate(nu, n_samples=_count(10_000, scale))
        frac = cone_convergence_fraction(nu, a, b, n_samples=_count(10_000, scale))
        results.append(CheckResult(f"cone_certificate_nu_{nu}", frac == 1.0,
                                   {"a": a, "b": b, "converged_fraction": frac}))
    return results

# =========================================================================
# スイートの実行
# =========================================================================

SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "gradients": check_gradients,
    "hessian": check_hessian,
    "conjugacy": check_conjugacy,
    "orbits": check_orbits,
    "boundary": check_boundary,
    "quotient": check_quotient,
    "criticality": check_criticality,
    "selection": check_selection,
    "witnesses": check_witnesses,
    "matrix": check_matrix,
    "jacobi": check_jacobi,
    "geometry": check_geometry,
}


def run_suite(name: str, seed: int = 0, scale: float = 1.0,
              settings: Optional[Settings] = None) -> Dict[str, Any]:
    """スイートを実行し {"suite", "passed", "checks", "elapsed_sec"} を返す。name="all" で全スイート

    settings の許容誤差（geometry）と Jacobi の反復上限（jacobi）を各スイートへ渡す。
    """
    if name != "all" and name not in SUITES:
        raise UsageError(f"不明なスイート: {name}（有効: all, {', '.join(SUITES)}）")
    names = list(SUITES) if name == "all" else [name]
    settings = settings or Settings()

    checks: List[Dict[str, Any]] = []
    started = time.perf_counter()
    for suite in names:
        rng = np.random.default_rng(seed)
        logger.info(f"🧪 検証スイート '{suite}' を実行中...")
        for result in SUITES[suite](rng, scale, settings):
            status = "✅" if result.passed else "❌"
            logger.info(f"  {status} {suite}.{result.name}")
            entry = result.to_dict()
            entry["suite"] = suite
            checks.append(entry)

    passed = all(c["passed"] for c in checks)
    return {
        "suite": name,
        "passed": passed,
        "checks": checks,
        "rng_seed": seed,
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }
