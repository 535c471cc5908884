# tests/test_matrix_factorization.py

import math

import numpy as np
import pytest

from criticality import critical_step_size
from error_handler import DomainError
from fractal_geometry import GridSpec, rasterize, scalar_classifier
from matrix_factorization import (
    MatrixProblem,
    MatrixState,
    decoupling_check,
    deep_gd_step,
    deep_global_min,
    deep_gradient,
    deep_loss,
    deep_simulate_batch,
    diagonalize_target,
    gd_jacobian_det,
    gd_map_jacobian_fd,
    identity_init,
    jacobi_svd,
    matrix_critical_step_size,
    matrix_global_min,
    matrix_gradient,
    matrix_hessian,
    matrix_loss,
    matrix_slice_classifier,
    matrix_simulate,
    matrix_simulate_batch,
    random_frame,
    rotation_equivalence,
    saddle_basin_points,
    slice_w_init,
    unstable_basin_points,
    w_membership_error,
    w_plane_embedding,
)
from scalar_dynamics import OutcomeKind, ScalarProblem, StepConfig, global_min


def _fd(f, theta, h=1e-6):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


# =========================================================================
# 損失・勾配・Hessian
# =========================================================================

def test_matrix_gradient_matches_finite_differences(rng):
    p = MatrixProblem(np.array([0.9, 0.4, 0.2]), lam=0.1, d=4)
    s = MatrixState(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
    gU, gV = matrix_gradient(p, s)
    fd = _fd(lambda t: matrix_loss(p, MatrixState.from_vector(t, 4, 3)), s.as_vector())
    np.testing.assert_allclose(np.concatenate([gU.ravel(), gV.ravel()]), fd, rtol=1e-5, atol=1e-7)


def test_matrix_hessian_is_symmetric_and_matches_gradient(rng):
    p = MatrixProblem(np.array([0.7, 0.3]), lam=0.05, d=2)
    s = MatrixState(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
    H = matrix_hessian(p, s)
    np.testing.assert_allclose(H, H.T, atol=1e-12)

    def grad(t):
        gU, gV = matrix_gradient(p, MatrixState.from_vector(t, 2, 2))
        return np.concatenate([gU.ravel(), gV.ravel()])

    theta = s.as_vector()
    h = 1e-6
    fd = np.column_stack([(grad(theta + h * e) - grad(theta - h * e)) / (2 * h) for e in np.eye(theta.size)])
    np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-6)


def test_matrix_global_min_sums_columns():
    p = MatrixProblem(np.array([0.5, 0.9, 0.1]), lam=0.2, d=3)
    expected = sum(global_min(ScalarProblem(y=y, lam=0.2)) for y in (0.5, 0.9, 0.1))
    assert matrix_global_min(p) == pytest.approx(expected)


def test_jacobian_det_at_origin():
    y, eta, d = 0.8, 0.5, 3
    p = MatrixProblem(np.array([y]), d=d)
    det = gd_jacobian_det(p, eta, MatrixState(np.zeros((d, 1)), np.zeros((d, 1))))
    assert det == pytest.approx((1 - eta * y) ** d * (1 + eta * y) ** d)


def test_jacobian_det_matches_finite_difference_jacobian(rng):
    p = MatrixProblem(np.array([0.6, 0.2]), lam=0.1, d=2)
    s = MatrixState(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))
    J = gd_map_jacobian_fd(p, 0.7, s)
    assert gd_jacobian_det(p, 0.7, s) == pytest.approx(np.linalg.det(J), rel=1e-5, abs=1e-8)


def test_shape_mismatch_raises():
    with pytest.raises(DomainError):
        matrix_loss(MatrixProblem(np.array([1.0, 1.0]), d=3), MatrixState(np.zeros((2, 2)), np.zeros((2, 2))))

# =========================================================================
# Jacobi SVD と回転
# =========================================================================

def test_jacobi_svd_example():
    c = math.cos(math.pi / 4)
    rot = np.array([[c, -c], [c, c]])
    A = rot @ np.diag([2.0, 1.0])
    P, sigma, Qm = jacobi_svd(A)
    np.testing.assert_allclose(sigma, [2.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(P @ np.diag(sigma) @ Qm.T, A, atol=1e-12)


def test_jacobi_svd_matches_numpy(rng):
    A = rng.normal(size=(5, 5))
    P, sigma, Qm = jacobi_svd(A)
    np.testing.assert_allclose(sigma, np.linalg.svd(A, compute_uv=False), atol=1e-10)
    np.testing.assert_allclose(P.T @ P, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(Qm.T @ Qm, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(P @ np.diag(sigma) @ Qm.T, A, atol=1e-10)


def test_jacobi_svd_rejects_rectangular():
    with pytest.raises(DomainError):
        jacobi_svd(np.zeros((2, 3)))


def test_rotation_equivalence(rng):
    Y = rng.normal(size=(3, 3))
    s0 = MatrixState(0.3 * rng.normal(size=(3, 3)), 0.3 * rng.normal(size=(3, 3)))
    assert rotation_equivalence(Y, 0.1, 0.05, s0, steps=20) <= 1e-9


def test_diagonal_target_d_y_one_matches_scalar():
    p = MatrixProblem(np.array([0.8]), d=2)
    _, sigma, _ = diagonalize_target(np.array([[0.8]]))
    assert sigma[0] == pytest.approx(0.8)
    s0 = MatrixState(np.array([[1.0], [0.5]]), np.array([[0.2], [0.9]]))
    out = matrix_simulate(p, StepConfig(eta=0.3), s0)
    assert out.kind is OutcomeKind.CONVERGED_MINIMIZER

# =========================================================================
# 直交スライス W
# =========================================================================

def test_random_frame_is_orthonormal():
    F = random_frame(7, 3, seed=11)
    np.testing.assert_allclose(F.T @ F, np.eye(3), atol=1e-12)
    np.testing.assert_array_equal(F, random_frame(7, 3, seed=11))
    with pytest.raises(DomainError):
        random_frame(2, 3, seed=0)


def test_slice_w_init_builds_orthogonal_columns():
    frame = random_frame(5, 4, seed=3)
    s = slice_w_init([([0.5, 0.2], [0.1, 0.7]), ([1.0, -0.3], [0.4, 0.4])], frame)
    assert s.U.shape == (5, 2)
    assert w_membership_error(s) <= 1e-12


def test_identity_init_lies_in_W():
    assert w_membership_error(identity_init(4, 0.7, 1.3)) == 0.0


def test_decoupling_inside_W(rng):
    p = MatrixProblem(np.array([0.9, 0.6, 0.3]), lam=0.1, d=5)
    frame = random_frame(5, 3, seed=1)
    cols = [([a], [b]) for a, b in rng.uniform(-1.5, 1.5, size=(3, 2))]
    s0 = slice_w_init(cols, frame)
    assert decoupling_check(p, 0.5, s0, steps=30) <= 1e-10


def test_decoupling_requires_W(rng):
    p = MatrixProblem(np.array([0.9, 0.6]), d=3)
    s0 = MatrixState(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
    with pytest.raises(DomainError):
        decoupling_check(p, 0.5, s0, steps=3)


def test_matrix_simulate_batch_stops_at_saddle():
    p = MatrixProblem(np.array([0.9, 0.5]), d=2)
    c = StepConfig(eta=0.1, max_iters=50)
    zeros = np.zeros((1, 2, 2))
    kinds, _, _ = matrix_simulate_batch(p, c, zeros, zeros)
    assert matrix_simulate(p, c, MatrixState(zeros[0], zeros[0])).kind is OutcomeKind.CONVERGED_SADDLE
    assert OutcomeKind.from_code(kinds[0]) is OutcomeKind.CONVERGED_SADDLE


def test_matrix_simulate_batch_agrees_with_matrix_simulate(rng):
    p = MatrixProblem(np.array([0.9, 0.5]), lam=0.1, d=3)
    c = StepConfig(eta=0.2, max_iters=2000, loss_tol=1e-6)
    U = rng.uniform(-1, 1, size=(20, 3, 2))
    V = rng.uniform(-1, 1, size=(20, 3, 2))
    U[0] = V[0] = 0.0
    kinds, _, _ = matrix_simulate_batch(p, c, U, V)
    for i in range(20):
        single = matrix_simulate(p, c, MatrixState(U[i], V[i]))
        assert OutcomeKind.from_code(kinds[i]) is single.kind
    assert OutcomeKind.from_code(kinds[0]) is OutcomeKind.CONVERGED_SADDLE


def test_matrix_critical_step_is_column_minimum():
    p = MatrixProblem(np.array([1.0, 0.5]), d=2)
    s0 = identity_init(2, 1.2, 0.8)
    expected = min(critical_step_size(1.0, [1.2, 0.0], [0.8, 0.0]),
                   critical_step_size(0.5, [0.0, 1.2], [0.0, 0.8]))
    assert matrix_critical_step_size(p, s0) == pytest.approx(expected)
    with pytest.raises(DomainError):
        matrix_critical_step_size(MatrixProblem(np.array([1.0]), lam=0.1), identity_init(1, 1.0, 1.0))


def test_w_plane_matches_scalar_raster():
    p = MatrixProblem(np.array([0.9, 0.6]), d=2)
    c = StepConfig(eta=1.0, max_iters=300, loss_tol=1e-6)
    spec = GridSpec(-2, 2, -2, 2, 16, 16)
    matrix = rasterize(spec, matrix_slice_classifier(p, c, w_plane_embedding(p, 0)))
    scalar = rasterize(spec, scalar_classifier(ScalarProblem(y=0.9), c))
    assert np.mean(matrix.labels != (scalar.labels == 1)) <= 0.02

# =========================================================================
# 鞍点・不安定最小点の吸引域
# =========================================================================

def test_saddle_basin_contains_antidiagonal():
    p = ScalarProblem(y=1.0)
    spec = GridSpec(-2, 2, -2, 2, 40, 40)
    pts = saddle_basin_points(p, 0.2, spec, n_steps=0)
    assert pts.shape[0] > 0
    np.testing.assert_allclose(pts[:, 0] + pts[:, 1], 0.0, atol=1e-9)


def test_unstable_basin_points_reach_large_norm():
    p = ScalarProblem(y=1.0)
    eta = 0.2
    spec = GridSpec(-4.5, 4.5, -4.5, 4.5, 120, 120)
    pts = unstable_basin_points(p, eta, spec, n_steps=2)
    assert pts.ndim == 2 and pts.shape[1] == 2
    with pytest.raises(DomainError):
        unstable_basin_points(ScalarProblem(y=1.0, lam=0.1), eta, spec, 2)

# =========================================================================
# 深い分解
# =========================================================================

def test_deep_gradient_matches_finite_differences(rng):
    shapes = [(2, 3), (3, 2), (2, 2)]
    factors = [rng.normal(size=s) for s in shapes]
    y = [0.9, 0.5]
    grads = deep_gradient(factors, y, lam=0.1)
    sizes = [a * b for a, b in shapes]

    def unpack(t):
        out, k = [], 0
        for (a, b), n in zip(shapes, sizes):
            out.append(t[k:k + n].reshape(a, b))
            k += n
        return out

    theta = np.concatenate([f.ravel() for f in factors])
    fd = _fd(lambda t: deep_loss(unpack(t), y, 0.1), theta)
    np.testing.assert_allclose(np.concatenate([g.ravel() for g in grads]), fd, rtol=1e-5, atol=1e-7)


def test_deep_zero_factors_fixed_for_zero_target():
    factors = [np.zeros((2, 2)) for _ in range(3)]
    out = deep_gd_step(factors, [0.0, 0.0], eta=0.5)
    for f in out:
        np.testing.assert_array_equal(f, np.zeros((2, 2)))


def test_deep_global_min_depth_two_matches_scalar():
    assert deep_global_min([0.5], 0.2, 2) == pytest.approx(global_min(ScalarProblem(y=0.5, lam=0.2)), abs=1e-9)
    assert deep_global_min([0.5, 0.3], 0.0, 3) == pytest.approx(0.0)


def test_deep_simulate_batch_converges_near_solution():
    y = [0.9, 0.5]
    root = np.diag(np.cbrt(np.array(y)))
    factors = [np.stack([root + 0.01 * np.eye(2)]) for _ in range(3)]
    kinds = deep_simulate_batch(factors, y, 0.0, StepConfig(eta=0.1, max_iters=5000, loss_tol=1e-8))
    assert kinds[0] == OutcomeKind.CONVERGED_MINIMIZER.code


def test_deep_chain_shape_checked():
    with pytest.raises(DomainError):
        deep_loss([np.zeros((2, 3)), np.zeros((2, 2))], [1.0])
