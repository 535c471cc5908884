# tests/test_fractal_geometry.py

import numpy as np
import pytest

from error_handler import DomainError
from fractal_geometry import (
    BasinGrid,
    GridSpec,
    SliceEmbedding,
    box_counting,
    boundary_points,
    cone_certificate,
    cone_convergence_fraction,
    contour_zero_crossings,
    count_components,
    default_widths,
    extract_boundary,
    mask_boundary,
    normalize_points,
    occupied_fraction,
    point_classifier,
    quotient_classifier,
    rasterize,
    scalar_classifier,
    self_similarity_check,
)
from quotient_dynamics import QuotientParams, limit_point
from scalar_dynamics import ScalarProblem, StepConfig


# =========================================================================
# 格子
# =========================================================================

def test_grid_spec_geometry():
    spec = GridSpec(-1.0, 1.0, 0.0, 4.0, 4, 8)
    assert spec.dx == pytest.approx(0.5)
    assert spec.dy == pytest.approx(0.5)
    xs, ys = spec.cell_centers()
    np.testing.assert_allclose(xs, [-0.75, -0.25, 0.25, 0.75])
    assert ys[0] == pytest.approx(0.25)
    assert spec.refined(2).nx == 8


@pytest.mark.parametrize("args", [
    (-1.0, 1.0, -1.0, 1.0, 0, 5),
    (1.0, -1.0, -1.0, 1.0, 5, 5),
    (-1.0, 1.0, 1.0, 1.0, 5, 5),
])
def test_grid_spec_rejects_bad_windows(args):
    with pytest.raises(DomainError):
        GridSpec(*args)


def test_basin_grid_shape_checked():
    with pytest.raises(DomainError):
        BasinGrid(GridSpec(0, 1, 0, 1, 3, 2), np.zeros((3, 2)))


# =========================================================================
# ラスタ化
# =========================================================================

def _disk(x, y):
    return 1 if x * x + y * y < 0.5 else 0


def test_rasterize_is_independent_of_workers():
    spec = GridSpec(-1, 1, -1, 1, 37, 29)
    classify = point_classifier(_disk)
    serial = rasterize(spec, classify, workers=1, rows_per_block=4)
    parallel = rasterize(spec, classify, workers=4, rows_per_block=4)
    np.testing.assert_array_equal(serial.labels, parallel.labels)
    assert serial.labels.shape == (29, 37)


def test_rasterize_rows_follow_y():
    spec = GridSpec(0, 1, 0, 1, 2, 4)
    grid = rasterize(spec, point_classifier(lambda x, y: 1 if y > 0.5 else 0))
    np.testing.assert_array_equal(grid.labels[:, 0], [0, 0, 1, 1])


def test_scalar_classifier_matches_analytic_region():
    p = ScalarProblem(y=1.0)
    eta = 0.2
    spec = GridSpec(-4.5, 4.5, -4.5, 4.5, 45, 45)
    grid = rasterize(spec, scalar_classifier(p, StepConfig(eta=eta, max_iters=2000), channel="norm"))
    xs, ys = spec.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    S = X * X + Y * Y
    inside = S + np.sqrt(np.maximum(S * S - 16.0 * (X * Y - 1.0), 0.0)) < 8.0 / eta
    assert np.mean(inside != (grid.labels > 0)) < 0.05
    converged = grid.labels == 1
    assert np.all(grid.channel[converged] < 2.0 / eta + 1e-3)
    assert np.all(np.isnan(grid.channel[~converged]))


def test_selection_mode_labels_both_minimizers():
    p = ScalarProblem(y=0.5, lam=0.2)
    spec = GridSpec(-4, 4, -4, 4, 40, 40)
    grid = rasterize(spec, scalar_classifier(p, StepConfig(eta=1.0, max_iters=100, loss_tol=1e-5),
                                             mode="selection"))
    assert grid.fraction(1) > 0
    assert grid.fraction(2) > 0


def test_selection_mode_requires_sphere():
    with pytest.raises(DomainError):
        scalar_classifier(ScalarProblem(y=1.0), StepConfig(eta=0.2), mode="selection")


def test_slice_embedding_states():
    emb = SliceEmbedding.scalar_plane(2)
    U, V = emb.states(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(U, [[1.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(V, [[3.0, 0.0], [4.0, 0.0]])


def test_quotient_classifier_ignores_points_outside_omega():
    p = ScalarProblem(y=0.5, lam=0.2)
    classify = quotient_classifier(p, 1.0, n_iters=200)
    labels, _ = classify(np.array([0.3, 2.0]), np.array([0.6, 1.0]))
    assert labels[0] == 1
    assert labels[1] == 0


# =========================================================================
# 境界
# =========================================================================

def test_uniform_grid_has_no_boundary():
    grid = BasinGrid(GridSpec(0, 1, 0, 1, 10, 10), np.ones((10, 10)))
    assert not extract_boundary(grid, 1).any()


def test_rectangle_boundary_is_a_ring():
    labels = np.zeros((20, 20), dtype=np.uint8)
    labels[3:10, 2:18] = 1
    grid = BasinGrid(GridSpec(0, 1, 0, 1, 20, 20), labels)
    mask = extract_boundary(grid, 1)
    assert int(mask.sum()) == 2 * 7 + 2 * 16 - 4
    assert count_components(mask) == 1


def test_boundary_points_are_cell_centers():
    spec = GridSpec(0, 2, 0, 2, 2, 2)
    mask = np.array([[True, False], [False, False]])
    np.testing.assert_allclose(boundary_points(spec, mask), [[0.5, 0.5]])


def test_count_components():
    mask = np.zeros((5, 5), dtype=bool)
    mask[0, 0] = mask[4, 4] = True
    mask[2, 1:4] = True
    assert count_components(mask) == 3
    assert not mask_boundary(np.zeros((3, 3))).any()


def test_contour_zero_crossings_on_linear_field():
    spec = GridSpec(-1, 1, -1, 1, 20, 20)
    xs, ys = spec.cell_centers()
    X, _ = np.meshgrid(xs, ys)
    points = contour_zero_crossings(spec, X - 0.03)
    assert points.shape[0] == 20
    np.testing.assert_allclose(points[:, 0], 0.03, atol=1e-12)


def test_occupied_fraction():
    spec = GridSpec(0, 1, 0, 1, 4, 4)
    pts = np.array([[0.1, 0.1], [0.12, 0.1], [0.9, 0.9]])
    assert occupied_fraction(spec, pts) == pytest.approx(2 / 16)
    assert occupied_fraction(spec, np.empty((0, 2))) == 0.0

# =========================================================================
# ボックスカウント
# =========================================================================

def test_default_widths():
    assert default_widths() == [2.0 ** -k for k in range(2, 9)]


def test_normalize_points_keeps_aspect():
    out = normalize_points(np.array([[1.0, 1.0], [3.0, 2.0]]))
    np.testing.assert_allclose(out, [[0.0, 0.0], [1.0, 0.5]])


def test_box_counting_filled_square():
    g = np.linspace(0.0, 1.0, 512)
    X, Y = np.meshgrid(g, g)
    fit = box_counting(np.column_stack([X.ravel(), Y.ravel()]))
    assert fit.dimension == pytest.approx(2.0, abs=0.05)
    assert fit.r_squared > 0.99


def test_box_counting_segment():
    t = np.linspace(0.0, 1.0, 5000)
    fit = box_counting(np.column_stack([t, 0.3 * t]))
    assert fit.dimension == pytest.approx(1.0, abs=0.05)


def test_box_counting_single_point_is_degenerate():
    fit = box_counting(np.array([[0.5, 0.5]]))
    assert fit.degenerate
    assert fit.dimension == 0.0
    assert fit.to_dict()["r_squared"] is None


def test_box_counting_rejects_bad_input():
    with pytest.raises(DomainError):
        box_counting(np.empty((0, 2)))
    with pytest.raises(DomainError):
        box_counting(np.array([[0.0, 0.0], [1.0, 1.0]]), widths=[0.5])


# =========================================================================
# 錐の証明書
# =========================================================================

@pytest.mark.parametrize("nu", [0.1, 0.3, 0.5])
def test_cone_certificate_satisfies_sufficient_condition(nu):
    a, b = cone_certificate(nu, n_samples=2000)
    alpha = 1.0 - nu
    assert b > alpha / ((1.0 - alpha ** 2) * alpha ** 2)
    assert a * a < 1.0 - alpha ** 2


def test_cone_certificate_example_bounds():
    a, b = cone_certificate(0.5, n_samples=2000)
    assert b > 8.0 / 3.0
    assert a * a < 0.75


def test_cone_rejects_zero_regularization():
    with pytest.raises(DomainError):
        cone_certificate(0.0)


@pytest.mark.slow
def test_cone_points_converge_to_origin():
    a, b = cone_certificate(0.3, n_samples=2000)
    assert cone_convergence_fraction(0.3, a, b, n_samples=2000) >= 0.999

# =========================================================================
# 自己相似性
# =========================================================================

def test_self_similarity_fixed_point_covers_itself():
    q = QuotientParams(0.5, 0.2)
    xi = limit_point(q)
    window = GridSpec(xi.z - 1.0, xi.z + 1.0, xi.w - 1.0, xi.w + 1.0, 1, 1)
    report = self_similarity_check(q, [[xi.z, xi.w]], window=window)
    assert report.n_checked == 1
    assert report.cover_dist <= 1e-6
    assert report.to_dict()["n_images"]["G0"] == 1


def test_self_similarity_rejects_empty_set():
    with pytest.raises(DomainError):
        self_similarity_check(QuotientParams(0.5, 0.2), np.empty((0, 2)))
