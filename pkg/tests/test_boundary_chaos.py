# tests/test_boundary_chaos.py

import math

import numpy as np
import pytest

from boundary_chaos import (
    MAX_PERIOD,
    boundary_invariance_residual,
    boundary_state,
    chebyshev_map,
    conjugacy_from_pl,
    conjugacy_to_pl,
    cubic_map,
    direction_drift,
    halve_from_boundary,
    halve_to_boundary,
    lap_entropy,
    period_three_witness,
    periodic_orbits,
    periodic_points,
    pl_map,
    semiconjugacy_residuals,
)
from criticality import q_bar
from error_handler import DomainError
from scalar_dynamics import ScalarProblem


def test_cubic_map_examples():
    assert cubic_map(-2.0) == pytest.approx(-2.0)
    assert cubic_map(0.0) == 0.0
    assert cubic_map(math.sqrt(3.0)) == pytest.approx(0.0, abs=1e-12)


def test_maps_reject_points_off_interval():
    with pytest.raises(DomainError):
        cubic_map(2.5)
    with pytest.raises(DomainError):
        pl_map(np.array([0.0, 1.2]))
    with pytest.raises(DomainError):
        conjugacy_from_pl(float("nan"))


def test_conjugacy_examples():
    assert conjugacy_to_pl(1.0) == pytest.approx(2.0)
    assert conjugacy_to_pl(-5.0 / 7.0) == pytest.approx(-1.8019, abs=1e-4)
    assert conjugacy_from_pl(conjugacy_to_pl(0.37)) == pytest.approx(0.37)
    assert halve_from_boundary(halve_to_boundary(-0.4)) == pytest.approx(-0.4)


def test_chebyshev_conjugacy_pointwise():
    x = np.linspace(-1.0, 1.0, 101)
    np.testing.assert_allclose(cubic_map(halve_to_boundary(x)), halve_to_boundary(chebyshev_map(x)), atol=1e-12)


def test_semiconjugacy_residuals_are_tiny():
    halving, sine = semiconjugacy_residuals(1000)
    assert halving <= 1e-12
    assert sine <= 1e-12


def test_period_three_orbit():
    pl, z = period_three_witness()
    np.testing.assert_allclose(pl, [-5.0 / 7.0, -1.0 / 7.0, 3.0 / 7.0])
    assert pl_map(pl[2]) == pytest.approx(pl[0])
    assert cubic_map(z[2]) == pytest.approx(z[0], abs=1e-12)


def test_fixed_points():
    np.testing.assert_allclose(periodic_points(1), [-2.0, 0.0, 2.0], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_periodic_point_count(n):
    pts = periodic_points(n)
    assert pts.size == 3 ** n
    np.testing.assert_allclose(_iterate(pts, n), pts, atol=1e-9)


def _iterate(z, n):
    for _ in range(n):
        z = cubic_map(z)
    return z


@pytest.mark.parametrize("n, expected", [(1, 3), (2, 3), (3, 8), (4, 18)])
def test_prime_orbit_counts(n, expected):
    orbits = periodic_orbits(n)
    assert len(orbits) == expected
    for orbit in orbits:
        assert orbit.period == n
        assert orbit.prime
        assert orbit.max_residual() <= 1e-9
        assert orbit.points[0] == min(orbit.points)


def test_period_three_orbit_is_found():
    target = conjugacy_to_pl(-5.0 / 7.0)
    assert any(min(abs(z - target) for z in o.points) <= 1e-9 for o in periodic_orbits(3))


def test_period_out_of_range():
    with pytest.raises(DomainError):
        periodic_orbits(0)
    with pytest.raises(DomainError):
        periodic_points(MAX_PERIOD + 1)


@pytest.mark.parametrize("n, laps", [(1, 3), (2, 9), (4, 81)])
def test_lap_entropy(n, laps):
    count, h = lap_entropy(n)
    assert count == laps
    assert h == pytest.approx(math.log(3.0))


# =========================================================================
# 境界上の状態
# =========================================================================

def test_boundary_state_lies_on_boundary():
    p = ScalarProblem(y=1.0, d=3)
    eta = 0.2
    for t in (0.0, 0.3, 0.5, 1.0):
        s = boundary_state(p, eta, t)
        assert eta * q_bar(p.y, s) == pytest.approx(8.0, rel=1e-9)


def test_boundary_is_invariant_under_gd(rng):
    p = ScalarProblem(y=0.7, d=2)
    eta = 0.3
    for t in rng.uniform(0.0, 1.0, 10):
        s = boundary_state(p, eta, float(t), rng.normal(size=2), rng.normal(size=2))
        assert boundary_invariance_residual(p, eta, s, steps=3) <= 1e-9


def test_direction_is_preserved_on_boundary():
    p = ScalarProblem(y=1.0, d=3)
    e = np.array([1.0, 2.0, -1.0])
    s = boundary_state(p, 0.2, 0.37, e, e)
    assert direction_drift(p, 0.2, s, 50) <= 1e-12


def test_boundary_state_requires_unregularized():
    with pytest.raises(DomainError):
        boundary_state(ScalarProblem(y=1.0, lam=0.1), 0.2, 0.5)
    with pytest.raises(DomainError):
        boundary_state(ScalarProblem(y=1.0), 0.2, 1.5)
