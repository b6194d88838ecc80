import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertime_lab.torus import (
    MAX_DISTANCE,
    TorusPoint,
    make_lattice,
    make_scale_ladder,
    torus_delta,
    torus_distance,
    torus_distance_array,
)

coord = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
points = st.builds(TorusPoint, coord, coord)


def test_distance_examples():
    assert torus_distance((0.3, 0.4), (0.3, 0.4)) == 0.0
    assert torus_distance((0.1, 0.1), (0.9, 0.9)) == pytest.approx(math.sqrt(0.08), abs=1e-15)
    assert torus_distance((0.0, 0.0), (0.5, 0.5)) == pytest.approx(math.sqrt(0.5), abs=1e-15)


def test_point_wraps_eagerly():
    p = TorusPoint(1.25, -0.25)
    assert (p.u, p.v) == (0.25, 0.75)
    q = p + (0.8, 0.3)
    assert 0 <= q.u < 1 and 0 <= q.v < 1
    assert q.u == pytest.approx(0.05) and q.v == pytest.approx(0.05)
    # a tiny negative would otherwise round to exactly 1.0
    assert TorusPoint(-1e-17, 0.0).u < 1.0


@given(points, points, points)
def test_metric_axioms(a, b, c):
    dab = torus_distance(a, b)
    assert dab == torus_distance(b, a)
    assert dab <= torus_distance(a, c) + torus_distance(c, b) + 1e-12
    assert 0.0 <= dab <= MAX_DISTANCE + 1e-12


@given(points, points)
def test_distance_zero_iff_equal(a, b):
    assert (torus_distance(a, b) == 0.0) == (a == b)


@given(points, points)
def test_delta_is_minimal_image(a, b):
    du, dv = torus_delta(a, b)
    assert -0.5 <= du < 0.5 and -0.5 <= dv < 0.5
    assert math.hypot(du, dv) == pytest.approx(torus_distance(a, b), abs=1e-12)


def test_distance_array_matches_scalar():
    rng = np.random.default_rng(0)
    a, b = rng.random((500, 2)), rng.random((500, 2))
    ref = [torus_distance(p, q) for p, q in zip(a, b)]
    np.testing.assert_allclose(torus_distance_array(a, b), ref, atol=1e-15)


@pytest.mark.parametrize("eps, count, mesh", [(0.5, 4, 0.5), (0.1, 100, 0.1), (0.3, 16, 0.25)])
def test_lattice_examples(eps, count, mesh):
    lat = make_lattice(eps)
    assert len(lat) == count == len(lat.points)
    assert lat.mesh == pytest.approx(mesh)


def test_lattice_eps_03_by_enumeration():
    side = next(s for s in range(1, 100) if s >= 1 / 0.3)
    lat = make_lattice(0.3)
    expected = [(a / side, b / side) for a in range(side) for b in range(side)]
    np.testing.assert_allclose(lat.points, expected)


def test_lattice_row_major():
    lat = make_lattice(0.25)
    assert lat.point(1) == TorusPoint(0.0, 0.25)
    assert lat.point(lat.side) == TorusPoint(0.25, 0.0)
    assert lat.index(1, 2) == lat.side + 2


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.0, 2.0])
def test_lattice_domain(eps):
    with pytest.raises(ValueError):
        make_lattice(eps)


@settings(max_examples=40)
@given(st.floats(min_value=0.01, max_value=0.9), st.integers(0, 2**32 - 1))
def test_lattice_coverage(eps, seed):
    lat = make_lattice(eps)
    q = np.random.default_rng(seed).random((50, 2))
    for p in q:
        near = lat.points[lat.nearest(p)]
        assert torus_distance(p, near) <= lat.mesh * math.sqrt(2) / 2 + 1e-12


def test_ladder_examples():
    np.testing.assert_allclose(make_scale_ladder(0.25, 0.0025, 2).radii, (0.25, 0.025, 0.0025))
    assert make_scale_ladder(0.1, 0.01, 1).radii == (0.1, 0.01)
    assert make_scale_ladder(0.1, 0.001, 4).radii[3] == pytest.approx(0.0031622776601683794, rel=1e-14)


@given(st.floats(0.02, 0.49), st.floats(0.01, 0.99), st.integers(1, 40))
def test_ladder_geometric(R, frac, K):
    lad = make_scale_ladder(R, R * frac * 0.999, K)
    r = lad.as_array()
    assert r[0] == R and r[-1] == lad.eps
    assert np.all(np.diff(r) < 0)
    np.testing.assert_allclose(np.diff(np.log(r)), np.log(lad.eps / R) / K, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(r[:-1] / r[1:], lad.ratio, rtol=1e-9)


@pytest.mark.parametrize("R, eps, K", [(0.5, 0.1, 2), (0.1, 0.1, 2), (0.1, 0.0, 2), (0.1, 0.01, 0),
                                       (0.1, 0.01, 1.5)])
def test_ladder_domain(R, eps, K):
    with pytest.raises(ValueError):
        make_scale_ladder(R, eps, K)
