import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import uniform
from lqg_geodesy.field import FieldGrid, GridSpec, mollify, sample_gff
from lqg_geodesy.geodesics import extract_geodesic
from lqg_geodesy.measure_dim import (area_measure, ball_volume_curve, bootstrap_stderr, covering_dimension,
                                     default_radii, fit_loglog, fit_window, greedy_cover)
from lqg_geodesy.metric import MetricParams, WeightGrid, build_weights, sssp


# ---------------------------------------------------------------- area measure

def test_area_measure_of_zero_field(spec64, params):
    s = 4 * spec64.mesh
    m = area_measure(FieldGrid(spec64, np.zeros(spec64.shape)), params, s)
    expected = spec64.mesh ** 2 * s ** (params.gamma ** 2 / 2)
    assert np.allclose(m.cell_mass, expected, rtol=1e-15)
    assert m.total == pytest.approx(expected * spec64.side_count ** 2)


def test_area_measure_single_vertex(spec64, params):
    s = 4 * spec64.mesh
    vals = np.zeros(spec64.shape)
    vals[7, 9] = 0.8
    m = area_measure(FieldGrid(spec64, vals, epsilon=s), params, s)
    base = spec64.mesh ** 2 * s ** (params.gamma ** 2 / 2)
    assert m.cell_mass[7, 9] == pytest.approx(base * math.exp(params.gamma * 0.8), rel=1e-15)
    assert m.cell_mass[0, 0] == pytest.approx(base, rel=1e-15)


def test_area_measure_small_gamma_limit(spec64):
    p = MetricParams(1e-9, 2.0 + 1e-9)
    m = area_measure(sample_gff(spec64, 0), p, 4 * spec64.mesh)
    assert np.allclose(m.cell_mass, spec64.mesh ** 2, rtol=1e-7)


def test_area_measure_weyl_shift(field64, params):
    s = field64.epsilon
    c = 0.6
    a = area_measure(field64, params, s)
    b = area_measure(field64.with_values(field64.values + c), params, s)
    assert np.allclose(b.cell_mass, a.cell_mass * math.exp(params.gamma * c), rtol=1e-14)


def test_area_measure_tops_up_and_rejects_coarser(spec64, params):
    raw = sample_gff(spec64, 1)
    e, s = 2 * spec64.mesh, 5 * spec64.mesh
    topped = area_measure(mollify(raw, e), params, s)
    direct = area_measure(raw, params, s)
    assert np.allclose(topped.cell_mass, direct.cell_mass, rtol=1e-9)
    with pytest.raises(ValueError):
        area_measure(mollify(raw, s), params, e)


def test_area_mass_of_region(field64, params):
    m = area_measure(field64, params, field64.epsilon)
    region = np.zeros(field64.spec.shape, dtype=bool)
    region[:10] = True
    assert m.mass(region) == pytest.approx(m.cell_mass[:10].sum())


# ---------------------------------------------------------------- fitting

def test_fit_window():
    assert fit_window(10) == (2, 8)
    assert fit_window(5) == (0, 5)


@given(st.floats(-3, 3), st.floats(0.1, 10))
@settings(max_examples=50, deadline=None)
def test_fit_recovers_exact_power_law(slope, scale):
    x = np.geomspace(1, 100, 10)
    est, err, win = fit_loglog(x, scale * x ** slope)
    assert est == pytest.approx(slope, abs=1e-9) and err < 1e-9 and win == (2, 8)


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit_loglog([1.0], [1.0])


def test_bootstrap_stderr():
    vals = np.random.default_rng(0).normal(size=400)
    assert bootstrap_stderr(vals) == pytest.approx(1 / 20, rel=0.15)
    assert math.isnan(bootstrap_stderr([1.0]))


# ---------------------------------------------------------------- ball volumes

def test_flat_small_gamma_ball_volume_slope_is_two():
    spec = GridSpec(128, 4 / 128)
    p = MetricParams(0.01, 2.0 + 1e-4)
    f = FieldGrid(spec, np.zeros(spec.shape), epsilon=4 * spec.mesh)
    w = build_weights(f, p)
    c = spec.vertex_of((0.0, 0.0))
    est = ball_volume_curve(w, area_measure(f, p, 4 * spec.mesh), c)
    assert est.slope == pytest.approx(2.0, abs=0.1)
    assert all(np.diff(est.values) >= 0)


def test_ball_masses_monotone_on_random_field(field64, weights64, params):
    m = area_measure(field64, params, field64.epsilon)
    est = ball_volume_curve(weights64, m, weights64.vertex(32, 32))
    assert all(np.diff(est.values) >= 0)
    assert len(est.scales) == 10 and est.window == (2, 8)


def test_default_radii_stay_in_central_quarter(weights64):
    mf = sssp(weights64, weights64.vertex(32, 32))
    radii = default_radii(mf)
    inside = np.zeros(weights64.shape, dtype=bool)
    inside[16:48, 16:48] = True
    assert max(radii) <= mf.grid()[~inside].min()
    assert np.all(np.diff(radii) > 0)


# ---------------------------------------------------------------- covers

def test_single_point_cover():
    w = uniform(10)
    est = covering_dimension([33], w, [0.5, 1, 2, 4])
    assert est.values == [1.0] * 4 and est.slope == 0.0


def test_straight_geodesic_has_dimension_one():
    w = uniform(200)
    geo = extract_geodesic(sssp(w, w.vertex(100, 5)), w.vertex(100, 194))
    est = covering_dimension(geo.vertices, w, np.geomspace(1, 40, 10))
    assert est.slope == pytest.approx(1.0, abs=0.3)


def test_cover_counts_nonincreasing(weights64):
    marked = range(0, weights64.size, 7)
    est = covering_dimension(marked, weights64, np.geomspace(0.01, 0.5, 8))
    assert all(np.diff(est.values) <= 0)


def optimal_cover_size(w: WeightGrid, marked, eps):
    """Fewest closed eps-balls (any centres) covering ``marked``: exact set-cover DP over subsets."""
    marked = list(marked)
    D = np.array([sssp(w, v).distances[marked] for v in range(w.size)])
    masks = {sum(1 << k for k in np.flatnonzero(row <= eps)) for row in D}
    full = (1 << len(marked)) - 1
    best = [0] + [len(marked) + 1] * full
    for state in range(1, full + 1):
        best[state] = min(best[state & ~m] + 1 for m in masks if state & m)
    return best[full]


@pytest.mark.parametrize("seed", range(3))
def test_greedy_cover_is_sandwiched_by_optimal_covers(seed):
    rng = np.random.default_rng(seed)
    w = WeightGrid(rng.uniform(0.5, 2.0, (5, 5)))
    marked = rng.choice(25, 8, replace=False).tolist()
    for eps in (0.8, 1.5, 3.0):
        greedy = len(greedy_cover(w, marked, eps))
        assert optimal_cover_size(w, marked, eps) <= greedy <= optimal_cover_size(w, marked, eps / 2)
