import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import uniform
from lqg_geodesy.field import BumpFunction, add_bump
from lqg_geodesy.geodesics import (LatticePath, classify_network, corridor, detect_sn, extract_geodesic,
                                   make_path, multiplicity, overlap_components, path_length,
                                   perturbation_experiment, remove_loops, sn_anomaly)
from lqg_geodesy.metric import WeightGrid, build_weights, sssp

WALL = 100.0
SQ2 = math.sqrt(2.0)


def channel_grid(shape, cells):
    vals = np.full(shape, WALL)
    for i, j in cells:
        vals[i, j] = 1.0
    return WeightGrid(vals)


def two_channel():
    """9x9: z = (4,0) and w = (4,8) joined by mirror-image channels above and below a wall."""
    top = [(3, 1), (2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 7)]
    bottom = [(8 - i, j) for i, j in top]
    return channel_grid((9, 9), [(4, 0), (4, 8)] + top + bottom), top, bottom


def merging_channels():
    """9x22: two branches leave z = (4,0), merge at (4,7) and run on to w = (4,21)."""
    top = [(3, 1), (2, 2), (2, 3), (2, 4), (2, 5), (3, 6)]
    bottom = [(8 - i, j) for i, j in top]
    merged = [(4, j) for j in range(7, 22)]
    return channel_grid((9, 22), [(4, 0)] + top + bottom + merged), merged


def channel_paths(w: WeightGrid, z: int, t: int):
    """Every simple z -> t path through unit-weight vertices (exhaustive DFS)."""
    low = set(np.flatnonzero(w.values.ravel() == 1.0).tolist())
    out = []

    def walk(path):
        v = path[-1]
        if v == t:
            out.append(list(path))
            return
        for u, _ in w.neighbors(v):
            if u in low and u not in path:
                path.append(u)
                walk(path)
                path.pop()

    walk([z])
    return out


# ---------------------------------------------------------------- paths

def test_path_helpers():
    w = uniform(4)
    p = make_path(w, [0, 5, 6])
    assert p.length == SQ2 + 1 and p.start == 0 and p.end == 6
    assert p.reversed().vertices == (6, 5, 0)
    with pytest.raises(ValueError):
        make_path(w, [0, 5, 0])
    with pytest.raises(ValueError):
        path_length(w, [0, 2])
    assert remove_loops([1, 2, 3, 2, 4, 1, 5]) == [1, 5]


def test_extract_geodesic_basics(weights64):
    mf = sssp(weights64, 1000)
    src = extract_geodesic(mf, 1000)
    assert src.vertices == (1000,) and src.length == 0.0
    for t in range(0, weights64.size, 97):
        geo = extract_geodesic(mf, t)
        assert geo.length == mf.distances[t]
        assert geo.vertices[0] == 1000 and geo.vertices[-1] == t
        assert path_length(weights64, geo.vertices) == pytest.approx(geo.length, rel=1e-12)


def test_axis_aligned_geodesic_on_uniform_grid():
    w = uniform(9)
    geo = extract_geodesic(sssp(w, w.vertex(4, 0)), w.vertex(4, 8))
    assert geo.vertices == tuple(w.vertex(4, j) for j in range(9))


def test_extract_unreached_target_is_an_error():
    w = uniform(6)
    region = np.zeros(w.shape, dtype=bool)
    region[:, :3] = True
    mf = sssp(w, 0, region=region)
    with pytest.raises(ValueError):
        extract_geodesic(mf, w.vertex(0, 5))


# ---------------------------------------------------------------- corridors

def test_zero_slack_corridor_is_the_unique_geodesic(weights64):
    z, t = weights64.vertex(10, 10), weights64.vertex(50, 45)
    cor = corridor(weights64, z, t, 0.0)
    geo = extract_geodesic(cor.from_z, t)
    assert set(cor.vertices.tolist()) == set(geo.vertices)


def test_corridor_is_monotone_in_slack(weights64):
    z, t = weights64.vertex(20, 5), weights64.vertex(30, 60)
    masks = [corridor(weights64, z, t, d).mask for d in (0.0, 0.01, 0.05, 0.2)]
    for small, big in zip(masks, masks[1:]):
        assert np.all(big[small])
    with pytest.raises(ValueError):
        corridor(weights64, z, t, -1.0)


# ---------------------------------------------------------------- multiplicity

def test_two_channel_instance_by_brute_force():
    w, top, bottom = two_channel()
    z, t = w.vertex(4, 0), w.vertex(4, 8)
    D = 4 * SQ2 + 4
    paths = channel_paths(w, z, t)
    lengths = sorted(path_length(w, p) for p in paths)
    assert len(paths) == 2 and lengths == pytest.approx([D, D], rel=1e-15)
    # a path through the wall pays at least two edges into a wall vertex
    assert 2 * 0.5 * (1 + WALL) > D + 0.5
    k, reps = multiplicity(w, z, t, delta=0.5, rho=1.5)
    assert k == 2
    rows = sorted({w.index(v)[0] for r in reps for v in r.vertices[2:-2]})
    assert rows and set(rows) <= {2, 3, 5, 6}
    assert sorted(r.length for r in reps) == pytest.approx([D, D])


def test_huge_slack_merges_channels():
    # k is not monotone in the slack: one blob for huge delta, two routes for small delta
    w, _, _ = two_channel()
    z, t = w.vertex(4, 0), w.vertex(4, 8)
    assert multiplicity(w, z, t, delta=1e4, rho=1.5)[0] == 1
    assert multiplicity(w, z, t, delta=0.5, rho=1.5)[0] == 2


def test_uniform_grid_has_one_route():
    w = uniform(40)
    z, t = w.vertex(20, 5), w.vertex(27, 35)
    assert multiplicity(w, z, t)[0] == 1


def test_multiplicity_precondition():
    w = uniform(10)
    with pytest.raises(ValueError, match="4 rho"):
        multiplicity(w, 0, 3)


# ---------------------------------------------------------------- network classes

def test_single_channel_is_normal_one_one():
    w = channel_grid((9, 21), [(4, j) for j in range(21)])
    z, t = w.vertex(4, 0), w.vertex(4, 20)
    net = classify_network(w, z, t, delta=0.5, r=3.5, thickness=1.0, splitter_radius=0.0)
    assert (net.n, net.m) == (1, 1) and net.normal and net.stable
    i, j = w.index(net.splitter)
    assert i == 4 and 3.5 < j < 16.5


def test_merging_channels_are_two_one_with_splitter_after_merge():
    w, merged = merging_channels()
    z, t = w.vertex(4, 0), w.vertex(4, 21)
    paths = channel_paths(w, z, t)
    D = 4 * SQ2 + 3 + 14
    assert len(paths) == 2
    assert [path_length(w, p) for p in paths] == pytest.approx([D, D], rel=1e-15)
    # the cut vertices of the channel graph are exactly the merged segment
    shared = set(paths[0]) & set(paths[1])
    assert shared == {w.vertex(4, 0)} | {w.vertex(i, j) for i, j in merged}
    net = classify_network(w, z, t, delta=0.5, r=3.5, thickness=1.0, splitter_radius=0.0)
    assert (net.n, net.m) == (2, 1) and net.normal
    assert w.index(net.splitter) in merged[1:-1]
    assert len(net.witnesses) == 3
    for p in net.witnesses:
        assert p.start == z and p.end == t and p.length == pytest.approx(D)


def test_network_precondition():
    w = uniform(12)
    with pytest.raises(ValueError):
        classify_network(w, 0, 2, r=1.0)


def test_classification_is_invariant_under_power_of_two_scaling(weights64):
    # doubling every weight is exact in floating point, like a global field shift
    z, t = weights64.vertex(16, 16), weights64.vertex(48, 40)
    a = classify_network(weights64, z, t)
    b = classify_network(weights64.scaled(2.0), z, t)
    assert (a.n, a.m, a.splitter, a.normal) == (b.n, b.m, b.splitter, b.normal)


# ---------------------------------------------------------------- S_n evidence and overlaps

def P(*vs):
    return LatticePath(tuple(vs), 1.0)


def test_detect_sn_disjoint_pair():
    ev = detect_sn([P(0, 1, 2, 9), P(0, 3, 4, 9)])
    assert ev is not None and ev.n == 1
    assert ev.marks[0] in ev.paths[1].vertices
    assert ev.marks[0] not in ev.paths[0].vertices


def test_detect_sn_identical_paths_is_none():
    assert detect_sn([P(0, 1, 9), P(0, 1, 9)]) is None
    assert detect_sn([P(0, 1, 9)]) is None


def test_detect_sn_path_inside_union_of_others_is_unmarked():
    p1, p2 = P(0, 1, 2, 3, 9), P(0, 4, 5, 6, 9)
    p0 = P(0, 1, 5, 3, 9)            # every vertex shared with p1 or p2
    ev = detect_sn([p1, p2, p0])
    assert ev.paths[0] == p0 and ev.n == 2
    assert ev.marks == (2, 4)


def test_detect_sn_errors_and_slack():
    with pytest.raises(ValueError):
        detect_sn([P(0, 1, 9), P(0, 2, 8)])
    a, b = LatticePath((0, 1, 9), 1.0), LatticePath((0, 2, 9), 5.0)
    assert detect_sn([a, b], slack=1.0) is None


def test_sn_anomaly_threshold():
    ev = detect_sn([P(0, k, 99) for k in range(1, 11)])
    assert ev.n == 9
    assert sn_anomaly(ev, 4.0) and not sn_anomaly(ev, 4.5)
    assert not sn_anomaly(None, 4.0)


def test_overlap_components():
    p = P(0, 1, 2, 3, 4)
    assert overlap_components(p, p) == 0
    assert overlap_components(p, P(0, 5, 2, 3, 4)) == 1
    assert overlap_components(p, P(0, 5, 2, 6, 4)) == 2


@given(st.lists(st.integers(1, 30), min_size=1, max_size=12, unique=True),
       st.lists(st.integers(1, 30), min_size=1, max_size=12, unique=True))
@settings(max_examples=100, deadline=None)
def test_overlap_components_bounded_by_off_vertices(a, b):
    p, q = P(0, *a, 99), P(0, *b, 99)
    off = sum(v not in set(q.vertices) for v in p.vertices)
    assert 0 <= overlap_components(p, q) <= off
    assert (overlap_components(p, q) == 0) == (off == 0)


# ---------------------------------------------------------------- perturbation

def _pair(weights64):
    return weights64.vertex(32, 8), weights64.vertex(32, 56)


def _midpoint_bump(weights64, height):
    z, t = _pair(weights64)
    geo = extract_geodesic(sssp(weights64, z), t)
    c = weights64.point(geo.vertices[len(geo.vertices) // 2])
    return BumpFunction(c, 0.15, 0.3, height)


def test_zero_height_bump_changes_nothing(weights64, params):
    z, t = _pair(weights64)
    rep = perturbation_experiment(weights64, z, t, _midpoint_bump(weights64, 0.0), params)
    assert rep.violations == 0
    assert all(c.new_length == c.old_length for c in rep.changes)
    assert rep.new_distance == rep.old_distance


def test_hitter_matches_rebuilt_field(field64, weights64, params):
    z, t = _pair(weights64)
    bump = _midpoint_bump(weights64, 1.5)
    rep = perturbation_experiment(weights64, z, t, bump, params)
    assert rep.violations == 0
    rebuilt = build_weights(add_bump(field64, bump), params)
    geo = extract_geodesic(sssp(weights64, z), t)
    hitter = rep.changes[0]
    assert hitter.role == "hitter"
    assert hitter.new_length - hitter.old_length >= hitter.lower_bound
    assert hitter.new_length == pytest.approx(path_length(rebuilt, geo.vertices), rel=1e-9)


def test_avoider_length_is_bit_identical(weights64, params):
    z, t = _pair(weights64)
    bump = _midpoint_bump(weights64, 2.0)
    x, y = weights64.coordinates()
    clear = np.hypot(x - bump.center[0], y - bump.center[1]) >= bump.outer_radius + weights64.mesh
    avoider = extract_geodesic(sssp(weights64, z, region=clear), t)
    geo = extract_geodesic(sssp(weights64, z), t)
    rep = perturbation_experiment(weights64, z, t, bump, params, paths=[geo, avoider])
    roles = [c.role for c in rep.changes]
    assert roles == ["hitter", "avoider"]
    assert rep.changes[1].new_length == rep.changes[1].old_length
    assert rep.violations == 0


def test_bump_too_close_to_endpoint(weights64, params):
    z, t = _pair(weights64)
    with pytest.raises(ValueError):
        perturbation_experiment(weights64, z, t, BumpFunction(weights64.point(z), 0.1, 0.2, 1.0), params)
