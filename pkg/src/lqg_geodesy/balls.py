"""Metric balls, filled metric balls with traced boundary cycles, and
confluence censuses across filled annuli.

Complement components are taken with 8-connectivity, the same adjacency the
shortest paths use: a pocket counts as enclosed only if no lattice path can
leave it without touching the ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .geodesics import EIGHT, tree_path
from .metric import MetricField, WeightGrid, sssp

INFINITY = "infinity"
Target = Union[int, str, None]

# Moore neighbourhood in clockwise order for array coordinates (row, col).
_MOORE = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


@dataclass
class FilledBallRegion:
    center: int
    radius: float
    target: Target
    members: np.ndarray          # boolean mask
    boundary_cycle: List[int]
    whole_grid: bool = False     # set when the target is already inside the ball

    @property
    def size(self) -> int:
        return int(self.members.sum())


def metric_ball(mf: MetricField, s: float) -> np.ndarray:
    return (mf.distances <= s).reshape(mf.shape)


def trace_contour(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Moore-neighbour trace of the outer contour of the set starting at its
    lowest row-major index, returned counterclockwise in plane orientation
    (rows grow with y)."""
    ii, jj = np.nonzero(mask)
    if ii.size == 0:
        return []
    rows, cols = mask.shape
    padded = np.zeros((rows + 2, cols + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    start = (int(ii[0]) + 1, int(jj[0]) + 1)
    back = (start[0], start[1] - 1)
    contour = [start]
    cur = start
    second = None
    for _ in range(8 * mask.size + 8):
        d0 = _MOORE.index((back[0] - cur[0], back[1] - cur[1]))
        nxt = None
        prev = back
        for k in range(1, 9):
            di, dj = _MOORE[(d0 + k) % 8]
            cand = (cur[0] + di, cur[1] + dj)
            if padded[cand]:
                nxt = cand
                break
            prev = cand
        if nxt is None:   # isolated vertex
            break
        if cur == start:
            # stop when the first move is about to repeat
            if second is None:
                second = nxt
            elif nxt == second:
                break
        back, cur = prev, nxt
        contour.append(cur)
    if len(contour) > 1 and contour[-1] == start:
        contour.pop()
    pts = [(i - 1, j - 1) for i, j in contour]
    if len(pts) > 2:
        area = 0.0
        for (i0, j0), (i1, j1) in zip(pts, pts[1:] + pts[:1]):
            area += j0 * i1 - j1 * i0
        if area < 0:
            pts = [pts[0]] + pts[:0:-1]
    return pts


def filled_ball(mf: MetricField, s: float, target: Target = INFINITY) -> FilledBallRegion:
    """The closed ball of radius ``s`` plus every pocket it cuts off from ``target``.

    ``target`` is a vertex id or ``"infinity"`` (the grid frame). If the target
    is not farther than ``s`` the whole grid is returned with ``whole_grid`` set.
    """
    shape = mf.shape
    rows, cols = shape
    ball = metric_ball(mf, s)
    outside = ~ball
    labels, _ = ndimage.label(outside, structure=EIGHT)
    if target in (None, INFINITY):
        frame = np.zeros(shape, dtype=bool)
        frame[0, :] = frame[-1, :] = frame[:, 0] = frame[:, -1] = True
        keep = set(np.unique(labels[frame & outside]).tolist()) - {0}
        if not keep:
            full = np.ones(shape, dtype=bool)
            return FilledBallRegion(mf.source, s, INFINITY, full, _boundary(full, None), True)
        reach = np.isin(labels, sorted(keep))
        tgt = INFINITY
    else:
        tgt = int(target)
        if not mf.distances[tgt] > s:
            full = np.ones(shape, dtype=bool)
            return FilledBallRegion(mf.source, s, tgt, full, [], True)
        reach = labels == labels.ravel()[tgt]
    members = ~reach
    return FilledBallRegion(mf.source, s, tgt, members, _boundary(members, reach), False)


def _boundary(members: np.ndarray, reach: Optional[np.ndarray]) -> List[int]:
    cols = members.shape[1]
    if reach is None or _touches_frame(reach):
        pts = trace_contour(members)
    else:
        # bounded target component: trace the ring of members around it
        ring = ndimage.binary_dilation(reach, structure=EIGHT)
        pts = trace_contour(ring)
    return [i * cols + j for i, j in pts]


def _touches_frame(mask: np.ndarray) -> bool:
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


# --------------------------------------------------------------------------- confluence


@dataclass
class ConfluenceReport:
    t: float
    s: float
    X: List[int]
    arcs: List[Tuple[int, int, int]]          # (x, start index, end index) on the outer cycle
    violations: Dict[str, int] = field(default_factory=dict)
    boundary_length: int = 0

    @property
    def violation_fraction(self) -> float:
        if not self.arcs:
            return 0.0
        return (self.violations.get("noncontiguous", 0) + self.violations.get("order", 0)) / len(self.arcs)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "s": self.s,
            "X": list(self.X),
            "arcs": [{"x": x, "start": a, "end": b} for x, a, b in self.arcs],
            "violations": dict(self.violations),
        }


def _dedupe(cycle: Sequence[int]) -> List[int]:
    seen = set()
    out = []
    for v in cycle:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _cyclic_runs(labels: Sequence[int]) -> List[Tuple[int, int, int]]:
    """Maximal runs of equal labels on a cycle as ``(label, start, end)`` (inclusive)."""
    n = len(labels)
    if n == 0:
        return []
    if all(l == labels[0] for l in labels):
        return [(labels[0], 0, n - 1)]
    # rotate so index 0 starts a run
    shift = next(k for k in range(n) if labels[k] != labels[k - 1])
    runs = []
    k = 0
    while k < n:
        lab = labels[(k + shift) % n]
        e = k
        while e + 1 < n and labels[(e + 1 + shift) % n] == lab:
            e += 1
        runs.append((lab, (k + shift) % n, (e + shift) % n))
        k = e + 1
    return runs


def cyclic_order_mismatches(positions: Sequence[float]) -> int:
    """Fewest removals making the sequence increasing under some rotation."""
    n = len(positions)
    if n <= 2:
        return 0
    best = 0
    for r in range(n):
        seq = list(positions[r:]) + list(positions[:r])
        tails: List[float] = []
        for p in seq:
            lo, hi = 0, len(tails)
            while lo < hi:
                mid = (lo + hi) // 2
                if tails[mid] < p:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == len(tails):
                tails.append(p)
            else:
                tails[lo] = p
        best = max(best, len(tails))
    return n - best


def confluence_census(weights: WeightGrid, center: int, w_target: Target, t: float, s: float,
                      mf: Optional[MetricField] = None) -> ConfluenceReport:
    """Where leftmost geodesics to the outer filled-ball boundary cross the inner one.

    Each vertex ``y`` of the outer boundary cycle is labelled by the last
    vertex ``x(y)`` of its geodesic inside the inner filled ball. Arcs are
    maximal cyclic runs of equal labels. Violations: ``noncontiguous`` (extra
    runs of a label), ``order`` (arcs whose cyclic order disagrees with that of
    their labels along the inner boundary), ``reentry`` (geodesics coming back
    into the inner filled ball, which exact distances forbid).
    """
    mf = mf if mf is not None else sssp(weights, center, tie_break="leftmost")
    far = math.inf if w_target in (None, INFINITY) else float(mf.distances[int(w_target)])
    if not (0 <= t < s < far):
        raise ValueError(f"need t < s < d(center, target) = {far:.4g}, got t={t}, s={s}")
    inner = filled_ball(mf, t, w_target)
    outer = filled_ball(mf, s, w_target)
    if inner.whole_grid or outer.whole_grid:
        raise ValueError("filled ball covers the grid; shrink s")
    inside = inner.members.ravel()
    dist = mf.distances
    outer_cycle = _dedupe(outer.boundary_cycle)
    inner_cycle = _dedupe(inner.boundary_cycle)
    inner_pos = {v: k for k, v in enumerate(inner_cycle)}
    cols = weights.shape[1]
    inner_xy = np.array([divmod(v, cols) for v in inner_cycle], dtype=float)

    labels = []
    exits: Dict[int, int] = {}
    reentry = 0
    for y in outer_cycle:
        path = tree_path(mf, y)
        if np.any(np.diff(dist[path]) <= 0):
            raise AssertionError("distance must increase strictly along a geodesic")
        flags = inside[path]
        last = int(np.flatnonzero(flags)[-1])
        first_out = np.flatnonzero(~flags)
        if first_out.size and first_out[0] < last:
            reentry += 1
        labels.append(int(path[last]))
        if last + 1 < len(path):
            exits.setdefault(int(path[last]), int(path[last + 1]))

    runs = _cyclic_runs(labels)
    X = _dedupe([lab for lab, _, _ in runs])

    size = len(inner_cycle)

    def position(x: int) -> float:
        if x in inner_pos:
            return float(inner_pos[x])
        xi, xj = divmod(x, cols)
        if x in exits:
            # x left through a diagonal corner; the contour cuts that corner
            # between the two lattice neighbours shared by x and its exit
            oi, oj = divmod(exits[x], cols)
            a, b = xi * cols + oj, oi * cols + xj
            if a in inner_pos and b in inner_pos:
                pa, pb = inner_pos[a], inner_pos[b]
                step = (pb - pa) % size
                if step > size / 2:
                    step -= size
                return (pa + step / 2.0) % size
        return float(np.argmin((inner_xy[:, 0] - xi) ** 2 + (inner_xy[:, 1] - xj) ** 2))

    order = cyclic_order_mismatches([position(x) for x in X])
    violations = {"noncontiguous": len(runs) - len(X), "order": order, "reentry": reentry}
    return ConfluenceReport(t, s, X, runs, violations, len(outer_cycle))


# --------------------------------------------------------------------------- confluence near a point


@dataclass
class NearConfluence:
    fraction: float
    common_vertex: Optional[int]
    geodesics: int


def near_point_confluence(weights: WeightGrid, z: int, radii: Tuple[float, float], sample_count: int,
                          seed: int = 0, targets: Optional[Sequence[int]] = None,
                          sources: Optional[Sequence[int]] = None) -> NearConfluence:
    """Share of geodesics, from sources in ``B_{r_in}(z)`` to far targets, that
    pass through one common vertex of the annulus ``r_in < d(z, .) <= r_out``.

    Sources are sampled from the inner ball and targets from vertices at
    distance at least ``2 r_out`` unless given explicitly.
    """
    r_in, r_out = radii
    if not 0 <= r_in < r_out:
        raise ValueError("need 0 <= r_in < r_out")
    rng = np.random.default_rng(seed)
    mz = sssp(weights, z)
    dz = mz.distances
    if sources is None:
        pool = np.flatnonzero(dz <= r_in)
        sources = rng.choice(pool, size=sample_count, replace=len(pool) < sample_count)
    if targets is None:
        pool = np.flatnonzero(np.isfinite(dz) & (dz >= 2 * r_out))
        if pool.size == 0:
            raise ValueError("no vertices far enough from z")
        targets = rng.choice(pool, size=sample_count, replace=len(pool) < sample_count)
    counts: Dict[int, int] = {}
    trees: Dict[int, MetricField] = {}
    total = 0
    for a, b in zip(sources, targets):
        a, b = int(a), int(b)
        if a not in trees:
            trees[a] = mz if a == z else sssp(weights, a)
        path = tree_path(trees[a], b)
        ring = {v for v in path if r_in < dz[v] <= r_out}
        for v in ring:
            counts[v] = counts.get(v, 0) + 1
        total += 1
    if not counts:
        return NearConfluence(0.0, None, total)
    best = min(counts, key=lambda v: (-counts[v], v))
    return NearConfluence(counts[best] / total, best, total)
