"""Geodesic extraction, near-geodesic corridors, multiplicity counts, normal
(n, m)-network classification and the non-overlap (S_n) classifier.

Exact lattice geodesics are almost surely unique, so "distinct geodesics" is
measured at a slack ``delta``: a corridor is the set of vertices lying on some
path whose length exceeds the optimum by at most ``delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse.csgraph import dijkstra

from .field import BumpFunction
from .metric import NO_PRED, MetricField, MetricParams, WeightGrid, apply_weyl, sssp

EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class LatticePath:
    vertices: Tuple[int, ...]
    length: float

    def __len__(self):
        return len(self.vertices)

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    def reversed(self) -> "LatticePath":
        return LatticePath(tuple(reversed(self.vertices)), self.length)


def path_length(weights: WeightGrid, vertices: Sequence[int]) -> float:
    """Sum of edge costs accumulated from the first vertex; raises on a non-edge step."""
    cols = weights.shape[1]
    w = weights.values
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        ai, aj = divmod(int(a), cols)
        bi, bj = divmod(int(b), cols)
        di, dj = abs(ai - bi), abs(aj - bj)
        if max(di, dj) != 1:
            raise ValueError(f"{a} and {b} are not lattice neighbours")
        f = math.sqrt(2.0) if di and dj else 1.0
        total += f * 0.5 * (w[ai, aj] + w[bi, bj])
    return total


def make_path(weights: WeightGrid, vertices: Sequence[int]) -> LatticePath:
    vs = tuple(int(v) for v in vertices)
    if len(set(vs)) != len(vs):
        raise ValueError("lattice paths must be simple")
    return LatticePath(vs, path_length(weights, vs))


def remove_loops(vertices: Sequence[int]) -> List[int]:
    out: List[int] = []
    pos: Dict[int, int] = {}
    for v in vertices:
        if v in pos:
            cut = pos[v]
            for x in out[cut + 1:]:
                del pos[x]
            del out[cut + 1:]
        else:
            pos[v] = len(out)
            out.append(v)
    return out


def tree_path(mf: MetricField, target: int) -> List[int]:
    """Vertices from the source of ``mf`` to ``target`` along the predecessor tree."""
    if not mf.reached(target):
        raise ValueError(f"target {target} is not reached from {mf.source}")
    out = [int(target)]
    pred = mf.predecessors
    v = int(target)
    while v != mf.source:
        v = int(pred[v])
        if v == NO_PRED:
            raise RuntimeError("broken predecessor chain")
        out.append(v)
    out.reverse()
    return out


def extract_geodesic(mf: MetricField, target: int) -> LatticePath:
    return LatticePath(tuple(tree_path(mf, target)), float(mf.distances[target]))


# --------------------------------------------------------------------------- corridors


def default_slack(weights: WeightGrid) -> float:
    return 2.0 * weights.median_edge_cost()


def default_excision(weights: WeightGrid) -> float:
    return 5.0 * float(np.median(weights.values))


@dataclass
class Corridor:
    z: int
    w: int
    delta: float
    mask: np.ndarray
    from_z: MetricField
    from_w: MetricField

    @property
    def distance(self) -> float:
        return float(self.from_z.distances[self.w])

    @property
    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    def excess(self) -> np.ndarray:
        return (self.from_z.distances + self.from_w.distances - self.distance).reshape(self.mask.shape)


def corridor(weights: WeightGrid, z: int, w: int, delta: float, from_z: Optional[MetricField] = None,
             from_w: Optional[MetricField] = None) -> Corridor:
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    mz = from_z if from_z is not None else sssp(weights, z)
    mw = from_w if from_w is not None else sssp(weights, w)
    total = mz.distances + mw.distances
    d = mz.distances[w]
    # the two trees sum a geodesic in different orders; allow for that rounding
    mask = (total <= d + delta + 1e-12 * d).reshape(weights.shape)
    return Corridor(int(z), int(w), float(delta), mask, mz, mw)


def _through(weights: WeightGrid, cor: Corridor, x: int) -> LatticePath:
    """Near-geodesic z -> x -> w glued from the two geodesic trees."""
    head = tree_path(cor.from_z, x)
    tail = tree_path(cor.from_w, x)[::-1]
    return make_path(weights, remove_loops(head + tail[1:]))


def _components(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    return ndimage.label(mask, structure=EIGHT)


def multiplicity(weights: WeightGrid, z: int, w: int, delta: Optional[float] = None,
                 rho: Optional[float] = None, cor: Optional[Corridor] = None):
    """Count near-geodesic routes from z to w.

    Returns ``(k, representatives)`` where ``k`` is the number of 8-connected
    components of the corridor with the metric balls of radius ``rho`` about
    the endpoints removed, keeping only components that touch both excised
    balls. Each representative passes through the best vertex of its component.
    """
    delta = default_slack(weights) if delta is None else delta
    rho = default_excision(weights) if rho is None else rho
    cor = cor if cor is not None else corridor(weights, z, w, delta)
    d = cor.distance
    if not d > 4 * rho:
        raise ValueError(f"need d(z, w) = {d:.4g} > 4 rho = {4 * rho:.4g}")
    dz = cor.from_z.grid()
    dw = cor.from_w.grid()
    core = cor.mask & (dz >= rho) & (dw >= rho)
    labels, count = _components(core)
    near_z = ndimage.binary_dilation(cor.mask & (dz < rho), structure=EIGHT)
    near_w = ndimage.binary_dilation(cor.mask & (dw < rho), structure=EIGHT)
    touch_z = set(np.unique(labels[near_z & core]).tolist())
    touch_w = set(np.unique(labels[near_w & core]).tolist())
    spanning = sorted((touch_z & touch_w) - {0})
    excess = cor.excess()
    reps = []
    for lab in spanning:
        comp = np.flatnonzero((labels == lab).ravel())
        best = int(comp[np.argmin(excess.ravel()[comp])])
        reps.append(_through(weights, cor, best))
    return len(spanning), reps


# --------------------------------------------------------------------------- networks


@dataclass
class NetworkClass:
    n: int
    m: int
    splitter: Optional[int]
    normal: bool
    witnesses: List[LatticePath] = field(default_factory=list)
    stable: bool = False


def _shell_components(cor: Corridor, dist: np.ndarray, r: float, thickness: float):
    shell = cor.mask & (dist >= r) & (dist <= r + thickness)
    return _components(shell)


def _connected_without(cor: Corridor, removed: np.ndarray) -> bool:
    mask = cor.mask & ~removed
    rows, cols = mask.shape
    zi, zj = divmod(cor.z, cols)
    wi, wj = divmod(cor.w, cols)
    if not (mask[zi, zj] and mask[wi, wj]):
        return False
    ii, jj = np.nonzero(cor.mask)
    i0, i1, j0, j1 = ii.min(), ii.max() + 1, jj.min(), jj.max() + 1
    labels, _ = _components(mask[i0:i1, j0:j1])
    return labels[zi - i0, zj - j0] == labels[wi - i0, wj - j0]


def find_splitter(weights: WeightGrid, cor: Corridor, r: float, max_candidates: int = 64,
                  radius: Optional[float] = None) -> Optional[int]:
    """A vertex whose removal (with its neighbourhood) cuts z from w inside the corridor.

    The neighbourhood is the 3x3 lattice block plus the metric ball of radius
    ``radius`` (default ``delta``); a corridor can be several vertices wide.
    Candidates are geodesic vertices at distance more than ``r`` from both
    ends, tried in order of closeness to the metric midpoint.
    """
    d = cor.distance
    geo = tree_path(cor.from_z, cor.w)
    dz = cor.from_z.distances
    cand = [v for v in geo if r < dz[v] < d - r]
    if not cand:
        return None
    cand.sort(key=lambda v: (abs(dz[v] - d / 2), v))
    if len(cand) > max_candidates:
        step = len(cand) / max_candidates
        cand = [cand[int(k * step)] for k in range(max_candidates)]
    rows, cols = weights.shape
    radius = cor.delta if radius is None else radius
    for u in cand:
        removed = np.zeros(weights.shape, dtype=bool)
        ui, uj = divmod(u, cols)
        removed[max(ui - 1, 0):ui + 2, max(uj - 1, 0):uj + 2] = True
        if radius > 0:
            near = dijkstra(weights.graph, indices=int(u), limit=radius)
            removed |= np.isfinite(near).reshape(weights.shape)
        if not _connected_without(cor, removed):
            return int(u)
    return None


def _branch_counts(cor: Corridor, r: float, thickness: float):
    lz, nz = _shell_components(cor, cor.from_z.grid(), r, thickness)
    lw, nw = _shell_components(cor, cor.from_w.grid(), r, thickness)
    return nz, nw, lz, lw


def classify_network(weights: WeightGrid, z: int, w: int, delta: Optional[float] = None,
                     r: Optional[float] = None, cor: Optional[Corridor] = None,
                     thickness: Optional[float] = None, splitter_radius: Optional[float] = None
                     ) -> NetworkClass:
    """(n, m) branch counts at metric radius ``r`` around z and w, plus a splitter.

    ``normal`` requires a splitter and branch counts unchanged at ``0.75 r`` and
    ``1.25 r``. Paths count as passing through the splitter when they come
    within ``splitter_radius`` of it (default: the endpoint excision radius).
    """
    delta = default_slack(weights) if delta is None else delta
    cor = cor if cor is not None else corridor(weights, z, w, delta)
    d = cor.distance
    r = d / 8 if r is None else r
    if not d > 4 * r:
        raise ValueError(f"need d(z, w) = {d:.4g} > 4 r = {4 * r:.4g}")
    if thickness is None:
        # wide enough that no corridor edge can hop over the shell
        thickness = max(2.0 * float(np.median(weights.values)),
                        math.sqrt(2.0) * float(weights.values[cor.mask].max()))
    n, m, lz, lw = _branch_counts(cor, r, thickness)
    stable = all(_branch_counts(cor, f * r, thickness)[:2] == (n, m) for f in (0.75, 1.25))
    splitter_radius = default_excision(weights) if splitter_radius is None else splitter_radius
    u = find_splitter(weights, cor, r, radius=splitter_radius)

    excess = cor.excess().ravel()
    reps: List[int] = []
    for labels, count in ((lz, n), (lw, m)):
        for lab in range(1, count + 1):
            comp = np.flatnonzero((labels == lab).ravel())
            reps.append(int(comp[np.argmin(excess[comp])]))
    witnesses: List[LatticePath] = []
    if u is None:
        for x in reps:
            witnesses.append(_through(weights, cor, x))
    else:
        from_u = sssp(weights, u)
        to_z = tree_path(from_u, z)[::-1]   # z ... u
        to_w = tree_path(from_u, w)          # u ... w
        for k, x in enumerate(reps):
            xu = tree_path(from_u, x)
            if k < n:   # z-side branch: z -> x -> u -> w
                verts = tree_path(cor.from_z, x) + xu[::-1][1:] + to_w[1:]
            else:       # w-side branch: z -> u -> x -> w
                verts = to_z + xu[1:] + tree_path(cor.from_w, x)[::-1][1:]
            witnesses.append(make_path(weights, remove_loops(verts)))
    return NetworkClass(n, m, u, bool(u is not None and stable), witnesses, stable)


# --------------------------------------------------------------------------- S_n and overlaps


@dataclass(frozen=True)
class SnEvidence:
    paths: Tuple[LatticePath, ...]   # paths[0] is the unmarked geodesic
    marks: Tuple[int, ...]           # marks[i-1] is private to paths[i]

    @property
    def n(self) -> int:
        return len(self.paths) - 1


def detect_sn(paths: Sequence[LatticePath], slack: float = math.inf) -> Optional[SnEvidence]:
    """Find marks showing that ``paths`` realise S_n with ``n = len(paths) - 1``.

    A path can carry a mark only through a vertex no other path visits, so at
    most one path may lack a private vertex; that path (if any) takes the
    unmarked slot. Marks are the private vertices closest to each path's middle.
    """
    if len(paths) < 2:
        return None
    z, w = paths[0].start, paths[0].end
    for p in paths:
        if (p.start, p.end) != (z, w):
            raise ValueError("all paths must share both endpoints")
    lengths = [p.length for p in paths]
    if max(lengths) - min(lengths) > slack:
        return None
    sets = [set(p.vertices) for p in paths]
    seen: Dict[int, int] = {}
    for s in sets:
        for v in s:
            seen[v] = seen.get(v, 0) + 1
    private = [[v for v in p.vertices if seen[v] == 1] for p in paths]
    lacking = [i for i, pv in enumerate(private) if not pv]
    if len(lacking) > 1:
        return None
    if lacking:
        zero = lacking[0]
    else:
        zero = min(range(len(paths)), key=lambda i: (len(private[i]), i))
    order = [zero] + [i for i in range(len(paths)) if i != zero]
    marks = []
    for i in order[1:]:
        p = paths[i]
        mid = (len(p.vertices) - 1) / 2
        pos = {v: k for k, v in enumerate(p.vertices)}
        marks.append(min(private[i], key=lambda v: (abs(pos[v] - mid), v)))
    return SnEvidence(tuple(paths[i] for i in order), tuple(marks))


def sn_anomaly(evidence: Optional[SnEvidence], d_gamma: float) -> bool:
    """True when the evidence has more branches than S_n can have in the continuum."""
    return evidence is not None and evidence.n > math.floor(2 * d_gamma)


def overlap_components(p: LatticePath, q: LatticePath) -> int:
    """Maximal runs of vertices of ``p`` that are off ``q``."""
    on_q = set(q.vertices)
    runs = 0
    inside = False
    for v in p.vertices:
        if v in on_q:
            inside = False
        elif not inside:
            runs += 1
            inside = True
    return runs


# --------------------------------------------------------------------------- perturbation


@dataclass
class PathChange:
    role: str             # "hitter", "avoider" or "other"
    old_length: float
    new_length: float
    inner_length: float   # original cost carried by vertices inside the inner disk
    lower_bound: float
    ok: bool


@dataclass
class PerturbationReport:
    changes: List[PathChange]
    old_distance: float
    new_distance: float
    new_geodesic_hits_inner: bool

    @property
    def violations(self) -> int:
        return sum(not c.ok for c in self.changes)


def _inner_length(weights: WeightGrid, vertices: Sequence[int], inside: np.ndarray) -> float:
    cols = weights.shape[1]
    w = weights.values.ravel()
    ins = inside.ravel()
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        ai, aj = divmod(a, cols)
        bi, bj = divmod(b, cols)
        f = math.sqrt(2.0) if ai != bi and aj != bj else 1.0
        total += f * 0.5 * (w[a] * ins[a] + w[b] * ins[b])
    return total


def perturbation_experiment(weights: WeightGrid, z: int, w: int, bump: BumpFunction,
                            params: MetricParams, paths: Optional[Sequence[LatticePath]] = None,
                            delta: Optional[float] = None) -> PerturbationReport:
    """Raise the field by a bump and measure how near-geodesic lengths respond.

    Paths avoiding the outer disk must keep bit-identical lengths; paths
    entering the inner disk must grow by at least
    ``(1 - exp(-xi * height)) * inner_length``.
    """
    x, y = weights.coordinates()
    for v in (z, w):
        px, py = weights.point(v)
        if math.hypot(px - bump.center[0], py - bump.center[1]) <= bump.outer_radius + weights.mesh:
            raise ValueError("bump support must stay a mesh away from both endpoints")
    r = np.hypot(x - bump.center[0], y - bump.center[1])
    inner = r <= bump.inner_radius
    outer = r < bump.outer_radius
    base = sssp(weights, z)
    if paths is None:
        paths = [extract_geodesic(base, w)]
        try:
            _, reps = multiplicity(weights, z, w, delta)
            paths += reps
        except ValueError:
            pass
    new = apply_weyl(weights, bump, params)
    factor = 1.0 - math.exp(-params.xi * bump.height)
    changes = []
    for p in paths:
        vs = p.vertices
        old = path_length(weights, vs)
        upd = path_length(new, vs)
        flat_in = inner.ravel()[list(vs)]
        flat_out = outer.ravel()[list(vs)]
        if flat_in.any():
            inner_len = _inner_length(weights, vs, inner)
            bound = factor * inner_len
            ok = (upd - old) >= bound - 1e-12 * max(old, 1.0)
            changes.append(PathChange("hitter", old, upd, inner_len, bound, bool(ok)))
        elif not flat_out.any():
            changes.append(PathChange("avoider", old, upd, 0.0, 0.0, upd == old))
        else:
            changes.append(PathChange("other", old, upd, 0.0, 0.0, True))
    after = sssp(new, z)
    geo = extract_geodesic(after, w)
    hits = bool(inner.ravel()[list(geo.vertices)].any())
    return PerturbationReport(changes, float(base.distances[w]), float(after.distances[w]), hits)
