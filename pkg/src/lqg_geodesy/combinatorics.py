"""Independent-set machinery used to bound the number of geodesics joining two points.

``independent_set_lower_bound`` is the Harant-Schiermeyer bound for connected
graphs, ``overlap_graph`` and ``reduce_and_bound`` build the graphs G0 -> G1 -> G
from a family of paths with marked points, and ``max_m_bound`` scans the
resulting inequality for the largest admissible family size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

QUOTED_M_BOUNDS = {5: 23, 10: 50}
SCAN_LIMIT = 10 ** 6
_BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class SimpleGraph:
    vertex_count: int
    edges: FrozenSet[Tuple[int, int]]

    def __init__(self, vertex_count: int, edges: Iterable[Tuple[int, int]] = ()):
        norm = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at {a}")
            if not (0 <= a < vertex_count and 0 <= b < vertex_count):
                raise ValueError(f"edge ({a}, {b}) out of range")
            e = (min(a, b), max(a, b))
            if e in norm:
                raise ValueError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "vertex_count", int(vertex_count))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> List[set]:
        adj = [set() for _ in range(self.vertex_count)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def components(self) -> List[List[int]]:
        adj = self.adjacency()
        seen = [False] * self.vertex_count
        out = []
        for s in range(self.vertex_count):
            if seen[s]:
                continue
            comp, stack = [], [s]
            seen[s] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for u in adj[v]:
                    if not seen[u]:
                        seen[u] = True
                        stack.append(u)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return self.vertex_count <= 1 or len(self.components()) == 1


# --------------------------------------------------------------------------- the bound


def _bound_decimal(a: int, v: int, digits: int = 50) -> int:
    with localcontext() as ctx:
        ctx.prec = digits
        rad = Decimal(a) * a - 4 * Decimal(v) * v
        if rad < 0:
            rad = Decimal(0)
        val = (Decimal(a) - rad.sqrt()) / 2
        return int(val.to_integral_value(rounding="ROUND_FLOOR"))


def independent_set_lower_bound(V: int, E: int) -> int:
    """``floor((2E + V + 1 - sqrt((2E + V + 1)^2 - 4V^2)) / 2)``."""
    if V < 1 or E < 0:
        raise ValueError("need V >= 1 and E >= 0")
    a = 2 * E + V + 1
    rad = float(a) * a - 4.0 * V * V
    if rad < 0:
        if rad < -1e-9 * a * a:
            raise ValueError(f"(V={V}, E={E}) gives a negative radicand; not a connected graph")
        rad = 0.0
    val = 0.5 * (a - math.sqrt(rad))
    nearest = round(val)
    if abs(val - nearest) < _BOUNDARY_TOL:
        return _bound_decimal(a, V)
    return math.floor(val)


def independence_number(g: SimpleGraph) -> int:
    """Exact maximum independent set size (branch and bound over bitmasks)."""
    n = g.vertex_count
    if n > 24:
        raise ValueError("independence_number is an oracle for at most 24 vertices")
    nbr = [0] * n
    for a, b in g.edges:
        nbr[a] |= 1 << b
        nbr[b] |= 1 << a
    best = 0

    def solve(cand: int, size: int):
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        if size + bin(cand).count("1") <= best:
            return
        # branch on the candidate with most candidate neighbours
        v, deg = -1, -1
        c = cand
        while c:
            low = c & -c
            u = low.bit_length() - 1
            d = bin(nbr[u] & cand).count("1")
            if d > deg:
                v, deg = u, d
            c ^= low
        if deg == 0:
            best = max(best, size + bin(cand).count("1"))
            return
        solve(cand & ~nbr[v] & ~(1 << v), size + 1)
        solve(cand & ~(1 << v), size)

    solve((1 << n) - 1, 0)
    return best


# --------------------------------------------------------------------------- overlap graphs


def overlap_graph(paths: Sequence[Sequence[int]], marks: Sequence[int]) -> SimpleGraph:
    """Edge between i and j iff path i hits mark j or path j hits mark i.

    ``paths`` may be vertex sequences or objects with a ``vertices`` attribute.
    """
    sets = [set(getattr(p, "vertices", p)) for p in paths]
    if len(marks) != len(sets):
        raise ValueError("need exactly one mark per path")
    for i, (s, u) in enumerate(zip(sets, marks)):
        if u not in s:
            raise ValueError(f"mark {u} does not lie on path {i}")
    edges = set()
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if marks[j] in sets[i] or marks[i] in sets[j]:
                edges.add((i, j))
    return SimpleGraph(len(sets), edges)


def orientable(g: SimpleGraph, out_degree: int = 2) -> bool:
    """Whether every edge can be charged to one endpoint with no vertex charged
    more than ``out_degree`` times (capacitated bipartite matching)."""
    charged: List[List[Tuple[int, int]]] = [[] for _ in range(g.vertex_count)]

    def place(e, visited) -> bool:
        for v in e:
            if v in visited:
                continue
            visited.add(v)
            if len(charged[v]) < out_degree:
                charged[v].append(e)
                return True
            for k, f in enumerate(charged[v]):
                if place(f, visited):
                    charged[v][k] = e
                    return True
        return False

    return all(place(e, set()) for e in sorted(g.edges))


@dataclass
class ReductionResult:
    independent_count: int
    graph: SimpleGraph
    padded_edges: int
    linking_edges: int


def reduce_and_bound(g0: SimpleGraph) -> ReductionResult:
    """G0 -> G1 (pad every degree to 2) -> G (link components), then bound.

    Padding joins a deficient vertex to the lowest-index non-neighbour that is
    itself still deficient, falling back to any non-neighbour; the components of G1 are linked in a chain through their
    lowest vertices.
    When G0 can be oriented with out-degree at most 2 (true for overlap
    graphs whose marks are hit by at most two other paths) the final edge
    count is checked against ``7V/3``.
    """
    n = g0.vertex_count
    if n < 3:
        return ReductionResult(independence_number(g0), g0, 0, 0)
    adj = g0.adjacency()
    edges = set(g0.edges)
    padded = 0
    for v in range(n):
        while len(adj[v]) < 2:
            free = [u for u in range(n) if u != v and u not in adj[v]]
            short = [u for u in free if len(adj[u]) < 2]
            u = (short or free)[0]
            adj[v].add(u)
            adj[u].add(v)
            edges.add((min(u, v), max(u, v)))
            padded += 1
    g1 = SimpleGraph(n, edges)
    comps = g1.components()
    heads = sorted(c[0] for c in comps)
    for a, b in zip(heads[:-1], heads[1:]):
        edges.add((a, b))
    g = SimpleGraph(n, edges)
    if orientable(g0, 2) and 3 * g.edge_count > 7 * n:
        raise AssertionError(f"E(G) = {g.edge_count} exceeds 7V/3 for V = {n}")
    return ReductionResult(independent_set_lower_bound(n, g.edge_count), g, padded, len(heads) - 1)


# --------------------------------------------------------------------------- m(gamma) scan


def _family_bound_float(m: np.ndarray) -> np.ndarray:
    a = 17.0 * m / 3.0 + 1.0
    return 0.5 * (a - np.sqrt(a * a - 4.0 * m * m))


def family_bound(m: int, digits: int = 50) -> int:
    """``floor(((17m/3 + 1) - sqrt((17m/3 + 1)^2 - 4m^2)) / 2)`` in ``digits``-digit arithmetic."""
    with localcontext() as ctx:
        ctx.prec = digits
        a = Decimal(17) * m / 3 + 1
        val = (a - (a * a - 4 * Decimal(m) * m).sqrt()) / 2
        return int(val.to_integral_value(rounding="ROUND_FLOOR"))


@dataclass
class MBoundScan:
    threshold: int
    largest_m: int
    first_failing_m: Optional[int]
    float_largest_m: int
    precision_stable: bool
    quoted: Optional[int]

    @property
    def agrees_with_quote(self) -> Optional[bool]:
        return None if self.quoted is None else self.quoted == self.largest_m


def max_m_bound(threshold: int, limit: int = SCAN_LIMIT) -> MBoundScan:
    """Largest ``m <= limit`` whose family bound is at most ``threshold``.

    The float scan covers every m; values within 1e-6 of an integer are
    re-evaluated with 50-digit arithmetic, and the answer is reported from the
    corrected scan. ``precision_stable`` says whether the raw float scan agreed.
    """
    if threshold < 1:
        raise ValueError("threshold must be positive")
    m = np.arange(1, limit + 1, dtype=np.float64)
    raw = _family_bound_float(m)
    floor_f = np.floor(raw).astype(np.int64)
    fixed = floor_f.copy()
    near = np.flatnonzero(np.abs(raw - np.round(raw)) < _BOUNDARY_TOL)
    for k in near:
        fixed[k] = family_bound(int(k) + 1)

    def largest(vals: np.ndarray) -> Tuple[int, Optional[int]]:
        ok = np.flatnonzero(vals <= threshold)
        bad = np.flatnonzero(vals > threshold)
        return (int(ok[-1]) + 1 if ok.size else 0), (int(bad[0]) + 1 if bad.size else None)

    best, first_bad = largest(fixed)
    best_f, _ = largest(floor_f)
    return MBoundScan(threshold, best, first_bad, best_f, best_f == best and bool(np.all(fixed == floor_f)),
                      QUOTED_M_BOUNDS.get(threshold))


def bound_threshold(d_gamma: float) -> int:
    """``floor(2 d_gamma + 1)``: the largest S_n family size allowed by the dimension bound."""
    return math.floor(2 * d_gamma + 1)
