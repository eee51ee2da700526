"""Lattice LQG area measure and log-log scaling estimators (ball volumes, greedy covers)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .field import FieldGrid, GridSpec, mollify
from .metric import MetricField, MetricParams, WeightGrid, sssp

WINDOW_TRIM = 2


@dataclass(frozen=True)
class AreaMeasure:
    spec: GridSpec
    cell_mass: np.ndarray
    scale: float

    @property
    def total(self) -> float:
        return float(self.cell_mass.sum())

    def mass(self, region: np.ndarray) -> float:
        return float(self.cell_mass[np.asarray(region, dtype=bool).reshape(self.cell_mass.shape)].sum())


def area_measure(field: FieldGrid, params: MetricParams, scale: float) -> AreaMeasure:
    """Cell masses ``mesh^2 * scale^(gamma^2/2) * exp(gamma * h_scale(v))``.

    A raw field is mollified at ``scale``. A field already mollified at some
    ``e <= scale`` is topped up by ``sqrt(scale^2 - e^2)`` (heat semigroup).
    """
    g = params.gamma
    if field.epsilon is None:
        smooth = mollify(field, scale)
    elif math.isclose(field.epsilon, scale, rel_tol=1e-12):
        smooth = field
    elif field.epsilon < scale:
        smooth = mollify(field, math.sqrt(scale ** 2 - field.epsilon ** 2))
    else:
        raise ValueError(f"field is mollified at {field.epsilon}, coarser than scale {scale}")
    mesh = field.spec.mesh
    with np.errstate(over="raise"):
        mass = mesh ** 2 * scale ** (g * g / 2.0) * np.exp(g * smooth.values)
    return AreaMeasure(field.spec, mass, float(scale))


@dataclass
class DimensionEstimate:
    scales: List[float]
    values: List[float]
    slope: float
    stderr: float
    window: Tuple[int, int]          # half-open index range used in the fit

    def summary(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "window": list(self.window)}


def fit_window(count: int, trim: int = WINDOW_TRIM) -> Tuple[int, int]:
    """Drop ``trim`` scales at each end when at least ``2*trim + 2`` remain usable."""
    if count >= 2 * trim + 2:
        return trim, count - trim
    return 0, count


def fit_loglog(x: Sequence[float], y: Sequence[float], window: Optional[Tuple[int, int]] = None
               ) -> Tuple[float, float, Tuple[int, int]]:
    """OLS slope and its standard error of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    lo, hi = window if window is not None else fit_window(len(lx))
    lx, ly = lx[lo:hi], ly[lo:hi]
    if lx.size < 2:
        raise ValueError("need at least two scales to fit a slope")
    if np.ptp(ly) == 0:
        return 0.0, 0.0, (lo, hi)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    if lx.size > 2:
        resid = ly - A @ coef
        s2 = float(resid @ resid) / (lx.size - 2)
        stderr = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        stderr = float("nan")
    return slope, stderr, (lo, hi)


def default_radii(mf: MetricField, count: int = 10, inner_steps: float = 4.0,
                  region: Optional[np.ndarray] = None) -> List[float]:
    """Geometric radii from ``inner_steps`` typical steps up to the largest ball
    that stays inside ``region`` (default: the central quarter of the grid)."""
    rows, cols = mf.shape
    dist = mf.grid()
    if region is None:
        region = np.zeros(mf.shape, dtype=bool)
        region[rows // 4: rows - rows // 4, cols // 4: cols - cols // 4] = True
    r_max = float(dist[~region].min())
    src = np.unravel_index(mf.source, mf.shape)
    nbhd = dist[max(0, src[0] - 1): src[0] + 2, max(0, src[1] - 1): src[1] + 2]
    step = float(np.median(nbhd[nbhd > 0]))
    r_min = inner_steps * step
    if not r_min < r_max:
        raise ValueError("grid too small for a ball-volume sweep")
    return list(np.geomspace(r_min, r_max, count))


def ball_volume_curve(weights: WeightGrid, measure: AreaMeasure, center: int,
                      radii: Optional[Sequence[float]] = None, mf: Optional[MetricField] = None
                      ) -> DimensionEstimate:
    mf = mf if mf is not None else sssp(weights, center)
    radii = list(radii) if radii is not None else default_radii(mf)
    d = mf.distances
    mass = measure.cell_mass.ravel()
    order = np.argsort(d, kind="stable")
    cum = np.cumsum(mass[order])
    pos = np.searchsorted(d[order], radii, side="right")
    masses = [float(cum[p - 1]) if p > 0 else 0.0 for p in pos]
    slope, stderr, window = fit_loglog(radii, masses)
    return DimensionEstimate(list(map(float, radii)), masses, slope, stderr, window)


def greedy_cover(weights: WeightGrid, marked: Iterable[int], eps: float) -> List[int]:
    """Centres of a greedy cover of ``marked`` by closed metric balls of radius ``eps``.

    Centres are marked points taken in increasing id order whenever still
    uncovered, so they are pairwise more than ``eps`` apart.
    """
    pts = sorted(set(int(v) for v in marked))
    covered = np.zeros(weights.size, dtype=bool)
    centres = []
    graph = weights.graph
    for v in pts:
        if covered[v]:
            continue
        centres.append(v)
        d = dijkstra(graph, directed=False, indices=v, limit=eps * (1 + 1e-12))
        covered |= d <= eps
    return centres


def covering_dimension(marked: Iterable[int], weights: WeightGrid, radii: Sequence[float]
                       ) -> DimensionEstimate:
    """Slope of ``log N(eps)`` against ``log(1/eps)`` for greedy cover counts."""
    marked = list(marked)
    radii = sorted(float(r) for r in radii)
    counts = [len(greedy_cover(weights, marked, r)) for r in radii]
    inv = [1.0 / r for r in radii]
    slope, stderr, window = fit_loglog(inv[::-1], counts[::-1])
    return DimensionEstimate(radii, [float(c) for c in counts], slope, stderr, window)


def bootstrap_stderr(values: Sequence[float], resamples: int = 2000, seed: int = 0) -> float:
    """Bootstrap standard error of the mean."""
    vals = np.asarray(values, float)
    if vals.size < 2:
        return float("nan")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, vals.size, size=(resamples, vals.size))
    return float(vals[idx].mean(axis=1).std(ddof=1))
