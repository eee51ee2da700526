"""Discrete whole-plane GFF proxies on a square lattice, heat-kernel mollification
and field surgery (bumps, log singularities, two-point rooted sampling).

The whole-plane field is approximated by a torus GFF (zero mode dropped) that is
then shifted so its average over the unit circle vanishes. Geometric experiments
should stay inside the central quarter of the grid, away from the wrap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

NORM_NONE = "none"
NORM_CIRCLE = "zero-circle-average"

Point = Tuple[float, float]
Rect = Tuple[float, float, float, float]  # (x0, x1, y0, y1)


@dataclass(frozen=True)
class GridSpec:
    """Square lattice of ``side_count`` x ``side_count`` vertices.

    Vertex ``(i, j)`` (row ``i``, column ``j``) sits at plane coordinates
    ``(ox + j*mesh, oy + i*mesh)``. By default the grid is centred so that
    vertex ``(N/2, N/2)`` is the origin.
    """

    side_count: int
    mesh: float
    origin_offset: Optional[Point] = None

    def __post_init__(self):
        if int(self.side_count) != self.side_count or self.side_count < 16:
            raise ValueError(f"side_count must be an integer >= 16, got {self.side_count}")
        if not self.mesh > 0:
            raise ValueError(f"mesh must be positive, got {self.mesh}")
        if self.origin_offset is None:
            half = -(self.side_count // 2) * self.mesh
            object.__setattr__(self, "origin_offset", (half, half))
        else:
            object.__setattr__(self, "origin_offset", tuple(float(c) for c in self.origin_offset))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.side_count, self.side_count)

    @property
    def extent(self) -> float:
        return self.side_count * self.mesh

    @property
    def covers_unit_disk(self) -> bool:
        return self.extent >= 4

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Plane coordinate arrays ``(x, y)`` of shape ``(N, N)``."""
        n = self.side_count
        ox, oy = self.origin_offset
        axis = np.arange(n) * self.mesh
        y, x = np.meshgrid(oy + axis, ox + axis, indexing="ij")
        return x, y

    def vertex_of(self, point: Point) -> int:
        """Flat id of the vertex nearest to a plane point (must be on the grid)."""
        i, j = self.index_of(point)
        return i * self.side_count + j

    def index_of(self, point: Point) -> Tuple[int, int]:
        ox, oy = self.origin_offset
        j = int(round((point[0] - ox) / self.mesh))
        i = int(round((point[1] - oy) / self.mesh))
        if not (0 <= i < self.side_count and 0 <= j < self.side_count):
            raise ValueError(f"point {point} lies outside the grid")
        return i, j

    def point_of(self, vertex: int) -> Point:
        i, j = divmod(int(vertex), self.side_count)
        ox, oy = self.origin_offset
        return (ox + j * self.mesh, oy + i * self.mesh)


@dataclass(frozen=True)
class FieldGrid:
    """Real scalar field on a :class:`GridSpec`.

    ``epsilon`` records the heat-kernel mollification scale (``None`` for a raw
    field) and survives later surgery, so a bumped mollified field can still be
    turned into a metric.
    """

    spec: GridSpec
    values: np.ndarray
    normalization: str = NORM_NONE
    seed: int = 0
    provenance: str = "raw-gff"
    epsilon: Optional[float] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.normalization not in (NORM_NONE, NORM_CIRCLE):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def mollified(self) -> bool:
        return self.epsilon is not None

    def with_values(self, values: np.ndarray, **changes) -> "FieldGrid":
        return replace(self, values=values, **changes)


@dataclass(frozen=True)
class BumpFunction:
    """Radial bump: ``height`` on the closed inner disk, 0 off the open outer disk."""

    center: Point
    inner_radius: float
    outer_radius: float
    height: float

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < inner_radius < outer_radius")

    def __call__(self, x, y) -> np.ndarray:
        r = np.hypot(np.asarray(x, dtype=float) - self.center[0],
                     np.asarray(y, dtype=float) - self.center[1])
        t = (self.outer_radius - r) / (self.outer_radius - self.inner_radius)
        return self.height * _smooth_step(t)

    def meets_unit_circle(self) -> bool:
        return abs(math.hypot(*self.center) - 1.0) < self.outer_radius


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class LogSingularity:
    """Adds ``-coefficient * log|. - location|``, capped at distance mesh/2."""

    location: Point
    coefficient: float

    def profile(self, spec: GridSpec) -> np.ndarray:
        x, y = spec.coordinates()
        r = np.hypot(x - self.location[0], y - self.location[1])
        return -self.coefficient * np.log(np.maximum(r, spec.mesh / 2))


# --------------------------------------------------------------------------- sampling


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def laplacian_symbol(n: int) -> np.ndarray:
    """Eigenvalues of the unit-spacing 5-point graph Laplacian on the n-torus."""
    s = np.sin(np.pi * np.arange(n) / n) ** 2
    return 4.0 * (s[:, None] + s[None, :])


def circle_mask(spec: GridSpec) -> np.ndarray:
    """Vertices within one mesh of the unit circle."""
    x, y = spec.coordinates()
    return np.abs(np.hypot(x, y) - 1.0) <= spec.mesh


def circle_average(spec: GridSpec, values: np.ndarray) -> float:
    mask = circle_mask(spec)
    if not mask.any():
        raise ValueError("grid does not meet the unit circle")
    return float(np.mean(values[mask]))


def normalize(field: FieldGrid) -> FieldGrid:
    """Shift the field so its discrete unit-circle average is zero."""
    vals = field.values - circle_average(field.spec, field.values)
    return field.with_values(vals, normalization=NORM_CIRCLE)


def sample_gff(spec: GridSpec, seed: int) -> FieldGrid:
    """Spectral torus GFF with covariance ``2*pi*(-Laplacian)^{-1}``.

    With this normalisation the lattice Green's function behaves like
    ``-log|z - w|`` at large separation, matching the whole-plane GFF.
    The result is normalized to zero circle average when the grid covers the
    unit disk.
    """
    n = spec.side_count
    if not _is_power_of_two(n):
        raise ValueError(f"side_count must be a power of two for FFT sampling, got {n}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, n))
    lam = laplacian_symbol(n)
    lam[0, 0] = 1.0
    amp = np.sqrt(2.0 * np.pi / lam)
    amp[0, 0] = 0.0
    values = np.fft.ifft2(np.fft.fft2(noise) * amp).real
    out = FieldGrid(spec, values, NORM_NONE, int(seed), "raw-gff")
    if spec.covers_unit_disk:
        out = normalize(out)
    return out


def heat_multiplier(spec: GridSpec, variance: float) -> np.ndarray:
    """Fourier symbol of the heat kernel ``p_variance`` on the grid torus."""
    k = 2.0 * np.pi * np.fft.fftfreq(spec.side_count, d=spec.mesh)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return np.exp(-0.5 * variance * k2)


def mollify(field: FieldGrid, epsilon: float) -> FieldGrid:
    """Circular convolution with the heat kernel ``p_{eps^2/2}``."""
    if epsilon < field.spec.mesh:
        raise ValueError(
            f"epsilon={epsilon} is below the mesh {field.spec.mesh}: under-resolved mollification")
    mult = heat_multiplier(field.spec, epsilon ** 2 / 2.0)
    vals = np.fft.ifft2(np.fft.fft2(field.values) * mult).real
    prior = field.epsilon or 0.0
    eff = math.sqrt(prior ** 2 + epsilon ** 2)
    return field.with_values(vals, provenance=f"mollified({epsilon:g})", epsilon=eff,
                             normalization=NORM_NONE)


# --------------------------------------------------------------------------- surgery


def add_function(field: FieldGrid, f: Callable, clears_normalization: bool = True) -> FieldGrid:
    x, y = field.spec.coordinates()
    vals = field.values + np.asarray(f(x, y), dtype=float)
    norm = NORM_NONE if clears_normalization else field.normalization
    return field.with_values(vals, provenance="surgered", normalization=norm)


def add_bump(field: FieldGrid, bump: BumpFunction) -> FieldGrid:
    return add_function(field, bump, clears_normalization=bump.meets_unit_circle())


def add_log_singularity(field: FieldGrid, sing: LogSingularity) -> FieldGrid:
    # No alpha < Q guard: lattice distances stay finite for any coefficient.
    vals = field.values + sing.profile(field.spec)
    norm = field.normalization if sing.coefficient == 0 else NORM_NONE
    return field.with_values(vals, provenance="surgered", normalization=norm)


def circle_log_average(z: Point, points: int = 4096) -> float:
    """``c_z``: mean of ``log|u - z|^{-1}`` over the unit circle (trapezoid rule)."""
    theta = 2.0 * np.pi * np.arange(points) / points
    dist = np.hypot(np.cos(theta) - z[0], np.sin(theta) - z[1])
    return float(-np.mean(np.log(dist)))


def plus_norm(x, y):
    return np.maximum(np.hypot(x, y), 1.0)


def two_point_density(z, w, gamma: float):
    """Unnormalised weight ``|z-w|^{-g^2} (|z|_+ |w|_+)^{2 g^2}``; broadcasts."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    g2 = gamma * gamma
    sep = np.hypot(z[..., 0] - w[..., 0], z[..., 1] - w[..., 1])
    scale = plus_norm(z[..., 0], z[..., 1]) * plus_norm(w[..., 0], w[..., 1])
    return sep ** (-g2) * scale ** (2 * g2)


def _rect_gap(a: Rect, b: Rect) -> float:
    dx = max(b[0] - a[1], a[0] - b[1], 0.0)
    dy = max(b[2] - a[3], a[2] - b[3], 0.0)
    return math.hypot(dx, dy)


def _rect_max_plus(a: Rect) -> float:
    return max(max(math.hypot(x, y), 1.0) for x in a[:2] for y in a[2:])


def _uniform_in(rng: np.random.Generator, rect: Rect, size: int) -> np.ndarray:
    return np.column_stack([rng.uniform(rect[0], rect[1], size), rng.uniform(rect[2], rect[3], size)])


def sample_two_point_rooted(spec: GridSpec, seed: int, gamma: float, z_rect: Rect, w_rect: Rect,
                            batch: int = 4096):
    """Sample ``(h - g log|.-z| - g log|.-w| - g c_z - g c_w, z, w)``.

    ``(z, w)`` is drawn by rejection from the uniform law on the two rectangles,
    with envelope the supremum of :func:`two_point_density` over the pair.
    """
    for r in (z_rect, w_rect):
        if not (r[0] < r[1] and r[2] < r[3]):
            raise ValueError(f"degenerate rectangle {r}")
    gap = _rect_gap(z_rect, w_rect)
    if gap <= 0:
        raise ValueError("rectangles must lie at positive distance")
    g2 = gamma * gamma
    envelope = gap ** (-g2) * (_rect_max_plus(z_rect) * _rect_max_plus(w_rect)) ** (2 * g2)

    field_seq, point_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(point_seq)
    z_pts = _uniform_in(rng, z_rect, batch)
    w_pts = _uniform_in(rng, w_rect, batch)
    ratio = two_point_density(z_pts, w_pts, gamma) / envelope
    if ratio.mean() < 1e-6:
        raise ValueError(f"rejection acceptance rate {ratio.mean():.3g} below 1e-6")
    while True:
        hit = np.flatnonzero(rng.uniform(size=batch) < ratio)
        if hit.size:
            k = hit[0]
            z, w = (float(z_pts[k, 0]), float(z_pts[k, 1])), (float(w_pts[k, 0]), float(w_pts[k, 1]))
            break
        z_pts = _uniform_in(rng, z_rect, batch)
        w_pts = _uniform_in(rng, w_rect, batch)
        ratio = two_point_density(z_pts, w_pts, gamma) / envelope

    field_seed = int(field_seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
    h = sample_gff(spec, field_seed)
    for p in (z, w):
        h = add_log_singularity(h, LogSingularity(p, gamma))
    shift = gamma * (circle_log_average(z) + circle_log_average(w))
    h = h.with_values(h.values - shift)
    h = normalize(replace(h, seed=int(seed)))
    return h, z, w


# --------------------------------------------------------------------------- covariance


# Ten pairs inside the unit disk, separated by at least four default mollification scales.
COVARIANCE_PAIRS = (
    ((0.0, 0.0), (0.25, 0.0)),
    ((0.0, 0.0), (0.5, 0.0)),
    ((0.0, 0.0), (1.0, 0.0)),
    ((0.5, 0.5), (-0.5, -0.5)),
    ((1.0, 0.0), (0.0, 1.0)),
    ((-0.75, 0.25), (0.25, 0.25)),
    ((0.75, 0.0), (-0.75, 0.0)),
    ((0.25, -0.5), (0.25, 0.5)),
    ((-0.5, 0.0), (-0.5, 0.5)),
    ((0.0, -0.75), (0.0, 0.25)),
)


def log_covariance(z: Point, w: Point) -> float:
    """Whole-plane GFF covariance ``log(|z|_+ |w|_+ / |z - w|)``."""
    return float(np.log(plus_norm(*z) * plus_norm(*w) / math.hypot(z[0] - w[0], z[1] - w[1])))


def empirical_covariance(spec: GridSpec, epsilon: float, pairs, seeds) -> np.ndarray:
    """Sample covariance of ``h_eps(z)``, ``h_eps(w)`` over seeds, one value per pair."""
    idx = [(spec.index_of(z), spec.index_of(w)) for z, w in pairs]
    a = np.empty((len(seeds), len(idx)))
    b = np.empty_like(a)
    for k, s in enumerate(seeds):
        vals = mollify(sample_gff(spec, int(s)), epsilon).values
        a[k] = [vals[p] for p, _ in idx]
        b[k] = [vals[q] for _, q in idx]
    a -= a.mean(axis=0)
    b -= b.mean(axis=0)
    return (a * b).sum(axis=0) / (len(seeds) - 1)
