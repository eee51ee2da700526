"""Experiment runners behind ``run_experiment``.

Each field-based experiment runs one function per seed (optionally in a
process pool), sorts the per-seed results by seed and then aggregates, so the
written files do not depend on scheduling.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from . import __version__
from .balls import confluence_census
from .combinatorics import (SimpleGraph, independence_number, independent_set_lower_bound, max_m_bound,
                            overlap_graph, reduce_and_bound)
from .config import Check, RunConfig, RunManifest
from .field import (COVARIANCE_PAIRS, BumpFunction, GridSpec, add_bump, empirical_covariance, log_covariance,
                    mollify, sample_gff)
from .geodesics import (classify_network, corridor, default_excision, default_slack, detect_sn,
                        extract_geodesic, multiplicity, overlap_components,
                        perturbation_experiment, sn_anomaly)
from .io import CENSUS_COLUMNS, ESTIMATE_COLUMNS, write_csv, write_json
from .measure_dim import (area_measure, ball_volume_curve, bootstrap_stderr, covering_dimension,
                          default_radii)
from .metric import (MetricParams, apply_weyl, build_weights, calibrate_norm_constant,
                     coordinate_change_residual, distance, internal_distance, relaxation_violations, sssp,
                     sssp_many)

TOL = 1e-12


# --------------------------------------------------------------------------- shared helpers


def _spec(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.side_count, cfg.resolved_mesh)


def _params(cfg: RunConfig, norm: float) -> MetricParams:
    return MetricParams(cfg.gamma, cfg.d_gamma, norm)


def _metric(cfg: RunConfig, seed: int, norm: float):
    spec = _spec(cfg)
    field = mollify(sample_gff(spec, seed), cfg.resolved_epsilon)
    params = _params(cfg, norm)
    return field, build_weights(field, params), params


def _central(n: int) -> Tuple[int, int]:
    return n // 4, n - n // 4


def _far_pairs(rng: np.random.Generator, n: int, count: int) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """Uniform vertex pairs in the central quarter at least ``n/8`` lattice steps apart."""
    lo, hi = _central(n)
    out = []
    while len(out) < count:
        a = rng.integers(lo, hi, 2)
        b = rng.integers(lo, hi, 2)
        if math.hypot(*(a - b)) >= n / 8:
            out.append(((int(a[0]), int(a[1])), (int(b[0]), int(b[1]))))
    return out


def _random_bump(rng: np.random.Generator, spec: GridSpec, positive: bool = False) -> BumpFunction:
    lo, hi = _central(spec.side_count)
    i, j = rng.integers(lo, hi, 2)
    cx, cy = spec.point_of(int(i) * spec.side_count + int(j))
    inner = spec.mesh * rng.uniform(2, 10)
    outer = inner * rng.uniform(1.3, 3.0)
    height = rng.uniform(0.5, 2.0) if positive else rng.normal(0, 1.5)
    return BumpFunction((cx, cy), inner, outer, float(height))


def _map_seeds(fn: Callable, cfg: RunConfig, *args) -> List[Tuple[int, Any]]:
    seeds = sorted(int(s) for s in cfg.seeds)
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(seeds))) as pool:
            res = list(pool.map(fn, [cfg] * len(seeds), seeds, *[[a] * len(seeds) for a in args]))
    else:
        res = [fn(cfg, s, *args) for s in seeds]
    return list(zip(seeds, res))


def _norm(cfg: RunConfig) -> float:
    if cfg.norm_constant is not None:
        return cfg.norm_constant
    return calibrate_norm_constant(_spec(cfg), cfg.gamma, cfg.d_gamma, cfg.resolved_epsilon)


# --------------------------------------------------------------------------- axioms


def _axioms_seed(cfg: RunConfig, seed: int, norm: float) -> Dict[str, Any]:
    field, w, params = _metric(cfg, seed, norm)
    spec = field.spec
    n = spec.side_count
    rng = np.random.default_rng([seed, 1])
    relax_bad = 0

    weyl = 0.0
    for _ in range(cfg.pairs):
        bump = _random_bump(rng, spec)
        src = int(rng.integers(0, w.size))
        bumped = apply_weyl(w, bump, params)
        a = sssp(bumped, src)
        b = sssp(build_weights(add_bump(field, bump), params), src)
        relax_bad += relaxation_violations(bumped, a)
        pos = b.distances > 0
        weyl = max(weyl, float(np.max(np.abs(a.distances[pos] - b.distances[pos]) / b.distances[pos])))

    locality_bad = 0
    pairs = _far_pairs(rng, n, cfg.pairs)
    for (zi, zj), (wi, wj) in pairs:
        z, t = w.vertex(zi, zj), w.vertex(wi, wj)
        mf = sssp(w, z)
        relax_bad += relaxation_violations(w, mf)
        geo = extract_geodesic(mf, t)
        region = np.zeros(w.shape, dtype=bool)
        region.ravel()[list(geo.vertices)] = True
        grow = int(rng.integers(0, 4))
        if grow:
            region = ndimage.binary_dilation(region, iterations=grow)
        if internal_distance(w, region, z, t) != mf.distances[t] or distance(w, z, t) != mf.distances[t]:
            locality_bad += 1

    pool = rng.choice(w.size, size=min(30, w.size), replace=False)
    D = sssp_many(w, pool)
    sym = float(np.max(np.abs(D[:, pool] - D[:, pool].T)))
    tri_bad = 0
    for _ in range(cfg.triples):
        a, b, c = rng.integers(0, len(pool), 3)
        if D[a, pool[c]] > D[a, pool[b]] + D[b, pool[c]] + TOL:
            tri_bad += 1
    diag_bad = int(np.count_nonzero(np.diag(D[:, pool]) != 0))
    off = D[:, pool][~np.eye(len(pool), dtype=bool)]
    diag_bad += int(np.count_nonzero(off <= 0))

    half = n // 4
    cc_pairs = []
    for _ in range(max(1, cfg.pairs // 2)):
        p = rng.integers(-half // 2, half // 2, 4)
        if tuple(p[:2]) != tuple(p[2:]):
            cc_pairs.append(((p[0] * spec.mesh, p[1] * spec.mesh), (p[2] * spec.mesh, p[3] * spec.mesh)))
    cc = coordinate_change_residual(field, params, 2, cc_pairs)
    return {
        "weyl_max_rel": weyl,
        "locality_failures": locality_bad,
        "locality_pairs": len(pairs),
        "symmetry_max": sym,
        "triangle_failures": tri_bad,
        "identity_failures": diag_bad,
        "relaxation_failures": relax_bad,
        "coordinate_change": cc.summary(),
    }


def _run_axioms(cfg: RunConfig, man: RunManifest) -> None:
    norm = _norm(cfg)
    man.results["norm_constant"] = norm
    per = _map_seeds(_axioms_seed, cfg, norm)
    rows = []
    for seed, r in per:
        ok = (r["weyl_max_rel"] <= 1e-9 and r["locality_failures"] == 0 and r["symmetry_max"] <= TOL
              and r["triangle_failures"] == 0 and r["relaxation_failures"] == 0 and r["identity_failures"] == 0)
        man.seed_status[seed] = "ok" if ok else "hard-fail"
        rows.append([seed, r["weyl_max_rel"], r["locality_failures"], r["symmetry_max"], r["triangle_failures"],
                     r["identity_failures"], r["relaxation_failures"], r["coordinate_change"]["median"]])
    res = [r for _, r in per]
    _csv(man, "axioms.csv", ["seed", "weyl_max_rel", "locality_failures", "symmetry_max", "triangle_failures",
                             "identity_failures", "relaxation_failures", "coord_change_median"], rows)
    man.checks += [
        Check("weyl", max(r["weyl_max_rel"] for r in res), "<= 1e-9", max(r["weyl_max_rel"] for r in res) <= 1e-9, True),
        Check("locality", sum(r["locality_failures"] for r in res), "== 0",
              sum(r["locality_failures"] for r in res) == 0, True),
        Check("symmetry", max(r["symmetry_max"] for r in res), "<= 1e-12", max(r["symmetry_max"] for r in res) <= TOL, True),
        Check("triangle", sum(r["triangle_failures"] for r in res), "== 0",
              sum(r["triangle_failures"] for r in res) == 0, True),
        Check("identity", sum(r["identity_failures"] for r in res), "== 0",
              sum(r["identity_failures"] for r in res) == 0, True),
        Check("relaxation", sum(r["relaxation_failures"] for r in res), "== 0",
              sum(r["relaxation_failures"] for r in res) == 0, True),
    ]
    if cfg.covariance_seeds:
        _covariance(cfg, man)
    man.results["locality_pairs"] = sum(r["locality_pairs"] for r in res)
    man.results["triples"] = cfg.triples * len(res)
    man.results["coordinate_change"] = {str(s): r["coordinate_change"] for s, r in per}


def _covariance(cfg: RunConfig, man: RunManifest) -> None:
    spec = _spec(cfg)
    seeds = range(min(cfg.seeds), min(cfg.seeds) + cfg.covariance_seeds)
    emp = empirical_covariance(spec, cfg.resolved_epsilon, COVARIANCE_PAIRS, seeds)
    rows, worst = [], 0.0
    for (z, w), c in zip(COVARIANCE_PAIRS, emp):
        target = log_covariance(z, w)
        worst = max(worst, abs(c - target))
        rows.append([z[0], z[1], w[0], w[1], float(c), target])
    _csv(man, "covariance.csv", ["z_x", "z_y", "w_x", "w_y", "empirical", "log_formula"], rows)
    man.results["covariance_max_abs_error"] = worst
    man.checks.append(Check("covariance", worst, "<= 0.15", worst <= 0.15, False))


# --------------------------------------------------------------------------- censuses


def _census_seed(cfg: RunConfig, seed: int, norm: float, network: bool) -> Dict[str, Any]:
    _, w, params = _metric(cfg, seed, norm)
    n = cfg.side_count
    rng = np.random.default_rng([seed, 2])
    delta = cfg.delta if cfg.delta is not None else default_slack(w)
    rho = cfg.rho if cfg.rho is not None else default_excision(w)
    rows, hard, anomalies, overlaps, rejected = [], 0, 0, [], 0
    while len(rows) < cfg.pairs:
        if rejected > 50 * cfg.pairs:
            raise ValueError("grid too small: cannot find pairs with d(z, w) > 4 rho")
        (zi, zj), (wi, wj) = _far_pairs(rng, n, 1)[0]
        z, t = w.vertex(zi, zj), w.vertex(wi, wj)
        cor = corridor(w, z, t, delta)
        d = cor.distance
        if not d > 4 * rho:   # "far" is metric: the excised end balls must not meet
            rejected += 1
            continue
        geo = extract_geodesic(cor.from_z, t)
        if geo.length != d or not cor.mask.ravel()[list(geo.vertices)].all():
            hard += 1
        k, reps = multiplicity(w, z, t, delta, rho, cor=cor)
        if any(p.length > d + delta + 1e-9 * d for p in reps):
            hard += 1
        nn = mm = normal = None
        sx = sy = None
        if network:
            nc = classify_network(w, z, t, delta, cor=cor)
            nn, mm, normal = nc.n, nc.m, nc.normal
            if nc.splitter is not None:
                sx, sy = w.point(nc.splitter)
            if len(reps) >= 2:
                ev = detect_sn(reps, slack=delta)
                anomalies += int(sn_anomaly(ev, params.d_gamma))
                for p, q in itertools.combinations(reps, 2):
                    overlaps.append(overlap_components(p, q))
        zx, zy = w.point(z)
        wx, wy = w.point(t)
        rows.append([seed, zx, zy, wx, wy, d, k, nn, mm, normal, sx, sy])
    return {"rows": rows, "hard": hard, "anomalies": anomalies, "overlaps": overlaps, "rejected": rejected}


def _run_census(cfg: RunConfig, man: RunManifest, network: bool) -> None:
    norm = _norm(cfg)
    man.results["norm_constant"] = norm
    per = _map_seeds(_census_seed, cfg, norm, network)
    rows = [row for _, r in per for row in r["rows"]]
    for seed, r in per:
        man.seed_status[seed] = "ok" if r["hard"] == 0 else "hard-fail"
    _csv(man, "census.csv", CENSUS_COLUMNS, rows)
    ks = [row[6] for row in rows]
    unique = sum(k == 1 for k in ks) / len(ks)
    hard = sum(r["hard"] for _, r in per)
    man.checks.append(Check("geodesic-invariants", hard, "== 0", hard == 0, True))
    man.checks.append(Check("unique-fraction", unique, f">= {cfg.unique_fraction}", unique >= cfg.unique_fraction,
                            False))
    man.results.update({"pairs": len(rows), "k_histogram": _hist(ks),
                        "rejected_pairs": sum(r["rejected"] for _, r in per)})
    if network:
        multi = [row for row in rows if row[6] >= 2]
        small = [row for row in multi if row[7] in (1, 2, 3) and row[8] in (1, 2, 3)]
        frac = len(small) / len(multi) if multi else 1.0
        man.checks.append(Check("small-class-fraction", frac, f">= {cfg.small_class_fraction}",
                                frac >= cfg.small_class_fraction, False))
        man.results.update({
            "multi_pairs": len(multi),
            "nm_histogram": _hist([f"{row[7]},{row[8]}" for row in rows]),
            "nm_histogram_multi": _hist([f"{row[7]},{row[8]}" for row in multi]),
            "normal_fraction": sum(bool(row[9]) for row in rows) / len(rows),
            "sn_anomalies": sum(r["anomalies"] for _, r in per),
            "overlap_histogram": _hist([o for _, r in per for o in r["overlaps"]]),
        })


# --------------------------------------------------------------------------- confluence


def _confluence_seed(cfg: RunConfig, seed: int, norm: float) -> Dict[str, Any]:
    _, w, _ = _metric(cfg, seed, norm)
    n = cfg.side_count
    rng = np.random.default_rng([seed, 3])
    center = w.vertex(n // 2, n // 2)
    mf = sssp(w, center, tie_break="leftmost")
    r_max = default_radii(mf, 2)[-1]
    reports, errors = [], 0
    for _ in range(cfg.pairs):
        s = float(rng.uniform(0.3, 0.9) * r_max)
        t = float(rng.uniform(0.2, 0.8) * s)
        try:
            rep = confluence_census(w, center, "infinity", t, s, mf=mf)
        except AssertionError:
            errors += 1
            continue
        reports.append(rep.to_json() | {"seed": seed, "boundary_length": rep.boundary_length})
    return {"reports": reports, "errors": errors}


def _run_confluence(cfg: RunConfig, man: RunManifest) -> None:
    norm = _norm(cfg)
    man.results["norm_constant"] = norm
    per = _map_seeds(_confluence_seed, cfg, norm)
    reports = [rep for _, r in per for rep in r["reports"]]
    for seed, r in per:
        bad = r["errors"] or any(rep["violations"]["reentry"] for rep in r["reports"])
        man.seed_status[seed] = "hard-fail" if bad else "ok"
    _json(man, "confluence.json", {"run_id": man.run_id, "censuses": reports})
    arcs = sum(len(rep["arcs"]) for rep in reports)
    viol = sum(rep["violations"]["noncontiguous"] + rep["violations"]["order"] for rep in reports)
    reentry = sum(rep["violations"]["reentry"] for rep in reports)
    errors = sum(r["errors"] for _, r in per)
    frac = viol / arcs if arcs else 0.0
    _csv(man, "confluence.csv", ["seed", "t", "s", "X", "arcs", "noncontiguous", "order", "reentry"],
         [[rep["seed"], rep["t"], rep["s"], len(rep["X"]), len(rep["arcs"]), rep["violations"]["noncontiguous"],
           rep["violations"]["order"], rep["violations"]["reentry"]] for rep in reports])
    man.checks.append(Check("no-reentry", reentry + errors, "== 0", reentry + errors == 0, True))
    man.checks.append(Check("arc-violation-fraction", frac, f"<= {cfg.violation_fraction}",
                            frac <= cfg.violation_fraction, False))
    man.results.update({"samples": len(reports), "arcs": arcs, "violations": viol,
                        "clean_samples": sum(1 for rep in reports
                                             if rep["violations"]["noncontiguous"] + rep["violations"]["order"] == 0)})


# --------------------------------------------------------------------------- dimension


def _dimension_seed(cfg: RunConfig, seed: int, norm: float) -> Dict[str, Any]:
    field, w, params = _metric(cfg, seed, norm)
    n = cfg.side_count
    measure = area_measure(field, params, cfg.resolved_measure_scale) \
        if cfg.resolved_measure_scale >= cfg.resolved_epsilon \
        else area_measure(mollify(sample_gff(field.spec, seed), cfg.resolved_measure_scale), params,
                          cfg.resolved_measure_scale)
    center = w.vertex(n // 2, n // 2)
    mf = sssp(w, center)
    vol = ball_volume_curve(w, measure, center, default_radii(mf, cfg.radii), mf=mf)
    # covering estimate for one geodesic from the centre to the edge of the central quarter
    geo = extract_geodesic(mf, w.vertex(n // 2, n - n // 4))
    step = geo.length / max(len(geo.vertices) - 1, 1)
    radii = list(np.geomspace(2 * step, geo.length / 4, 8))
    cov = covering_dimension(geo.vertices, w, radii)
    return {"volume": vol, "cover": cov}


def _run_dimension(cfg: RunConfig, man: RunManifest) -> None:
    norm = _norm(cfg)
    man.results["norm_constant"] = norm
    per = _map_seeds(_dimension_seed, cfg, norm)
    slopes = []
    for seed, r in per:
        man.seed_status[seed] = "ok"
        vol = r["volume"]
        slopes.append(vol.slope)
        _csv(man, f"volume_seed{seed}.csv", ESTIMATE_COLUMNS, zip(vol.scales, vol.values))
        _json(man, f"volume_seed{seed}.json", vol.summary() | {"run_id": man.run_id, "seed": seed})
    mean = float(np.mean(slopes))
    stderr = bootstrap_stderr(slopes, seed=0)
    window = list(per[0][1]["volume"].window)
    _json(man, "volume_summary.json", {"run_id": man.run_id, "slope": mean, "stderr": stderr, "window": window,
                                       "per_seed": {str(s): r["volume"].slope for s, r in per}})
    covs = [r["cover"].slope for _, r in per]
    _json(man, "cover_summary.json", {"run_id": man.run_id, "slope": float(np.mean(covs)),
                                      "stderr": bootstrap_stderr(covs, seed=0),
                                      "window": list(per[0][1]["cover"].window)})
    man.results.update({"slope": mean, "stderr": stderr, "per_seed": slopes, "cover_slope": float(np.mean(covs))})
    lo, hi = cfg.slope_min, cfg.slope_max
    if lo is not None or hi is not None:
        ok = (lo is None or mean >= lo) and (hi is None or mean <= hi)
        man.checks.append(Check("volume-slope", mean, f"[{lo}, {hi}]", ok, False))


# --------------------------------------------------------------------------- bounds


def connected_graphs(v: int):
    """Every connected labelled simple graph on ``v`` vertices."""
    pairs = list(itertools.combinations(range(v), 2))
    for mask in range(1 << len(pairs)):
        g = SimpleGraph(v, [p for k, p in enumerate(pairs) if mask >> k & 1])
        if g.is_connected():
            yield g


def random_connected_graph(rng: np.random.Generator, v: int) -> SimpleGraph:
    edges = set()
    order = rng.permutation(v)
    for k in range(1, v):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    p = rng.uniform(0, 1)
    for a, b in itertools.combinations(range(v), 2):
        if rng.uniform() < p:
            edges.add((a, b))
    return SimpleGraph(v, edges)


def random_family(rng: np.random.Generator, size: int = 7) -> Tuple[List[List[int]], List[int]]:
    """Random up-right lattice paths sharing both endpoints, each marked at a
    vertex hit by at most two of the other paths."""
    count = int(rng.integers(3, 13))
    paths: List[List[int]] = []
    hits: Dict[int, int] = {}
    for _ in range(50 * count):
        if len(paths) == count:
            break
        i = j = 0
        verts = [0]
        while (i, j) != (size - 1, size - 1):
            if i == size - 1 or (j < size - 1 and rng.uniform() < 0.5):
                j += 1
            else:
                i += 1
            verts.append(i * size + j)
        trial = dict(hits)
        for v in verts:
            trial[v] = trial.get(v, 0) + 1
        # every path, old and new, must keep a vertex hit at most three times
        if all(any(trial[v] <= 3 for v in p) for p in paths + [verts]):
            paths.append(verts)
            hits = trial
    marks = [min((v for v in p if hits[v] <= 3), key=lambda v: (hits[v], v)) for p in paths]
    return paths, marks


def _run_bounds(cfg: RunConfig, man: RunManifest) -> None:
    scans = [max_m_bound(t) for t in sorted(set(cfg.thresholds))]
    rows = [[s.threshold, s.largest_m, s.first_failing_m, s.float_largest_m, s.precision_stable,
             s.quoted if s.quoted is not None else ""] for s in scans]
    _csv(man, "bounds.csv", ["threshold", "largest_m", "first_failing_m", "float_largest_m", "precision_stable",
                             "quoted"], rows)
    mono = all(a.largest_m <= b.largest_m for a, b in zip(scans, scans[1:]))
    stable = all(s.precision_stable for s in scans)
    man.checks.append(Check("m-scan-monotone", float(mono), "== 1", mono, True))
    man.checks.append(Check("m-scan-precision-stable", float(stable), "== 1", stable, True))
    man.results["scans"] = {str(s.threshold): {"largest_m": s.largest_m, "first_failing_m": s.first_failing_m,
                                               "quoted": s.quoted, "agrees_with_quote": s.agrees_with_quote}
                            for s in scans}
    man.results["quote_flags"] = [f"threshold {s.threshold}: scan {s.largest_m}, quoted {s.quoted}"
                                  for s in scans if s.agrees_with_quote is False]
    rng = np.random.default_rng([int(min(cfg.seeds)), 5])
    if cfg.exhaustive_vertices:
        bad = total = 0
        for v in range(1, cfg.exhaustive_vertices + 1):
            for g in connected_graphs(v):
                total += 1
                bad += independent_set_lower_bound(v, g.edge_count) > independence_number(g)
        man.checks.append(Check("independent-set-exhaustive", bad, "== 0", bad == 0, True))
        man.results["exhaustive_graphs"] = total
    if cfg.random_graphs:
        bad = 0
        for _ in range(cfg.random_graphs):
            g = random_connected_graph(rng, int(rng.integers(1, cfg.random_graph_vertices + 1)))
            bad += independent_set_lower_bound(g.vertex_count, g.edge_count) > independence_number(g)
        man.checks.append(Check("independent-set-random", bad, "== 0", bad == 0, True))
    if cfg.families:
        bad = applicable = 0
        for _ in range(cfg.families):
            paths, marks = random_family(rng)
            g0 = overlap_graph(paths, marks)
            if g0.edge_count <= 2 * g0.vertex_count:
                applicable += 1
                try:
                    res = reduce_and_bound(g0)
                except AssertionError:
                    bad += 1
                    continue
                v = g0.vertex_count
                if v >= 3 and (3 * res.graph.edge_count > 7 * v or not res.graph.is_connected()):
                    bad += 1
        man.checks.append(Check("reduction-edge-bound", bad, "== 0", bad == 0, True))
        man.results["families_applicable"] = applicable
    man.seed_status[int(min(cfg.seeds))] = "ok"


# --------------------------------------------------------------------------- perturbation


def _perturbation_seed(cfg: RunConfig, seed: int, norm: float) -> Dict[str, Any]:
    _, w, params = _metric(cfg, seed, norm)
    spec = _spec(cfg)
    n = cfg.side_count
    rng = np.random.default_rng([seed, 6])
    rows = []
    ran = 0
    x, y = w.coordinates()
    for (zi, zj), (wi, wj) in _far_pairs(rng, n, cfg.pairs):
        z, t = w.vertex(zi, zj), w.vertex(wi, wj)
        mf = sssp(w, z)
        geo = extract_geodesic(mf, t)
        verts = geo.vertices
        mid = verts[len(verts) // 2]
        cx, cy = w.point(mid)
        inner = spec.mesh * rng.uniform(2, 6)
        ratio = rng.uniform(1.5, 2.5)
        # keep the support clear of both endpoints on small grids
        room = min(math.hypot(*np.subtract(w.point(v), (cx, cy))) for v in (z, t)) - 2 * spec.mesh
        outer = min(inner * ratio, room)
        if outer <= spec.mesh:
            continue
        inner = outer / ratio
        bump = BumpFunction((cx, cy), inner, outer, float(rng.uniform(0.5, 2.0)))
        # an avoider: best path that keeps clear of the outer disk
        clear = np.hypot(x - cx, y - cy) >= outer + spec.mesh
        around = sssp(w, z, region=clear)
        paths = [geo]
        if np.isfinite(around.distances[t]):
            paths.append(extract_geodesic(around, t))
        rep = perturbation_experiment(w, z, t, bump, params, paths=paths)
        ran += 1
        for c in rep.changes:
            rows.append([seed, c.role, c.old_length, c.new_length, c.inner_length, c.lower_bound, c.ok])
    return {"rows": rows, "instances": ran}


def _run_perturbation(cfg: RunConfig, man: RunManifest) -> None:
    norm = _norm(cfg)
    man.results["norm_constant"] = norm
    per = _map_seeds(_perturbation_seed, cfg, norm)
    rows = [row for _, r in per for row in r["rows"]]
    for seed, r in per:
        man.seed_status[seed] = "ok" if all(row[-1] for row in r["rows"]) else "hard-fail"
    _csv(man, "perturbation.csv", ["seed", "role", "old_length", "new_length", "inner_length", "lower_bound", "ok"],
         rows)
    bad = sum(not row[-1] for row in rows)
    roles = _hist([row[1] for row in rows])
    man.checks.append(Check("perturbation-violations", bad, "== 0", bad == 0, True))
    man.results.update({"instances": sum(r["instances"] for _, r in per), "roles": roles})


# --------------------------------------------------------------------------- driver

_RUNNERS = {
    "axioms": _run_axioms,
    "multiplicity-census": lambda c, m: _run_census(c, m, False),
    "network-census": lambda c, m: _run_census(c, m, True),
    "confluence-census": _run_confluence,
    "dimension": _run_dimension,
    "bounds": _run_bounds,
    "perturbation": _run_perturbation,
}


def _hist(values: Sequence[Any]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for v in values:
        out[str(v)] = out.get(str(v), 0) + 1
    return dict(sorted(out.items()))


def _csv(man: RunManifest, name: str, header, rows) -> None:
    man.files.append(str(write_csv(man.out_path(name), header, rows)))


def _json(man: RunManifest, name: str, obj) -> None:
    man.files.append(str(write_json(man.out_path(name), obj)))


def run_experiment(config: RunConfig) -> RunManifest:
    """Run ``config.experiment`` and write its artifacts plus ``manifest.json``."""
    config.validate()
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    probe = out / f".{config.run_id}.probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    man = RunManifest(config.run_id, config.to_dict(), __version__)
    t0 = time.perf_counter()
    _RUNNERS[config.experiment](config, man)
    man.timings["experiment"] = time.perf_counter() - t0
    if config.plots:
        from .plots import emit_plots
        t1 = time.perf_counter()
        man.files += emit_plots(man)
        man.timings["plots"] = time.perf_counter() - t1
    man.timings["total"] = time.perf_counter() - t0
    path = man.out_path("manifest.json")
    man.files.append(str(path))
    write_json(path, man.to_dict())
    return man
