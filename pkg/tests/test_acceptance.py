"""End-to-end acceptance criteria 1-12.

Every criterion runs through ``run_experiment`` with the configuration it
names, prints one PASS/FAIL line (also repeated in the terminal summary) and
then asserts. Runtime limits are part of each criterion. The large-grid
criteria take a long time on one core; select them with ``-m slow``.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from lqg_geodesy.config import RunConfig
from lqg_geodesy.experiments import run_experiment
from lqg_geodesy.metric import GAMMA_PURE_GRAVITY, watabiki_estimate


def timed(tmp_path_factory, **cfg):
    out = tmp_path_factory.mktemp(cfg["experiment"])
    t0 = time.perf_counter()
    man = run_experiment(RunConfig(out_dir=str(out), plots=False, **cfg))
    return man, time.perf_counter() - t0


def report(number: int, name: str, ok: bool, detail: str, seconds: float, limit: float) -> bool:
    ok = ok and seconds <= limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} ({name}): {detail}; {seconds:.1f} s (limit {limit:g} s)"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


@pytest.fixture(scope="module")
def axioms_run(tmp_path_factory):
    return timed(tmp_path_factory, experiment="axioms", side_count=128, seeds=list(range(5)), pairs=20,
                 triples=200)


def test_criterion_01_weyl_scaling(axioms_run):
    man, sec = axioms_run
    c = man.check("weyl")
    assert report(1, "Weyl scaling", c.passed, f"max relative discrepancy {c.value:.3g} over 100 bumps",
                  sec, 120)


def test_criterion_02_locality(axioms_run):
    man, sec = axioms_run
    c = man.check("locality")
    n = man.results["locality_pairs"]
    assert report(2, "locality", c.passed and n >= 100, f"{int(c.value)} mismatches in {n} pairs", sec, 60)


def test_criterion_03_metric_axioms(axioms_run):
    man, sec = axioms_run
    sym, tri, rel = man.check("symmetry"), man.check("triangle"), man.check("relaxation")
    n = man.results["triples"]
    ok = sym.passed and tri.passed and rel.passed and man.check("identity").passed and n >= 1000
    detail = (f"asymmetry {sym.value:.2g}, {int(tri.value)} triangle failures in {n} triples, "
              f"{int(rel.value)} relaxation violations")
    assert report(3, "metric axioms", ok, detail, sec, 60)


@pytest.mark.slow
def test_criterion_04_gff_covariance(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="axioms", side_count=256, mesh=1 / 32, epsilon=1 / 16,
                     seeds=[0], pairs=1, triples=1, covariance_seeds=2000, norm_constant=1.0)
    c = man.check("covariance")
    assert report(4, "GFF covariance", c.passed, f"max |error| {c.value:.4f} over 10 pairs, 2000 seeds", sec, 600)


def test_criterion_05_independent_set_bound(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="bounds", exhaustive_vertices=6, random_graphs=10_000,
                     random_graph_vertices=12, thresholds=[1])
    ex, rnd = man.check("independent-set-exhaustive"), man.check("independent-set-random")
    detail = (f"{int(ex.value)} violations in {man.results['exhaustive_graphs']} connected graphs on <= 6 vertices, "
              f"{int(rnd.value)} in 10000 random graphs on <= 12")
    assert report(5, "independent-set bound", ex.passed and rnd.passed, detail, sec, 300)


def test_criterion_06_overlap_reduction(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="bounds", families=1000, thresholds=[1])
    c = man.check("reduction-edge-bound")
    detail = f"{int(c.value)} violations in {man.results['families_applicable']} of 1000 families with E(G0) <= 2V"
    assert report(6, "overlap reduction", c.passed, detail, sec, 60)


def test_criterion_07_m_scan(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="bounds", thresholds=list(range(1, 13)))
    mono, stable = man.check("m-scan-monotone"), man.check("m-scan-precision-stable")
    scans = man.results["scans"]
    flags = man.results["quote_flags"]
    # every quoted value either agrees or is flagged; never silent
    accounted = all(s["agrees_with_quote"] or any(f.startswith(f"threshold {t}:") for f in flags)
                    for t, s in scans.items() if s["quoted"] is not None)
    parts = []
    for t in ("5", "10"):
        s = scans[t]
        tag = "agrees" if s["agrees_with_quote"] else "FLAGGED"
        parts.append(f"threshold {t}: scan {s['largest_m']} vs quoted {s['quoted']} ({tag})")
    assert report(7, "m-scan", mono.passed and stable.passed and accounted,
                  "monotone, precision-stable; " + "; ".join(parts), sec, 1)


@pytest.fixture(scope="module")
def census_run(tmp_path_factory):
    return timed(tmp_path_factory, experiment="network-census", side_count=512, gamma=GAMMA_PURE_GRAVITY,
                 seeds=list(range(20)), pairs=10)


@pytest.mark.slow
def test_criterion_08_uniqueness_census(census_run):
    man, sec = census_run
    u = man.check("unique-fraction")
    ok = u.passed and man.check("geodesic-invariants").passed and man.results["pairs"] == 200
    detail = f"unique fraction {u.value:.3f} over {man.results['pairs']} pairs, k histogram {man.results['k_histogram']}"
    assert report(8, "uniqueness census", ok, detail, sec, 1800)


@pytest.mark.slow
def test_criterion_09_network_census(census_run):
    man, sec = census_run
    c = man.check("small-class-fraction")
    detail = (f"{c.value:.3f} of {man.results['multi_pairs']} multi-geodesic pairs in n, m <= 3; "
              f"classes {man.results['nm_histogram_multi']}; {man.results['sn_anomalies']} anomalies logged")
    assert report(9, "network census", c.passed, detail, sec, 1800)


@pytest.mark.slow
def test_criterion_10_confluence(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="confluence-census", side_count=512, seeds=list(range(10)),
                     pairs=5)
    frac, reentry = man.check("arc-violation-fraction"), man.check("no-reentry")
    ok = frac.passed and reentry.passed and man.results["samples"] == 50
    detail = (f"{man.results['violations']} violations in {man.results['arcs']} arcs ({frac.value:.2%}) "
              f"over {man.results['samples']} (t, s) samples, {int(reentry.value)} re-entries")
    assert report(10, "confluence", ok, detail, sec, 1200)


@pytest.mark.slow
def test_criterion_11_ball_volume_exponent(tmp_path_factory):
    small, sec_small = timed(tmp_path_factory, experiment="dimension", side_count=512, gamma=0.05,
                             d_gamma=watabiki_estimate(0.05), seeds=list(range(3)), slope_min=1.85, slope_max=2.15)
    big, sec_big = timed(tmp_path_factory, experiment="dimension", side_count=1024, gamma=GAMMA_PURE_GRAVITY,
                         seeds=list(range(10)), slope_min=2.5)
    ok = small.check("volume-slope").passed and big.check("volume-slope").passed
    detail = (f"gamma 0.05 slope {small.results['slope']:.3f} (target 2.0 +- 0.15); "
              f"gamma sqrt(8/3) slope {big.results['slope']:.3f} +- {big.results['stderr']:.3f} (target > 2.5)")
    assert report(11, "ball-volume exponent", ok, detail, sec_small + sec_big, 2700)


def test_criterion_12_perturbation(tmp_path_factory):
    man, sec = timed(tmp_path_factory, experiment="perturbation", side_count=128, seeds=list(range(4)), pairs=5)
    c = man.check("perturbation-violations")
    roles = man.results["roles"]
    ok = c.passed and man.results["instances"] == 20 and roles.get("hitter", 0) >= 20 and roles.get("avoider", 0) > 0
    detail = f"{int(c.value)} violations over {man.results['instances']} instances, roles {roles}"
    assert report(12, "perturbation", ok, detail, sec, 120)
