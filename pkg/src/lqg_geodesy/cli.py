"""``lqg-geodesy`` command line.

Precedence: built-in defaults < ``--config FILE`` < explicit flags.
Exit status: 0 when every check passes, 2 when only statistical checks miss,
3 on a hard invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import EXIT_HARD, EXIT_OK, RunConfig, RunManifest

_SUBCOMMANDS = {
    "census": "network-census",
    "confluence": "confluence-census",
    "dimension": "dimension",
    "bound": "bounds",
    "axioms": "axioms",
    "perturb": "perturbation",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON run configuration")
    p.add_argument("--seed", type=int, nargs="+", metavar="N", help="seed(s)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--gamma", type=float)
    p.add_argument("--dgamma", type=float, help="d_gamma (needed unless gamma = sqrt(8/3))")
    p.add_argument("--eps", type=float, help="mollification scale (default 4 * mesh)")
    p.add_argument("--grid", type=int, help="vertices per side (power of two)")
    p.add_argument("--mesh", type=float, help="lattice spacing (default 4 / grid)")
    p.add_argument("--workers", type=int)
    p.add_argument("--pairs", type=int, help="pairs, bumps or radius samples per seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqg-geodesy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sample", help="sample a field and write a .fgrid snapshot")
    _common(s)
    s = sub.add_parser("metric", help="distances from one vertex, written as .dfield")
    _common(s)
    s.add_argument("--source", type=float, nargs=2, metavar=("X", "Y"), default=(0.0, 0.0),
                   help="plane coordinates of the source (default origin)")
    s.add_argument("--leftmost", action="store_true", help="leftmost tie-break for the predecessor tree")
    s = sub.add_parser("census", help="multiplicity and (n, m) network census")
    _common(s)
    s.add_argument("--multiplicity-only", action="store_true")
    for name in ("confluence", "dimension", "axioms", "perturb"):
        _common(sub.add_parser(name, help=f"run the {_SUBCOMMANDS[name]} experiment"))
    s = sub.add_parser("bound", help="scan the family-size bound and compare with the quoted values")
    _common(s)
    s.add_argument("--threshold", type=int, nargs="+", metavar="N")
    return parser


def config_from_args(args: argparse.Namespace, experiment: str) -> RunConfig:
    flags: Dict[str, Any] = {
        "experiment": experiment,
        "seeds": args.seed,
        "out_dir": args.out,
        "gamma": args.gamma,
        "d_gamma": args.dgamma,
        "epsilon": args.eps,
        "side_count": args.grid,
        "mesh": args.mesh,
        "workers": args.workers,
        "pairs": args.pairs,
        "thresholds": getattr(args, "threshold", None),
    }
    if args.config:
        return RunConfig.from_file(args.config, flags)
    return RunConfig.from_dict({k: v for k, v in flags.items() if v is not None})


def _report(man: RunManifest, out) -> None:
    for c in man.checks:
        print(c.line(), file=out)
    print(f"manifest: {man.out_path('manifest.json')}", file=out)


def _bound_table(man: RunManifest, out) -> None:
    print("threshold  largest_m  first_failing  quoted  note", file=out)
    for t, s in man.results["scans"].items():
        quoted = "-" if s["quoted"] is None else str(s["quoted"])
        note = "" if s["quoted"] is None else ("agrees" if s["agrees_with_quote"] else "DIFFERS from quoted value")
        print(f"{t:>9}  {s['largest_m']:>9}  {str(s['first_failing_m']):>13}  {quoted:>6}  {note}", file=out)


def _sample(args, cfg: RunConfig, out) -> int:
    from .field import GridSpec, mollify, sample_gff
    from .io import write_fgrid

    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    spec = GridSpec(cfg.side_count, cfg.resolved_mesh)
    for seed in cfg.seeds:
        f = sample_gff(spec, seed)
        if args.eps is not None:
            f = mollify(f, cfg.resolved_epsilon)
        print(write_fgrid(Path(cfg.out_dir) / f"field_seed{seed}.fgrid", f), file=out)
    return EXIT_OK


def _metric(args, cfg: RunConfig, out) -> int:
    from .field import GridSpec, mollify, sample_gff
    from .io import write_dfield
    from .metric import MetricParams, build_weights, relaxation_violations, sssp

    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    spec = GridSpec(cfg.side_count, cfg.resolved_mesh)
    params = MetricParams(cfg.gamma, cfg.d_gamma, cfg.norm_constant or 1.0)
    src = spec.vertex_of(tuple(args.source))
    code = EXIT_OK
    for seed in cfg.seeds:
        w = build_weights(mollify(sample_gff(spec, seed), cfg.resolved_epsilon), params)
        mf = sssp(w, src, tie_break="leftmost" if args.leftmost else "smallest-id")
        if relaxation_violations(w, mf):
            code = EXIT_HARD
        extra = {"seed": seed, "gamma": cfg.gamma, "d_gamma": params.d_gamma, "epsilon": cfg.resolved_epsilon,
                 "mesh": spec.mesh, "norm_constant": params.norm_constant}
        print(write_dfield(Path(cfg.out_dir) / f"distances_seed{seed}.dfield", mf, extra), file=out)
    return code


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    cmd = args.command
    if cmd == "census" and args.multiplicity_only:
        experiment = "multiplicity-census"
    else:
        experiment = _SUBCOMMANDS.get(cmd, "axioms")
    try:
        cfg = config_from_args(args, experiment)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_HARD
    if cmd == "sample":
        return _sample(args, cfg, out)
    if cmd == "metric":
        return _metric(args, cfg, out)
    from .experiments import run_experiment

    man = run_experiment(cfg)
    if cmd == "bound":
        _bound_table(man, out)
    _report(man, out)
    return man.exit_code


if __name__ == "__main__":
    sys.exit(main())
