"""Run configuration and run manifest."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from .metric import GAMMA_PURE_GRAVITY

EXPERIMENTS = (
    "axioms",
    "multiplicity-census",
    "network-census",
    "confluence-census",
    "dimension",
    "bounds",
    "perturbation",
)

EXIT_OK = 0
EXIT_SOFT = 2
EXIT_HARD = 3


@dataclass
class RunConfig:
    """Everything a run depends on. ``None`` means "derive the default"."""

    experiment: str = "bounds"
    gamma: float = GAMMA_PURE_GRAVITY
    d_gamma: Optional[float] = None
    side_count: int = 128
    mesh: Optional[float] = None              # default 4 / side_count
    epsilon: Optional[float] = None           # default 4 * mesh
    measure_scale: Optional[float] = None     # default 4 * mesh
    delta: Optional[float] = None             # default 2 * median edge cost
    rho: Optional[float] = None               # default 5 * median vertex weight
    norm_constant: Optional[float] = None     # default: calibrated
    seeds: List[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    pairs: int = 10                           # pairs / bumps / (t, s) samples per seed
    triples: int = 200                        # metric-axiom triples per seed
    covariance_seeds: int = 0                 # axioms: GFF covariance check over this many seeds
    workers: int = 1
    thresholds: List[int] = field(default_factory=lambda: list(range(1, 13)))
    exhaustive_vertices: int = 0              # bounds: all connected graphs up to this size
    random_graphs: int = 0                    # bounds: random connected graphs
    random_graph_vertices: int = 12
    families: int = 0                         # bounds: random path/mark families
    radii: int = 10                           # dimension: number of radii
    slope_min: Optional[float] = None         # dimension: soft lower bound on the mean slope
    slope_max: Optional[float] = None
    unique_fraction: float = 0.99             # census soft target
    small_class_fraction: float = 0.90        # census soft target
    violation_fraction: float = 0.05          # confluence soft target
    plots: bool = True

    def __post_init__(self):
        self.validate()

    # -- derived values
    @property
    def resolved_mesh(self) -> float:
        return self.mesh if self.mesh is not None else 4.0 / self.side_count

    @property
    def resolved_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else 4.0 * self.resolved_mesh

    @property
    def resolved_measure_scale(self) -> float:
        return self.measure_scale if self.measure_scale is not None else 4.0 * self.resolved_mesh

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not 0 < self.gamma < 2:
            raise ValueError("gamma must lie in (0, 2)")
        if self.d_gamma is None and abs(self.gamma - GAMMA_PURE_GRAVITY) > 1e-9 and self.needs_field:
            raise ValueError("d_gamma must be supplied unless gamma = sqrt(8/3)")
        for name in ("d_gamma", "mesh", "epsilon", "measure_scale", "delta", "rho", "norm_constant"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        for name in ("side_count", "pairs", "triples", "workers", "radii", "random_graph_vertices"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if int(self.covariance_seeds) < 0 or self.covariance_seeds == 1:
            raise ValueError("covariance_seeds must be 0 or at least 2")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if any(int(s) < 0 for s in self.seeds):
            raise ValueError("seeds must be nonnegative")
        if any(int(t) < 1 for t in self.thresholds):
            raise ValueError("thresholds must be positive")

    @property
    def needs_field(self) -> bool:
        return self.experiment != "bounds"

    # -- serialisation
    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Load a JSON config; non-``None`` overrides (command-line flags) win."""
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    @property
    def run_id(self) -> str:
        snap = {k: v for k, v in self.to_dict().items() if k not in ("out_dir", "workers", "plots")}
        digest = hashlib.sha256(json.dumps(snap, sort_keys=True).encode()).hexdigest()[:10]
        return f"{self.experiment}-{digest}"


@dataclass
class Check:
    name: str
    value: float
    target: str
    passed: bool
    hard: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.hard else "MISS")
        return f"{tag} {self.name}: {self.value:.6g} (target {self.target})"


@dataclass
class RunManifest:
    run_id: str
    config: Dict[str, Any]
    version: str
    seed_status: Dict[int, str] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    results: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if any(not c.passed and c.hard for c in self.checks):
            return EXIT_HARD
        if any(not c.passed for c in self.checks):
            return EXIT_SOFT
        return EXIT_OK

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["seed_status"] = {str(k): v for k, v in sorted(self.seed_status.items())}
        d["exit_code"] = self.exit_code
        return d

    def out_path(self, name: str) -> Path:
        return Path(self.config["out_dir"]) / f"{self.run_id}_{name}"
