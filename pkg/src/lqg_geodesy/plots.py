"""Static SVG plots for run manifests.

Output is byte-stable: fixed SVG id salt, no date metadata, Agg backend.
"""
from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import RunManifest  # noqa: E402
from .io import read_csv  # noqa: E402
from .measure_dim import fit_loglog  # noqa: E402

_RC = {"svg.hashsalt": "lqg-geodesy", "svg.fonttype": "path", "path.simplify": False}


def _save(fig, path: Path) -> str:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return str(path)


def loglog_plot(path: Path, scales, values, slope: float, window, title: str) -> str:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.set_xscale("log")
        ax.set_yscale("log")
        if len(scales):
            ax.plot(scales, values, "o", color="tab:blue")
            lo, hi = window
            x = np.asarray(scales[lo:hi], float)
            y = np.asarray(values[lo:hi], float)
            if x.size >= 2:
                icpt = float(np.mean(np.log(y) - slope * np.log(x)))
                ax.plot(x, np.exp(icpt) * x ** slope, "-", color="tab:red")
        ax.set_title(title)
        ax.set_xlabel("radius")
        ax.set_ylabel("ball mass")
        ax.text(0.05, 0.92, f"slope {slope:.4f}", transform=ax.transAxes)
    return _save(fig, path)


def histogram_plot(path: Path, labels: List[str], counts: List[int], title: str) -> str:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        if labels:
            ax.bar(range(len(labels)), counts, color="tab:blue")
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels)
        ax.set_title(title)
        ax.set_ylabel("pairs")
    return _save(fig, path)


def emit_plots(manifest: RunManifest) -> List[str]:
    """Write the SVGs that fit the manifest's experiment; returns their paths."""
    exp = manifest.config["experiment"]
    out: List[str] = []
    if exp == "dimension":
        for f in sorted(p for p in manifest.files if p.endswith(".csv") and "volume_seed" in p):
            rows = read_csv(f)
            scales = [float(r["scale"]) for r in rows]
            values = [float(r["value"]) for r in rows]
            if len(scales) >= 2:
                slope, _, window = fit_loglog(scales, values)
            else:
                slope, window = 0.0, (0, len(scales))
            out.append(loglog_plot(Path(f).with_suffix(".svg"), scales, values, slope, window,
                                   Path(f).stem.split("_")[-1]))
    elif exp in ("network-census", "multiplicity-census"):
        key = "nm_histogram" if exp == "network-census" else "k_histogram"
        hist = manifest.results.get(key, {})
        labels = sorted(hist)
        out.append(histogram_plot(manifest.out_path(f"{key}.svg"), labels, [hist[k] for k in labels],
                                  "(n, m) classes" if key == "nm_histogram" else "multiplicity"))
    return out
