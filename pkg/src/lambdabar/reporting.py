"""Delimited output, JSON records, run manifests, and figure rendering.

Every table the command-line front end emits can be accompanied by a
rendered figure (PNG next to the data file, same stem); the data files stay
byte-identical across reruns with the same configuration and seed, and the
manifest records a sha256 digest per emitted file.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

__all__ = [
    "format_float",
    "write_csv",
    "write_json",
    "RunManifest",
    "render_curve_figure",
    "render_staircase_figure",
    "render_trace_figure",
]


def format_float(x) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: str, header: list[str], rows) -> str:
    """Write rows (sequences or dicts keyed by header) as CSV; returns path."""
    lines = [",".join(header)]
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(h) for h in header]
        lines.append(",".join(format_float(v) if not isinstance(v, str) else v
                              for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str, payload: dict) -> str:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record written alongside every CLI output."""

    command: str
    config: dict
    started: float = field(default_factory=time.time)
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def add_file(self, path: str, kind: str = "data") -> None:
        self.files.append({
            "path": os.path.basename(path),
            "kind": kind,
            "sha256": sha256_of(path),
        })

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append({"name": name, "pass": bool(passed),
                            "detail": detail})

    @property
    def all_passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def write(self, path: str) -> str:
        payload = {
            "command": self.command,
            "config": _jsonable(self.config),
            "version": __version__,
            "wall_time_s": time.time() - self.started,
            "checks": self.checks,
            "files": self.files,
        }
        return write_json(path, payload)


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=150, bbox_inches="tight",
                metadata={"Software": f"lambdabar {__version__}"})
    plt.close(fig)
    return path


def render_curve_figure(path: str, x, y, xlabel: str, ylabel: str,
                        title: str = "", hline: float = None,
                        hline_label: str = "") -> str:
    """Single curve with optional reference level (ceilings, sharp values)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o-", ms=4)
    if hline is not None:
        ax.axhline(hline, color="crimson", ls="--", lw=1,
                   label=hline_label or None)
        if hline_label:
            ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_staircase_figure(path: str, eigenvalues, area: float,
                            title: str = "") -> str:
    """Counting function of a spectrum against its Weyl slope."""
    ev = np.asarray(eigenvalues)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(ev, np.arange(1, ev.size + 1), where="post", label="N(lambda)")
    lam = np.linspace(0, float(ev[-1]), 64)
    ax.plot(lam, area * lam / (4 * np.pi), "--", color="crimson",
            label="area/(4 pi) slope")
    ax.set_xlabel("lambda")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_trace_figure(path: str, trace, ceiling: float = None,
                        title: str = "") -> str:
    """Optimizer trace: per-evaluation value and the best-so-far envelope."""
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(trace[:, 0], trace[:, 1], ".", ms=2, alpha=0.4, label="iterate")
    ax.plot(trace[:, 0], trace[:, 2], "-", lw=1.5, label="best so far")
    if ceiling is not None:
        ax.axhline(ceiling, color="crimson", ls="--", lw=1, label="ceiling")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("lambda1 * area")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _save(fig, path)
