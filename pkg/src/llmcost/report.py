"""Output writers: delimited frontier records, run manifests, figures.

CSV column order and units are fixed (seconds and USD throughout) so reruns
with identical inputs are byte-identical.  Figures are rendered with
matplotlib on log-log axes, one line per frontier; SVG output is made
deterministic by pinning the hash salt and dropping the date metadata.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "llmcost"

import matplotlib.pyplot as plt

from . import __version__
from .optimizer import ParetoPoint

CSV_COLUMNS = [
    "tokens_per_second",
    "usd_per_million_tokens",
    "n_gpu",
    "n_nodes",
    "tp",
    "pp",
    "ep",
    "batch",
    "gamma",
    "memory_time_s",
    "arithmetic_time_s",
    "collective_latency_time_s",
    "kernel_launch_time_s",
    "network_bandwidth_time_s",
    "pp_boundary_time_s",
    "token_latency_s",
    "gpu_seconds_per_token",
]

# Modeling choices that shape headline numbers.  Emitted in every manifest so
# a reader comparing against external figures can see which assumption drives
# any gap.
MODEL_DECISIONS = {
    "collective_participants": "sqrt(n_gpu) ranks across sqrt(n_nodes) nodes per all-reduce",
    "intra_node_read_coefficient": "sqrt(n_nodes) (consistent with sqrt participant counts)",
    "kernel_launch_time": "serialized per sequential matmul, never overlapped",
    "network_overlap": "communication never overlapped with memory or arithmetic",
    "sequential_collectives_per_layer": "4 (2 with parallel attention blocks)",
    "embedding_reads": "embedding table charged to parameter reads, excluded from collectives",
    "expert_routing": "uniform independent routing; no shared-expert or correlated placement",
    "expert_all_to_all_latency": "all-reduce latency fit reused over min(ep, active experts) ranks",
    "pipeline_weight_reads": "per-stage weight reads sit on the token critical path",
    "verification_pass": "gamma scales arithmetic and activation I/O; single weight read; "
                         "collective schedule and volume unchanged",
    "preference_exponent_default": 3.0,
}


def point_record(point: ParetoPoint) -> Dict[str, object]:
    bd = point.breakdown.to_record()
    return {
        "tokens_per_second": point.tokens_per_second,
        "usd_per_million_tokens": point.cost_per_million_tokens,
        "n_gpu": point.plan.n_gpu,
        "n_nodes": point.plan.n_nodes,
        "tp": point.plan.tp_degree,
        "pp": point.plan.pp_degree,
        "ep": point.plan.ep_degree,
        "batch": point.batch_size,
        "gamma": point.gamma if point.gamma is not None else "",
        "memory_time_s": bd["memory_time_s"],
        "arithmetic_time_s": bd["arithmetic_time_s"],
        "collective_latency_time_s": bd["collective_latency_time_s"],
        "kernel_launch_time_s": bd["kernel_launch_time_s"],
        "network_bandwidth_time_s": bd["network_bandwidth_time_s"],
        "pp_boundary_time_s": bd["pp_boundary_time_s"],
        "token_latency_s": bd["token_latency_s"],
        "gpu_seconds_per_token": bd["gpu_seconds_per_token"],
    }


def write_frontier_csv(path, points: Sequence[ParetoPoint]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for point in points:
            writer.writerow(point_record(point))


@dataclass
class RunManifest:
    """What a run consumed and produced, for reproducibility checks."""

    command: str
    inputs: Dict[str, str]            # resolved spec name -> sha256 of its serialized form
    grid: Optional[Dict[str, list]]
    outputs: List[str]
    settings: Dict[str, object] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    model_decisions: Dict[str, object] = field(default_factory=lambda: dict(MODEL_DECISIONS))
    tool_version: str = __version__

    def to_dict(self) -> Dict[str, object]:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "grid": self.grid,
            "outputs": sorted(self.outputs),
            "settings": self.settings,
            "notes": self.notes,
            "model_decisions": self.model_decisions,
            "tool_version": self.tool_version,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def spec_hash(spec) -> str:
    canonical = json.dumps(spec.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_frontier_json(path, manifest: RunManifest, named_points: Dict[str, Sequence[ParetoPoint]]) -> None:
    payload = {
        "manifest": manifest.to_dict(),
        "frontiers": {
            name: [point_record(p) for p in pts] for name, pts in named_points.items()
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def plot_frontiers(
    path,
    named_points: Dict[str, Sequence[ParetoPoint]],
    marked: Optional[Dict[str, ParetoPoint]] = None,
    title: Optional[str] = None,
) -> None:
    """Log-log speed/cost chart, one line per named frontier."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for name in sorted(named_points):
        pts = named_points[name]
        if not pts:
            continue
        xs = [p.tokens_per_second for p in pts]
        ys = [p.cost_per_million_tokens for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=name)
    if marked:
        for name in sorted(marked):
            point = marked[name]
            ax.plot([point.tokens_per_second], [point.cost_per_million_tokens],
                    marker="*", markersize=14, linestyle="none",
                    label=f"{name} (preferred)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("tokens per second per request")
    ax.set_ylabel("USD per million tokens")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=_figure_metadata(path))
    plt.close(fig)


def _figure_metadata(path) -> Dict[str, object]:
    # Strip volatile metadata so identical runs produce identical bytes.
    suffix = Path(path).suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": None}
    return {}
