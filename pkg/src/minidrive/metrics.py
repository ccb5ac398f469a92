"""Open- and closed-loop evaluation metrics and the report table.

Displacement metrics default to mean Euclidean distance in meters;
``squared=True`` switches to literal mean squared error.  Horizons are
{0.5, 1, 2, 3, 4} s, i.e. frames {5, 10, 20, 30, 40} at 0.1 s.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError

HORIZONS = (0.5, 1.0, 2.0, 3.0, 4.0)
FRAME_DT = 0.1

OPEN_LOOP_METRICS = ("ADE", "FDE", "FDR", "ADR")
CLOSED_LOOP_METRICS = ("L2", "CR", "OR")


def horizon_frames(horizon: float) -> int:
    n = horizon / FRAME_DT
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise DomainError(f"horizon {horizon} is not a positive multiple of {FRAME_DT}")
    return int(round(n))


def ade_fde(pred: np.ndarray, ref: np.ndarray, h_frames: int, squared: bool = False):
    """Average and final displacement error over the first h_frames steps."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if h_frames > pred.shape[0] or h_frames > ref.shape[0]:
        raise DomainError(f"horizon {h_frames} exceeds sequence length")
    d = np.linalg.norm(pred[:h_frames] - ref[:h_frames], axis=1)
    if squared:
        d = d**2
    return float(d.mean()), float(d[h_frames - 1])


def fdr_adr(pred: np.ndarray, ref_polyline: np.ndarray, h_frames: int,
            squared: bool = False):
    """Final and average distance to the nearest reference waypoint."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref_polyline, dtype=float).reshape(-1, 2)
    if ref.shape[0] < 1:
        raise DomainError("reference polyline is empty")
    if h_frames > pred.shape[0]:
        raise DomainError(f"horizon {h_frames} exceeds sequence length")
    diffs = pred[:h_frames, None, :] - ref[None, :, :]
    d = np.sqrt((diffs**2).sum(axis=2)).min(axis=1)
    if squared:
        d = d**2
    return float(d[h_frames - 1]), float(d.mean())


def closed_loop_metrics(traces, references, horizon: float, squared: bool = False):
    """(L2, CR, OR) over a set of simulation traces.

    ``references`` are the logged ego positions per scene; L2 averages the
    per-frame displacement over frames 1..horizon, CR/OR count scenes with
    at least one collision/off-road event within the horizon.
    """
    if not traces:
        raise DomainError("empty trace set")
    h = horizon_frames(horizon)
    l2_scenes, n_coll, n_off = [], 0, 0
    for trace, ref in zip(traces, references):
        pos = trace.executed_positions()
        if pos.shape[0] <= h:
            raise DomainError(
                f"trace {trace.scenario_id} shorter than horizon {horizon}"
            )
        ref = np.asarray(ref, dtype=float)
        d = np.linalg.norm(pos[1 : h + 1] - ref[1 : h + 1], axis=1)
        l2_scenes.append(float((d**2).mean() if squared else d.mean()))
        events = [set(f.events) for f in trace.frames[: h + 1]]
        if any("collision" in e for e in events):
            n_coll += 1
        if any("offroad" in e for e in events):
            n_off += 1
    n = len(l2_scenes)
    return float(np.mean(l2_scenes)), n_coll / n, n_off / n


def distance_to_polyline(point, polyline: np.ndarray) -> float:
    """Distance from a point to a polyline (segments, not just vertices)."""
    return float(
        kernels.polyline_min_dist(
            float(point[0]), float(point[1]),
            np.ascontiguousarray(polyline, dtype=float),
        )
    )


@dataclass
class MetricReport:
    """Metric x horizon table plus the scene count."""

    values: dict = field(default_factory=dict)  # metric -> {horizon -> value}
    scene_count: int = 0
    squared: bool = False

    def set(self, metric: str, horizon: float, value: float):
        self.values.setdefault(metric, {})[horizon] = value

    def get(self, metric: str, horizon: float) -> float:
        return self.values[metric][horizon]

    def to_json_dict(self) -> dict:
        return {
            "scene_count": self.scene_count,
            "squared": self.squared,
            "horizons": list(HORIZONS),
            "metrics": {
                m: {f"{h:g}": v for h, v in sorted(per.items())}
                for m, per in sorted(self.values.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric"] + [f"@{h:g}s" for h in HORIZONS])
            for metric in sorted(self.values):
                per = self.values[metric]
                writer.writerow(
                    [metric] + [f"{per[h]:.6f}" if h in per else "" for h in HORIZONS]
                )
