"""Quantitative evaluation: overlap rate vs ground truth, stage runtimes,
and waypoint deviation from an analytic reference curve."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .config import PipelineConfig
from .descriptor import GrooveSet, VariationMap, denoise_groove, extract_groove
from .pipeline import STAGES, PipelineResult, run_pipeline
from .trajectory import Trajectory


@dataclass(frozen=True)
class LabeledCloud:
    """Cloud plus ground-truth groove indices (sorted, same index space)."""

    cloud: PointCloud
    truth: np.ndarray

    def __post_init__(self):
        t = np.unique(np.asarray(self.truth, dtype=np.int64))
        if t.size and (t[0] < 0 or t[-1] >= len(self.cloud)):
            raise ValueError("truth indices out of range for the cloud")
        object.__setattr__(self, "truth", t)


def _as_indices(obj) -> np.ndarray:
    if isinstance(obj, GrooveSet):
        return obj.indices
    return np.unique(np.asarray(obj, dtype=np.int64))


def overlap_counts(detected, truth) -> tuple[float, int, int, int, bool]:
    """Intersection-over-union of two index sets, with the counts.

    Both sets empty is perfect vacuous agreement: rate 1.0 with a flag.
    """
    d = _as_indices(detected)
    t = _as_indices(truth)
    n_overlap = int(np.intersect1d(d, t, assume_unique=True).size)
    union = d.size + t.size - n_overlap
    if union == 0:
        return 1.0, 0, 0, 0, True
    return n_overlap / union, int(d.size), int(t.size), n_overlap, False


def overlap_rate(detected, truth) -> float:
    """3D overlapping rate: n_overlap / (n_d + n_gt - n_overlap)."""
    return overlap_counts(detected, truth)[0]


@dataclass(frozen=True)
class DeviationStats:
    mean: float
    max: float
    distances: np.ndarray


def trajectory_deviation(traj: Trajectory, reference) -> DeviationStats:
    """Closest distance of each waypoint to the reference curve (any object
    with a ``distances(points)`` method, e.g. synthgen curves)."""
    d = np.asarray(reference.distances(traj.positions()), dtype=np.float64)
    return DeviationStats(float(d.mean()), float(d.max()), d)


@dataclass
class EvalReport:
    """Serializable evaluation summary; absent metrics stay None."""

    overlap: float | None = None
    n_detected: int | None = None
    n_truth: int | None = None
    n_overlap: int | None = None
    vacuous: bool = False
    stage_seconds: dict[str, float] | None = None
    run_totals: list[float] | None = None
    total_seconds: float | None = None
    deviation_mean: float | None = None
    deviation_max: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key in (
            "overlap",
            "n_detected",
            "n_truth",
            "n_overlap",
            "vacuous",
            "stage_seconds",
            "run_totals",
            "total_seconds",
            "deviation_mean",
            "deviation_max",
        ):
            value = getattr(self, key)
            if value is not None and value is not False:
                out[key] = value
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    def csv_row(self, name: str, n_points: int | None = None) -> str:
        """One table row: cloud name, point count, overlap rate, seconds."""
        nu = "" if n_points is None else str(int(n_points))
        lam = "" if self.overlap is None else f"{self.overlap:.6f}"
        sec = "" if self.total_seconds is None else f"{self.total_seconds:.3f}"
        return f"{name},{nu},{lam},{sec}"


def evaluate_detection(detected, truth) -> EvalReport:
    lam, nd, ngt, nov, vac = overlap_counts(detected, truth)
    return EvalReport(overlap=lam, n_detected=nd, n_truth=ngt, n_overlap=nov, vacuous=vac)


def time_pipeline(
    cloud: PointCloud, config: PipelineConfig = PipelineConfig(), runs: int = 1
) -> tuple[EvalReport, PipelineResult]:
    """Run the full pipeline ``runs`` times and report per-stage wall-clock
    means plus each run's total. The last run's result is returned for
    artifact export."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    totals = []
    sums = {stage: 0.0 for stage in STAGES}
    result = None
    for _ in range(runs):
        t0 = time.perf_counter()
        result = run_pipeline(cloud, config)
        totals.append(time.perf_counter() - t0)
        for stage in STAGES:
            sums[stage] += result.timings[stage]
    report = EvalReport(
        stage_seconds={stage: sums[stage] / runs for stage in STAGES},
        run_totals=totals,
        total_seconds=sum(totals) / runs,
    )
    return report, result


def calibrate_threshold(
    vmap: VariationMap,
    truth,
    cloud: PointCloud,
    denoise_min_cluster: int = 0,
    denoise_radius: float | None = None,
    candidates: int = 96,
) -> float:
    """Descriptor threshold maximizing the overlap rate against a labeled
    calibration cloud. Mirrors how a fixed production threshold would be
    tuned once on a reference piece, then applied unchanged."""
    d = vmap.descriptor
    positive = d[d > 0]
    if positive.size == 0:
        raise ValueError("descriptor map has no positive values to calibrate on")
    qs = np.quantile(positive, np.linspace(0.01, 0.999, candidates))
    best_t = None
    best_lam = -1.0
    for t in np.unique(qs):
        if t <= 0:
            continue
        groove = extract_groove(vmap, float(t))
        if denoise_min_cluster and len(groove):
            groove = denoise_groove(groove, cloud, denoise_min_cluster, denoise_radius)
        lam = overlap_rate(groove, truth)
        if lam > best_lam:
            best_lam = lam
            best_t = float(t)
    return best_t
