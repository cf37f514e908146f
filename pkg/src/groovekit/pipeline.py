"""End-to-end groove detection and trajectory generation with stage timing."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .cloud import PointCloud, build_index, median_spacing
from .config import PipelineConfig
from .descriptor import (
    GrooveSet,
    VariationMap,
    denoise_groove,
    extract_groove,
    otsu_threshold,
    variation_map,
)
from .preprocess import Diagnostics, MlsParams, NormalParams, estimate_normals, mls_smooth
from .trajectory import GdParams, Trajectory, generate_trajectory

STAGES = ("smooth", "normals", "variation_map", "extract", "trajectory")


@dataclass
class PipelineResult:
    smoothed: PointCloud
    oriented: PointCloud  # smoothed cloud with estimated normals
    vmap: VariationMap
    threshold: float
    groove_raw: GrooveSet
    groove: GrooveSet
    trajectory: Trajectory | None
    timings: dict[str, float]
    diagnostics: Diagnostics
    spacing: float


def run_pipeline(
    cloud: PointCloud,
    config: PipelineConfig = PipelineConfig(),
    with_trajectory: bool = True,
) -> PipelineResult:
    """Smooth -> normals -> variation map -> threshold + denoise -> trajectory.

    An empty groove is not an error here: the result carries an empty set
    and no trajectory, and the caller decides severity.
    """
    diagnostics = Diagnostics()
    timings: dict[str, float] = {}

    # spacing estimation and radius resolution are billed to the smoothing
    # stage so the per-stage times account for the whole run
    t0 = time.perf_counter()
    spacing = median_spacing(cloud)
    cfg = config.with_resolved_radii(spacing)
    if cfg.mls_enabled:
        smoothed = mls_smooth(
            cloud, MlsParams(cfg.mls_radius, cfg.mls_order), diagnostics, threads=cfg.threads
        )
    else:
        smoothed = cloud
    timings["smooth"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    index = build_index(smoothed)
    oriented = estimate_normals(
        smoothed, NormalParams(cfg.normal_radius), diagnostics, threads=cfg.threads, index=index
    )
    timings["normals"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    vmap = variation_map(oriented, cfg.gfh_radius, threads=cfg.threads, index=index)
    timings["variation_map"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.threshold_mode == "fixed":
        threshold = cfg.threshold_value
    else:
        threshold = otsu_threshold(vmap.descriptor)
    groove_raw = extract_groove(vmap, threshold)
    if cfg.denoise_enabled and len(groove_raw):
        groove = denoise_groove(
            groove_raw, oriented, cfg.denoise_min_cluster, cfg.denoise_radius
        )
    else:
        groove = groove_raw
    timings["extract"] = time.perf_counter() - t0

    trajectory: Trajectory | None = None
    t0 = time.perf_counter()
    if with_trajectory and len(groove) >= 2:
        trajectory = generate_trajectory(
            oriented,
            groove,
            n_segments=cfg.segments,
            gd=GdParams(cfg.gd_tolerance, cfg.gd_max_iters),
            reverse=cfg.reverse,
            threads=cfg.threads,
        )
    timings["trajectory"] = time.perf_counter() - t0

    return PipelineResult(
        smoothed=smoothed,
        oriented=oriented,
        vmap=vmap,
        threshold=float(threshold),
        groove_raw=groove_raw,
        groove=groove,
        trajectory=trajectory,
        timings=timings,
        diagnostics=diagnostics,
        spacing=spacing,
    )
