"""Cloud smoothing and per-point surface-normal estimation.

Both passes are pure per-point maps over an immutable input cloud: MLS
projects every point onto a locally weighted polynomial fit of its radius
neighborhood, and normal estimation takes the smallest-eigenvector plane
fit oriented toward the sensor viewpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .cloud import PointCloud, SpatialIndex, all_radius_neighbors, build_index

MLS_RADIUS_SPACING_FACTOR = 6.0
NORMAL_RADIUS_SPACING_FACTOR = 4.0


@dataclass(frozen=True)
class MlsParams:
    search_radius: float
    polynomial_order: int = 2

    def __post_init__(self):
        if self.search_radius <= 0:
            raise ValueError(f"search_radius must be positive, got {self.search_radius}")
        if self.polynomial_order not in (1, 2):
            raise ValueError(f"polynomial_order must be 1 or 2, got {self.polynomial_order}")


@dataclass(frozen=True)
class NormalParams:
    search_radius: float
    viewpoint: np.ndarray | None = None  # None: use the cloud's viewpoint

    def __post_init__(self):
        if self.search_radius <= 0:
            raise ValueError(f"search_radius must be positive, got {self.search_radius}")


class Diagnostics:
    """Collector for degenerate-point reports: one (index, reason) per line."""

    def __init__(self):
        self.entries: list[tuple[int, str]] = []

    def add(self, index: int, reason: str) -> None:
        self.entries.append((int(index), reason))

    def extend_from_flags(self, flags: np.ndarray, reason: str) -> None:
        for i in np.flatnonzero(flags):
            self.add(int(i), reason)

    def __len__(self) -> int:
        return len(self.entries)

    def lines(self) -> list[str]:
        return [f"{i} {reason}" for i, reason in self.entries]

    def write(self, path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.lines()))


def mls_smooth(
    cloud: PointCloud,
    params: MlsParams,
    diagnostics: Diagnostics | None = None,
    threads: int = 1,
    index: SpatialIndex | None = None,
) -> PointCloud:
    """Smooth a cloud by MLS projection; same point count and order.

    Points with fewer than 3 neighbors or a degenerate (collinear)
    neighborhood pass through unchanged and are reported in diagnostics.
    Any input normals are dropped: positions move, so they would be stale.
    """
    if index is None:
        index = build_index(cloud)
    indptr, indices = all_radius_neighbors(index, params.search_radius)
    n = len(cloud)
    out = np.empty((n, 3))
    degenerate = np.zeros(n, dtype=np.uint8)
    kernels.run_ranges(
        n,
        threads,
        lambda s, e: kernels.mls_pass(
            cloud.points, indptr, indices, params.search_radius,
            params.polynomial_order, out, degenerate, s, e,
        ),
    )
    if diagnostics is not None:
        diagnostics.extend_from_flags(degenerate, "mls-degenerate-neighborhood")
    return PointCloud(out, None, cloud.viewpoint)


def estimate_normals(
    cloud: PointCloud,
    params: NormalParams,
    diagnostics: Diagnostics | None = None,
    threads: int = 1,
    index: SpatialIndex | None = None,
) -> PointCloud:
    """Per-point least-squares plane normals, viewpoint-oriented.

    A degenerate point inherits the normal of its nearest non-degenerate
    neighbor and is reported in diagnostics.
    """
    if index is None:
        index = build_index(cloud)
    indptr, indices = all_radius_neighbors(index, params.search_radius)
    n = len(cloud)
    viewpoint = np.asarray(
        cloud.viewpoint if params.viewpoint is None else params.viewpoint, dtype=np.float64
    )
    normals = np.zeros((n, 3))
    degenerate = np.zeros(n, dtype=np.uint8)
    kernels.run_ranges(
        n,
        threads,
        lambda s, e: kernels.normal_pass(
            cloud.points, indptr, indices, viewpoint, normals, degenerate, s, e
        ),
    )
    bad = np.flatnonzero(degenerate)
    if bad.size:
        good = np.flatnonzero(degenerate == 0)
        if good.size == 0:
            raise ValueError("normal estimation failed for every point")
        tree = cKDTree(cloud.points[good])
        _, nearest = tree.query(cloud.points[bad], k=1)
        normals[bad] = normals[good[nearest]]
        if diagnostics is not None:
            diagnostics.extend_from_flags(degenerate, "normal-degenerate-neighborhood")
    return cloud.with_normals(normals)


def benchmark_normal(cloud: PointCloud) -> np.ndarray:
    """Unit-normalized sum of all point normals: the cloud's main direction.

    Permuting the points changes the result only within float rounding.
    """
    if not cloud.has_normals:
        raise ValueError("cloud has no normals")
    total = cloud.normals.sum(axis=0)
    norm = float(np.linalg.norm(total))
    if norm < 1e-12:
        raise ValueError("degenerate benchmark: point normals cancel out")
    return total / norm


def default_mls_params(cloud: PointCloud, spacing: float | None = None, order: int = 2) -> MlsParams:
    from .cloud import median_spacing

    if spacing is None:
        spacing = median_spacing(cloud)
    return MlsParams(MLS_RADIUS_SPACING_FACTOR * spacing, order)


def default_normal_params(cloud: PointCloud, spacing: float | None = None) -> NormalParams:
    from .cloud import median_spacing

    if spacing is None:
        spacing = median_spacing(cloud)
    return NormalParams(NORMAL_RADIUS_SPACING_FACTOR * spacing)
