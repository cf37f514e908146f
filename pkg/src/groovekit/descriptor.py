"""Angular surface-variation descriptor and groove extraction.

For every point, two angle sets are formed from its radius neighborhood:
the local set pairs the center normal with each neighbor normal, and the
global set pairs each member normal (center included) with the cloud-wide
benchmark normal. The population variances of the two sets combine into a
per-point descriptor; thresholding the descriptor map and denoising the
surviving clusters yields the groove point set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from . import kernels
from .cloud import NeighborSet, PointCloud, SpatialIndex, all_radius_neighbors, build_index
from .preprocess import benchmark_normal

MIN_NEIGHBORS = 3


@dataclass(frozen=True)
class VariationRecord:
    """Per-point variation triple: local variance, global variance, and
    their Euclidean combination (all rad^2)."""

    sigma_local: float
    sigma_global: float
    descriptor: float
    insufficient: bool = False


@dataclass(frozen=True)
class VariationMap:
    """Surface-variation extent of a whole cloud, one record per point.

    ``angle_evaluations`` counts the angles consumed while building the
    map: 2 * mu + 1 per point with mu neighbors (skipped points with fewer
    than 3 neighbors contribute none), which keeps the cost linear in the
    total neighbor count.
    """

    sigma_local: np.ndarray
    sigma_global: np.ndarray
    descriptor: np.ndarray
    insufficient: np.ndarray
    radius: float
    benchmark: np.ndarray
    angle_evaluations: int

    def __len__(self) -> int:
        return self.descriptor.shape[0]

    def record(self, i: int) -> VariationRecord:
        return VariationRecord(
            float(self.sigma_local[i]),
            float(self.sigma_global[i]),
            float(self.descriptor[i]),
            bool(self.insufficient[i]),
        )

    def export_table(self, path, cloud: PointCloud) -> None:
        """ASCII table for external plotting: index, x, y, z, local and
        global variance, descriptor, insufficient-data flag."""
        if len(self) != len(cloud):
            raise ValueError("variation map and cloud sizes differ")
        lines = ["# index x y z sigma_local sigma_global descriptor flag\n"]
        for i in range(len(self)):
            x, y, z = cloud.points[i]
            lines.append(
                f"{i} {x:.17g} {y:.17g} {z:.17g} "
                f"{self.sigma_local[i]:.17g} {self.sigma_global[i]:.17g} "
                f"{self.descriptor[i]:.17g} {int(self.insufficient[i])}\n"
            )
        Path(path).write_text("".join(lines))


@dataclass(frozen=True)
class GrooveSet:
    """Indices of the detected groove region, strictly ascending."""

    indices: np.ndarray
    threshold: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("groove indices must be strictly ascending")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]


def pair_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Included angle of two unit vectors, clamped against rounding."""
    return math.acos(max(-1.0, min(1.0, float(np.dot(u, v)))))


def local_gfh(cloud: PointCloud, neighbors: NeighborSet) -> np.ndarray:
    """Angles between the center normal and each neighbor normal, in
    ascending neighbor-index order. Empty neighborhood -> empty set."""
    if not cloud.has_normals:
        raise ValueError("cloud has no normals")
    nc = cloud.normals[neighbors.center_index]
    dots = cloud.normals[neighbors.neighbor_indices] @ nc
    return np.arccos(np.clip(dots, -1.0, 1.0))


def global_gfh(cloud: PointCloud, neighbors: NeighborSet, benchmark: np.ndarray) -> np.ndarray:
    """Angles between the benchmark normal and every member normal, center
    first, then neighbors in ascending index order."""
    if not cloud.has_normals:
        raise ValueError("cloud has no normals")
    members = np.concatenate(([neighbors.center_index], neighbors.neighbor_indices))
    dots = cloud.normals[members] @ np.asarray(benchmark, dtype=np.float64)
    return np.arccos(np.clip(dots, -1.0, 1.0))


def histogram_variance(angles: np.ndarray) -> float:
    """Population variance of an angle set: mean squared deviation from the
    set mean. Defined as 0 for the empty set."""
    a = np.asarray(angles, dtype=np.float64)
    if a.size == 0:
        return 0.0
    mean = a.sum() / a.size
    dev = a - mean
    return float((dev * dev).sum() / a.size)


def descriptor_value(sigma_local: float, sigma_global: float) -> float:
    """Euclidean combination of the two histogram variances."""
    if sigma_local < 0 or sigma_global < 0:
        raise ValueError("variances must be non-negative")
    return math.hypot(sigma_local, sigma_global)


def variation_map(
    cloud: PointCloud,
    r: float,
    threads: int = 1,
    index: SpatialIndex | None = None,
    benchmark: np.ndarray | None = None,
) -> VariationMap:
    """Descriptor map over a whole cloud.

    Per point: radius neighbors, local and global angle sets against the
    cloud benchmark normal, their population variances, and the combined
    descriptor. Points with fewer than 3 neighbors get descriptor 0 and the
    insufficient-data flag instead of an error so sparse edges degrade
    gracefully.
    """
    if not cloud.has_normals:
        raise ValueError("cloud has no normals")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if index is None:
        index = build_index(cloud)
    if benchmark is None:
        benchmark = benchmark_normal(cloud)
    benchmark = np.ascontiguousarray(benchmark, dtype=np.float64)
    indptr, indices = all_radius_neighbors(index, r)
    n = len(cloud)
    sl = np.zeros(n)
    sg = np.zeros(n)
    d = np.zeros(n)
    flag = np.zeros(n, dtype=np.uint8)
    counts = kernels.run_ranges(
        n,
        threads,
        lambda s, e: kernels.variation_pass(
            cloud.normals, benchmark, indptr, indices, sl, sg, d, flag, s, e
        ),
    )
    return VariationMap(sl, sg, d, flag.astype(bool), float(r), benchmark, int(sum(counts)))


def extract_groove(vmap: VariationMap, threshold: float) -> GrooveSet:
    """Indices of all points whose descriptor is at least the threshold."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    idx = np.flatnonzero(vmap.descriptor >= threshold).astype(np.int64)
    return GrooveSet(idx, float(threshold))


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's between-class variance split over a descriptor histogram.

    Used as the default threshold mode because the descriptor scale depends
    on geometry and neighborhood radius; a fixed constant does not carry
    across datasets.
    """
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("no descriptor values")
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return hi if hi > 0 else 1e-12
    hist, edges = np.histogram(v, bins=bins, range=(lo, hi))
    hist = hist.astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)
    w1 = total - w0
    centers = (edges[:-1] + edges[1:]) / 2.0
    m = np.cumsum(hist * centers)
    m_total = m[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m / w0
        mu1 = (m_total - m) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    k = int(np.argmax(between))
    return float(edges[k + 1])


def euclidean_clusters(points: np.ndarray, radius: float) -> list[np.ndarray]:
    """Single-linkage clusters: points within radius of each other are
    connected. Returns index arrays into ``points``, each sorted ascending,
    ordered by first member."""
    n = points.shape[0]
    if n == 0:
        return []
    tree = cKDTree(points)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    graph = coo_matrix(
        (np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    clusters = [np.sort(c) for c in np.split(order, splits)]
    clusters.sort(key=lambda c: int(c[0]))
    return clusters


def _hull_polygon(xy: np.ndarray) -> np.ndarray | None:
    """Convex-hull boundary vertices of a 2D footprint, or None when the
    footprint is degenerate (a segment or point: everything is boundary)."""
    if xy.shape[0] < 3:
        return None
    try:
        hull = ConvexHull(xy)
    except Exception:
        return None
    return xy[hull.vertices]


def _boundary_distance(verts: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Distance from 2D query points to a closed polygon boundary."""
    best = np.full(query.shape[0], np.inf)
    m = verts.shape[0]
    for k in range(m):
        a = verts[k]
        b = verts[(k + 1) % m]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            d = np.linalg.norm(query - a, axis=1)
        else:
            t = np.clip(((query - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d = np.linalg.norm(query - proj, axis=1)
        best = np.minimum(best, d)
    return best


def denoise_groove(
    groove: GrooveSet,
    cloud: PointCloud,
    min_cluster: int = 1,
    cluster_radius: float | None = None,
) -> GrooveSet:
    """Remove spurious groove detections.

    Clusters the groove points (single linkage at cluster_radius), drops
    clusters smaller than min_cluster, and drops edge-of-surface false
    positives: clusters with more than half of their points within
    cluster_radius of the cloud footprint's convex-hull boundary. The
    footprint plane is spanned by the two dominant principal axes of the
    whole cloud.
    """
    if len(groove) == 0:
        return groove
    if cluster_radius is None:
        from .cloud import median_spacing

        cluster_radius = 2.5 * median_spacing(cloud)
    pts = cloud.points[groove.indices]
    clusters = euclidean_clusters(pts, cluster_radius)

    centered = cloud.points - cloud.points.mean(axis=0)
    cov = centered.T @ centered / len(cloud)
    _, evecs = np.linalg.eigh(cov)
    plane = evecs[:, 1:]  # two largest principal axes
    xy_all = centered @ plane
    xy_groove = xy_all[groove.indices]
    hull = _hull_polygon(xy_all)

    keep: list[np.ndarray] = []
    for members in clusters:
        if members.size < min_cluster:
            continue
        if hull is None:
            continue  # degenerate footprint: everything counts as boundary
        d = _boundary_distance(hull, xy_groove[members])
        if np.mean(d <= cluster_radius) > 0.5:
            continue
        keep.append(members)
    if not keep:
        return GrooveSet(np.zeros(0, dtype=np.int64), groove.threshold)
    kept = np.sort(np.concatenate(keep))
    return GrooveSet(groove.indices[kept], groove.threshold)
