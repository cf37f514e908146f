"""6-DOF welding trajectory generation from a detected groove point set.

The groove's dominant direction comes from PCA; the point set is evenly
segmented along that direction; each segment contributes one waypoint whose
position minimizes the summed Euclidean distance to the segment's points
(gradient descent with backtracking line search) and whose orientation is
the normalized sum of the segment's normals.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .descriptor import GrooveSet


class NoDominantDirectionError(ValueError):
    """Groove layout is isotropic; no welding direction can be inferred."""


class GrooveTooShortError(ValueError):
    """Too few populated segments to form a trajectory."""


@dataclass(frozen=True)
class GdParams:
    tolerance: float = 1e-4  # iterate displacement below this aborts
    max_iters: int = 1000

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iters < 1:
            raise ValueError(f"bad gradient-descent parameters: {self}")


@dataclass(frozen=True)
class GrooveDirection:
    axis: np.ndarray    # unit vector
    origin: np.ndarray  # centroid of the groove points


@dataclass(frozen=True)
class Segment:
    """One slice of the groove along the direction axis.

    ``point_indices`` are cloud indices whose projection parameter falls in
    [t_low, t_high); the final segment also owns the exact upper bound.
    """

    ordinal: int
    point_indices: np.ndarray
    t_low: float
    t_high: float


@dataclass(frozen=True)
class Waypoint:
    ordinal: int
    position: np.ndarray
    orientation: np.ndarray
    euler: tuple[float, float, float]  # roll, pitch, yaw (rad)
    converged: bool = True
    orientation_inherited: bool = False


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[Waypoint, ...]
    direction: GrooveDirection

    def __len__(self) -> int:
        return len(self.waypoints)

    def positions(self) -> np.ndarray:
        return np.array([w.position for w in self.waypoints])


def estimate_direction(cloud: PointCloud, groove: GrooveSet) -> GrooveDirection:
    """First principal component of the groove points.

    The sign is fixed so the axis has positive dot product with +x, or +y,
    or +z, whichever is first nonzero (lexicographic tie-break). Raises
    NoDominantDirectionError when the two leading eigenvalues coincide
    within 1e-9 relative (isotropic layout).
    """
    if len(groove) < 2:
        raise ValueError("direction estimation needs at least 2 groove points")
    pts = cloud.points[groove.indices]
    origin = pts.mean(axis=0)
    centered = pts - origin
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)  # ascending
    if evals[2] <= 0 or (evals[2] - evals[1]) <= 1e-9 * evals[2]:
        raise NoDominantDirectionError("no dominant direction in groove layout")
    axis = evecs[:, 2]
    for c in axis:
        if abs(c) > 1e-12:
            if c < 0:
                axis = -axis
            break
    return GrooveDirection(axis / np.linalg.norm(axis), origin)


def segment_groove(
    cloud: PointCloud,
    groove: GrooveSet,
    direction: GrooveDirection,
    n_segments: int,
) -> list[Segment]:
    """Split the groove into equal-width projection intervals.

    Intervals are half-open on the right; a projection exactly on an
    interior boundary belongs to the higher interval, and the global
    maximum belongs to the last one. Empty intervals yield no segment.
    """
    if n_segments < 1:
        raise ValueError(f"n_segments must be >= 1, got {n_segments}")
    if len(groove) == 0:
        raise ValueError("empty groove")
    t = (cloud.points[groove.indices] - direction.origin) @ direction.axis
    t_min, t_max = float(t.min()), float(t.max())
    span = t_max - t_min
    if span <= 0.0:
        # all points project to one parameter; single degenerate segment
        return [Segment(0, groove.indices.copy(), t_min, t_max)]
    width = span / n_segments
    cell = np.minimum(((t - t_min) / width).astype(np.int64), n_segments - 1)
    segments = []
    n_empty = 0
    for k in range(n_segments):
        members = groove.indices[cell == k]
        if members.size == 0:
            n_empty += 1
            continue
        segments.append(
            Segment(len(segments), members, t_min + k * width, t_min + (k + 1) * width)
        )
    if n_empty:
        warnings.warn(
            f"{n_empty} of {n_segments} segments are empty and produce no waypoint",
            stacklevel=2,
        )
    return segments


def median_objective(p: np.ndarray, pts: np.ndarray) -> float:
    """Sum of Euclidean distances from p to each point."""
    return float(np.linalg.norm(pts - p, axis=1).sum())


def _best_data_point(pts: np.ndarray) -> tuple[np.ndarray, float]:
    """The segment point with the lowest objective, computed in row chunks
    to bound memory on large segments."""
    n = pts.shape[0]
    best_f = math.inf
    best_i = 0
    step = max(1, int(2**22 // max(n, 1)))
    for s in range(0, n, step):
        block = pts[s : s + step]
        diff = block[:, None, :] - pts[None, :, :]
        f = np.sqrt((diff * diff).sum(axis=2)).sum(axis=1)
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f = float(f[i])
            best_i = s + i
    return pts[best_i].copy(), best_f


def waypoint_position(
    cloud: PointCloud, segment: Segment, gd: GdParams = GdParams()
) -> tuple[np.ndarray, bool]:
    """Geometric median of a segment's points by gradient descent.

    Starts at the segment centroid and steps against the distance-sum
    gradient with an Armijo backtracking line search; terms closer than
    1e-12 to the iterate are skipped (subgradient at data points). Stops
    when the accepted displacement drops below gd.tolerance or after
    gd.max_iters, returning the best iterate seen plus a convergence flag.
    The objective is nonsmooth at data points, where plain descent can
    stall a step short, so the best segment point replaces the iterate
    whenever it scores strictly better.
    """
    pts = cloud.points[segment.point_indices]
    if pts.shape[0] == 0:
        raise ValueError("empty segment")
    p = pts.mean(axis=0)
    f = median_objective(p, pts)
    best_p, best_f = p.copy(), f
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    converged = diam == 0.0
    alpha = None
    for _ in range(gd.max_iters):
        diff = p - pts
        dist = np.linalg.norm(diff, axis=1)
        mask = dist >= 1e-12
        if not np.any(mask):
            converged = True
            break
        grad = (diff[mask] / dist[mask, None]).sum(axis=0)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-15:
            converged = True
            break
        if alpha is None:
            alpha = max(diam, 1e-300) / gnorm
        accepted = False
        while alpha * gnorm > 1e-18:
            cand = p - alpha * grad
            fc = median_objective(cand, pts)
            if fc <= f - 1e-4 * alpha * gnorm * gnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            converged = True
            break
        step = alpha * gnorm
        p, f = cand, fc
        if f < best_f:
            best_p, best_f = p.copy(), f
        if step < gd.tolerance:
            converged = True
            break
        alpha *= 2.0
    # quadratic in the segment size; the kink safeguard only matters for
    # the segment-sized point sets this is meant for
    if pts.shape[0] <= 20_000:
        cand_p, cand_f = _best_data_point(pts)
        if cand_f < best_f:
            best_p, best_f = cand_p, cand_f
    return best_p, converged


def waypoint_orientation(cloud: PointCloud, segment: Segment) -> np.ndarray | None:
    """Normalized sum of the segment's point normals, or None when the sum
    cancels (caller inherits the neighboring segment's orientation)."""
    if not cloud.has_normals:
        raise ValueError("cloud has no normals")
    total = cloud.normals[segment.point_indices].sum(axis=0)
    norm = float(np.linalg.norm(total))
    if norm < 1e-12:
        return None
    return total / norm


def orientation_to_euler(o: np.ndarray) -> tuple[float, float, float]:
    """Z-Y-X Euler angles of a direction vector: yaw = atan2(y, x),
    pitch = asin(z), roll pinned to 0 (a single vector fixes only two
    angles). At the poles atan2(0, 0) = 0 defines the yaw."""
    x, y, z = (float(c) for c in o)
    yaw = math.atan2(y, x)
    pitch = math.asin(max(-1.0, min(1.0, z)))
    return (0.0, pitch, yaw)


def generate_trajectory(
    cloud: PointCloud,
    groove: GrooveSet,
    n_segments: int = 55,
    gd: GdParams = GdParams(),
    reverse: bool = False,
    threads: int = 1,
) -> Trajectory:
    """Detected groove -> ordered 6-DOF waypoints.

    Composes direction estimation, segmentation (default 55 segments),
    per-segment position optimization and orientation assignment. Segment
    optimizations are independent; ``threads`` > 1 runs them concurrently
    with identical results.
    """
    if len(groove) == 0:
        raise ValueError("empty groove")
    if len(groove) < 2:
        raise GrooveTooShortError("groove too short: 1 point")
    direction = estimate_direction(cloud, groove)
    segments = segment_groove(cloud, groove, direction, n_segments)
    if len(segments) < 2:
        raise GrooveTooShortError(
            f"groove too short: {len(segments)} non-empty segment(s)"
        )

    def _solve(seg: Segment):
        return waypoint_position(cloud, seg, gd)

    from .kernels import resolve_threads

    nthreads = resolve_threads(threads)
    if nthreads > 1 and len(segments) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(nthreads, len(segments))) as pool:
            solved = list(pool.map(_solve, segments))
    else:
        solved = [_solve(seg) for seg in segments]

    orientations: list[np.ndarray | None] = [waypoint_orientation(cloud, s) for s in segments]
    inherited = [o is None for o in orientations]
    # degenerate sums inherit the nearest preceding valid orientation,
    # falling back to the first following one
    last = None
    for i, o in enumerate(orientations):
        if o is not None:
            last = o
        elif last is not None:
            orientations[i] = last
    nxt = None
    for i in range(len(orientations) - 1, -1, -1):
        if orientations[i] is not None:
            nxt = orientations[i]
        elif nxt is not None:
            orientations[i] = nxt
    if any(o is None for o in orientations):
        raise ValueError("all segment orientations are degenerate")

    waypoints = []
    for seg, (pos, conv), ori, inh in zip(segments, solved, orientations, inherited):
        waypoints.append(
            Waypoint(
                ordinal=seg.ordinal,
                position=pos,
                orientation=ori,
                euler=orientation_to_euler(ori),
                converged=conv,
                orientation_inherited=inh,
            )
        )
    if reverse:
        waypoints = [
            Waypoint(i, w.position, w.orientation, w.euler, w.converged, w.orientation_inherited)
            for i, w in enumerate(reversed(waypoints))
        ]
        direction = GrooveDirection(-direction.axis, direction.origin)
    return Trajectory(tuple(waypoints), direction)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def write_trajectory_ascii(traj: Trajectory, path) -> None:
    """One waypoint per line: ordinal, position, orientation, Euler angles,
    converged flag."""
    lines = ["# ordinal x y z ox oy oz roll pitch yaw converged\n"]
    for w in traj.waypoints:
        x, y, z = w.position
        ox, oy, oz = w.orientation
        r, p, yw = w.euler
        lines.append(
            f"{w.ordinal} {x:.17g} {y:.17g} {z:.17g} "
            f"{ox:.17g} {oy:.17g} {oz:.17g} "
            f"{r:.17g} {p:.17g} {yw:.17g} {int(w.converged)}\n"
        )
    Path(path).write_text("".join(lines))


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "direction": {
            "axis": [float(c) for c in traj.direction.axis],
            "origin": [float(c) for c in traj.direction.origin],
        },
        "waypoints": [
            {
                "ordinal": w.ordinal,
                "position": [float(c) for c in w.position],
                "orientation": [float(c) for c in w.orientation],
                "euler": {"roll": w.euler[0], "pitch": w.euler[1], "yaw": w.euler[2]},
                "converged": bool(w.converged),
                "orientation_inherited": bool(w.orientation_inherited),
            }
            for w in traj.waypoints
        ],
    }


def write_trajectory_json(traj: Trajectory, path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_dict(traj), indent=2) + "\n")


def read_trajectory_json(path) -> Trajectory:
    data = json.loads(Path(path).read_text())
    direction = GrooveDirection(
        np.array(data["direction"]["axis"], dtype=np.float64),
        np.array(data["direction"]["origin"], dtype=np.float64),
    )
    waypoints = tuple(
        Waypoint(
            ordinal=int(w["ordinal"]),
            position=np.array(w["position"], dtype=np.float64),
            orientation=np.array(w["orientation"], dtype=np.float64),
            euler=(w["euler"]["roll"], w["euler"]["pitch"], w["euler"]["yaw"]),
            converged=bool(w["converged"]),
            orientation_inherited=bool(w.get("orientation_inherited", False)),
        )
        for w in data["waypoints"]
    )
    return Trajectory(waypoints, direction)
