"""Point-cloud container, exact radius-neighbor search, and ASCII PCD/PLY I/O."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

UNIT_NORM_TOL = 1e-9

_FORMATS = ("pcd-ascii", "ply-ascii")


class ParseError(ValueError):
    """Malformed cloud file; message carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def point3(x: float, y: float, z: float) -> np.ndarray:
    """Validated 3D position (meters) as a float64 array of shape (3,)."""
    p = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"non-finite coordinates: {p}")
    return p


def unit_vector3(x: float, y: float, z: float) -> np.ndarray:
    """Validated unit direction; the norm must be 1 within 1e-9."""
    v = np.array([x, y, z], dtype=np.float64)
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or abs(n - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"not a unit vector (norm {n}): {v}")
    return v


@dataclass(frozen=True)
class PointCloud:
    """Immutable cloud of 3D points with optional per-point unit normals.

    Point indices are stable identifiers: every downstream stage refers to
    points by index, so any transformation must preserve count and order.
    ``viewpoint`` is the sensor origin used to disambiguate normal signs.
    """

    points: np.ndarray
    normals: np.ndarray | None = None
    viewpoint: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C")
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        if pts.shape[0] == 0:
            raise ValueError("zero points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

        if self.normals is not None:
            nrm = np.array(self.normals, dtype=np.float64, order="C")
            if nrm.shape != pts.shape:
                raise ValueError(
                    f"normals shape {nrm.shape} does not match points shape {pts.shape}"
                )
            err = np.abs(np.linalg.norm(nrm, axis=1) - 1.0)
            if not np.all(np.isfinite(nrm)) or np.any(err > UNIT_NORM_TOL):
                bad = int(np.argmax(err))
                raise ValueError(f"normal {bad} is not unit length: {nrm[bad]}")
            nrm.flags.writeable = False
            object.__setattr__(self, "normals", nrm)

        vp = point3(*np.asarray(self.viewpoint, dtype=np.float64))
        vp.flags.writeable = False
        object.__setattr__(self, "viewpoint", vp)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        """Same points and viewpoint, new normals."""
        return PointCloud(self.points, normals, self.viewpoint)


@dataclass(frozen=True)
class NeighborSet:
    """Radius neighborhood of one point. The center itself is excluded and
    neighbor indices are sorted ascending (determinism contract)."""

    center_index: int
    neighbor_indices: np.ndarray
    radius: float

    def __len__(self) -> int:
        return self.neighbor_indices.shape[0]


class SpatialIndex:
    """Immutable kd-tree over a cloud answering exact radius queries.

    Safe for concurrent read-only queries; results do not depend on build
    order.
    """

    def __init__(self, cloud: PointCloud):
        self.cloud = cloud
        self._tree = cKDTree(cloud.points)


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def radius_neighbors(index: SpatialIndex, center_index: int, r: float) -> NeighborSet:
    """All points within Euclidean distance <= r of the center, self excluded."""
    n = len(index.cloud)
    if not 0 <= center_index < n:
        raise IndexError(f"point index {center_index} out of range [0, {n})")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    hits = index._tree.query_ball_point(index.cloud.points[center_index], r)
    out = np.array(sorted(h for h in hits if h != center_index), dtype=np.int64)
    return NeighborSet(center_index, out, float(r))


def all_radius_neighbors(index: SpatialIndex, r: float) -> tuple[np.ndarray, np.ndarray]:
    """CSR neighbor lists at radius r for every point at once.

    Returns ``(indptr, indices)`` with the neighbors of point i stored in
    ``indices[indptr[i]:indptr[i+1]]``, sorted ascending, self excluded.
    Identical to calling :func:`radius_neighbors` per point, but one pass.
    """
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    n = len(index.cloud)
    pairs = index._tree.query_pairs(r, output_type="ndarray")
    indptr = np.zeros(n + 1, dtype=np.int64)
    if pairs.shape[0] == 0:
        return indptr, np.zeros(0, dtype=np.int32)
    ctr = np.concatenate([pairs[:, 0], pairs[:, 1]])
    nbr = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((nbr, ctr))
    indices = nbr[order].astype(np.int32)
    counts = np.bincount(ctr, minlength=n)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def median_spacing(cloud: PointCloud) -> float:
    """Median nearest-neighbor distance; the cloud's natural length scale."""
    if len(cloud) < 2:
        raise ValueError("median spacing needs at least 2 points")
    tree = cKDTree(cloud.points)
    dist, _ = tree.query(cloud.points, k=2)
    return float(np.median(dist[:, 1]))


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _resolve_format(path, fmt: str | None) -> str:
    if fmt is None:
        suffix = Path(path).suffix.lower()
        if suffix == ".pcd":
            return "pcd-ascii"
        if suffix == ".ply":
            return "ply-ascii"
        raise ValueError(f"cannot infer format from suffix {suffix!r}; pass format=")
    alias = {"pcd": "pcd-ascii", "ply": "ply-ascii"}
    fmt = alias.get(fmt, fmt)
    if fmt not in _FORMATS:
        raise ValueError(f"unsupported format {fmt!r}; expected one of {_FORMATS}")
    return fmt


def load_cloud(path, fmt: str | None = None) -> PointCloud:
    """Read an ASCII PCD or PLY cloud.

    Normals are populated iff the file carries normal fields; the viewpoint
    comes from the PCD VIEWPOINT header (PLY: a ``comment viewpoint`` line)
    and defaults to the origin.
    """
    fmt = _resolve_format(path, fmt)
    text = Path(path).read_text()
    lines = text.splitlines()
    if fmt == "pcd-ascii":
        return _parse_pcd(path, lines)
    return _parse_ply(path, lines)


def save_cloud(cloud: PointCloud, path, fmt: str | None = None) -> None:
    """Write a cloud with full float64 precision (17 significant digits), so
    a load round-trip reproduces coordinates bit for bit."""
    fmt = _resolve_format(path, fmt)
    if fmt == "pcd-ascii":
        text = _format_pcd(cloud)
    else:
        text = _format_ply(cloud)
    Path(path).write_text(text)


def _data_block(cloud: PointCloud) -> str:
    if cloud.has_normals:
        data = np.hstack([cloud.points, cloud.normals])
    else:
        data = cloud.points
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g")
    return buf.getvalue()


def _format_pcd(cloud: PointCloud) -> str:
    if cloud.has_normals:
        fields = "x y z normal_x normal_y normal_z"
        nf = 6
    else:
        fields = "x y z"
        nf = 3
    n = len(cloud)
    vx, vy, vz = (f"{v:.17g}" for v in cloud.viewpoint)
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        f"FIELDS {fields}\n"
        f"SIZE {' '.join(['8'] * nf)}\n"
        f"TYPE {' '.join(['F'] * nf)}\n"
        f"COUNT {' '.join(['1'] * nf)}\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        f"VIEWPOINT {vx} {vy} {vz} 1 0 0 0\n"
        f"POINTS {n}\n"
        "DATA ascii\n"
    )
    return header + _data_block(cloud)


def _format_ply(cloud: PointCloud) -> str:
    n = len(cloud)
    vx, vy, vz = (f"{v:.17g}" for v in cloud.viewpoint)
    props = ["x", "y", "z"]
    if cloud.has_normals:
        props += ["nx", "ny", "nz"]
    prop_lines = "".join(f"property double {p}\n" for p in props)
    header = (
        "ply\n"
        "format ascii 1.0\n"
        f"comment viewpoint {vx} {vy} {vz}\n"
        f"element vertex {n}\n"
        f"{prop_lines}"
        "end_header\n"
    )
    return header + _data_block(cloud)


def _parse_rows(path, lines, start_line, count, n_fields):
    """Parse `count` whitespace-separated numeric rows, reporting the exact
    line of the first malformed record."""
    rows = lines[start_line - 1 : start_line - 1 + count]
    if len(rows) < count:
        raise ParseError(path, start_line + len(rows), f"expected {count} data rows, file ends after {len(rows)}")
    try:
        data = np.array([r.split() for r in rows], dtype=np.float64)
        if data.ndim == 2 and data.shape[1] == n_fields:
            return data
    except ValueError:
        pass
    # Slow path: locate the offending row for the error message.
    for off, row in enumerate(rows):
        toks = row.split()
        if len(toks) != n_fields:
            raise ParseError(path, start_line + off, f"expected {n_fields} fields, got {len(toks)}")
        try:
            [float(t) for t in toks]
        except ValueError:
            raise ParseError(path, start_line + off, f"non-numeric field in record: {row!r}") from None
    raise ParseError(path, start_line, "malformed data section")


def _build_cloud(path, data, with_normals, viewpoint):
    points = data[:, :3]
    normals = None
    if with_normals:
        normals = data[:, 3:6]
        norms = np.linalg.norm(normals, axis=1)
        # Files written by other tools may carry slightly denormalized
        # normals; fix only those rows (full-precision round-trips must
        # reproduce our own files byte for byte), and reject zeros.
        if np.any(norms < 1e-12):
            raise ValueError(f"{path}: zero-length normal in file")
        off = np.abs(norms - 1.0) > UNIT_NORM_TOL
        if np.any(off):
            normals = normals.copy()
            normals[off] /= norms[off, None]
    return PointCloud(points, normals, viewpoint)


def _parse_pcd(path, lines) -> PointCloud:
    header: dict[str, list[str]] = {}
    data_line = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        key = toks[0].upper()
        header[key] = toks[1:]
        if key == "DATA":
            if toks[1:] != ["ascii"]:
                raise ParseError(path, i, f"only DATA ascii is supported, got {' '.join(toks[1:])}")
            data_line = i + 1
            break
    if data_line is None:
        raise ParseError(path, len(lines), "missing DATA header")
    if "FIELDS" not in header:
        raise ParseError(path, data_line - 1, "missing FIELDS header")
    fields = [f.lower() for f in header["FIELDS"]]
    if fields == ["x", "y", "z"]:
        with_normals = False
    elif fields == ["x", "y", "z", "normal_x", "normal_y", "normal_z"]:
        with_normals = True
    else:
        raise ParseError(path, data_line - 1, f"unsupported FIELDS {' '.join(fields)}")
    try:
        if "POINTS" in header:
            count = int(header["POINTS"][0])
        else:
            # organized files declare WIDTH x HEIGHT instead
            count = int(header.get("WIDTH", ["0"])[0]) * int(header.get("HEIGHT", ["1"])[0])
    except ValueError:
        raise ParseError(path, data_line - 1, "POINTS/WIDTH/HEIGHT is not an integer") from None
    if count == 0:
        raise ParseError(path, data_line - 1, "zero points")
    viewpoint = np.zeros(3)
    if "VIEWPOINT" in header:
        vals = header["VIEWPOINT"]
        if len(vals) != 7:
            raise ParseError(path, data_line - 1, f"VIEWPOINT needs 7 values, got {len(vals)}")
        viewpoint = np.array([float(v) for v in vals[:3]])
    data = _parse_rows(path, lines, data_line, count, 6 if with_normals else 3)
    return _build_cloud(path, data, with_normals, viewpoint)


def _parse_ply(path, lines) -> PointCloud:
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "not a PLY file (missing 'ply' magic)")
    count = None
    props: list[str] = []
    viewpoint = np.zeros(3)
    data_line = None
    in_vertex = False
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        toks = line.split()
        if not toks:
            continue
        if toks[0] == "format":
            if toks[1:] != ["ascii", "1.0"]:
                raise ParseError(path, i, f"only 'format ascii 1.0' is supported, got {line!r}")
        elif toks[0] == "comment":
            if len(toks) == 5 and toks[1] == "viewpoint":
                viewpoint = np.array([float(v) for v in toks[2:5]])
        elif toks[0] == "element":
            try:
                element_count = int(toks[2])
            except (IndexError, ValueError):
                raise ParseError(path, i, f"bad element count in {line!r}") from None
            if toks[1] == "vertex":
                in_vertex = True
                count = element_count
            else:
                in_vertex = False
                if element_count != 0:
                    raise ParseError(path, i, f"unsupported non-empty element {toks[1]!r}")
        elif toks[0] == "property":
            if in_vertex:
                props.append(toks[-1].lower())
        elif toks[0] == "end_header":
            data_line = i + 1
            break
    if data_line is None:
        raise ParseError(path, len(lines), "missing end_header")
    if count is None:
        raise ParseError(path, data_line - 1, "missing vertex element")
    if count == 0:
        raise ParseError(path, data_line - 1, "zero points")
    if props == ["x", "y", "z"]:
        with_normals = False
    elif props == ["x", "y", "z", "nx", "ny", "nz"]:
        with_normals = True
    else:
        raise ParseError(path, data_line - 1, f"unsupported vertex properties {props}")
    data = _parse_rows(path, lines, data_line, count, 6 if with_normals else 3)
    return _build_cloud(path, data, with_normals, viewpoint)


def write_index_file(indices, path) -> None:
    """One point index per line; shared by groove exports and truth labels."""
    arr = np.asarray(indices, dtype=np.int64).ravel()
    Path(path).write_text("".join(f"{i}\n" for i in arr))


def read_index_file(path) -> np.ndarray:
    out = []
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            v = int(line)
        except ValueError:
            raise ParseError(path, i, f"not an index: {line!r}") from None
        if v < 0:
            raise ParseError(path, i, f"negative index: {v}")
        out.append(v)
    return np.array(out, dtype=np.int64)
