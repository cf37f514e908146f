"""Synthetic workpiece generator with exact groove labels.

Four bench-scale geometries carry a V-type groove along their seam path: a
flat plate with a straight seam, a flat plate with a circular-arc seam, a
box whose top face has a straight seam, and a cylinder section with a
circumferential seam. Points are constructed directly on the analytic
surface, so the groove labels and reference curve are exact rather than
thresholded, and optional sensor noise displaces each point along its true
surface normal under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .cloud import PointCloud
from .evaluation import LabeledCloud

SHAPES = ("straight-line", "curve-line", "box", "cylinder")


@dataclass(frozen=True)
class LineCurve:
    """Finite reference segment (the analytic groove bottom)."""

    start: np.ndarray
    end: np.ndarray

    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def distances(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        ab = self.end - self.start
        t = np.clip((pts - self.start) @ ab / float(ab @ ab), 0.0, 1.0)
        proj = self.start + t[:, None] * ab
        return np.linalg.norm(pts - proj, axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "line",
            "start": [float(c) for c in self.start],
            "end": [float(c) for c in self.end],
        }


@dataclass(frozen=True)
class ArcCurve:
    """Circular-arc reference: center + orthonormal in-plane basis (u, v),
    points at center + radius * (cos(phi) u + sin(phi) v)."""

    center: np.ndarray
    radius: float
    u: np.ndarray
    v: np.ndarray
    phi_min: float
    phi_max: float

    def length(self) -> float:
        return self.radius * (self.phi_max - self.phi_min)

    def distances(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        w = pts - self.center
        a = w @ self.u
        b = w @ self.v
        phi = np.clip(np.arctan2(b, a), self.phi_min, self.phi_max)
        nearest = self.center + self.radius * (
            np.cos(phi)[:, None] * self.u + np.sin(phi)[:, None] * self.v
        )
        return np.linalg.norm(pts - nearest, axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "arc",
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "u": [float(c) for c in self.u],
            "v": [float(c) for c in self.v],
            "phi_min": float(self.phi_min),
            "phi_max": float(self.phi_max),
        }


def reference_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "line":
        return LineCurve(np.array(data["start"], float), np.array(data["end"], float))
    if kind == "arc":
        return ArcCurve(
            np.array(data["center"], float),
            float(data["radius"]),
            np.array(data["u"], float),
            np.array(data["v"], float),
            float(data["phi_min"]),
            float(data["phi_max"]),
        )
    raise ValueError(f"unknown reference curve kind {kind!r}")


@dataclass(frozen=True)
class WorkpieceSpec:
    """Shape plus groove geometry, sampling pitch, noise level, and seed."""

    shape: str = "straight-line"
    length: float = 0.2
    width: float = 0.15
    pitch: float = 0.001
    with_groove: bool = True
    groove_angle: float = math.radians(80)  # opening angle between the walls
    groove_depth: float = 0.002
    groove_bottom: float = 0.003  # flat bottom width
    noise_sigma: float = 0.0003
    seed: int = 0
    plate_thickness: float = 0.02
    curve_radius: float = 0.25
    box_height: float = 0.08
    cylinder_radius: float = 0.05
    cylinder_arc_deg: float = 150.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.with_groove:
            if not 0.0 < self.groove_angle < math.pi:
                raise ValueError("groove opening angle must be in (0, pi)")
            if self.groove_depth <= 0:
                raise ValueError("groove depth must be positive")
            if self.groove_bottom < 0:
                raise ValueError("groove bottom width cannot be negative")
            limit = {
                "straight-line": self.plate_thickness,
                "curve-line": self.plate_thickness,
                "box": self.box_height,
                "cylinder": self.cylinder_radius,
            }[self.shape]
            if self.groove_depth >= limit:
                raise ValueError(
                    f"groove depth {self.groove_depth} exceeds workpiece thickness {limit}"
                )

    def half_top(self) -> float:
        """Half-width of the groove opening at the surface."""
        return self.groove_bottom / 2 + self.groove_depth * math.tan(self.groove_angle / 2)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class WorkpieceSample:
    """Generated surface cloud with exact labels and oracle fields."""

    cloud: PointCloud
    truth: np.ndarray  # sorted indices of points on groove faces
    reference: Optional[LineCurve | ArcCurve]
    true_normals: np.ndarray  # analytic outward normals, noise-free geometry
    spec: WorkpieceSpec

    def labeled(self) -> LabeledCloud:
        return LabeledCloud(self.cloud, self.truth)


def _groove_cross_section(spec: WorkpieceSpec, s: np.ndarray):
    """Depth below the nominal surface and 2D outward normal (n_s, n_out)
    for lateral offsets s from the seam centerline."""
    a = np.abs(s)
    half_b = spec.groove_bottom / 2
    half_t = spec.half_top()
    cot = 1.0 / math.tan(spec.groove_angle / 2)
    depth = np.zeros_like(a)
    n_s = np.zeros_like(a)
    n_out = np.ones_like(a)
    bottom = a <= half_b
    wall = (a > half_b) & (a < half_t)
    depth[bottom] = spec.groove_depth
    depth[wall] = spec.groove_depth - (a[wall] - half_b) * cot
    scale = 1.0 / math.sqrt(1.0 + cot * cot)
    n_s[wall] = -np.sign(s[wall]) * cot * scale
    n_out[wall] = scale
    return depth, n_s, n_out


def _plate_grid(spec: WorkpieceSpec):
    nx = round(spec.length / spec.pitch)
    ny = round(spec.width / spec.pitch)
    if nx < 2 or ny < 2:
        raise ValueError("plate dimensions too small for the sampling pitch")
    x = (np.arange(nx) + 0.5) * spec.pitch
    y = (np.arange(ny) + 0.5) * spec.pitch
    gx, gy = np.meshgrid(x, y, indexing="ij")
    return gx.ravel(), gy.ravel()


def _gen_straight(spec: WorkpieceSpec):
    gx, gy = _plate_grid(spec)
    n = gx.shape[0]
    s = gy - spec.width / 2
    if spec.with_groove:
        if spec.half_top() >= spec.width / 2:
            raise ValueError("groove opening wider than the plate")
        depth, n_s, n_out = _groove_cross_section(spec, s)
    else:
        depth = np.zeros(n)
        n_s = np.zeros(n)
        n_out = np.ones(n)
    pts = np.column_stack([gx, gy, -depth])
    normals = np.column_stack([np.zeros(n), n_s, n_out])
    truth = np.flatnonzero(depth > 0).astype(np.int64)
    reference = None
    if spec.with_groove:
        zb = -spec.groove_depth
        reference = LineCurve(
            np.array([0.0, spec.width / 2, zb]), np.array([spec.length, spec.width / 2, zb])
        )
    return pts, normals, truth, reference


def _gen_curve(spec: WorkpieceSpec):
    gx, gy = _plate_grid(spec)
    n = gx.shape[0]
    radius = spec.curve_radius
    half_chord = spec.length / 2
    if radius <= half_chord:
        raise ValueError("curve radius must exceed half the plate length")
    sag = radius - math.sqrt(radius**2 - half_chord**2)
    cx = spec.length / 2
    cy = spec.width / 2 - radius + sag / 2
    rx = gx - cx
    ry = gy - cy
    rho = np.hypot(rx, ry)
    s = rho - radius
    if spec.with_groove:
        depth, n_s, n_out = _groove_cross_section(spec, s)
    else:
        depth = np.zeros(n)
        n_s = np.zeros(n)
        n_out = np.ones(n)
    pts = np.column_stack([gx, gy, -depth])
    # lateral direction is radial in the plate plane
    with np.errstate(invalid="ignore", divide="ignore"):
        ex = np.where(rho > 0, rx / rho, 0.0)
        ey = np.where(rho > 0, ry / rho, 0.0)
    normals = np.column_stack([n_s * ex, n_s * ey, n_out])
    truth = np.flatnonzero(depth > 0).astype(np.int64)
    reference = None
    if spec.with_groove:
        psi = math.asin(half_chord / radius)
        center = np.array([cx, cy, -spec.groove_depth])
        reference = ArcCurve(
            center,
            radius,
            np.array([0.0, 1.0, 0.0]),
            np.array([1.0, 0.0, 0.0]),
            -psi,
            psi,
        )
    return pts, normals, truth, reference


def _gen_box(spec: WorkpieceSpec):
    """Box edge seam: two faces meeting at a right angle (the box's top
    front edge) with the V-groove cut along the junction, its axis on the
    corner bisector.

    Constructed in the bisector frame: w runs across the seam (positive
    toward the top face), g is depth into the material along the bisector.
    The intact corner is the profile g = |w|; the groove replaces it near
    w = 0 with a flat bottom (depth d, perpendicular to the bisector) and
    two short walls at the opening half-angle.
    """
    h = spec.box_height
    cross_pitch = spec.pitch * math.sqrt(0.5)  # faces sampled at ~pitch on the surface
    half_span = spec.width / 2 * math.sqrt(0.5)
    nw = round(2 * half_span / cross_pitch)
    nx = round(spec.length / spec.pitch)
    if nw < 2 or nx < 2:
        raise ValueError("box dimensions too small for the sampling pitch")
    w = (np.arange(nw) - (nw - 1) / 2) * cross_pitch
    x = (np.arange(nx) + 0.5) * spec.pitch
    gx, gw = np.meshgrid(x, w, indexing="ij")
    gx = gx.ravel()
    gw = gw.ravel()
    a = np.abs(gw)

    g = a.copy()  # intact corner profile
    slope = np.sign(gw)  # dg/dw on the faces
    in_groove = np.zeros(a.shape[0], dtype=bool)
    if spec.with_groove:
        d = spec.groove_depth
        half_b = spec.groove_bottom / 2
        cot = 1.0 / math.tan(spec.groove_angle / 2)
        if d <= half_b:
            raise ValueError(
                "box edge groove needs depth > bottom_width/2, otherwise the "
                "flat bottom would break through the faces"
            )
        w_star = (d + half_b * cot) / (1.0 + cot)  # crease offset where walls meet faces
        if w_star >= half_span:
            raise ValueError("groove opening wider than the box faces")
        bottom = a <= half_b
        wall = (a > half_b) & (a < w_star)
        in_groove = a < w_star
        g[bottom] = d
        slope[bottom] = 0.0
        g[wall] = d - (a[wall] - half_b) * cot
        slope[wall] = -np.sign(gw[wall]) * cot

    # cross-section frame in 3D: seam along x at the corner (y=0, z=h)
    t3 = np.array([0.0, 1.0, 1.0]) / math.sqrt(2)  # +w, toward the top face
    b3 = np.array([0.0, 1.0, -1.0]) / math.sqrt(2)  # +g, into the material
    pts = np.column_stack([gx, np.zeros_like(gx), np.full_like(gx, h)])
    pts += gw[:, None] * t3 + g[:, None] * b3
    normals = slope[:, None] * t3 - np.ones_like(slope)[:, None] * b3
    normals /= np.sqrt(1.0 + slope * slope)[:, None]
    truth = np.flatnonzero(in_groove).astype(np.int64)
    reference = None
    if spec.with_groove:
        d = spec.groove_depth
        bottom_center = np.array([0.0, d, -d]) / math.sqrt(2) + (0.0, 0.0, h)
        reference = LineCurve(bottom_center, bottom_center + (spec.length, 0.0, 0.0))
    return pts, normals, truth, reference


def _gen_cylinder(spec: WorkpieceSpec):
    radius = spec.cylinder_radius
    nx = round(spec.length / spec.pitch)
    dphi = spec.pitch / radius
    arc = math.radians(spec.cylinder_arc_deg)
    nphi = round(arc / dphi)
    if nx < 2 or nphi < 2:
        raise ValueError("cylinder dimensions too small for the sampling pitch")
    x = (np.arange(nx) + 0.5) * spec.pitch
    phi = (np.arange(nphi) - (nphi - 1) / 2) * dphi
    gx, gphi = np.meshgrid(x, phi, indexing="ij")
    gx = gx.ravel()
    gphi = gphi.ravel()
    x0 = spec.length / 2
    s = gx - x0
    if spec.with_groove:
        if spec.half_top() >= spec.length / 2:
            raise ValueError("groove opening wider than the cylinder length")
        depth, n_s, n_out = _groove_cross_section(spec, s)
    else:
        depth = np.zeros(gx.shape[0])
        n_s = np.zeros(gx.shape[0])
        n_out = np.ones(gx.shape[0])
    rho = radius - depth
    sin_p = np.sin(gphi)
    cos_p = np.cos(gphi)
    pts = np.column_stack([gx, rho * sin_p, rho * cos_p])
    # surface of revolution rho(x): outward normal ~ (-rho'(x), sin, cos);
    # the cross-section normal already encodes (-rho', 1) normalized
    normals = np.column_stack([n_s, n_out * sin_p, n_out * cos_p])
    truth = np.flatnonzero(depth > 0).astype(np.int64)
    reference = None
    if spec.with_groove:
        rb = radius - spec.groove_depth
        reference = ArcCurve(
            np.array([x0, 0.0, 0.0]),
            rb,
            np.array([0.0, 0.0, 1.0]),
            np.array([0.0, 1.0, 0.0]),
            float(phi[0]),
            float(phi[-1]),
        )
    return pts, normals, truth, reference


_GENERATORS = {
    "straight-line": _gen_straight,
    "curve-line": _gen_curve,
    "box": _gen_box,
    "cylinder": _gen_cylinder,
}


def generate_workpiece(spec: WorkpieceSpec) -> WorkpieceSample:
    """Surface cloud of the requested shape with exact groove labels.

    Labels mark exactly the points constructed on groove faces: no spatial
    thresholding is involved. Noise, when enabled, displaces each point
    along its analytic normal by N(0, sigma) draws from a generator seeded
    with spec.seed, so equal specs produce bitwise-identical clouds.
    """
    pts, normals, truth, reference = _GENERATORS[spec.shape](spec)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        disp = rng.normal(0.0, spec.noise_sigma, pts.shape[0])
        pts = pts + disp[:, None] * normals
    zmax = float(pts[:, 2].max())
    viewpoint = np.array([spec.length / 2, spec.width / 2, zmax + 0.4])
    if spec.shape == "cylinder":
        viewpoint = np.array([spec.length / 2, 0.0, zmax + 0.4])
    elif spec.shape == "box":
        # camera on the corner bisector so it sees both faces
        off = 0.4 * math.sqrt(0.5)
        viewpoint = np.array([spec.length / 2, -off, spec.box_height + off])
    cloud = PointCloud(pts, None, viewpoint)
    return WorkpieceSample(cloud, truth, reference, normals, spec)
