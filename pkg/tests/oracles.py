"""Independent reference implementations used only to check results."""

import numpy as np


def weiszfeld(pts, tol=1e-8, max_iter=100000):
    """Geometric median by iteratively reweighted averaging, with the
    standard subgradient optimality check when an iterate lands on a data
    point. Independent of the shipped gradient-descent solver."""
    pts = np.asarray(pts, dtype=float)
    x = pts.mean(axis=0)
    for _ in range(max_iter):
        d = np.linalg.norm(pts - x, axis=1)
        at = d < 1e-14
        if np.any(at):
            j = int(np.argmax(at))
            others = np.flatnonzero(~at)
            if others.size == 0:
                return pts[j].copy()
            g = ((x - pts[others]) / d[others][:, None]).sum(axis=0)
            if np.linalg.norm(g) <= np.sum(at):
                return pts[j].copy()
            d = np.maximum(d, 1e-14)
        w = 1.0 / d
        x_new = (pts * w[:, None]).sum(axis=0) / w.sum()
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    return x


def two_pass_variance(angles):
    """Plain-float two-pass population variance."""
    n = len(angles)
    mean = sum(float(a) for a in angles) / n
    return sum((float(a) - mean) ** 2 for a in angles) / n
