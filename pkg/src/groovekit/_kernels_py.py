"""Pure-numpy implementations of the per-point kernels.

Each pass works on the half-open point range [start, stop) of a CSR
neighbor structure (indptr, indices) and writes into preallocated output
arrays, so ranges can be dispatched to worker threads without any result
depending on the schedule. Per-point accumulation uses numpy segment
reductions; wherever a neighborhood is too small or geometrically
degenerate, the point is flagged and passed through untouched.
"""

from __future__ import annotations

import numpy as np

EIGEN_TIE_REL = 1e-12
MIN_NEIGHBORS = 3


def _seg_sum(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Per-segment sums; segments given by their start offsets, last segment
    ends at len(values). Empty segments sum to 0 (reduceat would not)."""
    n = values.shape[0]
    counts = np.diff(np.append(starts, n))
    if n == 0:
        shape = (starts.shape[0],) + values.shape[1:]
        return np.zeros(shape, dtype=np.float64)
    safe = np.minimum(starts, n - 1)
    out = np.add.reduceat(values, safe, axis=0)
    out[counts == 0] = 0.0
    return out


def _csr_slice(indptr, indices, start, stop):
    lo = int(indptr[start])
    hi = int(indptr[stop])
    idx = indices[lo:hi]
    counts = np.diff(indptr[start : stop + 1]).astype(np.int64)
    starts = (indptr[start:stop] - lo).astype(np.int64)
    rows = np.repeat(np.arange(stop - start, dtype=np.int64), counts)
    return idx, counts, starts, rows


def _neighborhood_frames(points, idx, counts, starts, rows, start, weights=None):
    """Weighted (or plain) per-neighborhood PCA frames, centered on each
    query point. Returns (mu, evals, evecs, d) with mu relative to the query
    point; the query itself participates with weight 1 at the origin."""
    d = points[idx] - points[rows + start]
    if weights is None:
        sw = counts.astype(np.float64) + 1.0
        wd = d
        w = None
    else:
        w = weights
        sw = _seg_sum(w, starts) + 1.0
        wd = w[:, None] * d
    mu = _seg_sum(wd, starts) / sw[:, None]
    cov = np.empty((counts.shape[0], 3, 3))
    for a in range(3):
        for b in range(a, 3):
            prod = d[:, a] * d[:, b]
            if w is not None:
                prod = w * prod
            c = _seg_sum(prod, starts) / sw - mu[:, a] * mu[:, b]
            cov[:, a, b] = c
            cov[:, b, a] = c
    evals, evecs = np.linalg.eigh(cov)
    return mu, evals, evecs, d, w, sw


def _tie_mask(evals):
    trace = evals.sum(axis=1)
    return (evals[:, 1] - evals[:, 0]) <= EIGEN_TIE_REL * trace


def normal_pass(points, indptr, indices, viewpoint, out_normals, degenerate, start, stop):
    """Smallest-eigenvector plane normals per point, oriented toward the
    viewpoint. Degenerate points keep a zero normal and a raised flag."""
    idx, counts, starts, rows = _csr_slice(indptr, indices, start, stop)
    out_normals[start:stop] = 0.0
    eligible = counts >= MIN_NEIGHBORS
    degenerate[start:stop] = ~eligible
    if not np.any(eligible):
        return
    mu, evals, evecs, _, _, _ = _neighborhood_frames(points, idx, counts, starts, rows, start)
    tie = _tie_mask(evals)
    ok = eligible & ~tie
    degenerate[start:stop] = ~ok
    if not np.any(ok):
        return
    ok_rows = np.flatnonzero(ok)
    nrm = evecs[ok_rows, :, 0]
    towards = viewpoint[None, :] - points[start:stop][ok_rows]
    flip = np.einsum("ij,ij->i", nrm, towards) < 0.0
    nrm[flip] *= -1.0
    out_normals[start + ok_rows] = nrm


def mls_pass(points, indptr, indices, radius, order, out_points, degenerate, start, stop):
    """Moving-least-squares projection of each point onto a locally weighted
    polynomial surface (Gaussian weights, bandwidth = radius / 2).

    Points with degenerate neighborhoods pass through unchanged with the
    flag set. The polynomial degree drops to 1 when a neighborhood has
    fewer points than quadratic coefficients, and to a plane projection if
    the normal equations cannot be solved.
    """
    idx, counts, starts, rows = _csr_slice(indptr, indices, start, stop)
    out_points[start:stop] = points[start:stop]
    eligible = counts >= MIN_NEIGHBORS
    degenerate[start:stop] = ~eligible
    if not np.any(eligible):
        return

    d_all = points[idx] - points[rows + start]
    h = radius / 2.0
    w_all = np.exp(-np.einsum("ij,ij->i", d_all, d_all) / (h * h))
    mu, evals, evecs, _, _, _ = _neighborhood_frames(
        points, idx, counts, starts, rows, start, weights=w_all
    )
    tie = _tie_mask(evals)
    ok = eligible & ~tie
    degenerate[start:stop] = ~ok
    if not np.any(ok):
        return

    ok_rows = np.flatnonzero(ok)
    keep = ok[rows]
    d = d_all[keep]
    w = w_all[keep]
    k_counts = counts[ok_rows]
    k = ok_rows.shape[0]
    rows2 = np.repeat(np.arange(k, dtype=np.int64), k_counts)
    starts2 = np.zeros(k, dtype=np.int64)
    np.cumsum(k_counts[:-1], out=starts2[1:])

    nrm = np.ascontiguousarray(evecs[ok_rows, :, 0])
    e1 = np.ascontiguousarray(evecs[ok_rows, :, 1])
    e2 = np.ascontiguousarray(evecs[ok_rows, :, 2])
    mu2 = mu[ok_rows]

    rel = d - mu2[rows2]
    u = np.einsum("ij,ij->i", rel, e1[rows2])
    v = np.einsum("ij,ij->i", rel, e2[rows2])
    z = np.einsum("ij,ij->i", rel, nrm[rows2])
    cu = -np.einsum("ij,ij->i", mu2, e1)
    cv = -np.einsum("ij,ij->i", mu2, e2)
    cz = -np.einsum("ij,ij->i", mu2, nrm)

    terms = [np.ones_like(u), u, v, u * u, u * v, v * v]
    cterms = np.column_stack([np.ones(k), cu, cv, cu * cu, cu * cv, cv * cv])

    gram = np.empty((k, 6, 6))
    rhs = np.empty((k, 6))
    for a in range(6):
        wa = w * terms[a]
        rhs[:, a] = _seg_sum(wa * z, starts2) + cterms[:, a] * cz
        for b in range(a, 6):
            g = _seg_sum(wa * terms[b], starts2) + cterms[:, a] * cterms[:, b]
            gram[:, a, b] = g
            gram[:, b, a] = g

    n_support = k_counts + 1
    quad = (order >= 2) & (n_support >= 6)
    z_fit = np.zeros(k)
    for mask, nt in ((quad, 6), (~quad, 3)):
        sel = np.flatnonzero(mask)
        if sel.size == 0:
            continue
        g = gram[sel][:, :nt, :nt].copy()
        diag = np.einsum("kaa->ka", g)
        ridge = EIGEN_TIE_REL * diag.sum(axis=1)
        g[:, np.arange(nt), np.arange(nt)] += ridge[:, None]
        try:
            coef = np.linalg.solve(g, rhs[sel][:, :nt, None])[..., 0]
            z_fit[sel] = np.einsum("ka,ka->k", coef, cterms[sel][:, :nt])
        except np.linalg.LinAlgError:
            # fall back to a plane projection row by row
            for j in sel:
                gj = gram[j, :nt, :nt] + np.eye(nt) * ridge[0]
                try:
                    cj = np.linalg.solve(gj, rhs[j, :nt])
                    z_fit[j] = float(cterms[j, :nt] @ cj)
                except np.linalg.LinAlgError:
                    z_fit[j] = 0.0

    disp = z_fit - cz
    out_points[start + ok_rows] = points[start + ok_rows] + disp[:, None] * nrm


def variation_pass(normals, benchmark, indptr, indices, out_sl, out_sg, out_d, insufficient, start, stop):
    """Per-point angular variation: population variance of the local pair
    angles, of the benchmark pair angles (center included), and their
    Euclidean combination. Returns the number of angle evaluations
    (2 * mu + 1 per eligible point)."""
    idx, counts, starts, rows = _csr_slice(indptr, indices, start, stop)
    eligible = counts >= MIN_NEIGHBORS
    insufficient[start:stop] = ~eligible

    nb = normals[idx]
    cos_l = np.einsum("ij,ij->i", normals[rows + start], nb)
    theta = np.arccos(np.clip(cos_l, -1.0, 1.0))
    denom = np.maximum(counts, 1).astype(np.float64)
    mean_t = _seg_sum(theta, starts) / denom
    dev = theta - mean_t[rows]
    var_l = _seg_sum(dev * dev, starts) / denom

    beta_c = np.arccos(np.clip(normals[start:stop] @ benchmark, -1.0, 1.0))
    beta_n = np.arccos(np.clip(nb @ benchmark, -1.0, 1.0))
    gdenom = (counts + 1).astype(np.float64)
    mean_b = (_seg_sum(beta_n, starts) + beta_c) / gdenom
    dev_c = beta_c - mean_b
    dev_n = beta_n - mean_b[rows]
    var_g = (_seg_sum(dev_n * dev_n, starts) + dev_c * dev_c) / gdenom

    var_l = np.where(eligible, var_l, 0.0)
    var_g = np.where(eligible, var_g, 0.0)
    out_sl[start:stop] = var_l
    out_sg[start:stop] = var_g
    out_d[start:stop] = np.sqrt(var_l * var_l + var_g * var_g)
    return int(np.sum(2 * counts[eligible] + 1))
