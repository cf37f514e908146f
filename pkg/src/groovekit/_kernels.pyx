# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-point kernels: MLS projection, plane normals, angular variation.

Same contracts as the numpy backend in _kernels_py: each pass covers the
point range [start, stop) of a CSR neighbor structure and writes into
preallocated outputs, with per-point accumulation in ascending neighbor
order. The loops run without the GIL so range chunks can execute on real
threads.
"""

from libc.math cimport acos, exp, fabs, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cdef double TIE_REL = 1e-12
cdef int MIN_NEIGHBORS = 3


cdef inline double _clamp1(double v) noexcept nogil:
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


cdef void _eigh3(double a00, double a01, double a02,
                 double a11, double a12, double a22,
                 double* evals, double* evecs) noexcept nogil:
    """Jacobi eigendecomposition of a symmetric 3x3 matrix.

    evals ascending; evecs stores the matching eigenvectors as columns of a
    row-major 3x3 block (evecs[3 * row + col]).
    """
    cdef double m[3][3]
    cdef double V[3][3]
    cdef int i, p, q, sweep
    cdef double off, scale, apq, app, aqq, tau, t, c, s, mp, mq

    m[0][0] = a00; m[0][1] = a01; m[0][2] = a02
    m[1][0] = a01; m[1][1] = a11; m[1][2] = a12
    m[2][0] = a02; m[2][1] = a12; m[2][2] = a22
    for i in range(3):
        V[i][0] = 0.0; V[i][1] = 0.0; V[i][2] = 0.0
        V[i][i] = 1.0

    for sweep in range(30):
        off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]
        scale = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2]
        if off <= 1e-30 * scale or off == 0.0:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = m[p][q]
                if fabs(apq) < 1e-300:
                    continue
                app = m[p][p]
                aqq = m[q][q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                m[p][p] = app - t * apq
                m[q][q] = aqq + t * apq
                m[p][q] = 0.0
                m[q][p] = 0.0
                for i in range(3):
                    if i != p and i != q:
                        mp = m[i][p]; mq = m[i][q]
                        m[i][p] = c * mp - s * mq; m[p][i] = m[i][p]
                        m[i][q] = s * mp + c * mq; m[q][i] = m[i][q]
                for i in range(3):
                    mp = V[i][p]; mq = V[i][q]
                    V[i][p] = c * mp - s * mq
                    V[i][q] = s * mp + c * mq

    cdef int order[3]
    cdef int j, k, tmp
    order[0] = 0; order[1] = 1; order[2] = 2
    for j in range(2):
        k = j
        for i in range(j + 1, 3):
            if m[order[i]][order[i]] < m[order[k]][order[k]]:
                k = i
        if k != j:
            tmp = order[j]; order[j] = order[k]; order[k] = tmp
    for j in range(3):
        evals[j] = m[order[j]][order[j]]
        for i in range(3):
            evecs[3 * i + j] = V[i][order[j]]


cdef int _chol_solve(double* G, double* b, double* x, int nt) noexcept nogil:
    """Solve G x = b for symmetric positive-definite G (row-major nt x nt),
    overwriting G with its Cholesky factor. Returns -1 on breakdown."""
    cdef int i, j, k
    cdef double s
    for i in range(nt):
        for j in range(i + 1):
            s = G[i * nt + j]
            for k in range(j):
                s -= G[i * nt + k] * G[j * nt + k]
            if i == j:
                if s <= 0.0:
                    return -1
                G[i * nt + i] = sqrt(s)
            else:
                G[i * nt + j] = s / G[j * nt + j]
    for i in range(nt):
        s = b[i]
        for k in range(i):
            s -= G[i * nt + k] * x[k]
        x[i] = s / G[i * nt + i]
    for i in range(nt - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, nt):
            s -= G[k * nt + i] * x[k]
        x[i] = s / G[i * nt + i]
    return 0


def normal_pass(const double[:, ::1] points,
                const cnp.int64_t[::1] indptr,
                const cnp.int32_t[::1] indices,
                const double[::1] viewpoint,
                double[:, ::1] out_normals,
                unsigned char[::1] degenerate,
                Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t i, k, lo, hi
    cdef int j, cnt
    cdef double px, py, pz, dx, dy, dz, inv
    cdef double sx, sy, sz, mx, my, mz
    cdef double m00, m01, m02, m11, m12, m22
    cdef double evals[3]
    cdef double evecs[9]
    cdef double nx, ny, nz, dot
    with nogil:
        for i in range(start, stop):
            lo = indptr[i]
            hi = indptr[i + 1]
            cnt = <int>(hi - lo)
            out_normals[i, 0] = 0.0
            out_normals[i, 1] = 0.0
            out_normals[i, 2] = 0.0
            if cnt < MIN_NEIGHBORS:
                degenerate[i] = 1
                continue
            px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
            sx = 0.0; sy = 0.0; sz = 0.0
            m00 = 0.0; m01 = 0.0; m02 = 0.0; m11 = 0.0; m12 = 0.0; m22 = 0.0
            for k in range(lo, hi):
                j = indices[k]
                dx = points[j, 0] - px
                dy = points[j, 1] - py
                dz = points[j, 2] - pz
                sx += dx; sy += dy; sz += dz
                m00 += dx * dx; m01 += dx * dy; m02 += dx * dz
                m11 += dy * dy; m12 += dy * dz; m22 += dz * dz
            inv = 1.0 / (cnt + 1)  # the center participates at the origin
            mx = sx * inv; my = sy * inv; mz = sz * inv
            _eigh3(m00 * inv - mx * mx, m01 * inv - mx * my, m02 * inv - mx * mz,
                   m11 * inv - my * my, m12 * inv - my * mz, m22 * inv - mz * mz,
                   evals, evecs)
            if (evals[1] - evals[0]) <= TIE_REL * (evals[0] + evals[1] + evals[2]):
                degenerate[i] = 1
                continue
            degenerate[i] = 0
            nx = evecs[0]; ny = evecs[3]; nz = evecs[6]
            dot = nx * (viewpoint[0] - px) + ny * (viewpoint[1] - py) + nz * (viewpoint[2] - pz)
            if dot < 0.0:
                nx = -nx; ny = -ny; nz = -nz
            out_normals[i, 0] = nx
            out_normals[i, 1] = ny
            out_normals[i, 2] = nz


def mls_pass(const double[:, ::1] points,
             const cnp.int64_t[::1] indptr,
             const cnp.int32_t[::1] indices,
             double radius, int order,
             double[:, ::1] out_points,
             unsigned char[::1] degenerate,
             Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t i, k, lo, hi
    cdef int j, cnt, nt, a, b, rc
    cdef double inv_h2 = 4.0 / (radius * radius)  # h = radius / 2
    cdef double px, py, pz, dx, dy, dz, d2, w, sw, inv
    cdef double mx, my, mz
    cdef double m00, m01, m02, m11, m12, m22
    cdef double sx, sy, sz
    cdef double evals[3]
    cdef double evecs[9]
    cdef double nx, ny, nz, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double cu, cv, cz_, u, v, z, trace, ridge, zfit, disp
    cdef double G[36]
    cdef double rhs[6]
    cdef double coef[6]
    cdef double T[6]
    cdef double Tc[6]
    with nogil:
        for i in range(start, stop):
            lo = indptr[i]
            hi = indptr[i + 1]
            cnt = <int>(hi - lo)
            px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
            out_points[i, 0] = px
            out_points[i, 1] = py
            out_points[i, 2] = pz
            if cnt < MIN_NEIGHBORS:
                degenerate[i] = 1
                continue
            # pass 1: weighted centroid and covariance relative to the point
            sw = 1.0  # the query point itself, weight exp(0)
            sx = 0.0; sy = 0.0; sz = 0.0
            m00 = 0.0; m01 = 0.0; m02 = 0.0; m11 = 0.0; m12 = 0.0; m22 = 0.0
            for k in range(lo, hi):
                j = indices[k]
                dx = points[j, 0] - px
                dy = points[j, 1] - py
                dz = points[j, 2] - pz
                d2 = dx * dx + dy * dy + dz * dz
                w = exp(-d2 * inv_h2)
                sw += w
                sx += w * dx; sy += w * dy; sz += w * dz
                m00 += w * dx * dx; m01 += w * dx * dy; m02 += w * dx * dz
                m11 += w * dy * dy; m12 += w * dy * dz; m22 += w * dz * dz
            inv = 1.0 / sw
            mx = sx * inv; my = sy * inv; mz = sz * inv
            _eigh3(m00 * inv - mx * mx, m01 * inv - mx * my, m02 * inv - mx * mz,
                   m11 * inv - my * my, m12 * inv - my * mz, m22 * inv - mz * mz,
                   evals, evecs)
            if (evals[1] - evals[0]) <= TIE_REL * (evals[0] + evals[1] + evals[2]):
                degenerate[i] = 1
                continue
            degenerate[i] = 0
            nx = evecs[0]; ny = evecs[3]; nz = evecs[6]
            e1x = evecs[1]; e1y = evecs[4]; e1z = evecs[7]
            e2x = evecs[2]; e2y = evecs[5]; e2z = evecs[8]
            cu = -(mx * e1x + my * e1y + mz * e1z)
            cv = -(mx * e2x + my * e2y + mz * e2z)
            cz_ = -(mx * nx + my * ny + mz * nz)
            nt = 6 if (order >= 2 and cnt + 1 >= 6) else 3
            for a in range(nt):
                rhs[a] = 0.0
                for b in range(nt):
                    G[a * nt + b] = 0.0
            # pass 2: accumulate the weighted normal equations
            for k in range(lo, hi):
                j = indices[k]
                dx = points[j, 0] - px - mx
                dy = points[j, 1] - py - my
                dz = points[j, 2] - pz - mz
                u = dx * e1x + dy * e1y + dz * e1z
                v = dx * e2x + dy * e2y + dz * e2z
                z = dx * nx + dy * ny + dz * nz
                dx += mx; dy += my; dz += mz
                d2 = dx * dx + dy * dy + dz * dz
                w = exp(-d2 * inv_h2)
                T[0] = 1.0; T[1] = u; T[2] = v
                if nt == 6:
                    T[3] = u * u; T[4] = u * v; T[5] = v * v
                for a in range(nt):
                    rhs[a] += w * T[a] * z
                    for b in range(a, nt):
                        G[a * nt + b] += w * T[a] * T[b]
            # the query point: weight 1, local coords (cu, cv, cz)
            Tc[0] = 1.0; Tc[1] = cu; Tc[2] = cv
            if nt == 6:
                Tc[3] = cu * cu; Tc[4] = cu * cv; Tc[5] = cv * cv
            for a in range(nt):
                rhs[a] += Tc[a] * cz_
                for b in range(a, nt):
                    G[a * nt + b] += Tc[a] * Tc[b]
            trace = 0.0
            for a in range(nt):
                trace += G[a * nt + a]
                for b in range(a):
                    G[a * nt + b] = G[b * nt + a]
            ridge = TIE_REL * trace
            for a in range(nt):
                G[a * nt + a] += ridge
            rc = _chol_solve(G, rhs, coef, nt)
            if rc == 0:
                zfit = 0.0
                for a in range(nt):
                    zfit += coef[a] * Tc[a]
            else:
                zfit = 0.0  # plane projection fallback
            disp = zfit - cz_
            out_points[i, 0] = px + disp * nx
            out_points[i, 1] = py + disp * ny
            out_points[i, 2] = pz + disp * nz


def variation_pass(const double[:, ::1] normals,
                   const double[::1] benchmark,
                   const cnp.int64_t[::1] indptr,
                   const cnp.int32_t[::1] indices,
                   double[::1] out_sl,
                   double[::1] out_sg,
                   double[::1] out_d,
                   unsigned char[::1] insufficient,
                   Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t i, k, lo, hi
    cdef int j, cnt, maxc, t
    cdef double ncx, ncy, ncz, ubx, uby, ubz
    cdef double th, bt, sum_t, sum_b, mean_t, mean_b, dev, var_l, var_g
    cdef long long evals_total = 0
    cdef double* theta
    cdef double* beta

    maxc = 0
    for i in range(start, stop):
        cnt = <int>(indptr[i + 1] - indptr[i])
        if cnt > maxc:
            maxc = cnt
    theta = <double*>malloc((maxc if maxc > 0 else 1) * sizeof(double))
    beta = <double*>malloc((maxc + 1) * sizeof(double))
    if theta == NULL or beta == NULL:
        if theta != NULL:
            free(theta)
        if beta != NULL:
            free(beta)
        raise MemoryError()

    ubx = benchmark[0]; uby = benchmark[1]; ubz = benchmark[2]
    with nogil:
        for i in range(start, stop):
            lo = indptr[i]
            hi = indptr[i + 1]
            cnt = <int>(hi - lo)
            if cnt < MIN_NEIGHBORS:
                insufficient[i] = 1
                out_sl[i] = 0.0
                out_sg[i] = 0.0
                out_d[i] = 0.0
                continue
            insufficient[i] = 0
            ncx = normals[i, 0]; ncy = normals[i, 1]; ncz = normals[i, 2]
            sum_t = 0.0
            beta[0] = acos(_clamp1(ubx * ncx + uby * ncy + ubz * ncz))
            sum_b = beta[0]
            for k in range(lo, hi):
                j = indices[k]
                th = acos(_clamp1(ncx * normals[j, 0] + ncy * normals[j, 1] + ncz * normals[j, 2]))
                theta[k - lo] = th
                sum_t += th
                bt = acos(_clamp1(ubx * normals[j, 0] + uby * normals[j, 1] + ubz * normals[j, 2]))
                beta[k - lo + 1] = bt
                sum_b += bt
            mean_t = sum_t / cnt
            var_l = 0.0
            for t in range(cnt):
                dev = theta[t] - mean_t
                var_l += dev * dev
            var_l /= cnt
            mean_b = sum_b / (cnt + 1)
            var_g = 0.0
            for t in range(cnt + 1):
                dev = beta[t] - mean_b
                var_g += dev * dev
            var_g /= cnt + 1
            out_sl[i] = var_l
            out_sg[i] = var_g
            out_d[i] = sqrt(var_l * var_l + var_g * var_g)
            evals_total += 2 * cnt + 1
    free(theta)
    free(beta)
    return evals_total
