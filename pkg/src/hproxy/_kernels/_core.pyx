# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rasterization kernels.

Mirrors _numpy.py expression for expression; built with -ffp-contract=off
so results are bit-identical to the fallback.
"""

from libc.math cimport INFINITY, ceil, floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rasterize_core(const double[::1] px, const double[::1] py, const double[::1] w,
                   const cnp.int64_t[:, ::1] faces, int width, int height,
                   double near, double far):
    """Z-buffered triangle fill over pixel centers (see _numpy.rasterize_core)."""
    depth_arr = np.full((height, width), np.inf)
    face_arr = np.full((height, width), -1, dtype=np.int32)
    bary_arr = np.zeros((height, width, 3))
    cdef double[:, ::1] depth = depth_arr
    cdef cnp.int32_t[:, ::1] face_idx = face_arr
    cdef double[:, :, ::1] bary = bary_arr

    cdef Py_ssize_t fi, x, y
    cdef cnp.int64_t i0, i1, i2
    cdef int x0, x1, y0, y1
    cdef double w0, w1, w2, xa, ya, xb, yb, xc, yc, d
    cdef double lo, hi, pxc, pyc, l0, l1, l2, s0, s1, s2, ssum, zp, b0, b1, b2

    for fi in range(faces.shape[0]):
        i0 = faces[fi, 0]
        i1 = faces[fi, 1]
        i2 = faces[fi, 2]
        w0 = w[i0]
        w1 = w[i1]
        w2 = w[i2]
        if w0 <= near or w1 <= near or w2 <= near:
            continue
        xa = px[i0]
        ya = py[i0]
        xb = px[i1]
        yb = py[i1]
        xc = px[i2]
        yc = py[i2]
        d = (xb - xa) * (yc - ya) - (xc - xa) * (yb - ya)
        if d == 0.0:
            continue
        lo = xa if xa < xb else xb
        lo = lo if lo < xc else xc
        hi = xa if xa > xb else xb
        hi = hi if hi > xc else xc
        x0 = <int>floor(lo - 0.5)
        x1 = <int>ceil(hi - 0.5)
        if x0 < 0:
            x0 = 0
        if x1 > width - 1:
            x1 = width - 1
        lo = ya if ya < yb else yb
        lo = lo if lo < yc else yc
        hi = ya if ya > yb else yb
        hi = hi if hi > yc else yc
        y0 = <int>floor(lo - 0.5)
        y1 = <int>ceil(hi - 0.5)
        if y0 < 0:
            y0 = 0
        if y1 > height - 1:
            y1 = height - 1
        if x1 < x0 or y1 < y0:
            continue
        for y in range(y0, y1 + 1):
            pyc = y + 0.5
            for x in range(x0, x1 + 1):
                pxc = x + 0.5
                l0 = ((xb - pxc) * (yc - pyc) - (xc - pxc) * (yb - pyc)) / d
                l1 = ((xc - pxc) * (ya - pyc) - (xa - pxc) * (yc - pyc)) / d
                l2 = 1.0 - l0 - l1
                if l0 >= 0.0 and l1 >= 0.0 and l2 >= 0.0:
                    s0 = l0 / w0
                    s1 = l1 / w1
                    s2 = l2 / w2
                    ssum = s0 + s1 + s2
                    zp = 1.0 / ssum
                    if zp < depth[y, x] and zp <= far:
                        b1 = s1 / ssum
                        b2 = s2 / ssum
                        b0 = 1.0 - b1 - b2
                        depth[y, x] = zp
                        face_idx[y, x] = <cnp.int32_t>fi
                        bary[y, x, 0] = b0
                        bary[y, x, 1] = b1
                        bary[y, x, 2] = b2
    return depth_arr, face_arr, bary_arr


def scatter_pixel_gradients(const cnp.int32_t[:, ::1] face_idx, const double[:, :, ::1] bary,
                            const cnp.int64_t[:, ::1] faces, const double[:, :, ::1] grad,
                            Py_ssize_t n_vertices):
    """Adjoint of barycentric shading (see _numpy.scatter_pixel_gradients).

    Corner-major accumulation, row-major pixels within a corner, matching
    the fallback's np.add.at ordering."""
    acc_arr = np.zeros((n_vertices, 3))
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t k, y, x, height = face_idx.shape[0], width = face_idx.shape[1]
    cdef cnp.int32_t fi
    cdef cnp.int64_t vi
    cdef double bk
    for k in range(3):
        for y in range(height):
            for x in range(width):
                fi = face_idx[y, x]
                if fi >= 0:
                    vi = faces[fi, k]
                    bk = bary[y, x, k]
                    acc[vi, 0] = acc[vi, 0] + bk * grad[y, x, 0]
                    acc[vi, 1] = acc[vi, 1] + bk * grad[y, x, 1]
                    acc[vi, 2] = acc[vi, 2] + bk * grad[y, x, 2]
    return acc_arr
