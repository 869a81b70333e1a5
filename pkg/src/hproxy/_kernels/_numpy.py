"""Pure numpy implementations of the rasterization kernels.

Triangles are processed strictly in face order; the per-pixel expressions
match the compiled kernel term for term so both backends produce
bit-identical buffers.
"""

import math

import numpy as np


def rasterize_core(px, py, w, faces, width, height, near, far):
    """Z-buffered triangle fill over pixel centers.

    px, py: screen coordinates per vertex (pixels); w: view depth per vertex
    (positive in front). Triangles with any vertex at or behind the near
    plane are skipped (no clipping). Returns (depth, face_index, bary) where
    bary stores perspective-correct weights (b0 = 1 - b1 - b2).
    """
    depth = np.full((height, width), np.inf)
    face_idx = np.full((height, width), -1, dtype=np.int32)
    bary = np.zeros((height, width, 3))
    for fi in range(len(faces)):
        i0, i1, i2 = faces[fi]
        w0 = w[i0]
        w1 = w[i1]
        w2 = w[i2]
        if w0 <= near or w1 <= near or w2 <= near:
            continue
        xa, ya = px[i0], py[i0]
        xb, yb = px[i1], py[i1]
        xc, yc = px[i2], py[i2]
        d = (xb - xa) * (yc - ya) - (xc - xa) * (yb - ya)
        if d == 0.0:
            continue
        x0 = max(int(math.floor(min(xa, xb, xc) - 0.5)), 0)
        x1 = min(int(math.ceil(max(xa, xb, xc) - 0.5)), width - 1)
        y0 = max(int(math.floor(min(ya, yb, yc) - 0.5)), 0)
        y1 = min(int(math.ceil(max(ya, yb, yc) - 0.5)), height - 1)
        if x1 < x0 or y1 < y0:
            continue
        PX = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
        PY = (np.arange(y0, y1 + 1, dtype=np.float64) + 0.5)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            l0 = ((xb - PX) * (yc - PY) - (xc - PX) * (yb - PY)) / d
            l1 = ((xc - PX) * (ya - PY) - (xa - PX) * (yc - PY)) / d
            l2 = 1.0 - l0 - l1
            inside = (l0 >= 0.0) & (l1 >= 0.0) & (l2 >= 0.0)
            s0 = l0 / w0
            s1 = l1 / w1
            s2 = l2 / w2
            ssum = s0 + s1 + s2
            zp = 1.0 / ssum
            dsub = depth[y0 : y1 + 1, x0 : x1 + 1]
            upd = inside & (zp < dsub) & (zp <= far)
            if not upd.any():
                continue
            b1 = s1 / ssum
            b2 = s2 / ssum
            b0 = 1.0 - b1 - b2
        dsub[upd] = zp[upd]
        face_idx[y0 : y1 + 1, x0 : x1 + 1][upd] = fi
        bsub = bary[y0 : y1 + 1, x0 : x1 + 1]
        bsub[..., 0][upd] = b0[upd]
        bsub[..., 1][upd] = b1[upd]
        bsub[..., 2][upd] = b2[upd]
    return depth, face_idx, bary


def scatter_pixel_gradients(face_idx, bary, faces, grad, n_vertices):
    """Adjoint of barycentric shading: scatter per-pixel color gradients
    into per-vertex color gradients. Accumulation order is corner-major,
    covered pixels in row-major order within each corner."""
    acc = np.zeros((n_vertices, 3))
    ys, xs = np.nonzero(face_idx >= 0)
    if len(ys) == 0:
        return acc
    tri = faces[face_idx[ys, xs]]
    b = bary[ys, xs]
    g = grad[ys, xs]
    for k in range(3):
        np.add.at(acc, tri[:, k], b[:, k, None] * g)
    return acc
