"""Procedural test meshes and deterministic vertex-color patterns.

The icosphere at 3 subdivisions has 642 vertices / 1280 faces and is the
workhorse fixture for training and editing tests.
"""

import math

import numpy as np

from .mesh import Mesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> Mesh:
    """Icosahedron subdivided ``subdivisions`` times, vertices on the sphere."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return Mesh(verts * radius, faces)


def _subdivide(verts: np.ndarray, faces: np.ndarray):
    verts = list(map(tuple, verts))
    cache: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            va = np.array(verts[a])
            vb = np.array(verts[b])
            verts.append(tuple((va + vb) / 2.0))
            cache[key] = len(verts) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab = midpoint(a, b)
        bc = midpoint(b, c)
        ca = midpoint(c, a)
        out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts, dtype=np.float64), np.array(out, dtype=np.int64)


def torus(major_segments: int = 24, minor_segments: int = 12, major_radius: float = 1.0, minor_radius: float = 0.35) -> Mesh:
    """Standard torus grid mesh."""
    verts = []
    for i in range(major_segments):
        u = 2.0 * math.pi * i / major_segments
        for j in range(minor_segments):
            v = 2.0 * math.pi * j / minor_segments
            r = major_radius + minor_radius * math.cos(v)
            verts.append([r * math.cos(u), minor_radius * math.sin(v), r * math.sin(u)])
    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a = i * minor_segments + j
            b = ((i + 1) % major_segments) * minor_segments + j
            c = ((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments
            d = i * minor_segments + (j + 1) % minor_segments
            faces += [[a, b, c], [a, c, d]]
    return Mesh(np.array(verts), np.array(faces, dtype=np.int64))


def cube(grid: int = 4, size: float = 1.0) -> Mesh:
    """Axis-aligned cube with each face split into a grid x grid quad mesh."""
    verts: list[tuple[float, float, float]] = []
    index: dict[tuple[float, float, float], int] = {}
    faces = []

    def vid(p) -> int:
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    h = size / 2.0
    axes = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    for ax, u_ax, v_ax in axes:
        for sign in (-1.0, 1.0):
            for i in range(grid):
                for j in range(grid):
                    corners = []
                    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0.0, 0.0, 0.0]
                        p[ax] = sign * h
                        p[u_ax] = -h + size * (i + du) / grid
                        p[v_ax] = -h + size * (j + dv) / grid
                        corners.append(vid(p))
                    a, b, c, d = corners
                    if sign > 0:
                        faces += [[a, b, c], [a, c, d]]
                    else:
                        faces += [[a, c, b], [a, d, c]]
    return Mesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))


def band_colors(mesh: Mesh, bands: int = 3, axis: int = 2) -> np.ndarray:
    """Hard color bands along one axis.

    Band of vertex v: floor(bands * (v[axis] - lo) / (hi - lo)) clamped to
    [0, bands-1], colored from a fixed palette (cycled when bands > 6).
    """
    palette = np.array(
        [
            [0.85, 0.15, 0.15],
            [0.15, 0.75, 0.25],
            [0.15, 0.25, 0.85],
            [0.9, 0.8, 0.1],
            [0.7, 0.2, 0.8],
            [0.1, 0.8, 0.8],
        ]
    )
    coord = mesh.vertices[:, axis]
    lo, hi = coord.min(), coord.max()
    span = hi - lo if hi > lo else 1.0
    idx = np.clip((bands * (coord - lo) / span).astype(int), 0, bands - 1)
    return palette[idx % len(palette)]


def gradient_colors(mesh: Mesh) -> np.ndarray:
    """Smooth RGB ramp: channels are the vertex coordinates rescaled to [0, 1]."""
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (mesh.vertices - lo) / span


def fixture_mesh(name: str, colors: str = "bands") -> Mesh:
    """Named fixture with optional procedural colors: icosphere | torus | cube."""
    if name == "icosphere":
        mesh = icosphere(3)
    elif name == "torus":
        mesh = torus()
    elif name == "cube":
        mesh = cube()
    else:
        raise ValueError(f"unknown fixture {name!r}")
    if colors == "bands":
        mesh.colors = band_colors(mesh)
    elif colors == "gradient":
        mesh.colors = gradient_colors(mesh)
    elif colors != "none":
        raise ValueError(f"unknown color pattern {colors!r}")
    return mesh
