"""Triangle mesh data model, normalization, normals, sampling and Chamfer distance."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class Mesh:
    """Triangle mesh with optional per-vertex RGB colors and unit normals.

    vertices: (n, 3) float64, faces: (m, 3) int64 indexing vertices,
    colors: (n, 3) in [0, 1] or None, normals: (n, 3) unit vectors or None.
    """

    vertices: np.ndarray
    faces: np.ndarray
    colors: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def validate(self) -> None:
        """Raise ValueError on any violated invariant."""
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= self.n_vertices):
            bad = int(np.nonzero((self.faces < 0) | (self.faces >= self.n_vertices))[0][0])
            raise ValueError(
                f"face {bad} references vertex index out of range "
                f"(indices {self.faces[bad].tolist()}, {self.n_vertices} vertices)"
            )
        if self.colors is not None:
            if len(self.colors) != self.n_vertices:
                raise ValueError(f"{len(self.colors)} colors for {self.n_vertices} vertices")
            if self.colors.min() < 0.0 or self.colors.max() > 1.0:
                raise ValueError("vertex colors must lie in [0, 1]")
        if self.normals is not None:
            if len(self.normals) != self.n_vertices:
                raise ValueError(f"{len(self.normals)} normals for {self.n_vertices} vertices")
            err = np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)
            if err.size and err.max() > 1e-6:
                raise ValueError("vertex normals must have unit length (1e-6)")

    def copy(self) -> "Mesh":
        return Mesh(
            self.vertices.copy(),
            self.faces.copy(),
            None if self.colors is None else self.colors.copy(),
            None if self.normals is None else self.normals.copy(),
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass
class NormalizationTransform:
    """Uniform scale + translation: forward(v) = scale * v + translation."""

    scale: float
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.translation

    def invert(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) / self.scale


def normalize_to_cube(mesh: Mesh, half_extent: float = 0.9) -> tuple[Mesh, NormalizationTransform]:
    """Uniformly scale and translate the mesh into [-half_extent, half_extent]^3.

    The bounding-box center maps to the origin and the aspect ratio is
    preserved (one scale factor for all axes).
    """
    if mesh.n_vertices == 0:
        raise ValueError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    half = (hi - lo) / 2.0
    m = float(half.max())
    if m <= 0.0:
        raise ValueError("degenerate mesh: bounding box has zero extent")
    center = (lo + hi) / 2.0
    scale = half_extent / m
    transform = NormalizationTransform(scale=scale, translation=-scale * center)
    out = mesh.copy()
    out.vertices = transform.apply(mesh.vertices)
    return out, transform


def compute_vertex_normals(mesh: Mesh) -> np.ndarray:
    """Per-vertex unit normals as the normalized area-weighted sum of incident face normals.

    Zero-area faces contribute nothing; vertices with no (effective) incident
    area get (0, 0, 1).
    """
    if mesh.n_faces == 0:
        raise ValueError("mesh has no faces")
    v = mesh.vertices
    f = mesh.faces
    tri = v[f]
    # cross product length = 2 * face area, so this sum is area-weighted
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    acc = np.zeros_like(v)
    for k in range(3):
        np.add.at(acc, f[:, k], fn)
    norms = np.linalg.norm(acc, axis=1)
    out = np.zeros_like(acc)
    ok = norms > 1e-12
    out[ok] = acc[ok] / norms[ok, None]
    out[~ok] = (0.0, 0.0, 1.0)
    return out


def surface_areas(mesh: Mesh) -> np.ndarray:
    """Per-face triangle areas."""
    tri = mesh.vertices[mesh.faces]
    return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)


def sample_surface(mesh: Mesh, n: int, seed: int = 0) -> np.ndarray:
    """Sample n points area-uniformly from the surface, deterministic per seed."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    areas = surface_areas(mesh)
    total = areas.sum()
    if total <= 0.0:
        raise ValueError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(mesh.n_faces, size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[face_idx]]
    return tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric L2 Chamfer distance between two point sets.

    Sum of the two directed terms, each the mean squared distance from one
    set to its nearest neighbor in the other.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer_distance requires non-empty point sets")
    d_ab = cKDTree(b).query(a, k=1)[0]
    d_ba = cKDTree(a).query(b, k=1)[0]
    return float(np.mean(d_ab**2) + np.mean(d_ba**2))
