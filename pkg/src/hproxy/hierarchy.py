"""Multi-level proxy-point hierarchy: octree cell partitioning, plane fitting, clustering.

Level 1 holds the mesh vertices. Clustering from level l to l+1 assigns
points to an octree grid at resolution 2^(R-l+1), fits a plane center per
non-empty cell, and either merges the cell into one proxy (fit residual
within threshold) or promotes every member unchanged.
"""

import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .container import PayloadReader, PayloadWriter, read_container, write_container
from .mesh import Mesh, compute_vertex_normals

HIERARCHY_MAGIC = b"HPXH"
HIERARCHY_VERSION = 1


@dataclass
class HierarchyConfig:
    """Construction parameters. Defaults: 3 levels, max grid resolution 2^7 = 128,
    clustering error threshold 5.0, grid domain [-1, 1]^3."""

    levels: int = 3
    max_resolution_exponent: int = 7
    error_threshold: float = 5.0
    domain_min: float = -1.0
    domain_max: float = 1.0
    rank_tolerance: float = 1e-8

    def validate(self) -> None:
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.max_resolution_exponent < 1:
            raise ValueError("max_resolution_exponent must be >= 1")
        if self.error_threshold < 0:
            raise ValueError("error_threshold must be non-negative")
        if self.domain_max <= self.domain_min:
            raise ValueError("grid domain must have positive extent")
        if self.resolution_for(self.levels - 1) < 1:
            raise ValueError("resolution schedule underflows: need 2^(R-l+1) >= 1 for l < L")

    def resolution_for(self, level: int) -> int:
        """Grid resolution used when clustering level l into level l+1."""
        return 2 ** (self.max_resolution_exponent - level + 1)


class ProxyPoint(NamedTuple):
    """Single proxy point view: position, unit normal, level, parent index
    into the next level (None at the top level), and the fitting residual
    that produced it (0 for promoted and bottom-level points)."""

    position: np.ndarray
    normal: np.ndarray
    level: int
    parent: Optional[int]
    residual: float


@dataclass
class ProxyLevel:
    """One hierarchy level as flat arrays: positions (n,3), normals (n,3),
    parents (n,) indexing the level above (-1 at the top), residuals (n,)."""

    level: int
    positions: np.ndarray
    normals: np.ndarray
    parents: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    def point(self, i: int) -> ProxyPoint:
        parent = int(self.parents[i])
        return ProxyPoint(
            self.positions[i].copy(),
            self.normals[i].copy(),
            self.level,
            None if parent < 0 else parent,
            float(self.residuals[i]),
        )

    def copy(self) -> "ProxyLevel":
        return ProxyLevel(
            self.level,
            self.positions.copy(),
            self.normals.copy(),
            self.parents.copy(),
            self.residuals.copy(),
        )


@dataclass
class ProxyHierarchy:
    """L proxy levels (level 1 first) plus per-transition children lists.

    children[t][j] lists the level-(t+1) indices proxied by point j of level
    t+2 (0-based list indexing; levels are 1-based). ``dirty`` marks level-1
    positions edited after construction; levels >= 2 are then stale.
    """

    levels: list
    children: list
    config: HierarchyConfig
    dirty: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level(self, l: int) -> ProxyLevel:
        if l < 1 or l > self.n_levels:
            raise ValueError(f"level {l} out of range [1, {self.n_levels}]")
        return self.levels[l - 1]

    def level_sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    def merge_rates(self) -> list[float]:
        """Fraction of points absorbed at each transition: 1 - n_{l+1}/n_l."""
        sizes = self.level_sizes()
        return [1.0 - sizes[i + 1] / sizes[i] for i in range(len(sizes) - 1)]

    def descendants(self, level: int, index: int) -> np.ndarray:
        """Sorted level-1 vertex indices in the subtree of point ``index`` at ``level``."""
        if level < 1 or level > self.n_levels:
            raise ValueError(f"level {level} out of range")
        if index < 0 or index >= len(self.levels[level - 1]):
            raise ValueError(f"point index {index} out of range at level {level}")
        frontier = np.array([index], dtype=np.int64)
        for t in range(level - 2, -1, -1):
            frontier = np.concatenate([self.children[t][j] for j in frontier]) if len(frontier) else frontier
        return np.sort(frontier)

    def copy(self) -> "ProxyHierarchy":
        return ProxyHierarchy(
            [lv.copy() for lv in self.levels],
            [[c.copy() for c in trans] for trans in self.children],
            replace(self.config),
            self.dirty,
            dict(self.diagnostics),
        )


def assign_to_grid(points: np.ndarray, resolution: int, domain: tuple[float, float] = (-1.0, 1.0)) -> dict:
    """Group point indices by octree grid cell.

    Cell of p is floor((p - lo) / cell_size) per axis, clamped so points on
    the upper boundary land in the last cell. Keys are (i, j, k) tuples in
    lexicographic order; only non-empty cells appear.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    lo, hi = float(domain[0]), float(domain[1])
    outside = (points < lo) | (points > hi)
    if outside.any():
        bad = int(np.nonzero(outside.any(axis=1))[0][0])
        raise ValueError(f"point {bad} at {points[bad].tolist()} lies outside the grid domain [{lo}, {hi}]^3")
    cell_size = (hi - lo) / resolution
    cells = np.floor((points - lo) / cell_size).astype(np.int64)
    np.clip(cells, 0, resolution - 1, out=cells)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    out: dict[tuple[int, int, int], np.ndarray] = {}
    sorted_cells = cells[order]
    boundaries = np.nonzero(np.any(np.diff(sorted_cells, axis=0) != 0, axis=1))[0] + 1
    for chunk in np.split(order, boundaries):
        key = tuple(int(x) for x in cells[chunk[0]])
        out[key] = np.sort(chunk)
    return out


def fit_plane_center(points: np.ndarray, normals: np.ndarray, rank_tolerance: float = 1e-8) -> tuple[np.ndarray, float]:
    """Least-squares plane-intersection center for a point/normal cluster.

    Minimizes sum_k (n_k . c - n_k . p_k)^2 via the 3x3 normal equations
    A c = b, A = sum n n^T, b = sum n (n . p). Eigendirections of A with
    eigenvalue <= rank_tolerance * lambda_max are unconstrained by the
    objective; those components are pinned to the member centroid's
    projection. Returns (center, objective value at center).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0 or len(points) != len(normals):
        raise ValueError("points and normals must be non-empty and equal length")
    if len(points) == 1:
        return points[0].copy(), 0.0
    ndotp = np.einsum("ij,ij->i", normals, points)
    A = normals.T @ normals
    b = normals.T @ ndotp
    evals, evecs = np.linalg.eigh(A)
    lam_max = evals[-1]
    centroid = points.mean(axis=0)
    coeffs = np.empty(3)
    for i in range(3):
        if evals[i] <= rank_tolerance * lam_max:
            coeffs[i] = evecs[:, i] @ centroid
        else:
            coeffs[i] = (evecs[:, i] @ b) / evals[i]
    center = evecs @ coeffs
    residual = float(np.sum((normals @ center - ndotp) ** 2))
    return center, residual


def build_next_level(
    level: ProxyLevel,
    resolution: int,
    error_threshold: float,
    domain: tuple[float, float] = (-1.0, 1.0),
    rank_tolerance: float = 1e-8,
) -> tuple[ProxyLevel, list, int]:
    """Cluster one level into the next.

    Per non-empty cell: fit a plane center; if the residual is within the
    threshold (and the center stays within one cell of its cell, inside the
    domain) emit a single merged proxy (normal = normalized mean of member
    normals), otherwise promote every member as its own proxy. Returns the
    new level, the per-new-point children lists, and a diagnostics dict
    (antipodal normal fallbacks, locality rejections). Sets
    ``level.parents`` in place.
    """
    grid = assign_to_grid(level.positions, resolution, domain)
    lo, hi = float(domain[0]), float(domain[1])
    cell_size = (hi - lo) / resolution
    positions: list[np.ndarray] = []
    normals: list[np.ndarray] = []
    residuals: list[float] = []
    children: list[np.ndarray] = []
    parents = np.full(len(level), -1, dtype=np.int64)
    fallbacks = 0
    locality_rejections = 0
    for cell, members in grid.items():
        pts = level.positions[members]
        nrm = level.normals[members]
        center, residual = fit_plane_center(pts, nrm, rank_tolerance)
        accept = residual <= error_threshold
        if accept and len(members) > 1:
            # the unconstrained minimizer can fly to the local curvature
            # center; a center farther than one cell from its cell (or out
            # of the domain) cannot stand in for the cell, so reject
            cell_lo = lo + np.array(cell) * cell_size
            if (
                (center < cell_lo - cell_size).any()
                or (center > cell_lo + 2.0 * cell_size).any()
                or (center < lo).any()
                or (center > hi).any()
            ):
                accept = False
                locality_rejections += 1
        if accept:
            mean_n = nrm.mean(axis=0)
            norm = np.linalg.norm(mean_n)
            if norm < 1e-8:  # antipodal cancellation
                mean_n = nrm[0].copy()
                fallbacks += 1
            else:
                mean_n = mean_n / norm
            idx = len(positions)
            positions.append(center)
            normals.append(mean_n)
            residuals.append(residual)
            children.append(members.copy())
            parents[members] = idx
        else:
            for m in members:
                idx = len(positions)
                positions.append(level.positions[m].copy())
                normals.append(level.normals[m].copy())
                residuals.append(0.0)
                children.append(np.array([m], dtype=np.int64))
                parents[m] = idx
    level.parents = parents
    new_level = ProxyLevel(
        level.level + 1,
        np.array(positions).reshape(-1, 3),
        np.array(normals).reshape(-1, 3),
        np.full(len(positions), -1, dtype=np.int64),
        np.array(residuals, dtype=np.float64),
    )
    return new_level, children, {"normal_fallbacks": fallbacks, "locality_rejections": locality_rejections}


def build_hierarchy(mesh: Mesh, config: Optional[HierarchyConfig] = None) -> ProxyHierarchy:
    """Build the full L-level hierarchy from a normalized mesh.

    Level 1 is the mesh vertices with their normals (estimated when the mesh
    carries none). Deterministic: identical input and config give
    bit-identical hierarchies.
    """
    config = config or HierarchyConfig()
    config.validate()
    if mesh.n_vertices == 0:
        raise ValueError("mesh has no vertices")
    normals = mesh.normals if mesh.normals is not None else compute_vertex_normals(mesh)
    base = ProxyLevel(
        1,
        mesh.vertices.copy(),
        np.asarray(normals, dtype=np.float64).copy(),
        np.full(mesh.n_vertices, -1, dtype=np.int64),
        np.zeros(mesh.n_vertices),
    )
    levels = [base]
    children = []
    fallbacks = []
    rejections = []
    domain = (config.domain_min, config.domain_max)
    for l in range(1, config.levels):
        nxt, kids, diag = build_next_level(
            levels[-1], config.resolution_for(l), config.error_threshold, domain, config.rank_tolerance
        )
        levels.append(nxt)
        children.append(kids)
        fallbacks.append(diag["normal_fallbacks"])
        rejections.append(diag["locality_rejections"])
    h = ProxyHierarchy(levels, children, config)
    h.diagnostics = {
        "normal_fallbacks": fallbacks,
        "locality_rejections": rejections,
        "merge_rates": h.merge_rates(),
        "level_sizes": h.level_sizes(),
    }
    return h


def save_hierarchy(h: ProxyHierarchy, path) -> None:
    """Write the hierarchy as a versioned, checksummed binary container."""
    w = PayloadWriter()
    cfg = h.config
    w.scalar("I", cfg.levels).scalar("I", cfg.max_resolution_exponent)
    w.scalar("d", cfg.error_threshold).scalar("d", cfg.domain_min).scalar("d", cfg.domain_max)
    w.scalar("d", cfg.rank_tolerance).scalar("B", 1 if h.dirty else 0)
    for lv in h.levels:
        w.scalar("Q", len(lv))
        w.array(lv.positions, "<f8").array(lv.normals, "<f8")
        w.array(lv.parents, "<i8").array(lv.residuals, "<f8")
    for trans in h.children:
        w.scalar("Q", len(trans))
        offsets = np.zeros(len(trans) + 1, dtype=np.int64)
        for j, kids in enumerate(trans):
            offsets[j + 1] = offsets[j] + len(kids)
        w.array(offsets, "<i8")
        w.array(np.concatenate(trans) if trans else np.empty(0, dtype=np.int64), "<i8")
    for nfall in h.diagnostics.get("normal_fallbacks", [0] * (cfg.levels - 1)):
        w.scalar("Q", nfall)
    write_container(path, HIERARCHY_MAGIC, HIERARCHY_VERSION, w.bytes())


def load_hierarchy(path) -> ProxyHierarchy:
    """Load a hierarchy container; the config is carried by the file."""
    _, payload = read_container(path, HIERARCHY_MAGIC, HIERARCHY_VERSION)
    r = PayloadReader(payload)
    cfg = HierarchyConfig(
        levels=r.scalar("I"),
        max_resolution_exponent=r.scalar("I"),
        error_threshold=r.scalar("d"),
        domain_min=r.scalar("d"),
        domain_max=r.scalar("d"),
        rank_tolerance=r.scalar("d"),
    )
    dirty = bool(r.scalar("B"))
    levels = []
    for l in range(1, cfg.levels + 1):
        n = r.scalar("Q")
        levels.append(
            ProxyLevel(
                l,
                r.array(n * 3, "<f8").reshape(n, 3),
                r.array(n * 3, "<f8").reshape(n, 3),
                r.array(n, "<i8"),
                r.array(n, "<f8"),
            )
        )
    children = []
    for _ in range(cfg.levels - 1):
        n = r.scalar("Q")
        offsets = r.array(n + 1, "<i8")
        flat = r.array(int(offsets[-1]), "<i8")
        children.append([flat[offsets[j] : offsets[j + 1]].copy() for j in range(n)])
    fallbacks = [int(r.scalar("Q")) for _ in range(cfg.levels - 1)]
    h = ProxyHierarchy(levels, children, cfg, dirty)
    h.diagnostics = {
        "normal_fallbacks": fallbacks,
        "merge_rates": h.merge_rates(),
        "level_sizes": h.level_sizes(),
    }
    return h


def hierarchy_debug_json(h: ProxyHierarchy) -> str:
    """Human-readable JSON export. Debug only: floats may lose precision past
    repr round-trip; the binary container is the authoritative format."""
    doc = {
        "debug_only": True,
        "config": {
            "levels": h.config.levels,
            "max_resolution_exponent": h.config.max_resolution_exponent,
            "error_threshold": h.config.error_threshold,
            "domain": [h.config.domain_min, h.config.domain_max],
            "rank_tolerance": h.config.rank_tolerance,
        },
        "dirty": h.dirty,
        "level_sizes": h.level_sizes(),
        "merge_rates": h.merge_rates(),
        "levels": [
            {
                "level": lv.level,
                "positions": lv.positions.tolist(),
                "normals": lv.normals.tolist(),
                "parents": lv.parents.tolist(),
                "residuals": lv.residuals.tolist(),
            }
            for lv in h.levels
        ],
        "children": [[kids.tolist() for kids in trans] for trans in h.children],
    }
    return json.dumps(doc, indent=1)
