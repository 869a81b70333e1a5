"""Multi-scale geometry editing and proxy feature transfer.

A drag of proxy point i at level l displaces each in-scope vertex j by
w * delta with w = exp(-||p_j - p_i|| / tau), then a Laplacian solve with
soft position constraints smooths the result. Texture transfer rigidly
aligns two same-level proxy regions and interpolates source features onto
target proxies by inverse-distance weighting.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg
from scipy.spatial import cKDTree

from .hierarchy import ProxyHierarchy
from .mesh import Mesh
from .texture import TextureModel


class SolverError(RuntimeError):
    """Iterative solve failed; carries the achieved relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved relative residual {residual:.3e})")
        self.residual = residual


class ScriptError(ValueError):
    """Edit-script parse failure with its 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class RigidTransform:
    """rotation (3,3) with det +1, translation (3,): x -> R x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass
class DragEdit:
    """Drag of one proxy point: level, index, displacement, falloff temperature,
    scope (descendant subtree or all vertices), and the weight cutoff below
    which vertices are left unconstrained."""

    level: int
    point_index: int
    displacement: np.ndarray
    tau: float = 1.0
    scope: str = "subtree"
    weight_cutoff: float = 1e-3

    def __post_init__(self):
        self.displacement = np.asarray(self.displacement, dtype=np.float64).reshape(3)

    def validate(self, hierarchy: ProxyHierarchy) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.scope not in ("subtree", "global"):
            raise ValueError(f"unknown scope {self.scope!r}")
        if not (0.0 <= self.weight_cutoff < 1.0):
            raise ValueError("weight_cutoff must lie in [0, 1)")
        if self.level < 1 or self.level > hierarchy.n_levels:
            raise ValueError(f"level {self.level} out of range")
        if not (0 <= self.point_index < len(hierarchy.levels[self.level - 1])):
            raise ValueError(f"point index {self.point_index} out of range at level {self.level}")


@dataclass
class TransferEdit:
    """Feature transfer between two same-level proxy regions."""

    level: int
    source_indices: np.ndarray
    target_indices: np.ndarray
    k_neighbors: int = 4
    transform: Optional[RigidTransform] = None  # None -> auto Kabsch alignment

    def __post_init__(self):
        self.source_indices = np.asarray(self.source_indices, dtype=np.int64).reshape(-1)
        self.target_indices = np.asarray(self.target_indices, dtype=np.int64).reshape(-1)

    def validate(self, hierarchy: ProxyHierarchy) -> None:
        if self.level < 1 or self.level > hierarchy.n_levels:
            raise ValueError(f"level {self.level} out of range")
        n = len(hierarchy.levels[self.level - 1])
        if len(self.source_indices) == 0 or len(self.target_indices) == 0:
            raise ValueError("source and target index sets must be non-empty")
        for name, idx in (("source", self.source_indices), ("target", self.target_indices)):
            if idx.min() < 0 or idx.max() >= n:
                raise ValueError(f"{name} indices out of range at level {self.level}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


def edit_weights(hierarchy: ProxyHierarchy, edit: DragEdit) -> dict:
    """Influence weight per bottom-level vertex: w = exp(-d / tau).

    d is the distance from the vertex to the dragged proxy's (pre-edit)
    position. Scope 'subtree' restricts support to the proxy's descendants;
    weights below the cutoff are dropped. Keys ascend.
    """
    edit.validate(hierarchy)
    proxy_pos = hierarchy.levels[edit.level - 1].positions[edit.point_index]
    if edit.scope == "subtree":
        vert_idx = hierarchy.descendants(edit.level, edit.point_index)
    else:
        vert_idx = np.arange(len(hierarchy.levels[0]))
    verts = hierarchy.levels[0].positions[vert_idx]
    d = np.linalg.norm(verts - proxy_pos, axis=1)
    w = np.exp(-d / edit.tau)
    keep = w >= edit.weight_cutoff
    return {int(j): float(wj) for j, wj in zip(vert_idx[keep], w[keep])}


def apply_drag_targets(mesh: Mesh, hierarchy: ProxyHierarchy, edit: DragEdit) -> dict:
    """Target position per weighted vertex: p_j + w_j * delta."""
    weights = edit_weights(hierarchy, edit)
    return {j: mesh.vertices[j] + w * edit.displacement for j, w in weights.items()}


def _uniform_laplacian(mesh: Mesh) -> sparse.csr_matrix:
    """Combinatorial graph Laplacian D - A over the mesh edge graph."""
    f = mesh.faces
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    und = np.sort(pairs, axis=1)
    und = np.unique(und, axis=0)
    n = mesh.n_vertices
    i = np.concatenate([und[:, 0], und[:, 1]])
    j = np.concatenate([und[:, 1], und[:, 0]])
    adj = sparse.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return sparse.diags(deg) - adj


def laplacian_solve(
    mesh: Mesh,
    soft_constraints: dict,
    constraint_strength: float = 10.0,
    rtol: float = 1e-8,
    maxiter: Optional[int] = None,
) -> np.ndarray:
    """Deform vertices to meet soft position constraints while preserving
    uniform-Laplacian differential coordinates.

    Minimizes ||L V' - L V||^2 + strength * sum_j w_j ||v'_j - t_j||^2 via
    conjugate gradients on the normal equations, one coordinate at a time,
    to relative residual <= rtol. soft_constraints maps vertex -> (target,
    weight). No constraints returns the input exactly.
    """
    v = mesh.vertices
    if not soft_constraints:
        return v.copy()
    n = mesh.n_vertices
    lap = _uniform_laplacian(mesh)
    lap_t = lap.T.tocsr()
    normal_mat = (lap_t @ lap).tocsr()
    wdiag = np.zeros(n)
    targets = np.zeros((n, 3))
    for j, (target, weight) in soft_constraints.items():
        if not (0 <= j < n):
            raise ValueError(f"constrained vertex {j} out of range")
        wdiag[j] = constraint_strength * weight
        targets[j] = np.asarray(target, dtype=np.float64)
    system = normal_mat + sparse.diags(wdiag)
    delta = lap_t @ (lap @ v)
    out = np.empty_like(v)
    if maxiter is None:
        maxiter = max(2000, 20 * n)
    for c in range(3):
        b = delta[:, c] + wdiag * targets[:, c]
        x, info = cg(system, b, x0=v[:, c].copy(), rtol=rtol, atol=0.0, maxiter=maxiter)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(b - system @ x) / bnorm if bnorm > 0 else 0.0
        if info != 0 or res > rtol:
            raise SolverError(f"Laplacian CG did not converge on coordinate {c}", res)
        out[:, c] = x
    return out


def apply_edit(
    mesh: Mesh,
    hierarchy: ProxyHierarchy,
    edit: DragEdit,
    constraint_strength: float = 10.0,
    anchor_weight: float = 0.1,
) -> tuple[Mesh, ProxyHierarchy]:
    """Full drag: influence weights -> displaced targets -> Laplacian solve.

    For subtree scope, vertices outside the weighted support get weak
    anchors at their current positions; the smoothness term alone has a
    translation null space, and anchoring realizes the part-aware locality
    of subtree drags.

    Pure: returns a new mesh and a hierarchy copy whose level-1 positions
    are the solved vertices. Higher levels are left stale and the hierarchy
    is flagged dirty (rebuild before further level-aware construction).
    """
    weights = edit_weights(hierarchy, edit)
    constraints = {
        j: (mesh.vertices[j] + w * edit.displacement, w) for j, w in weights.items()
    }
    if edit.scope == "subtree":
        for j in range(mesh.n_vertices):
            if j not in constraints:
                constraints[j] = (mesh.vertices[j], anchor_weight)
    solved = laplacian_solve(mesh, constraints, constraint_strength)
    out_mesh = mesh.copy()
    out_mesh.vertices = solved
    out_h = hierarchy.copy()
    out_h.levels[0].positions = solved.copy()
    out_h.dirty = True
    return out_mesh, out_h


def kabsch_align(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform (rotation with det +1, translation)
    minimizing sum ||R s_i + t - t_i||^2."""
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(source) != len(target):
        raise ValueError("source and target must have equal counts")
    if len(source) < 3:
        raise ValueError("need at least 3 point pairs")
    sc = source.mean(axis=0)
    tc = target.mean(axis=0)
    h = (source - sc).T @ (target - tc)
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 1e-15 or s[1] <= 1e-12 * s[0]:
        raise ValueError("degenerate (collinear) configuration: rotation is ambiguous")
    d = 1.0 if np.linalg.det(vt.T @ u.T) >= 0 else -1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, tc - rot @ sc)


def transfer_features(
    model: TextureModel, hierarchy: ProxyHierarchy, edit: TransferEdit
) -> TextureModel:
    """Replace target proxies' features with inverse-distance-weighted
    averages of their k nearest source features after rigid alignment.

    Auto alignment pre-aligns by centroid and RMS scale, takes mutual
    nearest neighbors as correspondences (>= 3 required), and solves Kabsch
    on them. A target mapped onto a source exactly (distance < 1e-9) copies
    that source's feature, the limit of the weighting. Only target rows of
    the level's table change.
    """
    edit.validate(hierarchy)
    from .texture import validate_model

    validate_model(model, hierarchy)
    positions = hierarchy.levels[edit.level - 1].positions
    src_pos = positions[edit.source_indices]
    tgt_pos = positions[edit.target_indices]
    transform = edit.transform
    if transform is None:
        transform = _auto_align(src_pos, tgt_pos)
    mapped = transform.apply(tgt_pos)
    k = min(edit.k_neighbors, len(src_pos))
    dist, nn = cKDTree(src_pos).query(mapped, k=k)
    dist = np.atleast_2d(dist.reshape(len(mapped), k))
    nn = np.atleast_2d(nn.reshape(len(mapped), k))
    table = model.features[edit.level - 1]
    src_feats = table[edit.source_indices]
    new_rows = np.empty((len(mapped), table.shape[1]))
    for r in range(len(mapped)):
        if dist[r, 0] < 1e-9:
            new_rows[r] = src_feats[nn[r, 0]]
            continue
        w = 1.0 / (dist[r] + 1e-8)
        w = w / w.sum()
        new_rows[r] = w @ src_feats[nn[r]]
    out = model.copy()
    out.features[edit.level - 1][edit.target_indices] = new_rows
    return out


def _auto_align(src_pos: np.ndarray, tgt_pos: np.ndarray) -> RigidTransform:
    sc = src_pos.mean(axis=0)
    tc = tgt_pos.mean(axis=0)
    s_scale = np.sqrt(np.mean(np.sum((src_pos - sc) ** 2, axis=1)))
    t_scale = np.sqrt(np.mean(np.sum((tgt_pos - tc) ** 2, axis=1)))
    ratio = s_scale / t_scale if t_scale > 1e-12 else 1.0
    pre = (tgt_pos - tc) * ratio + sc
    if len(src_pos) == 1 or len(tgt_pos) == 1:
        # single-point regions: translation-only alignment
        return RigidTransform(np.eye(3), sc - tc)
    nn_ts = cKDTree(src_pos).query(pre, k=1)[1].reshape(-1)
    nn_st = cKDTree(pre).query(src_pos, k=1)[1].reshape(-1)
    mutual = [(t, s) for t, s in enumerate(nn_ts) if nn_st[s] == t]
    if len(mutual) < 3:
        raise ValueError(
            f"auto alignment found only {len(mutual)} mutual-nearest correspondences (need >= 3)"
        )
    t_idx = np.array([t for t, _ in mutual])
    s_idx = np.array([s for _, s in mutual])
    return kabsch_align(tgt_pos[t_idx], src_pos[s_idx])


def format_edit(edit: Union[DragEdit, TransferEdit]) -> str:
    """One edit per line, replayable by the CLI."""
    if isinstance(edit, DragEdit):
        dx, dy, dz = (repr(float(v)) for v in edit.displacement)
        return (
            f"drag {edit.level} {edit.point_index} "
            f"{dx} {dy} {dz} {float(edit.tau)!r} {edit.scope}"
        )
    src = " ".join(str(i) for i in edit.source_indices)
    tgt = " ".join(str(i) for i in edit.target_indices)
    return f"transfer {edit.level} {src} -> {tgt} {edit.k_neighbors}"


def parse_edit_script(text: str) -> list:
    """Parse a line-oriented edit script.

    Grammar (one edit per line, '#' comments):
      drag <level> <index> <dx> <dy> <dz> <tau> <scope>
      transfer <level> <src...> -> <tgt...> <k>
    """
    edits = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "drag":
            if len(tokens) != 8:
                raise ScriptError(lineno, f"drag expects 7 fields, got {len(tokens) - 1}")
            try:
                edits.append(
                    DragEdit(
                        level=int(tokens[1]),
                        point_index=int(tokens[2]),
                        displacement=[float(t) for t in tokens[3:6]],
                        tau=float(tokens[6]),
                        scope=tokens[7],
                    )
                )
            except ValueError as exc:
                raise ScriptError(lineno, str(exc)) from None
            if edits[-1].scope not in ("subtree", "global"):
                raise ScriptError(lineno, f"unknown scope {edits[-1].scope!r}")
        elif tokens[0] == "transfer":
            if "->" not in tokens:
                raise ScriptError(lineno, "transfer needs a '->' separator")
            arrow = tokens.index("->")
            try:
                level = int(tokens[1])
                src = [int(t) for t in tokens[2:arrow]]
                tgt = [int(t) for t in tokens[arrow + 1 : -1]]
                k = int(tokens[-1])
            except (ValueError, IndexError):
                raise ScriptError(lineno, "malformed transfer line") from None
            if not src or not tgt:
                raise ScriptError(lineno, "transfer needs non-empty source and target sets")
            edits.append(TransferEdit(level=level, source_indices=src, target_indices=tgt, k_neighbors=k))
        else:
            raise ScriptError(lineno, f"unknown edit {tokens[0]!r}")
    return edits
