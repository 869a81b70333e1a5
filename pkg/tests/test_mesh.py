import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hproxy.fixtures import icosphere
from hproxy.mesh import (
    Mesh,
    chamfer_distance,
    compute_vertex_normals,
    normalize_to_cube,
    sample_surface,
)


def brute_force_chamfer(a, b):
    """Independent O(n^2) oracle: symmetric sum of means of squared NN distances."""
    d_ab = []
    for p in a:
        d_ab.append(min(sum((p[i] - q[i]) ** 2 for i in range(3)) for q in b))
    d_ba = []
    for q in b:
        d_ba.append(min(sum((p[i] - q[i]) ** 2 for i in range(3)) for p in a))
    return sum(d_ab) / len(d_ab) + sum(d_ba) / len(d_ba)


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


class TestNormalizeToCube:
    def test_unit_cube_spans_cube(self):
        mesh = Mesh(np.array([[0, 0, 0], [1, 1, 1], [1, 0, 0], [0, 1, 1]]), np.array([[0, 1, 2], [0, 1, 3]]))
        out, _ = normalize_to_cube(mesh)
        assert np.allclose(out.vertices.min(axis=0), -0.9)
        assert np.allclose(out.vertices.max(axis=0), 0.9)

    def test_idempotent(self):
        mesh, _ = normalize_to_cube(icosphere(1))
        again, t = normalize_to_cube(mesh)
        assert np.allclose(again.vertices, mesh.vertices, atol=1e-9)
        assert abs(t.scale - 1.0) < 1e-9

    def test_aspect_preserved(self):
        verts = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [2, 1, 1]], dtype=float)
        mesh = Mesh(verts, np.array([[0, 1, 2], [1, 2, 3]]))
        out, _ = normalize_to_cube(mesh)
        assert np.allclose(out.vertices[:, 0].min(), -0.9)
        assert np.allclose(out.vertices[:, 0].max(), 0.9)
        assert np.allclose(out.vertices[:, 1].min(), -0.45)
        assert np.allclose(out.vertices[:, 1].max(), -0.45 + 0.9)

    @given(st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=30, deadline=None)
    def test_scale_equivariant(self, s):
        base = icosphere(1)
        out1, _ = normalize_to_cube(base)
        scaled = Mesh(base.vertices * s, base.faces)
        out2, _ = normalize_to_cube(scaled)
        assert np.allclose(out1.vertices, out2.vertices, atol=1e-9)

    def test_inverse_roundtrip(self):
        mesh = icosphere(1)
        out, t = normalize_to_cube(mesh)
        assert np.allclose(t.invert(out.vertices), mesh.vertices, atol=1e-9)

    def test_degenerate_mesh_rejected(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
        with pytest.raises(ValueError, match="degenerate"):
            normalize_to_cube(mesh)


class TestVertexNormals:
    def test_flat_square(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 2, 3]])
        normals = compute_vertex_normals(Mesh(verts, faces))
        assert np.allclose(normals, [0, 0, 1])

    def test_single_triangle_plane_x(self):
        verts = np.array([[0, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        normals = compute_vertex_normals(Mesh(verts, np.array([[0, 1, 2]])))
        assert np.allclose(normals, [1, 0, 0])

    def test_icosphere_radial(self):
        mesh = icosphere(3)
        normals = compute_vertex_normals(mesh)
        radial = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        cosang = np.einsum("ij,ij->i", normals, radial)
        assert np.degrees(np.arccos(np.clip(cosang, -1, 1))).max() < 5.0

    def test_rotation_equivariant(self, rng):
        mesh = icosphere(2)
        n0 = compute_vertex_normals(mesh)
        for _ in range(5):
            rot = rotation_matrix(rng.normal(size=3), rng.uniform(0, np.pi))
            rotated = Mesh(mesh.vertices @ rot.T, mesh.faces)
            n1 = compute_vertex_normals(rotated)
            assert np.allclose(n1, n0 @ rot.T, atol=1e-9)

    def test_unit_length(self):
        normals = compute_vertex_normals(icosphere(2))
        assert np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)

    def test_zero_area_faces_ignored(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 2, 3], [1, 1, 1]])
        normals = compute_vertex_normals(Mesh(verts, faces))
        assert np.allclose(normals, [0, 0, 1])


class TestSampleSurface:
    def test_points_in_plane(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        pts = sample_surface(Mesh(verts, np.array([[0, 1, 2]])), 1000, seed=0)
        assert np.abs(pts[:, 2]).max() < 1e-7
        # inside the triangle: barycentric coords non-negative
        assert (pts[:, 0] >= -1e-12).all() and (pts[:, 1] >= -1e-12).all()
        assert (pts[:, 0] + pts[:, 1] <= 1 + 1e-12).all()

    def test_area_proportional(self):
        # two triangles with area ratio 9:1; binomial oracle at +-3 sigma
        verts = np.array(
            [[0, 0, 0], [9, 0, 0], [0, 2, 0], [10, 0, 0], [11, 0, 0], [10, 2, 0]], dtype=float
        )
        mesh = Mesh(verts, np.array([[0, 1, 2], [3, 4, 5]]))
        n = 10000
        pts = sample_surface(mesh, n, seed=42)
        in_big = pts[:, 0] < 9.5
        p = 0.9
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(in_big.sum() - n * p) < 3 * sigma

    def test_deterministic(self):
        mesh = icosphere(1)
        a = sample_surface(mesh, 500, seed=7)
        b = sample_surface(mesh, 500, seed=7)
        assert np.array_equal(a, b)

    def test_zero_area_error(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
        with pytest.raises(ValueError, match="zero surface area"):
            sample_surface(mesh, 10, seed=0)


class TestChamferDistance:
    def test_identity_zero(self, rng):
        a = rng.normal(size=(40, 3))
        assert chamfer_distance(a, a) == 0.0

    def test_analytic_pair(self):
        assert abs(chamfer_distance([[0, 0, 0]], [[1, 0, 0]]) - 2.0) < 1e-15

    def test_matches_brute_force(self, rng):
        a = rng.normal(size=(50, 3))
        b = rng.normal(size=(50, 3)) + 0.3
        assert abs(chamfer_distance(a, b) - brute_force_chamfer(a, b)) < 1e-12

    @given(st.integers(min_value=1, max_value=30), st.integers(min_value=1, max_value=30), st.integers())
    @settings(max_examples=25, deadline=None)
    def test_symmetric(self, na, nb, seed):
        r = np.random.default_rng(seed % (2**32))
        a = r.normal(size=(na, 3))
        b = r.normal(size=(nb, 3))
        assert chamfer_distance(a, b) == pytest.approx(chamfer_distance(b, a), abs=1e-15)

    def test_empty_error(self):
        with pytest.raises(ValueError):
            chamfer_distance(np.zeros((0, 3)), np.ones((3, 3)))


class TestMeshValidate:
    def test_face_index_out_of_range(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))
        with pytest.raises(ValueError, match="face 0"):
            mesh.validate()

    def test_color_range(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]), colors=np.full((3, 3), 1.5))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            mesh.validate()
