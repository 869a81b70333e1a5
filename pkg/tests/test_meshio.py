import numpy as np
import pytest

from hproxy.fixtures import band_colors, icosphere
from hproxy.mesh import Mesh, compute_vertex_normals
from hproxy.meshio import MeshFormatError, load_mesh, obj_text, save_mesh


SINGLE_TRI_OBJ = """\
v 0.0 0.0 0.0
v 1.0 0.0 0.0
v 0.0 1.0 0.0
f 1 2 3
"""

COLORED_TRI_OBJ = """\
v 0.0 0.0 0.0 1.0 0.0 0.0
v 1.0 0.0 0.0 0.0 1.0 0.0
v 0.0 1.0 0.0 0.0 0.0 1.0
f 1 2 3
"""


class TestObjLoad:
    def test_minimal_triangle(self, tmp_path):
        p = tmp_path / "tri.obj"
        p.write_text(SINGLE_TRI_OBJ)
        mesh = load_mesh(p)
        assert mesh.n_vertices == 3 and mesh.n_faces == 1
        assert mesh.colors is None

    def test_vertex_colors(self, tmp_path):
        p = tmp_path / "tri.obj"
        p.write_text(COLORED_TRI_OBJ)
        mesh = load_mesh(p)
        assert mesh.colors is not None
        assert np.allclose(mesh.colors, np.eye(3))

    def test_face_index_out_of_range_names_face(self, tmp_path):
        p = tmp_path / "bad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 6\n")
        with pytest.raises(ValueError, match="face 0"):
            load_mesh(p)

    def test_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "bad.obj"
        p.write_text("v 0 0 0\nv 1 0 zap\n")
        with pytest.raises(MeshFormatError, match=r"bad\.obj:2"):
            load_mesh(p)

    def test_wrong_float_count_reports_line(self, tmp_path):
        p = tmp_path / "bad.obj"
        p.write_text("v 0 0\n")
        with pytest.raises(MeshFormatError, match=":1"):
            load_mesh(p)

    def test_slash_faces_and_quads(self, tmp_path):
        p = tmp_path / "quad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
        mesh = load_mesh(p)
        assert mesh.n_faces == 2  # fan triangulation


def _roundtrip(mesh, path, **kw):
    save_mesh(mesh, path, **kw)
    return load_mesh(path)


class TestRoundTrips:
    @pytest.fixture()
    def colored_mesh(self):
        mesh = icosphere(1)
        mesh.colors = band_colors(mesh)
        mesh.normals = compute_vertex_normals(mesh)
        return mesh

    def test_obj_roundtrip(self, tmp_path, colored_mesh):
        back = _roundtrip(colored_mesh, tmp_path / "m.obj")
        assert np.array_equal(back.vertices, colored_mesh.vertices)
        assert np.array_equal(back.faces, colored_mesh.faces)
        assert np.array_equal(back.colors, colored_mesh.colors)

    def test_ply_binary_roundtrip(self, tmp_path, colored_mesh):
        back = _roundtrip(colored_mesh, tmp_path / "m.ply", binary=True)
        assert np.array_equal(back.vertices, colored_mesh.vertices)
        assert np.array_equal(back.faces, colored_mesh.faces)
        assert np.array_equal(back.colors, colored_mesh.colors)
        assert np.array_equal(back.normals, colored_mesh.normals)

    def test_ply_ascii_roundtrip(self, tmp_path, colored_mesh):
        back = _roundtrip(colored_mesh, tmp_path / "m.ply", binary=False)
        assert np.array_equal(back.vertices, colored_mesh.vertices)
        assert np.array_equal(back.colors, colored_mesh.colors)

    def test_obj_text_deterministic(self, colored_mesh):
        assert obj_text(colored_mesh) == obj_text(colored_mesh)


class TestPlyLoad:
    def test_uchar_colors_normalized(self, tmp_path):
        p = tmp_path / "c.ply"
        p.write_text(
            "ply\nformat ascii 1.0\n"
            "element vertex 3\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nproperty uchar green\nproperty uchar blue\n"
            "element face 1\nproperty list uchar int vertex_indices\n"
            "end_header\n"
            "0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 255\n"
            "3 0 1 2\n"
        )
        mesh = load_mesh(p)
        assert np.allclose(mesh.colors, np.eye(3))

    def test_not_ply(self, tmp_path):
        p = tmp_path / "x.ply"
        p.write_text("nope\nend_header\n")
        with pytest.raises(MeshFormatError):
            load_mesh(p)

    def test_truncated_binary(self, tmp_path, ):
        mesh = icosphere(0)
        p = tmp_path / "t.ply"
        save_mesh(mesh, p, binary=True)
        data = p.read_bytes()
        p.write_bytes(data[: len(data) - 40])
        with pytest.raises(MeshFormatError, match="unexpected end"):
            load_mesh(p)
