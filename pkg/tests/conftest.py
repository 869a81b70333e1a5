import numpy as np
import pytest

from hproxy.fixtures import band_colors, icosphere
from hproxy.hierarchy import HierarchyConfig, build_hierarchy
from hproxy.mesh import compute_vertex_normals, normalize_to_cube


@pytest.fixture(scope="session")
def ico_mesh():
    """Normalized 642-vertex icosphere with banded colors and normals."""
    mesh, _ = normalize_to_cube(icosphere(3))
    mesh.normals = compute_vertex_normals(mesh)
    mesh.colors = band_colors(mesh)
    return mesh


@pytest.fixture(scope="session")
def ico_hierarchy(ico_mesh):
    """Hierarchy at paper defaults (L=3, R=7, eps=5.0)."""
    return build_hierarchy(ico_mesh, HierarchyConfig())


@pytest.fixture(scope="session")
def ico_hierarchy_coarse(ico_mesh):
    """Fixture-scale hierarchy: R=3 so octree cells actually hold several of
    the 642 vertices and clustering is non-trivial (R=7 targets ~100k-vertex
    meshes). Weakly-determined fit directions are pinned to the centroid so
    merged proxies stay on the surface."""
    cfg = HierarchyConfig(max_resolution_exponent=3, rank_tolerance=1e-2)
    return build_hierarchy(ico_mesh, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
