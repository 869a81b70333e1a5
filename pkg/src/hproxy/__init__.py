"""Hierarchical proxy-point mesh toolkit.

A textured triangle mesh is represented by L levels of proxy points
(position + normal + texture feature) built by error-guided octree
clustering, a small MLP decoding fused multi-level features to vertex
colors, and edit operators that drag proxy points or transfer features
between same-level regions.
"""

__version__ = "0.1.0"

from .mesh import Mesh, NormalizationTransform, chamfer_distance, compute_vertex_normals, normalize_to_cube, sample_surface
from .meshio import load_mesh, save_mesh
from .hierarchy import HierarchyConfig, ProxyHierarchy, ProxyLevel, ProxyPoint, build_hierarchy, load_hierarchy, save_hierarchy
from .texture import TextureConfig, TextureModel, init_model, load_model, positional_encoding, save_model
from .render import Camera, Image, psnr, rasterize, ssim
from .edit import DragEdit, RigidTransform, TransferEdit, apply_edit, kabsch_align, laplacian_solve, transfer_features

__all__ = [
    "Mesh",
    "NormalizationTransform",
    "chamfer_distance",
    "compute_vertex_normals",
    "normalize_to_cube",
    "sample_surface",
    "load_mesh",
    "save_mesh",
    "HierarchyConfig",
    "ProxyHierarchy",
    "ProxyLevel",
    "ProxyPoint",
    "build_hierarchy",
    "load_hierarchy",
    "save_hierarchy",
    "TextureConfig",
    "TextureModel",
    "init_model",
    "load_model",
    "positional_encoding",
    "save_model",
    "Camera",
    "Image",
    "psnr",
    "rasterize",
    "ssim",
    "DragEdit",
    "RigidTransform",
    "TransferEdit",
    "apply_edit",
    "kabsch_align",
    "laplacian_solve",
    "transfer_features",
]
