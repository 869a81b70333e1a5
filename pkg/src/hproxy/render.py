"""Deterministic software rasterizer for vertex-colored meshes, plus PSNR/SSIM.

The rasterizer keeps per-pixel coverage records (face, barycentric weights,
depth) so the multi-view color loss is exactly linear in vertex colors:
pixel = c0 + b1*(c1 - c0) + b2*(c2 - c0).
"""

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from ._kernels import rasterize_core, scatter_pixel_gradients
from .mesh import Mesh


@dataclass
class Camera:
    """Pinhole camera: position, look-at target, up hint, vertical FOV in degrees."""

    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    vertical_fov: float = 40.0
    width: int = 128
    height: int = 128
    near: float = 0.05
    far: float = 100.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.look_at = np.asarray(self.look_at, dtype=np.float64).reshape(3)
        self.up = np.asarray(self.up, dtype=np.float64).reshape(3)

    def validate(self) -> None:
        if self.near <= 0 or self.far <= self.near:
            raise ValueError("camera needs 0 < near < far")
        if self.width < 1 or self.height < 1:
            raise ValueError("camera needs positive resolution")
        fwd = self.look_at - self.position
        n = np.linalg.norm(fwd)
        if n < 1e-12:
            raise ValueError("camera position coincides with look_at")
        fwd = fwd / n
        upn = np.linalg.norm(self.up)
        if upn < 1e-12 or np.linalg.norm(np.cross(fwd, self.up / upn)) < 1e-9:
            raise ValueError("camera up vector is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Right, true-up, forward unit vectors."""
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return right, true_up, fwd

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Screen-space pixel coordinates (px, py) and view depth per point."""
        right, true_up, fwd = self.basis()
        rel = np.asarray(points, dtype=np.float64) - self.position
        xv = rel @ right
        yv = rel @ true_up
        zv = rel @ fwd  # positive in front
        f = 1.0 / math.tan(math.radians(self.vertical_fov) / 2.0)
        aspect = self.width / self.height
        with np.errstate(divide="ignore", invalid="ignore"):
            ndc_x = (f / aspect) * xv / zv
            ndc_y = f * yv / zv
        px = (ndc_x + 1.0) * 0.5 * self.width
        py = (1.0 - (ndc_y + 1.0) * 0.5) * self.height
        return px, py, zv


@dataclass
class Coverage:
    """Per-pixel rasterization record: face index (-1 uncovered), barycentric
    weights, depth, plus the face table so vertex indices are recoverable."""

    face_index: np.ndarray
    bary: np.ndarray
    depth: np.ndarray
    faces: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.face_index >= 0

    def vertex_indices(self) -> np.ndarray:
        """(H, W, 3) vertex indices, -1 where uncovered."""
        out = np.full((*self.face_index.shape, 3), -1, dtype=np.int64)
        m = self.mask
        out[m] = self.faces[self.face_index[m]]
        return out


@dataclass
class Image:
    """RGB float image in [0, 1] with optional rasterization coverage."""

    pixels: np.ndarray
    coverage: Optional[Coverage] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("image pixels must have shape (H, W, 3)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def rasterize(mesh: Mesh, colors: np.ndarray, camera: Camera, background=(0.0, 0.0, 0.0)) -> Image:
    """Render the mesh with per-vertex colors.

    Perspective projection, no back-face culling, strict less-than z-test at
    pixel centers, perspective-correct barycentric interpolation. Triangles
    touching the near plane are skipped (no clipping). Deterministic.
    """
    camera.validate()
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    if len(colors) != mesh.n_vertices:
        raise ValueError(f"{len(colors)} colors for {mesh.n_vertices} vertices")
    px, py, zv = camera.project(mesh.vertices)
    faces = np.ascontiguousarray(mesh.faces, dtype=np.int64)
    depth, face_idx, bary = rasterize_core(
        np.ascontiguousarray(px),
        np.ascontiguousarray(py),
        np.ascontiguousarray(zv),
        faces,
        camera.width,
        camera.height,
        camera.near,
        camera.far,
    )
    cov = Coverage(face_idx, bary, depth, faces)
    pixels = shade_from_coverage(cov, colors, background)
    return Image(pixels, coverage=cov)


def shade_from_coverage(coverage: Coverage, colors: np.ndarray, background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Re-evaluate interpolation from coverage records (bit-exact with rasterize)."""
    colors = np.asarray(colors, dtype=np.float64)
    h, w = coverage.face_index.shape
    pixels = np.empty((h, w, 3))
    pixels[:] = np.asarray(background, dtype=np.float64)
    m = coverage.mask
    tri = coverage.faces[coverage.face_index[m]]
    b = coverage.bary[m]
    c0 = colors[tri[:, 0]]
    c1 = colors[tri[:, 1]]
    c2 = colors[tri[:, 2]]
    pixels[m] = c0 + b[:, 1, None] * (c1 - c0) + b[:, 2, None] * (c2 - c0)
    return pixels


def color_gradients_from_coverage(coverage: Coverage, pixel_grad: np.ndarray, n_vertices: int) -> np.ndarray:
    """Adjoint of shade_from_coverage: per-pixel gradients -> per-vertex color gradients."""
    m = coverage.mask
    # the shading anchor makes corner 0's true coefficient 1 - b1 - b2,
    # which is exactly the stored b0
    grad = np.zeros_like(pixel_grad)
    grad[m] = pixel_grad[m]
    return scatter_pixel_gradients(
        coverage.face_index,
        coverage.bary,
        coverage.faces,
        np.ascontiguousarray(grad, dtype=np.float64),
        n_vertices,
    )


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over all pixels and channels, peak 1.0.

    Returns +inf for identical images."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a, b) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    k1=0.01, k2=0.03, dynamic range 1.0; computed per channel over the valid
    (un-padded) interior, then averaged across channels."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    h, w = pa.shape[:2]
    win = 11
    if min(h, w) < win:
        raise ValueError(f"images must be at least {win}x{win} for SSIM")
    kernel = _gaussian_kernel(win, 1.5)
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    half = win // 2
    vals = []
    for ch in range(3):
        x = pa[:, :, ch]
        y = pb[:, :, ch]
        mu_x = _win_filter(x, kernel)[half : h - half, half : w - half]
        mu_y = _win_filter(y, kernel)[half : h - half, half : w - half]
        exx = _win_filter(x * x, kernel)[half : h - half, half : w - half]
        eyy = _win_filter(y * y, kernel)[half : h - half, half : w - half]
        exy = _win_filter(x * y, kernel)[half : h - half, half : w - half]
        var_x = exx - mu_x * mu_x
        var_y = eyy - mu_y * mu_y
        cov = exy - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _win_filter(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # constant padding; only the valid interior is consumed
    return ndimage.correlate(img, kernel, mode="constant", cval=0.0)


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def fibonacci_cameras(
    count: int = 50,
    radius: float = 2.5,
    center=(0.0, 0.0, 0.0),
    vertical_fov: float = 40.0,
    width: int = 128,
    height: int = 128,
    seed: int = 0,
) -> list[Camera]:
    """Evaluation viewpoints: a golden-angle spiral on the sphere, rotated by a
    seeded random rotation, all looking at the center."""
    center = np.asarray(center, dtype=np.float64)
    k = np.arange(count)
    z = 1.0 - 2.0 * (k + 0.5) / count
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(seed)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    rot = _quat_to_matrix(q)
    dirs = dirs @ rot.T
    cams = []
    for dvec in dirs:
        up = np.array([0.0, 1.0, 0.0]) if abs(dvec[1]) < 0.98 else np.array([1.0, 0.0, 0.0])
        cams.append(
            Camera(
                position=center + radius * dvec,
                look_at=center,
                up=up,
                vertical_fov=vertical_fov,
                width=width,
                height=height,
            )
        )
    return cams


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def png_bytes(image: Image) -> bytes:
    """Encode as 8-bit RGB PNG (no alpha); deterministic for identical pixels."""
    from PIL import Image as PILImage

    arr = np.clip(np.round(image.pixels * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(png_bytes(image))


def write_pfm(image: Image, path) -> None:
    """Float debugging dump, PFM color format (bottom-up rows, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(b"PF\n")
        fh.write(f"{image.width} {image.height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(image.pixels[::-1], dtype="<f4").tobytes())
