import math

import numpy as np
import pytest

from hproxy._kernels import available_backends
from hproxy.fixtures import band_colors, icosphere
from hproxy.mesh import Mesh, normalize_to_cube
from hproxy.render import (
    Camera,
    Image,
    color_gradients_from_coverage,
    fibonacci_cameras,
    psnr,
    rasterize,
    shade_from_coverage,
    ssim,
    write_pfm,
    write_png,
)


def oracle_psnr(a, b):
    """Scalar-loop PSNR oracle."""
    total = 0.0
    count = 0
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            for c in range(3):
                total += (a[y, x, c] - b[y, x, c]) ** 2
                count += 1
    mse = total / count
    return 10.0 * math.log10(1.0 / mse)


def oracle_ssim(a, b):
    """Direct-convolution SSIM oracle: 11x11 Gaussian sigma 1.5, valid interior."""
    size, sigma = 11, 1.5
    r = np.arange(size) - 5.0
    g = np.exp(-(r**2) / (2 * sigma**2))
    kern = np.outer(g, g)
    kern /= kern.sum()
    c1, c2 = 0.01**2, 0.03**2
    h, w = a.shape[:2]
    vals = []
    for ch in range(3):
        acc = []
        for y in range(h - size + 1):
            for x in range(w - size + 1):
                wa = a[y : y + size, x : x + size, ch]
                wb = b[y : y + size, x : x + size, ch]
                mua = (kern * wa).sum()
                mub = (kern * wb).sum()
                va = (kern * wa * wa).sum() - mua * mua
                vb = (kern * wb * wb).sum() - mub * mub
                cov = (kern * wa * wb).sum() - mua * mub
                acc.append(((2 * mua * mub + c1) * (2 * cov + c2)) / ((mua**2 + mub**2 + c1) * (va + vb + c2)))
        vals.append(np.mean(acc))
    return float(np.mean(vals))


def full_frame_triangle():
    """One triangle spanning the whole frustum cross-section at z=0."""
    verts = np.array([[-8.0, -8.0, 0.0], [8.0, -8.0, 0.0], [0.0, 10.0, 0.0]])
    return Mesh(verts, np.array([[0, 1, 2]]))


@pytest.fixture()
def cam():
    return Camera(position=(0, 0, 2.5), look_at=(0, 0, 0), width=48, height=48)


class TestRasterize:
    def test_empty_scene_is_background(self, cam):
        mesh = Mesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=np.int64))
        img = rasterize(mesh, np.zeros((3, 3)), cam, background=(0.2, 0.3, 0.4))
        assert np.array_equal(img.pixels, np.broadcast_to([0.2, 0.3, 0.4], (48, 48, 3)))

    def test_constant_color_triangle_exact(self, cam):
        mesh = full_frame_triangle()
        c = np.array([0.3, 0.6, 0.9])
        img = rasterize(mesh, np.tile(c, (3, 1)), cam)
        assert img.coverage.mask.all()
        assert np.array_equal(img.pixels, np.broadcast_to(c, (48, 48, 3)))

    def test_z_test_near_wins(self, cam):
        verts = np.array(
            [
                [-8, -8, 1.0], [8, -8, 1.0], [0, 10, 1.0],   # near, z_view = 1.5
                [-8, -8, 0.0], [8, -8, 0.0], [0, 10, 0.0],   # far, z_view = 2.5
            ],
            dtype=float,
        )
        mesh = Mesh(verts, np.array([[3, 4, 5], [0, 1, 2]]))  # draw far first
        colors = np.array([[1, 0, 0]] * 3 + [[0, 1, 0]] * 3, dtype=float)
        img = rasterize(mesh, colors, cam)
        assert np.array_equal(img.pixels[24, 24], [1, 0, 0])

    def test_barycentric_weights_valid(self, cam, ico_mesh):
        img = rasterize(ico_mesh, ico_mesh.colors, cam)
        cov = img.coverage
        b = cov.bary[cov.mask]
        assert (b >= 0).all()
        assert np.abs(b.sum(axis=1) - 1.0).max() < 1e-6

    def test_color_count_mismatch(self, cam):
        with pytest.raises(ValueError, match="colors"):
            rasterize(full_frame_triangle(), np.zeros((5, 3)), cam)

    def test_degenerate_camera(self):
        cam = Camera(position=(0, 0, 1), look_at=(0, 0, 0), up=(0, 0, 1), width=8, height=8)
        with pytest.raises(ValueError, match="parallel"):
            rasterize(full_frame_triangle(), np.zeros((3, 3)), cam)

    def test_determinism(self, cam, ico_mesh):
        a = rasterize(ico_mesh, ico_mesh.colors, cam)
        b = rasterize(ico_mesh, ico_mesh.colors, cam)
        assert np.array_equal(a.pixels, b.pixels)
        assert np.array_equal(a.coverage.depth, b.coverage.depth)

    def test_linear_in_colors(self, cam, ico_mesh, rng):
        c1 = rng.random((ico_mesh.n_vertices, 3))
        c2 = rng.random((ico_mesh.n_vertices, 3))
        alpha, beta = 0.3, 0.6
        img1 = rasterize(ico_mesh, c1, cam)
        img2 = rasterize(ico_mesh, c2, cam)
        mixed = rasterize(ico_mesh, alpha * c1 + beta * c2, cam)
        m = mixed.coverage.mask
        expect = alpha * img1.pixels[m] + beta * img2.pixels[m]
        assert np.abs(mixed.pixels[m] - expect).max() < 1e-6

    def test_coverage_reshade_bit_exact(self, cam, ico_mesh):
        img = rasterize(ico_mesh, ico_mesh.colors, cam, background=(0.1, 0.1, 0.1))
        again = shade_from_coverage(img.coverage, ico_mesh.colors, (0.1, 0.1, 0.1))
        assert np.array_equal(img.pixels, again)

    def test_pixel_gradient_equals_barycentric_weight(self, cam, ico_mesh):
        # finite differences on one covered pixel vs the stored weight
        img = rasterize(ico_mesh, ico_mesh.colors, cam)
        cov = img.coverage
        ys, xs = np.nonzero(cov.mask)
        y, x = ys[len(ys) // 2], xs[len(ys) // 2]
        tri = cov.faces[cov.face_index[y, x]]
        for k in range(3):
            h = 1e-6
            cplus = ico_mesh.colors.copy()
            cplus[tri[k], 0] += h
            cminus = ico_mesh.colors.copy()
            cminus[tri[k], 0] -= h
            fd = (shade_from_coverage(cov, cplus)[y, x, 0] - shade_from_coverage(cov, cminus)[y, x, 0]) / (2 * h)
            assert abs(fd - cov.bary[y, x, k]) < 1e-6

    def test_scatter_is_adjoint(self, cam, ico_mesh, rng):
        img = rasterize(ico_mesh, ico_mesh.colors, cam)
        cov = img.coverage
        grad = rng.random((48, 48, 3))
        grad[~cov.mask] = 0.0
        gcol = color_gradients_from_coverage(cov, grad, ico_mesh.n_vertices)
        # <grad, shade(c)> must equal <scatter(grad), c> for the linear part
        c = rng.random((ico_mesh.n_vertices, 3))
        lhs = float((grad[cov.mask] * shade_from_coverage(cov, c)[cov.mask]).sum())
        rhs = float((gcol * c).sum())
        assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))


class TestBackendParity:
    def test_backends_bit_identical(self, ico_mesh, rng):
        backends = available_backends()
        if len(backends) < 2:
            pytest.skip("compiled backend not built")
        cam = Camera(position=(0.4, 0.7, 2.2), look_at=(0, 0, 0), width=64, height=64)
        px, py, zv = cam.project(ico_mesh.vertices)
        args = (
            np.ascontiguousarray(px),
            np.ascontiguousarray(py),
            np.ascontiguousarray(zv),
            np.ascontiguousarray(ico_mesh.faces),
            64,
            64,
            cam.near,
            cam.far,
        )
        out_np = backends["numpy"].rasterize_core(*args)
        out_c = backends["compiled"].rasterize_core(*args)
        for a, b in zip(out_np, out_c):
            assert np.array_equal(a, b, equal_nan=True)
        grad = rng.random((64, 64, 3))
        acc_np = backends["numpy"].scatter_pixel_gradients(out_np[1], out_np[2], args[3], grad, ico_mesh.n_vertices)
        acc_c = backends["compiled"].scatter_pixel_gradients(out_c[1], out_c[2], args[3], grad, ico_mesh.n_vertices)
        assert np.array_equal(acc_np, acc_c)


class TestPSNR:
    def test_identical_is_inf(self, rng):
        img = rng.random((8, 8, 3))
        assert psnr(img, img) == math.inf

    def test_analytic_value(self):
        a = np.zeros((4, 4, 3))
        b = np.full((4, 4, 3), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_matches_oracle(self, rng):
        a = rng.random((12, 9, 3))
        b = rng.random((12, 9, 3))
        assert psnr(a, b) == pytest.approx(oracle_psnr(a, b), abs=1e-9)

    def test_symmetric(self, rng):
        a = rng.random((6, 6, 3))
        b = rng.random((6, 6, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


class TestSSIM:
    def test_identical_is_one(self, rng):
        img = rng.random((16, 16, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_constant_vs_inverted(self):
        a = np.zeros((16, 16, 3))
        b = np.ones((16, 16, 3))
        # closed form for constants: (2*0*1 + c1) / (0 + 1 + c1) ~ 1e-4
        assert ssim(a, b) < 0.05

    def test_matches_direct_convolution_oracle(self, rng):
        a = rng.random((18, 15, 3))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(oracle_ssim(a, b), abs=1e-6)

    def test_symmetric(self, rng):
        a = rng.random((14, 14, 3))
        b = rng.random((14, 14, 3))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_too_small_error(self):
        with pytest.raises(ValueError, match="11"):
            ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))


class TestImageIO:
    def test_png_deterministic(self, tmp_path, ico_mesh, cam):
        img = rasterize(ico_mesh, ico_mesh.colors, cam)
        write_png(img, tmp_path / "a.png")
        write_png(img, tmp_path / "b.png")
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_pfm_roundtrip(self, tmp_path, rng):
        img = Image(rng.random((6, 5, 3)))
        write_pfm(img, tmp_path / "x.pfm")
        data = (tmp_path / "x.pfm").read_bytes()
        assert data.startswith(b"PF\n5 6\n-1.0\n")
        back = np.frombuffer(data.split(b"-1.0\n", 1)[1], dtype="<f4").reshape(6, 5, 3)[::-1]
        assert np.allclose(back, img.pixels, atol=1e-7)


class TestFibonacciCameras:
    def test_count_and_radius(self):
        cams = fibonacci_cameras(count=50, radius=2.5)
        assert len(cams) == 50
        for cam in cams:
            assert np.linalg.norm(cam.position) == pytest.approx(2.5, abs=1e-12)
            cam.validate()

    def test_seeded(self):
        a = fibonacci_cameras(count=10, seed=3)
        b = fibonacci_cameras(count=10, seed=3)
        c = fibonacci_cameras(count=10, seed=4)
        assert all(np.array_equal(x.position, y.position) for x, y in zip(a, b))
        assert any(not np.array_equal(x.position, y.position) for x, y in zip(a, c))
