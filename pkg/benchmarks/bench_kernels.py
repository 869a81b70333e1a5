#!/usr/bin/env python3
"""Benchmark the compiled rasterization kernels against the numpy fallback.

Renders the icosphere fixture at a few resolutions with both backends,
checks the outputs are bit-identical, and reports timings.
"""

import argparse
import time

import numpy as np

from hproxy._kernels import available_backends
from hproxy.fixtures import band_colors, icosphere
from hproxy.mesh import normalize_to_cube
from hproxy.render import Camera


def bench(repeat: int = 5) -> None:
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not available; build the extension first")
    mesh, _ = normalize_to_cube(icosphere(3))
    colors = band_colors(mesh)
    rng = np.random.default_rng(0)

    for side in (128, 256, 512):
        cam = Camera(position=(0.6, 0.8, 2.2), look_at=(0, 0, 0), width=side, height=side)
        px, py, zv = cam.project(mesh.vertices)
        px = np.ascontiguousarray(px)
        py = np.ascontiguousarray(py)
        zv = np.ascontiguousarray(zv)
        faces = np.ascontiguousarray(mesh.faces)
        results = {}
        times = {}
        for name, impl in backends.items():
            t0 = time.perf_counter()
            for _ in range(repeat):
                out = impl.rasterize_core(px, py, zv, faces, side, side, cam.near, cam.far)
            times[name] = (time.perf_counter() - t0) / repeat
            results[name] = out
        grad = rng.random((side, side, 3))
        stimes = {}
        sresults = {}
        for name, impl in backends.items():
            depth, face_idx, bary = results[name]
            t0 = time.perf_counter()
            for _ in range(repeat):
                acc = impl.scatter_pixel_gradients(face_idx, bary, faces, grad, mesh.n_vertices)
            stimes[name] = (time.perf_counter() - t0) / repeat
            sresults[name] = acc

        line = f"{side}x{side}  rasterize:"
        for name in backends:
            line += f"  {name} {times[name] * 1e3:8.2f} ms"
        if len(backends) == 2:
            for a, b in zip(results["numpy"], results["compiled"]):
                assert np.array_equal(a, b, equal_nan=True), "backend outputs differ"
            assert np.array_equal(sresults["numpy"], sresults["compiled"])
            line += f"  speedup {times['numpy'] / times['compiled']:6.1f}x  [bit-identical]"
        print(line)
        line = f"{side}x{side}  scatter:  "
        for name in backends:
            line += f"  {name} {stimes[name] * 1e3:8.2f} ms"
        if len(backends) == 2:
            line += f"  speedup {stimes['numpy'] / stimes['compiled']:6.1f}x"
        print(line)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    bench(args.repeat)
