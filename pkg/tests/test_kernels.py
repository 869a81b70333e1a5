import subprocess
import sys

import numpy as np

from hproxy._kernels import BACKEND, available_backends


def test_backend_reported():
    assert BACKEND in ("compiled", "numpy")


def test_pure_env_forces_numpy():
    code = (
        "import os; os.environ['HPROXY_PURE'] = '1'; "
        "from hproxy import _kernels; print(_kernels.BACKEND)"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "numpy"


def test_empty_scene_kernels_agree():
    faces = np.zeros((0, 3), dtype=np.int64)
    for impl in available_backends().values():
        depth, face_idx, bary = impl.rasterize_core(
            np.zeros(0), np.zeros(0), np.zeros(0), faces, 8, 8, 0.05, 100.0
        )
        assert (face_idx == -1).all()
        assert np.isinf(depth).all()
        acc = impl.scatter_pixel_gradients(face_idx, bary, faces, np.zeros((8, 8, 3)), 5)
        assert np.array_equal(acc, np.zeros((5, 3)))
