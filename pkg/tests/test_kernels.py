import os
import subprocess
import sys

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cgsbp import _kernels


@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_scatter_paths_agree(p, n_e, seed):
    rng = np.random.default_rng(seed)
    blocks = rng.standard_normal((n_e, p + 1, p + 1))
    n = n_e * p + 1
    ref = _kernels.scatter_blocks_numpy(np.zeros((2 * p + 1, n)), blocks, p, p)
    py = _kernels._scatter_blocks_py(np.zeros((2 * p + 1, n)), blocks, p, p)
    disp = _kernels.scatter_blocks(np.zeros((2 * p + 1, n)), blocks, p, p)
    assert np.allclose(py, ref, rtol=0, atol=1e-14)
    assert np.allclose(disp, ref, rtol=0, atol=1e-14)


def test_longdouble_uses_numpy_path():
    blocks = np.ones((3, 3, 3), dtype=np.longdouble)
    ab = _kernels.scatter_blocks(np.zeros((5, 7), dtype=np.longdouble), blocks, 2, 2)
    assert ab.dtype == np.longdouble and ab[2, 2] == 2


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, CGSBP_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from cgsbp import _kernels; print(_kernels.backend())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
