import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftbounds import _kernels_py, kernels

compiled = pytest.importorskip("shiftbounds._kernels")


def direct_band_sum(q, resp, periodic):
    # out[k] = sum_i q_i resp[i, i + k]; open grids offset k by n - 1
    n, m = resp.shape
    if periodic:
        return np.array([sum(q[i] * resp[i, (i + k) % m] for i in range(n)) for k in range(m)])
    out = np.zeros(m + n - 1)
    for i in range(n):
        for j in range(m):
            out[j - i + n - 1] += q[i] * resp[i, j]
    return out


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_band_sum_backends_agree(seed, periodic):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 24))
    m = n if periodic else int(rng.integers(1, 30))
    q = rng.random(n)
    resp = np.ascontiguousarray(rng.random((n, m)))
    ref = direct_band_sum(q, resp, periodic)
    assert np.allclose(_kernels_py.band_sum(q, resp, periodic), ref, rtol=1e-12, atol=1e-14)
    assert np.allclose(compiled.band_sum(q, resp, periodic), ref, rtol=1e-12, atol=1e-14)


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_correlate_backends_agree(seed, periodic):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    cols = int(rng.integers(1, 5))
    q = rng.random(n)
    mat = np.ascontiguousarray(rng.random((n if periodic else n + int(rng.integers(0, 20)), cols)))
    a = _kernels_py.correlate(q, mat, periodic)
    b = compiled.correlate(q, mat, periodic)
    assert a.shape == b.shape
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, SHIFTBOUNDS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from shiftbounds import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
