import os
import subprocess
import sys

import numpy as np
import pytest

from l1forms import _jit
from l1forms.exterior import basis, raising_table

needs_numba = pytest.mark.skipif(not _jit.HAVE_NUMBA, reason="numba backend disabled")


def cone_args(n=3, h=1, N=12, P=20, seed=0):
    rng = np.random.default_rng(seed)
    C = len(basis(n, h))
    data = rng.normal(size=(C,) + (N,) * n)
    spacing = 2.0 / N
    points = rng.uniform(-0.6, 0.6, size=(P, n))
    ys = rng.uniform(-0.4, 0.4, size=(5, n))
    yw = np.full(5, 0.2)
    tn, tw = np.polynomial.legendre.leggauss(6)
    table = np.array(raising_table(n, h - 1), dtype=np.int64)
    return (data, -1.0 + spacing / 2, spacing, points, ys, yw, (tn + 1) / 2, tw / 2, table,
            len(basis(n, h - 1)), h)


@needs_numba
@pytest.mark.parametrize("n,h", [(3, 1), (3, 2), (2, 1)])
def test_cone_backends_agree(n, h):
    args = cone_args(n, h)
    ref = _jit._cone_numpy(*args)
    fast = _jit._cone_numba3(*args) if n == 3 else _jit._cone_numba(*args)
    generic = _jit._cone_numba(*args)
    assert np.allclose(fast, ref, rtol=1e-11, atol=1e-11)
    assert np.allclose(generic, ref, rtol=1e-12, atol=1e-12)


@needs_numba
def test_direct_convolve_backends_agree():
    rng = np.random.default_rng(0)
    N, n = 6, 3
    w = rng.normal(size=(2 * N,) * n)
    u = rng.normal(size=(N,) * n)
    a = _jit._direct_convolve_numba(w, u.reshape(-1), N, n)
    b = _jit._direct_convolve_numpy(w, u.reshape(-1), N, n)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_direct_convolve_matches_fft():
    # circular convolution on the padded lattice, restricted to [0, N)
    rng = np.random.default_rng(1)
    N, n = 6, 2
    w = rng.normal(size=(2 * N,) * n)
    u = rng.normal(size=(N,) * n)
    padded = np.zeros((2 * N,) * n)
    padded[:N, :N] = u
    ref = np.real(np.fft.ifftn(np.fft.fftn(w) * np.fft.fftn(padded)))[:N, :N]
    assert np.allclose(_jit.direct_convolve(w, u), ref, atol=1e-12)


def test_backend_flag_switches_to_numpy():
    env = dict(os.environ, L1FORMS_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from l1forms import _jit; print(_jit.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
