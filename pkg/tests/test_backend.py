import os
import subprocess
import sys

import numpy as np
import pytest

from twotimescale import _backend, _pycore


def test_backend_reported():
    assert _backend.BACKEND in ("cython", "python")


@pytest.mark.skipif(_backend.BACKEND != "cython", reason="compiled extension not built")
def test_kernels_agree_on_admm():
    rng = np.random.default_rng(12)
    for n in (2, 5, 50, 500):
        a, b = rng.uniform(0.5, 20, n), rng.uniform(10, 30, n)
        args = (a, b, 20.0, n // 2, 1.3, 1e-4, 1e-4, 500, np.zeros(n // 2), np.zeros(n - n // 2), 0.0)
        c = _backend.kernels.admm_solve(*args)
        p = _pycore.admm_solve(*args)
        assert c[1] == p[1] and c[3] == p[3]
        assert np.allclose(c[0], p[0], rtol=1e-9, atol=1e-9)
        assert np.allclose(c[4], p[4], rtol=1e-6, atol=1e-9)


@pytest.mark.skipif(_backend.BACKEND != "cython", reason="compiled extension not built")
def test_kernels_agree_on_block_and_demand():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = rng.integers(1, 20)
        a, b = rng.uniform(0, 20, n), rng.uniform(0, 30, n)
        c, rho = rng.uniform(-30, 10), rng.uniform(0.01, 5)
        assert np.allclose(_backend.kernels.block_solve(a, b, c, rho),
                           _pycore.block_solve(a, b, c, rho), atol=1e-9)
        f = rng.normal(0.5, 1, (rng.integers(1, 8), rng.integers(1, 12)))
        prices = rng.uniform(0, 1, f.shape[1])
        q = int(rng.integers(1, 4))
        assert np.array_equal(_backend.kernels.demand_sets(f, prices, q),
                              _pycore.demand_sets(f, prices, q))


def test_pure_backend_forced_by_env():
    env = dict(os.environ, TWOTIMESCALE_PURE="1")
    out = subprocess.run([sys.executable, "-c",
                          "from twotimescale import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_simulation_same_under_both_backends(monkeypatch):
    from twotimescale.config import default_config
    from twotimescale.controller import run

    cfg = default_config(M=4)
    fast = run(cfg)
    for name in ("block_solve", "admm_solve", "demand_sets", "price_auction"):
        monkeypatch.setattr(_backend, name, getattr(_pycore, name))
    slow = run(cfg)
    assert np.allclose(fast.r, slow.r, atol=1e-9)
    assert np.allclose(fast.v, slow.v, atol=1e-9)
    assert np.allclose(fast.Q_end, slow.Q_end, atol=1e-8)
