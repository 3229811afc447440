import subprocess
import sys

import numpy as np
import pytest

from deltasink import kernels

needs_cython = pytest.mark.skipif(
    "cython" not in kernels.available_backends(), reason="compiled extension not built"
)

PY = kernels.get_backend("python")
CY = kernels.get_backend("cython") if "cython" in kernels.available_backends() else None


def _march_inputs(rng, N=40, m=4):
    f = rng.uniform(0.5, 1.5, N + 1)
    GA = rng.uniform(0, 0.01, (N, m))
    GB = rng.uniform(0, 0.01, (N, m))
    FA = rng.uniform(0, 0.01, N)
    FB = rng.uniform(0, 0.01, N)
    K = np.zeros((N + 1, m))
    K[2:] = rng.uniform(0.1, 1.0, (N - 1, m))
    extra = rng.uniform(0, 0.01, N + 1)
    return f, GA, GB, FA, FB, K, 0.5, extra


@needs_cython
def test_march_backends_agree():
    args = _march_inputs(np.random.default_rng(1))
    r1, Y1, f1 = PY.march_weighted(*args)
    r2, Y2, f2 = CY.march_weighted(*args)
    assert f1 == f2 == -1
    assert np.allclose(r1, r2, rtol=1e-13, atol=0)
    assert np.allclose(Y1, Y2, rtol=1e-13, atol=1e-300)


@needs_cython
def test_march_reports_first_bad_step():
    f, GA, GB, FA, FB, K, c, extra = _march_inputs(np.random.default_rng(2))
    FB = FB.copy()
    FB[6] = -10.0  # step 7 gets a negative diagonal
    for impl in (PY, CY):
        _, _, fail = impl.march_weighted(f, GA, GB, FA, FB, K, c, extra)
        assert fail == 7


@needs_cython
def test_field_sum_backends_agree():
    rng = np.random.default_rng(3)
    N, m = 30, 4
    xi = np.sort(rng.uniform(0, 1, m))
    eta = np.sort(rng.uniform(0, 1, m))
    Y = rng.uniform(0, 1e-3, (N, m))
    GFA = rng.uniform(0, 1e-3, (N, m))
    GFB = rng.uniform(0, 1e-3, (N, m))
    r = rng.uniform(0.5, 1, N + 1)
    a = np.ascontiguousarray(np.linspace(0, 3, 200) ** 2 / 4)
    for n in (1, 2, 17, N):
        v1 = PY.field_sum(a, n, 0.01, Y, xi, GFA, GFB, eta, r)
        v2 = CY.field_sum(a, n, 0.01, Y, xi, GFA, GFB, eta, r)
        assert np.allclose(v1, v2, rtol=1e-12, atol=1e-300)


@needs_cython
def test_cn_backends_agree():
    x = np.linspace(-5, 5, 201)
    P0 = np.exp(-((x + 1) ** 2) / 0.1)
    P0[0] = P0[-1] = 0.0
    sink = np.full(50, 0.3)
    save = np.zeros(51, dtype=np.uint8)
    save[[0, 25, 50]] = 1
    o1 = PY.cn_march(P0, 0.4, 100, sink, save, 3)
    o2 = CY.cn_march(P0, 0.4, 100, sink, save, 3)
    for a, b in zip(o1[:3], o2[:3]):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    assert o1[3] == pytest.approx(o2[3], rel=1e-12, abs=1e-300)


@needs_cython
def test_solver_identical_across_backends(monkeypatch):
    from deltasink.model import ExponentialSink, Gaussian, Problem, TimeGrid
    from deltasink.volterra import solve_origin

    p = Problem(1.0, ExponentialSink(1.0, 1.0), Gaussian(-1.0, 0.3))
    out = []
    for impl in (PY, CY):
        for name in ("march_weighted", "field_sum", "cn_march"):
            monkeypatch.setattr(kernels, name, getattr(impl, name))
        out.append(solve_origin(p, TimeGrid(2.0, 256)).values)
    assert np.allclose(out[0], out[1], rtol=1e-12, atol=0)


def test_environment_forces_fallback():
    code = "from deltasink import kernels; print(kernels.BACKEND)"
    env = {"DELTASINK_PURE_PYTHON": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
