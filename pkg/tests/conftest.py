import numpy as np
import pytest

from deltasink import kernels
from deltasink.model import ConstantSink, DeltaAt, Problem


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    impl = kernels.get_backend(request.param)
    for name in ("march_weighted", "field_sum", "cn_march"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture
def constant_problem():
    return Problem(1.0, ConstantSink(1.0), DeltaAt(-1.0))


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.abs(b)))
