"""Hot inner loops with a compiled backend and a NumPy fallback.

The compiled extension is used when it was built; setting the environment
variable ``DELTASINK_PURE_PYTHON=1`` before import forces the fallback.
Both backends expose the same three functions:

march_weighted
    Sequential O(N**2) marching of the origin-density integral equation;
    ``extra[n]`` is history known in advance (e.g. from a specially treated
    first interval).
field_sum
    History sums that rebuild P(x, t_n) at many x from the origin history.
cn_march
    Crank-Nicolson time stepping with a point sink at one node.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("DELTASINK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = _BACKENDS[BACKEND]
march_weighted = _impl.march_weighted
field_sum = _impl.field_sum
cn_march = _impl.cn_march


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Module implementing the kernels for ``name`` (default: active backend)."""
    return _BACKENDS[name or BACKEND]
