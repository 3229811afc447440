"""Compare the compiled and pure-Python kernel backends.

Run from the repository root after ``pip install -e . --no-build-isolation``::

    python benchmarks/bench_kernels.py --steps 4096 --repeat 3

Each case is timed with the kernels of one backend patched in, so the
surrounding NumPy work is identical and only the inner loops differ.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from deltasink import kernels
from deltasink.fdoracle import FdConfig, cn_solve
from deltasink.field import snapshot
from deltasink.model import ConstantSink, DeltaAt, Problem, SpaceGrid, TimeGrid
from deltasink.volterra import solve_origin

NAMES = ("march_weighted", "field_sum", "cn_march")


def use_backend(name):
    impl = kernels.get_backend(name)
    for fn in NAMES:
        setattr(kernels, fn, getattr(impl, fn))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=4096, help="Volterra time steps")
    ap.add_argument("--points", type=int, default=4801, help="field snapshot points")
    ap.add_argument("--fd-t", type=float, default=0.25, help="FD run length (dt = 1e-4, dx = 0.005)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    p = Problem(1.0, ConstantSink(1.0), DeltaAt(-1.0))
    grid = TimeGrid(4.0, args.steps)
    space = SpaceGrid(12.0, args.points)
    fd_cfg = FdConfig.from_resolution(0.005, 1e-4, 12.0, args.fd_t)

    cases = {
        "solve_origin": lambda: solve_origin(p, grid).values,
        "field snapshot": None,  # needs the solved history, set per backend
        "cn_solve": lambda: cn_solve(p, fd_cfg, save_times=[args.fd_t]).snapshots[-1],
    }
    results = {}
    for backend in kernels.available_backends():
        use_backend(backend)
        oh = solve_origin(p, grid)
        cases["field snapshot"] = lambda oh=oh: snapshot(p, oh, space, grid.t_max).values
        results[backend] = {name: best_of(fn, args.repeat) for name, fn in cases.items()}
    use_backend(kernels.BACKEND)

    backends = list(results)
    print(f"steps={args.steps} points={args.points} fd_steps={fd_cfg.time.n_steps} repeat={args.repeat}")
    print(f"{'case':<16}" + "".join(f"{b:>12}" for b in backends) + ("     speedup  max|diff|" if len(backends) == 2 else ""))
    for name in cases:
        row = f"{name:<16}" + "".join(f"{results[b][name][0]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            (t_a, v_a), (t_b, v_b) = (results[b][name] for b in backends)
            fast, slow = (t_a, t_b) if backends[0] == "cython" else (t_b, t_a)
            row += f"{slow / fast:>11.1f}x  {float(np.max(np.abs(v_a - v_b))):.1e}"
        print(row)


if __name__ == "__main__":
    main()
