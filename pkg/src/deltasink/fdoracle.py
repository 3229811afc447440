"""Crank-Nicolson finite differences for the full equation, used as an oracle.

The point sink becomes a decay rate 2 k(t) / dx at the origin node, treated
semi-implicitly with k averaged over each step.  Boundaries at +-L are held at
zero density, so the window must be wide enough for the run; this is checked
afterwards and reported as a TruncationError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, TruncationError
from .field import FieldSnapshot
from .model import (
    DeltaAt,
    InverseTimeSink,
    SpaceGrid,
    TimeGrid,
    evaluate_ic,
    evaluate_sink,
    validate_problem,
)

EDGE_RATIO = 1e-10
DELTA_WIDTH_CELLS = 3.0


@dataclass(frozen=True)
class FdConfig:
    space: SpaceGrid
    time: TimeGrid

    @classmethod
    def from_resolution(cls, dx, dt, half_width, t_max):
        """Config with spacing ``dx`` on [-L, L] and step ``dt`` up to ``t_max``."""
        n_steps = int(round(t_max / dt))
        if n_steps < 2 or not math.isclose(n_steps * dt, t_max, rel_tol=1e-9):
            raise DomainError(f"t_max={t_max} is not a whole number (>= 2) of steps dt={dt}")
        return cls(SpaceGrid.with_spacing(half_width, dx), TimeGrid(t_max, n_steps))


@dataclass(frozen=True)
class FieldHistory:
    """Saved snapshots plus per-step origin density and probability bookkeeping."""

    grid: SpaceGrid
    times: np.ndarray  # times of the saved snapshots
    snapshots: np.ndarray  # shape (len(times), n_points)
    step_times: np.ndarray  # every step, including t = 0
    origin: np.ndarray
    survival: np.ndarray
    absorbed: np.ndarray
    initial_mass: float
    edge_ratio: float

    @property
    def x(self):
        return self.grid.nodes

    @property
    def balance_residual(self):
        return np.abs(self.survival + self.absorbed - self.initial_mass)

    def snapshot(self, t, rtol=1e-9):
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=rtol, atol=0.0))
        if hit.size == 0:
            raise DomainError(f"no saved snapshot at t={t}; saved times are {self.times.tolist()}")
        return FieldSnapshot(self.grid, float(self.times[hit[0]]), self.snapshots[hit[0]])


def initial_profile(p, grid):
    """Initial density on the FD grid; a delta becomes a narrow Gaussian."""
    x = grid.nodes
    ic = p.initial_condition
    if isinstance(ic, DeltaAt):
        w = DELTA_WIDTH_CELLS * grid.dx
        P = np.exp(-0.5 * ((x - ic.x0) / w) ** 2)
        P /= P.sum() * grid.dx
    else:
        P = np.asarray(evaluate_ic(ic, x), dtype=float)
    P = np.array(P, dtype=float)
    P[0] = P[-1] = 0.0
    return P


def step_rates(p, tg):
    """Step-averaged k over each interval; the first inverse-time step uses k(dt/2)."""
    t = tg.nodes
    if isinstance(p.sink, InverseTimeSink):
        k = np.empty(tg.n_steps)
        k[0] = evaluate_sink(p.sink, 0.5 * tg.h)
        kn = evaluate_sink(p.sink, t[1:])
        k[1:] = 0.5 * (kn[:-1] + kn[1:])
        return k
    kn = np.asarray(evaluate_sink(p.sink, t), dtype=float)
    return 0.5 * (kn[:-1] + kn[1:])


def cn_solve(p, cfg: FdConfig, save_times=None, check_edges=True):
    """March Crank-Nicolson over ``cfg.time``.

    ``save_times`` selects which grid times keep full snapshots (default: all
    of them, which needs n_steps * n_points doubles).
    """
    validate_problem(p)
    sg, tg = cfg.space, cfg.time
    dx, dt = sg.dx, tg.h
    P0 = initial_profile(p, sg)
    sink = np.ascontiguousarray(dt * step_rates(p, tg) / dx)
    save = np.zeros(tg.n_steps + 1, dtype=np.uint8)
    if save_times is None:
        save[:] = 1
    else:
        for t in np.atleast_1d(save_times):
            save[tg.index_of(t)] = 1
    r = p.D * dt / (2.0 * dx * dx)
    out, origin, total, edge = kernels.cn_march(P0, r, sg.origin_index, sink, save, int(save.sum()))
    S = total * dx
    A = np.zeros(tg.n_steps + 1)
    A[1:] = np.cumsum(dx * sink * (origin[:-1] + origin[1:]))
    peak = float(np.max(np.abs(out[-1]))) if out.shape[0] else float(np.max(np.abs(P0)))
    ratio = edge / peak if peak > 0 else 0.0
    if check_edges and ratio > EDGE_RATIO:
        raise TruncationError(
            f"density at the window edge reached {ratio:.3g} of the final peak "
            f"(limit {EDGE_RATIO:g}); increase half_width beyond {sg.half_width}"
        )
    return FieldHistory(
        sg, tg.nodes[save.astype(bool)], out, tg.nodes, origin, S, A, float(P0.sum() * dx), ratio
    )


@dataclass(frozen=True)
class ErrorReport:
    times: np.ndarray
    linf: np.ndarray
    l2: np.ndarray
    rel_linf: np.ndarray  # linf over the reference peak in the compared window

    @property
    def max_linf(self):
        return float(np.max(self.linf))

    @property
    def max_rel_linf(self):
        return float(np.max(self.rel_linf))


def _as_pairs(other):
    if isinstance(other, FieldSnapshot):
        return [other]
    if isinstance(other, FieldHistory):
        return [other.snapshot(t) for t in other.times]
    return list(other)


def compare(fd, other, rtol=1e-9):
    """Error norms of ``other`` against ``fd`` over |x| <= L/2.

    ``fd`` may be a FieldHistory, a FieldSnapshot or a list of snapshots;
    ``other`` likewise.  Snapshots on a different grid are interpolated
    linearly onto the reference grid.
    """
    ref = _as_pairs(fd)
    oth = _as_pairs(other)
    times, linf, l2, rel = [], [], [], []
    for a in ref:
        for b in oth:
            if math.isclose(a.time, b.time, rel_tol=rtol, abs_tol=1e-15):
                x = a.grid.nodes
                win = np.abs(x) <= 0.5 * a.grid.half_width
                bv = b.values if b.grid == a.grid else np.interp(x, b.grid.nodes, b.values)
                d = (bv - a.values)[win]
                times.append(a.time)
                linf.append(float(np.max(np.abs(d))))
                l2.append(float(np.sqrt(np.sum(d * d) * a.grid.dx)))
                peak = float(np.max(np.abs(a.values[win])))
                rel.append(linf[-1] / peak if peak > 0 else 0.0)
                break
    if not times:
        raise DomainError("the two field series share no snapshot times")
    return ErrorReport(np.array(times), np.array(linf), np.array(l2), np.array(rel))
