"""NumPy/SciPy versions of the compiled kernels, same signatures and results."""

import numpy as np
from scipy.linalg import solve_banded

_CHUNK = 64


def march_weighted(f, GA, GB, FA, FB, K, c, extra):
    N, m = GA.shape
    r = np.ones(N + 1)
    Y = np.zeros((N, m))
    fail = -1
    for n in range(1, N + 1):
        H = FA[n - 1] * r[n - 1] + extra[n]
        if n >= 2:
            H += np.sum(Y[: n - 1] * K[n:1:-1])
        den = f[n] + c * FB[n - 1]
        if den > 0:
            r[n] = (f[n] - c * H) / den
        elif den == 0:
            r[n] = 1.0
        else:
            fail = n
            break
        Y[n - 1] = GA[n - 1] * r[n - 1] + GB[n - 1] * r[n]
    return r, Y, fail


def field_sum(a, n, h, Y, xi, GFA, GFB, eta, r):
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.size)
    j = np.arange(n - 1)
    tau = h * ((n - j)[:, None] - xi[None, :])
    tau_f = h * (1.0 - eta)
    final = GFA[n - 1] * r[n - 1] + GFB[n - 1] * r[n]
    Yh = Y[: n - 1] / np.sqrt(tau)
    with np.errstate(under="ignore"):
        for s in range(0, a.size, _CHUNK):
            ac = a[s : s + _CHUNK, None, None]
            E = np.exp(-ac / tau[None])
            out[s : s + _CHUNK] = np.einsum("bjq,jq->b", E, Yh)
            out[s : s + _CHUNK] += np.exp(-ac[:, :, 0] / tau_f[None]) @ final
    return out


def cn_march(P0, r, i0, sink, save, n_save):
    nx = P0.size
    nsteps = sink.size
    P = np.array(P0, dtype=float)
    out = np.zeros((n_save, nx))
    origin = np.zeros(nsteps + 1)
    total = np.zeros(nsteps + 1)
    origin[0] = P[i0]
    total[0] = P.sum()
    k = 0
    if save[0]:
        out[k] = P
        k += 1
    ni = nx - 2
    ab = np.zeros((3, ni))
    ab[0, 1:] = -r
    ab[2, :-1] = -r
    edge = 0.0
    for n in range(nsteps):
        d = (1.0 - 2.0 * r) * P[1:-1] + r * (P[:-2] + P[2:])
        d[i0 - 1] -= sink[n] * P[i0]
        ab[1, :] = 1.0 + 2.0 * r
        ab[1, i0 - 1] += sink[n]
        P[1:-1] = solve_banded((1, 1), ab, d, check_finite=False)
        origin[n + 1] = P[i0]
        total[n + 1] = P.sum()
        edge = max(edge, abs(P[1]), abs(P[-2]))
        if save[n + 1]:
            out[k] = P
            k += 1
    return out, origin, total, edge
