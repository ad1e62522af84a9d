"""numpy implementations of the compiled kernels (same signatures and results)."""
import numpy as np


def segment_lse(z, starts):
    z = np.asarray(z, dtype=float)
    starts = np.asarray(starts)
    lo = starts[:-1]
    seg = np.repeat(np.arange(len(lo)), np.diff(starts))
    zmax = np.maximum.reduceat(z, lo)
    e = np.exp(z - zmax[seg])
    # drop one max term per segment from the sum so log1p keeps precision
    is_max = e == 1.0
    first = np.zeros_like(is_max)
    idx = np.flatnonzero(is_max)
    _, keep = np.unique(seg[idx], return_index=True)
    first[idx[keep]] = True
    rest = np.add.reduceat(np.where(first, 0.0, e), lo)
    return zmax + np.log1p(rest), e / (1.0 + rest)[seg]


def _rhs(beta, gamma, delta, A, y, n):
    s, e, z = y[:n], y[n:2 * n], y[2 * n:3 * n]
    inf = beta * s * (A @ z)
    return np.concatenate((-inf, inf - gamma * e, gamma * e - delta * z, delta * z))


def rk4_seir(beta, gamma, delta, A, y0, dt, max_steps, floor, neg_tol):
    n = len(beta)
    out = np.empty((max_steps + 1, 4 * n))
    y = np.array(y0, dtype=float)
    out[0] = y
    step = 0
    while True:
        s, e, z = y[:n], y[n:2 * n], y[2 * n:3 * n]
        if e.sum() + z.sum() < floor and (beta * s * (A @ z)).sum() - (delta * z).sum() <= 0.0:
            status = 1
            break
        if step >= max_steps:
            status = 0
            break
        k1 = _rhs(beta, gamma, delta, A, y, n)
        k2 = _rhs(beta, gamma, delta, A, y + 0.5 * dt * k1, n)
        k3 = _rhs(beta, gamma, delta, A, y + 0.5 * dt * k2, n)
        k4 = _rhs(beta, gamma, delta, A, y + dt * k3, n)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step += 1
        out[step] = y
        if np.any(y < -neg_tol):
            status = 2
            break
    return out[: step + 1].copy(), step, status
