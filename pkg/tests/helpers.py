"""Shared random-instance generators for the test suites."""
from functools import lru_cache

import numpy as np

from r0gp.alloc import build_pharma_model
from r0gp.epimod import SeirModel
from r0gp.r0core import LinearizedEpidemic

REMARK1_F = np.array([[0.0, 0.0], [1.0, 1.0]])
REMARK1_V = -np.eye(2)


def random_metzler_hurwitz(rng, n, density=0.5):
    """Off-diagonals uniform on [0, 1], diagonal -(row sum + u) with u in (0, 1]."""
    M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < density)
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -(M.sum(axis=1) + rng.uniform(1e-3, 1.0, n)))
    return M


def random_metzler(rng, n):
    """Metzler matrix that is Hurwitz roughly half of the time."""
    M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    np.fill_diagonal(M, 0.0)
    rows = M.sum(axis=1)
    np.fill_diagonal(M, -rows * rng.uniform(0.5, 1.5) - rng.uniform(-0.3, 0.3, n))
    return M


def random_epidemic(rng, n, f_density=0.5):
    """LinearizedEpidemic with F having at least one positive entry on a cycle."""
    F = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < f_density)
    F[0, 0] += rng.uniform(0.05, 1.0)
    V = random_metzler_hurwitz(rng, n, density=0.4)
    return LinearizedEpidemic(F, V)


def two_group_seir():
    return SeirModel([0.1, 0.15], [0.2, 0.3], [0.1, 0.12], [[2e-6, 5e-7], [5e-7, 1e-6]], [1e6, 2e6])


def two_group_pharma(c_max=0.5):
    return build_pharma_model(two_group_seir(), c_max=c_max)


def r0_grid(model, points=31, chunk=65536):
    """Batched R0, abscissa and cost of a pharma model on a resource grid.

    The matrices are assembled directly from the SEIR parameters (not from the
    model expressions): beta log-spaced, eta linearly spaced.
    """
    seir, b = model.seir, model.bounds
    n = seir.n
    axes = [np.geomspace(b.beta_lo[i], b.beta_hi[i], points) for i in range(n)]
    axes += [np.linspace(b.delta_tilde[i] - b.delta_hi[i], b.delta_tilde[i] - b.delta_lo[i], points)
             for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    beta_all = np.stack([m.ravel() for m in mesh[:n]], axis=1)
    eta_all = np.stack([m.ravel() for m in mesh[n:]], axis=1)
    sa = seir.s0[:, None] * seir.A
    idx = np.arange(n)
    r0, absc = [], []
    for k in range(0, len(beta_all), chunk):
        beta, eta = beta_all[k:k + chunk], eta_all[k:k + chunk]
        N = len(beta)
        F = np.zeros((N, 2 * n, 2 * n))
        F[:, :n, n:] = beta[:, :, None] * sa[None]
        V = np.zeros_like(F)
        V[:, idx, idx] = -seir.gamma
        V[:, n + idx, idx] = seir.gamma
        V[:, n + idx, n + idx] = -(b.delta_tilde - eta)
        r0.append(np.max(np.abs(np.linalg.eigvals(-F @ np.linalg.inv(V))), axis=1))
        absc.append(np.max(np.linalg.eigvals(F + V).real, axis=1))
    f = (1 / beta_all - 1 / b.beta_hi) / (1 / b.beta_lo - 1 / b.beta_hi)
    lo_t, hi_t = b.delta_tilde - b.delta_lo, b.delta_tilde - b.delta_hi
    g = (1 / eta_all - 1 / lo_t) / (1 / hi_t - 1 / lo_t)
    return np.concatenate(r0), np.concatenate(absc), f.sum(axis=1) + g.sum(axis=1)


@lru_cache(maxsize=1)
def two_group_grid():
    """Cached ``r0_grid`` of ``two_group_pharma()`` at 31 points per resource."""
    return r0_grid(two_group_pharma())


def pharma_3group(seed=3):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.2, 1.0, (3, 3))
    A = 0.5 * (A + A.T) * 1e-6
    return build_pharma_model(SeirModel(rng.uniform(0.05, 0.3, 3), rng.uniform(0.1, 0.4, 3),
                                        rng.uniform(0.05, 0.3, 3), A, rng.uniform(3e5, 2e6, 3)))
