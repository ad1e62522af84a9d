"""Mobility data, contact matrices ``A = alpha P P^T`` and parameter sweeps."""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import matca
from .epimod import SeirModel
from .errors import ContractError

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class MobilityData:
    """Daily visit fractions ``P[i, j]`` from region ``i`` to ``j`` and populations."""

    P: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        P = matca.as_square_matrix(self.P, "P")
        pop = np.asarray(self.populations, dtype=float).ravel()
        if pop.shape != (P.shape[0],):
            raise ContractError(f"populations must have length {P.shape[0]}")
        if np.any(P < 0):
            raise ContractError("P must be non-negative")
        if np.any(P.sum(axis=1) > 1 + ROW_SUM_TOL):
            raise ContractError("rows of P must sum to at most 1")
        if not np.all(np.isfinite(pop)) or np.any(pop <= 0):
            raise ContractError("populations must be positive")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "populations", pop)

    @property
    def n(self):
        return self.P.shape[0]


def build_contact_matrix(mob: MobilityData, alpha: float) -> np.ndarray:
    """``alpha P P^T``, symmetrized against roundoff."""
    if not alpha > 0:
        raise ContractError("alpha must be positive")
    A = alpha * (mob.P @ mob.P.T)
    return 0.5 * (A + A.T)


def seir_from_mobility(mob: MobilityData, alpha, beta, gamma, delta) -> SeirModel:
    return SeirModel(beta, gamma, delta, build_contact_matrix(mob, alpha), mob.populations)


def calibrate_alpha(mob: MobilityData, base_rates, s0=None, target_r0: float = 2.5, alpha0: float = 1.0) -> float:
    """Contact scale giving ``R0 = target_r0`` at ``base_rates = (beta, gamma, delta)``.

    ``R0`` is linear in ``alpha`` (``F`` is), so a single evaluation at
    ``alpha0`` suffices.
    """
    if not target_r0 > 0:
        raise ContractError("target_r0 must be positive")
    beta, gamma, delta = base_rates
    s0 = mob.populations if s0 is None else s0
    r = SeirModel(beta, gamma, delta, build_contact_matrix(mob, alpha0), s0).r0()
    if not r > 0:
        raise ContractError("R0 vanishes for this mobility matrix; cannot calibrate")
    return alpha0 * target_r0 / r


def synth_mobility(n: int, seed: int = 0, kind: str = "gravity", stay_min: float = 0.7) -> MobilityData:
    """Seeded synthetic mobility with mostly-resident populations.

    Populations are log-uniform in ``[1e4, 1e7]``. Each region keeps a
    stay-at-home fraction in ``[stay_min, 0.95]`` and spreads the rest over
    other regions, weighted by ``pop_j / distance^2`` on a random unit-square
    layout (``gravity``) or uniformly at random (``uniform-noise``).
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    if kind not in ("gravity", "uniform-noise"):
        raise ContractError(f"unknown mobility kind {kind!r}")
    rng = np.random.default_rng(seed)
    pop = np.exp(rng.uniform(np.log(1e4), np.log(1e7), n))
    xy = rng.uniform(size=(n, 2))
    stay = rng.uniform(stay_min, 0.95, n)
    P = np.zeros((n, n))
    if n == 1:
        P[0, 0] = stay[0]
        return MobilityData(P, pop)
    if kind == "gravity":
        d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1) + 1e-2
        W = pop[None, :] / d2
    else:
        W = rng.uniform(size=(n, n))
    np.fill_diagonal(W, 0.0)
    W /= W.sum(axis=1, keepdims=True)
    P = (1 - stay)[:, None] * W
    # cap any single destination below the stay fraction so the diagonal dominates
    P = np.minimum(P, stay[:, None])
    np.fill_diagonal(P, stay)
    return MobilityData(P, pop)


@dataclass(frozen=True)
class SweepSpec:
    beta_values: tuple
    gamma_values: tuple
    delta_values: tuple

    def __post_init__(self):
        for name in ("beta_values", "gamma_values", "delta_values"):
            vals = tuple(float(v) for v in np.atleast_1d(getattr(self, name)))
            if not vals or any(not v > 0 for v in vals):
                raise ContractError(f"{name} must be a non-empty grid of positive rates")
            object.__setattr__(self, name, vals)

    @classmethod
    def default(cls):
        return cls(
            tuple(np.linspace(0.025, 0.5, 20)),
            tuple(np.linspace(0.05, 0.5, 10)),
            tuple(np.linspace(0.05, 0.5, 10)),
        )

    @classmethod
    def linear(cls, beta, gamma, delta):
        """Grids from ``(lo, hi, count)`` triples."""
        return cls(*(tuple(np.linspace(lo, hi, int(k))) for lo, hi, k in (beta, gamma, delta)))


def generate_sweep(spec: SweepSpec | None = None) -> list:
    """Cartesian product of the rate grids as ``(beta, gamma, delta)`` triples, beta slowest."""
    spec = spec or SweepSpec.default()
    return list(itertools.product(spec.beta_values, spec.gamma_values, spec.delta_values))


def sweep_manifest(triples, path=None):
    doc = {"models": [{"id": i, "beta": b, "gamma": g, "delta": d} for i, (b, g, d) in enumerate(triples)]}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return doc


def read_vector_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        vals = [float(c) for row in csv.reader(fh) for c in row if c.strip()]
    return np.array(vals)


def load_mobility(p_path, pop_path) -> MobilityData:
    """Mobility from an ``n x n`` CSV of visit fractions and an ``n x 1`` populations CSV."""
    return MobilityData(matca.read_matrix_csv(p_path), read_vector_csv(pop_path))
