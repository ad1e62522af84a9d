"""Dense spectral linear algebra for small and medium matrices.

Matrices are plain ``numpy.ndarray`` objects; :func:`as_square_matrix`
validates and normalizes them. All routines are pure functions.
"""
from __future__ import annotations

import csv
import os

import numpy as np
import scipy.linalg

from .errors import ContractError, EigensolverError

#: Hurwitz threshold: a matrix is Hurwitz when ``max Re(lambda) < -HURWITZ_TOL``.
HURWITZ_TOL = 1e-10
#: Largest dimension accepted by the dense routines.
MAX_DIM = 512
#: Condition-number ceiling above which a Metzler-Hurwitz witness is not trusted.
WITNESS_COND_LIMIT = 1e12


def as_square_matrix(M, name="M"):
    """Return ``M`` as a finite, square float64 array.

    Raises
    ------
    ContractError
        If ``M`` is not two-dimensional and square, is empty, exceeds
        :data:`MAX_DIM`, or contains NaN/Inf.
    """
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ContractError(f"{name} must be a square matrix, got shape {arr.shape}")
    n = arr.shape[0]
    if n < 1:
        raise ContractError(f"{name} must have dimension >= 1")
    if n > MAX_DIM:
        raise ContractError(f"{name} has dimension {n} > {MAX_DIM}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def off_diagonal(M):
    """Copy of ``M`` with the diagonal set to zero."""
    M = as_square_matrix(M)
    out = M.copy()
    np.fill_diagonal(out, 0.0)
    return out


def is_nonnegative(M, tol=0.0):
    M = as_square_matrix(M)
    return bool(np.all(M >= -tol))


def is_metzler(M, tol=0.0):
    """True iff every off-diagonal entry of ``M`` is ``>= -tol``."""
    M = as_square_matrix(M)
    mask = ~np.eye(M.shape[0], dtype=bool)
    return bool(np.all(M[mask] >= -tol))


def eigenvalues(M):
    M = as_square_matrix(M)
    try:
        return scipy.linalg.eigvals(M, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc


def spectral_abscissa(M):
    """Largest real part of the eigenvalues of ``M``."""
    return float(np.max(eigenvalues(M).real))


def spectral_radius(A):
    """Largest eigenvalue modulus of ``A``."""
    return float(np.max(np.abs(eigenvalues(A))))


def is_hurwitz(M, tol=HURWITZ_TOL):
    """True iff every eigenvalue of ``M`` has real part ``< -tol``."""
    return spectral_abscissa(M) < -tol


def power_iteration(A, tol=1e-13, max_iter=100_000, seed=0):
    """Spectral radius of a non-negative matrix by power iteration.

    Cross-check for :func:`spectral_radius`. Iterates on ``A + I`` so that
    periodic irreducible matrices still converge; the returned value has the
    shift removed.

    Returns
    -------
    rho : float
    v : ndarray
        Normalized non-negative eigenvector estimate.
    """
    A = as_square_matrix(A, "A")
    if not is_nonnegative(A):
        raise ContractError("power_iteration requires a non-negative matrix")
    n = A.shape[0]
    B = A + np.eye(n)
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 1.5, n)
    v /= v.sum()
    lam = 0.0
    for _ in range(max_iter):
        u = B @ v
        lam_new = u.sum()
        u /= lam_new
        if np.max(np.abs(u - v)) < tol and abs(lam_new - lam) <= tol * lam_new:
            v = u
            lam = lam_new
            break
        v = u
        lam = lam_new
    else:
        raise EigensolverError("power iteration did not converge")
    return float(lam - 1.0), v


def neg_inverse(M):
    """``-M^{-1}``, or ``None`` when ``M`` is numerically singular."""
    M = as_square_matrix(M)
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(inv)):
        return None
    return -inv


def metzler_hurwitz_witness(M, full_output=False):
    """Positive vector ``w`` with ``M w < 0`` for a Metzler-Hurwitz matrix.

    The witness is ``w = -M^{-1} 1``, which is positive whenever ``M`` is
    Metzler and Hurwitz.

    Parameters
    ----------
    M : array_like
        Metzler matrix.
    full_output : bool
        If True, also return a flag telling whether ``None`` was returned
        because ``M`` is too ill-conditioned to trust the witness.

    Returns
    -------
    w : ndarray or None
        ``None`` when ``M`` is not Hurwitz.
    degenerate : bool
        Only when ``full_output`` is True.
    """
    M = as_square_matrix(M)
    if not is_metzler(M):
        raise ContractError("metzler_hurwitz_witness requires a Metzler matrix")
    n = M.shape[0]
    w = None
    degenerate = False
    if is_hurwitz(M):
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > WITNESS_COND_LIMIT:
            degenerate = True
        else:
            cand = np.linalg.solve(M, -np.ones(n))
            if np.all(cand > 0) and np.all(M @ cand < 0):
                w = cand
    if full_output:
        return w, degenerate
    return w


def perturbed_stability_equivalent(H, E):
    """Both sides of the perturbed-Metzler stability equivalence.

    For ``H`` Metzler and Hurwitz and ``E >= 0``, ``H + E`` is Hurwitz if and
    only if ``rho(-E H^{-1}) < 1``.

    Returns
    -------
    hurwitz : bool
        Whether ``H + E`` is Hurwitz.
    rho : float
        ``rho(-E H^{-1})``.
    """
    H = as_square_matrix(H, "H")
    E = as_square_matrix(E, "E")
    if H.shape != E.shape:
        raise ContractError("H and E must have the same shape")
    if not is_metzler(H):
        raise ContractError("H must be Metzler")
    if not is_hurwitz(H):
        raise ContractError("H must be Hurwitz")
    if not is_nonnegative(E):
        raise ContractError("E must be non-negative")
    # -E H^{-1} = (solve(H^T, -E^T))^T
    K = np.linalg.solve(H.T, -E.T).T
    return is_hurwitz(H + E), spectral_radius(K)


def read_matrix_csv(path):
    """Read a headerless CSV of decimal floats into a square matrix."""
    with open(path, newline="") as fh:
        rows = [list(map(float, row)) for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    return as_square_matrix(rows, os.path.basename(str(path)))


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([repr(float(v)) for v in row])
