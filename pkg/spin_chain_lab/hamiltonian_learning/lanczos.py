"""Restarted Lanczos ground-state solver with full reorthogonalization."""
import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .exceptions import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

# relative size of the Krylov residual below which the space is invariant
BREAKDOWN_TOL = 1e-12
# the Krylov basis is held in memory; a cycle never stores more than this
MAX_BASIS_BYTES = 512 * 2 ** 20


@dataclass(frozen=True, eq=False)
class LanczosResult:
    energy: float
    vector: np.ndarray
    residual: float
    ritz_values: Tuple[float, ...]
    iterations: int
    restarts: int


def _tridiagonal_eigen(alphas, betas, count=None):
    if len(alphas) == 1:
        return np.array(alphas[:1]), np.ones((1, 1))
    select = 'a' if count is None else 'i'
    select_range = None if count is None else (0, min(count, len(alphas)) - 1)
    return eigh_tridiagonal(np.asarray(alphas), np.asarray(betas),
                            select=select, select_range=select_range)


def _orthogonalize(vector, basis):
    # two passes of classical Gram-Schmidt keep the basis orthonormal to rounding
    for _ in range(2):
        vector -= basis.T @ (basis @ vector)
    return vector


def _krylov_cycle(matvec, start, krylov_dim, tol):
    """One Lanczos cycle from a unit start vector.

    Stops early once the ground Ritz residual estimate drops below tol/10 or
    the Krylov space becomes invariant.
    """
    dim = start.shape[0]
    basis = np.empty((krylov_dim, dim), dtype=start.dtype)
    basis[0] = start
    alphas, betas = [], []
    scale = 1.0
    for step in range(krylov_dim):
        w = matvec(basis[step])
        alpha = float(np.vdot(basis[step], w).real)
        w = w - alpha * basis[step]
        if step > 0:
            w -= betas[-1] * basis[step - 1]
        w = _orthogonalize(w, basis[:step + 1])
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)
        scale = max(scale, abs(alpha))

        values, vectors = _tridiagonal_eigen(alphas, betas, count=1)
        estimate = abs(beta * vectors[-1, 0])
        exhausted = beta <= BREAKDOWN_TOL * scale
        if exhausted or estimate <= 0.1 * tol or step + 1 == krylov_dim:
            return basis[:step + 1], alphas, betas, beta, exhausted
        betas.append(beta)
        basis[step + 1] = w / beta


def lanczos_ground_state(matvec: Callable[[np.ndarray], np.ndarray], dim: int, tol: float = 1e-10,
                         k: int = 6, seed: int = 1234, krylov_dim: int = 100,
                         max_restarts: int = 30, max_basis_bytes: int = MAX_BASIS_BYTES) -> LanczosResult:
    """Lowest eigenpair of a real symmetric operator given only its matvec.

    The start vector is drawn from a seeded generator, so runs are
    reproducible. Each cycle keeps its whole Krylov basis for full
    reorthogonalization; when a cycle ends unconverged the next one restarts
    from the current ground Ritz vector.
    """
    if tol <= 0:
        raise DomainError(f"Tolerance must be positive, got {tol}")
    if k < 2:
        raise DomainError(f"Need at least 2 Ritz values to report a gap, got k={k}")
    if dim < 1:
        raise DomainError(f"Operator dimension must be positive, got {dim}")

    rng = np.random.default_rng(seed)
    start = rng.standard_normal(dim)
    start /= np.linalg.norm(start)
    krylov_dim = max(2, min(krylov_dim, dim))
    affordable = max(2, max_basis_bytes // (np.dtype(float).itemsize * dim))
    if krylov_dim > affordable:
        logger.warning(
            f"Krylov dimension {krylov_dim} needs {krylov_dim * dim * 8 / 2 ** 20:.0f} MiB at dim={dim}; "
            f"capped at {affordable} vectors, restarts make up the difference"
        )
        krylov_dim = affordable

    iterations = 0
    residual = np.inf
    energy = np.nan
    for restart in range(max_restarts + 1):
        basis, alphas, betas, _, exhausted = _krylov_cycle(matvec, start, krylov_dim, tol)
        iterations += len(alphas)
        if exhausted:
            logger.debug(f"Krylov space became invariant after {len(alphas)} steps")
        values, vectors = _tridiagonal_eigen(alphas, betas)

        vector = basis.T @ vectors[:, 0]
        vector /= np.linalg.norm(vector)
        h_vector = matvec(vector)
        energy = float(np.vdot(vector, h_vector).real)
        residual = float(np.linalg.norm(h_vector - energy * vector))
        logger.debug(
            f"Lanczos cycle {restart}: {len(alphas)} steps, E={energy:.15g}, residual={residual:.3e}"
        )
        if residual <= tol:
            ritz = (energy,) + tuple(float(value) for value in values[1:k])
            return LanczosResult(
                energy=energy,
                vector=vector,
                residual=residual,
                ritz_values=ritz,
                iterations=iterations,
                restarts=restart,
            )
        start = vector

    logger.error(f"Lanczos did not converge: {iterations} matvecs, residual {residual:.3e} > {tol:.1e}")
    raise ConvergenceError(
        f"Lanczos did not reach residual {tol:.1e} after {iterations} iterations "
        f"({max_restarts} restarts); last residual {residual:.3e}",
        iterations=iterations,
        residual=residual,
        ritz_value=energy,
    )
