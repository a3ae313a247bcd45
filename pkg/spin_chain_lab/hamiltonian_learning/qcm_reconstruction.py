"""Recover theta from a state through the covariance matrix of (sum C2, sum C2^2)."""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .chain_model import (OperatorKind, apply_operator_sum, assemble_hamiltonian, chain_length,
                          ground_state)
from .exceptions import DomainError
from .su4_algebra import bond_weights

logger = logging.getLogger(__name__)

NORM_TOL = 1e-8
AMBIGUITY_RATIO = 10.0
# eigenvalues of M below this fraction of max ||O_m psi||^2 are rounding noise
NOISE_RTOL = 1e-10
OPERATOR_POOL = (OperatorKind.EXCHANGE_SUM, OperatorKind.SQUARED_EXCHANGE_SUM)


def weight_vector(theta: float) -> np.ndarray:
    """w(theta) = (cos theta, sin theta / 4)."""
    return np.array(bond_weights(theta))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix2:
    entries: np.ndarray
    length: Optional[int] = None
    theta0: Optional[float] = None
    means: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: float = 0.0

    @property
    def noise_floor(self) -> float:
        return NOISE_RTOL * self.scale

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def variance(self, theta: float) -> float:
        w = weight_vector(theta)
        return float(w @ self.entries @ w)


@dataclass(frozen=True, eq=False)
class ThetaEstimate:
    theta_hat: float
    weight_vector: np.ndarray
    residual: float
    gap: float
    noise_floor: float = 0.0

    @property
    def ambiguous(self) -> bool:
        # a second eigenvalue at noise level means no unique null direction
        return self.gap <= max(AMBIGUITY_RATIO * abs(self.residual), self.noise_floor)

    def as_dict(self) -> dict:
        return {
            'theta_hat': self.theta_hat,
            'weight_vector': [float(w) for w in self.weight_vector],
            'residual': self.residual,
            'gap': self.gap,
            'noise_floor': self.noise_floor,
            'ambiguous': self.ambiguous,
        }


def _check_normalized(psi: np.ndarray):
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > NORM_TOL:
        raise DomainError(f"State must be normalized, got norm {norm:.12g}")


def correlation_matrix(psi: np.ndarray, theta0: Optional[float] = None) -> CorrelationMatrix2:
    """M_mn = 1/2 <{O_m, O_n}> - <O_m><O_n> for O = (sum C2, sum C2^2).

    Built from the centered vectors u_m = (O_m - <O_m>) psi, so M = Re <u_m|u_n>
    is positive semidefinite by construction.
    """
    psi = np.asarray(psi)
    _check_normalized(psi)
    centered, means, norms = [], [], []
    for kind in OPERATOR_POOL:
        image = apply_operator_sum(kind, psi)
        mean = float(np.vdot(psi, image).real)
        centered.append(image - mean * psi)
        means.append(mean)
        norms.append(float(np.vdot(image, image).real))
    entries = np.array([[np.vdot(a, b).real for b in centered] for a in centered])
    entries = 0.5 * (entries + entries.T)
    return CorrelationMatrix2(entries=entries, length=chain_length(psi), theta0=theta0,
                              means=np.array(means), scale=max(norms))


def reconstruct_theta(matrix: CorrelationMatrix2) -> ThetaEstimate:
    """theta_hat from the eigenvector of the smaller eigenvalue, fixed so w1 >= 0."""
    entries = matrix.entries if isinstance(matrix, CorrelationMatrix2) else np.asarray(matrix)
    if entries.shape != (2, 2) or not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12):
        raise DomainError(f"Expected a symmetric 2x2 correlation matrix, got {entries!r}")
    values, vectors = np.linalg.eigh(entries)
    w = vectors[:, 0]
    if w[0] < 0 or (w[0] == 0 and w[1] < 0):
        w = -w
    estimate = ThetaEstimate(
        theta_hat=float(np.arctan2(4.0 * w[1], w[0])),
        weight_vector=w,
        residual=float(values[0]),
        gap=float(values[1]),
        noise_floor=matrix.noise_floor if isinstance(matrix, CorrelationMatrix2) else 0.0,
    )
    if estimate.ambiguous:
        logger.warning(
            f"Correlation matrix has no isolated null direction ({values[0]:.3e}, {values[1]:.3e}); "
            f"theta_hat={estimate.theta_hat:.6g} is not unique"
        )
    return estimate


@dataclass(frozen=True, eq=False)
class FluctuationCurve:
    thetas: np.ndarray
    variances: np.ndarray

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.variances))

    @property
    def theta_min(self) -> float:
        return float(self.thetas[self.argmin])

    def second_differences(self) -> np.ndarray:
        return np.diff(self.variances, n=2)

    def is_convex(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.second_differences() >= -tol))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'theta': self.thetas, 'variance': self.variances})


def fluctuation_scan(psi: np.ndarray, theta_grid: Iterable[float],
                     matrix: Optional[CorrelationMatrix2] = None) -> FluctuationCurve:
    """Var_psi[H(theta)] = w(theta)^T M w(theta) over the grid; M is computed once."""
    thetas = np.asarray(list(theta_grid), dtype=float)
    if thetas.size == 0:
        raise DomainError("Fluctuation scan needs a nonempty theta grid")
    if matrix is None:
        matrix = correlation_matrix(psi)
    weights = np.stack([weight_vector(theta) for theta in thetas])
    variances = np.einsum('ti,ij,tj->t', weights, matrix.entries, weights)
    return FluctuationCurve(thetas=thetas, variances=variances)


def direct_variance(psi: np.ndarray, theta: float) -> float:
    """<H^2> - <H>^2 by applying H(theta) to psi."""
    psi = np.asarray(psi)
    image = apply_operator_sum(OperatorKind.HAMILTONIAN, psi, theta)
    mean = np.vdot(psi, image).real / np.vdot(psi, psi).real
    return float(np.linalg.norm(image - mean * psi) ** 2 / np.vdot(psi, psi).real)


def recovery_table(length: int, theta0s: Sequence[float], tol: float = 1e-10, k: int = 6,
                   seed: int = 1234, krylov_dim: int = 100, max_restarts: int = 30) -> pd.DataFrame:
    """theta_hat from the exact ground state of H(theta0) for every theta0."""
    rows = []
    for theta0 in theta0s:
        result = ground_state(assemble_hamiltonian(length, theta0), tol=tol, k=k, seed=seed,
                              krylov_dim=krylov_dim, max_restarts=max_restarts)
        estimate = reconstruct_theta(correlation_matrix(result.vector, theta0=theta0))
        logger.info(f"theta0={theta0:.6g} -> theta_hat={estimate.theta_hat:.10g} (residual {estimate.residual:.2e})")
        rows.append({
            'theta0': float(theta0),
            'theta_hat': estimate.theta_hat,
            'residual': estimate.residual,
            'gap': estimate.gap,
            'ambiguous': estimate.ambiguous,
        })
    return pd.DataFrame(rows, columns=['theta0', 'theta_hat', 'residual', 'gap', 'ambiguous'])
