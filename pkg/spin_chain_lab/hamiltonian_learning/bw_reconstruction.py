"""Lattice Bisognano-Wichmann fits of a block reduced density matrix.

The block A is the leading segment of the chain with the entangling cut at
its right edge. H_A^BW(theta) weights bond (i, i+1) by its distance from the
cut, and sigma^BW = exp(-beta H_A^BW) / Z.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import minimize
from scipy.special import logsumexp

from .chain_model import DensityMatrix, embed_bond, von_neumann_entropy
from .exceptions import DomainError, NumericalError
from .su4_algebra import SITE_DIM, bond_weights, build_bond_hamiltonian, build_exchange, build_squared_exchange

logger = logging.getLogger(__name__)

MIN_BLOCK = 2
MAX_BLOCK = 5
RELATIVE_ENTROPY_FLOOR = -1e-10
DEFAULT_THETA_RANGE = (0.05, 0.85)
DEFAULT_BETA_RANGE = (0.1, 10.0)
DEFAULT_THETA_POINTS = 41
DEFAULT_BETA_POINTS = 25
SIMPLEX_XATOL = 5e-7


class WeightConvention(str, Enum):
    INTEGER = 'integer'
    HALF_INTEGER = 'half-integer'


def _check_block(block_length: int):
    if not MIN_BLOCK <= block_length <= MAX_BLOCK:
        raise DomainError(f"Block length must be in {MIN_BLOCK}..{MAX_BLOCK}, got {block_length}")


def bond_distance_weights(block_length: int, convention: WeightConvention = WeightConvention.INTEGER) -> np.ndarray:
    """Weight of bond (i, i+1), i = 1..l-1: l - i, or l - i - 1/2 for the half-integer convention."""
    _check_block(block_length)
    distances = block_length - np.arange(1, block_length, dtype=float)
    if WeightConvention(convention) is WeightConvention.HALF_INTEGER:
        distances -= 0.5
    return distances


def _weighted_bond_sum(bond: np.ndarray, weights: np.ndarray) -> np.ndarray:
    block_length = len(weights) + 1
    total = sparse.csr_matrix((SITE_DIM ** block_length,) * 2)
    for site, weight in enumerate(weights):
        total = total + weight * embed_bond(bond, site, block_length)
    return total.toarray()


def bw_hamiltonian(block_length: int, theta: float,
                   convention: WeightConvention = WeightConvention.INTEGER) -> np.ndarray:
    """Dense H_A^BW = sum_i weight_i H_i(theta) on 6^l states."""
    weights = bond_distance_weights(block_length, convention)
    return _weighted_bond_sum(build_bond_hamiltonian(theta).matrix, weights)


def _block_length(dim: int) -> int:
    length = int(round(np.log(dim) / np.log(SITE_DIM)))
    if SITE_DIM ** length != dim:
        raise DomainError(f"Density matrix dimension {dim} is not a power of {SITE_DIM}")
    _check_block(length)
    return length


@dataclass(frozen=True, eq=False)
class BwAnsatz:
    block_length: int
    theta: float
    beta: float
    convention: WeightConvention = WeightConvention.INTEGER

    def __post_init__(self):
        _check_block(self.block_length)
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def weights(self) -> np.ndarray:
        return bond_distance_weights(self.block_length, self.convention)

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return bw_hamiltonian(self.block_length, self.theta, self.convention)

    @cached_property
    def _eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.hamiltonian)

    @property
    def energies(self) -> np.ndarray:
        return self._eigensystem[0]

    @property
    def log_partition(self) -> float:
        return float(logsumexp(-self.beta * self.energies))

    @property
    def normalization(self) -> float:
        """c in sigma = exp(-beta H + c)."""
        return -self.log_partition

    def state(self) -> DensityMatrix:
        energies, vectors = self._eigensystem
        exponents = -self.beta * (energies - energies.min())
        populations = np.exp(exponents)
        total = populations.sum()
        if not np.isfinite(total) or total <= 0:
            raise NumericalError(
                f"BW populations overflowed at theta={self.theta}, beta={self.beta}"
            )
        populations /= total
        matrix = (vectors * populations) @ vectors.T
        return DensityMatrix(matrix=0.5 * (matrix + matrix.T), block=(1, self.block_length))


def bw_state(block_length: int, theta: float, beta: float,
             convention: WeightConvention = WeightConvention.INTEGER) -> DensityMatrix:
    return BwAnsatz(block_length, theta, beta, convention).state()


class RelativeEntropyObjective:
    """S(rho || sigma^BW(theta, beta)) for one fixed rho.

    Uses S = -S(rho) + beta Tr[rho H^BW] + ln Z, so only the spectrum of H^BW
    is needed; Tr[rho H^BW] is linear in (cos theta, sin theta / 4) and is
    precomputed. Spectra are cached per theta.
    """

    def __init__(self, rho: DensityMatrix, convention: WeightConvention = WeightConvention.INTEGER):
        matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        self.block_length = _block_length(matrix.shape[0])
        self.convention = WeightConvention(convention)
        weights = bond_distance_weights(self.block_length, self.convention)
        self._exchange = _weighted_bond_sum(build_exchange().matrix, weights)
        self._squared = _weighted_bond_sum(build_squared_exchange().matrix, weights)
        self._traces = np.array([
            np.einsum('ij,ji->', matrix, self._exchange).real,
            np.einsum('ij,ji->', matrix, self._squared).real,
        ])
        self.rho_entropy = von_neumann_entropy(np.linalg.eigvalsh(matrix))
        self._spectra: Dict[float, np.ndarray] = {}
        self.violations = 0

    def energies(self, theta: float) -> np.ndarray:
        theta = float(theta)
        if theta not in self._spectra:
            a, b = bond_weights(theta)
            self._spectra[theta] = np.linalg.eigvalsh(a * self._exchange + b * self._squared)
        return self._spectra[theta]

    def __call__(self, theta: float, beta: float) -> float:
        if not beta > 0:
            raise DomainError(f"beta must be positive, got {beta}")
        energy = float(np.array(bond_weights(theta)) @ self._traces)
        value = -self.rho_entropy + beta * energy + float(logsumexp(-beta * self.energies(theta)))
        if not np.isfinite(value):
            raise NumericalError(f"Relative entropy is not finite at theta={theta}, beta={beta}")
        if value < RELATIVE_ENTROPY_FLOOR:
            self.violations += 1
            logger.warning(f"Relative entropy {value:.3e} below floor at theta={theta:.6g}, beta={beta:.6g}; clamped")
            value = RELATIVE_ENTROPY_FLOOR
        return value


def relative_entropy(rho: DensityMatrix, theta: float, beta: float,
                     convention: WeightConvention = WeightConvention.INTEGER) -> float:
    return RelativeEntropyObjective(rho, convention)(theta, beta)


def naive_relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr[rho ln rho - rho ln sigma] through matrix logarithms of both operands."""
    def _log(matrix):
        values, vectors = np.linalg.eigh(matrix)
        return (vectors * np.log(np.clip(values, 1e-300, None))) @ vectors.conj().T
    return float(np.trace(rho.matrix @ (_log(rho.matrix) - _log(sigma.matrix))).real)


def theta_profile(rho: DensityMatrix, thetas: Sequence[float], beta: float,
                  convention: WeightConvention = WeightConvention.INTEGER,
                  objective: Optional[RelativeEntropyObjective] = None) -> np.ndarray:
    objective = objective or RelativeEntropyObjective(rho, convention)
    return np.array([objective(theta, beta) for theta in thetas])


def is_unimodal(values: Sequence[float]) -> bool:
    """At most one sign change in the discrete gradient."""
    steps = np.sign(np.diff(np.asarray(values, dtype=float)))
    steps = steps[steps != 0]
    return int(np.count_nonzero(steps[1:] != steps[:-1])) <= 1


@dataclass(frozen=True, eq=False)
class BwFitResult:
    theta_hat: float
    beta_hat: float
    min_relative_entropy: float
    coarse_min: float
    scan_surface: pd.DataFrame
    theta_curve: np.ndarray
    boundary_flag: bool
    convention: WeightConvention
    joint_beta: bool
    evaluations: int

    @property
    def unimodal(self) -> bool:
        return is_unimodal(self.theta_curve)

    def summary(self) -> dict:
        return {
            'theta_hat': self.theta_hat,
            'beta_hat': self.beta_hat,
            'min_value': self.min_relative_entropy,
            'coarse_min': self.coarse_min,
            'boundary_flag': self.boundary_flag,
            'weight_convention': self.convention.value,
            'joint_beta': self.joint_beta,
            'unimodal': self.unimodal,
        }


def _on_boundary(value: float, bounds: Tuple[float, float]) -> bool:
    span = bounds[1] - bounds[0]
    tol = max(1e-6 * span, 2 * SIMPLEX_XATOL)
    return value - bounds[0] <= tol or bounds[1] - value <= tol


def fit(rho: DensityMatrix, theta_range: Tuple[float, float] = DEFAULT_THETA_RANGE,
        beta_range: Tuple[float, float] = DEFAULT_BETA_RANGE, theta_points: int = DEFAULT_THETA_POINTS,
        beta_points: int = DEFAULT_BETA_POINTS, convention: WeightConvention = WeightConvention.INTEGER,
        joint_beta: bool = True, xatol: float = SIMPLEX_XATOL) -> BwFitResult:
    """Coarse (theta, beta) grid followed by Nelder-Mead refinement.

    With joint_beta the simplex moves in (theta, ln beta); otherwise beta is
    held at its coarse optimum and only theta is refined.
    """
    theta_lo, theta_hi = map(float, theta_range)
    beta_lo, beta_hi = map(float, beta_range)
    if theta_points < 1 or beta_points < 1 or theta_hi < theta_lo:
        raise DomainError(f"Empty theta grid: range {theta_range}, {theta_points} points")
    if beta_lo <= 0 or beta_hi < beta_lo:
        raise DomainError(f"beta range must be positive and ordered, got {beta_range}")

    objective = RelativeEntropyObjective(rho, convention)
    thetas = np.linspace(theta_lo, theta_hi, theta_points)
    betas = np.geomspace(beta_lo, beta_hi, beta_points)
    surface = np.array([[objective(theta, beta) for beta in betas] for theta in thetas])
    i, j = np.unravel_index(np.argmin(surface), surface.shape)
    coarse_min = float(surface[i, j])
    logger.debug(f"Coarse BW minimum {coarse_min:.6e} at theta={thetas[i]:.6g}, beta={betas[j]:.6g}")

    theta_step = (thetas[1] - thetas[0]) if theta_points > 1 else 0.01
    log_bounds = (np.log(beta_lo), np.log(beta_hi))
    log_step = (np.log(betas[1]) - np.log(betas[0])) if beta_points > 1 else 0.1
    options = {'xatol': xatol, 'fatol': np.inf, 'maxiter': 4000}
    if joint_beta:
        start = np.array([thetas[i], np.log(betas[j])])
        simplex = np.array([start, start + [theta_step, 0.0], start + [0.0, log_step]])
        simplex[:, 0] = np.clip(simplex[:, 0], theta_lo, theta_hi)
        simplex[:, 1] = np.clip(simplex[:, 1], *log_bounds)
        if theta_step == 0 or simplex[1, 0] == simplex[0, 0]:
            simplex[1, 0] = start[0] - theta_step
        if simplex[2, 1] == simplex[0, 1]:
            simplex[2, 1] = start[1] - log_step
        result = minimize(
            lambda x: objective(x[0], np.exp(x[1])), start, method='Nelder-Mead',
            bounds=[(theta_lo, theta_hi), log_bounds],
            options={**options, 'initial_simplex': simplex},
        )
        theta_hat, beta_hat = float(result.x[0]), float(np.exp(result.x[1]))
    else:
        beta_hat = float(betas[j])
        start = np.array([thetas[i]])
        second = thetas[i] + theta_step if thetas[i] + theta_step <= theta_hi else thetas[i] - theta_step
        result = minimize(
            lambda x: objective(x[0], beta_hat), start, method='Nelder-Mead',
            bounds=[(theta_lo, theta_hi)],
            options={**options, 'initial_simplex': np.array([[thetas[i]], [second]])},
        )
        theta_hat = float(result.x[0])

    refined = float(result.fun)
    if refined > coarse_min:
        theta_hat, beta_hat, refined = float(thetas[i]), float(betas[j]), coarse_min
    if not result.success:
        logger.warning(f"Nelder-Mead stopped early: {result.message}")

    boundary = _on_boundary(theta_hat, (theta_lo, theta_hi)) or _on_boundary(np.log(beta_hat), log_bounds)
    if boundary:
        logger.warning(f"BW minimum lies on the search boundary: theta={theta_hat:.6g}, beta={beta_hat:.6g}")
    logger.info(
        f"BW fit ({WeightConvention(convention).value}): theta_hat={theta_hat:.8g}, "
        f"beta_hat={beta_hat:.8g}, S={refined:.6e}"
    )

    frame = pd.DataFrame({
        'theta': np.repeat(thetas, len(betas)),
        'beta': np.tile(betas, len(thetas)),
        'relative_entropy': surface.reshape(-1),
    })
    return BwFitResult(
        theta_hat=theta_hat,
        beta_hat=beta_hat,
        min_relative_entropy=max(refined, RELATIVE_ENTROPY_FLOOR),
        coarse_min=coarse_min,
        scan_surface=frame,
        theta_curve=theta_profile(rho, thetas, beta_hat, objective=objective),
        boundary_flag=bool(boundary),
        convention=WeightConvention(convention),
        joint_beta=joint_beta,
        evaluations=int(result.nfev) + surface.size,
    )
