"""Open SU(4) chain H(theta) = sum_i H_i(theta): assembly, ground states, entanglement."""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from .exceptions import DomainError
from .lanczos import lanczos_ground_state
from .su4_algebra import (SITE_DIM, build_bond_hamiltonian, build_exchange,
                          build_squared_exchange)

logger = logging.getLogger(__name__)

MIN_LENGTH = 2
MAX_LENGTH = 9
ENTROPY_CUTOFF = 1e-14


class OperatorKind(str, Enum):
    EXCHANGE_SUM = 'c2-sum'
    SQUARED_EXCHANGE_SUM = 'c2sq-sum'
    HAMILTONIAN = 'hamiltonian'


def hilbert_dim(length: int) -> int:
    return SITE_DIM ** length


def chain_length(psi: np.ndarray) -> int:
    """Number of sites L such that len(psi) == 6**L."""
    size = np.asarray(psi).size
    length = 0
    while SITE_DIM ** length < size:
        length += 1
    if SITE_DIM ** length != size or length < 1:
        raise DomainError(f"State of size {size} is not a vector on 6^L states")
    return length


def _check_length(length: int):
    if not MIN_LENGTH <= length <= MAX_LENGTH:
        raise DomainError(f"Chain length must be in {MIN_LENGTH}..{MAX_LENGTH}, got {length}")


# ========== Hamiltonian ==========

@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    length: int
    theta: float
    matrix: sparse.csr_matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector


def embed_bond(bond: np.ndarray, site: int, length: int) -> sparse.csr_matrix:
    """Pad a two-site operator on (site, site+1) with identities; sites are 0-based."""
    left = sparse.identity(SITE_DIM ** site, format='csr')
    right = sparse.identity(SITE_DIM ** (length - site - 2), format='csr')
    return sparse.kron(sparse.kron(left, sparse.csr_matrix(bond)), right, format='csr')


def assemble_hamiltonian(length: int, theta: float) -> SparseHamiltonian:
    _check_length(length)
    bond = build_bond_hamiltonian(theta).matrix
    matrix = sparse.csr_matrix((hilbert_dim(length),) * 2)
    for site in range(length - 1):
        matrix = matrix + embed_bond(bond, site, length)
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    logger.debug(f"Assembled H(theta={theta:.6g}) on L={length}: dim={matrix.shape[0]}, nnz={matrix.nnz}")
    return SparseHamiltonian(length=length, theta=float(theta), matrix=matrix)


# ========== Ground states ==========

@dataclass(frozen=True, eq=False)
class GroundStateResult:
    energy: float
    vector: np.ndarray
    residual: float
    ritz_values: Tuple[float, ...]
    iterations: int

    @property
    def gaps(self) -> Tuple[float, ...]:
        return tuple(value - self.energy for value in self.ritz_values[1:])

    @property
    def gap(self) -> float:
        return self.gaps[0] if self.gaps else float('nan')

    @property
    def degeneracy_report(self) -> dict:
        return {
            'ritz_values': list(self.ritz_values),
            'gaps': list(self.gaps),
        }


def ground_state(hamiltonian: SparseHamiltonian, tol: float = 1e-10, k: int = 6, seed: int = 1234,
                 krylov_dim: int = 100, max_restarts: int = 30) -> GroundStateResult:
    """Lowest Ritz pair of H with residual <= tol and the k lowest Ritz values.

    A degenerate ground space yields one arbitrary member; the Ritz values
    show the spectrum above it as seen from the seeded start vector.
    """
    result = lanczos_ground_state(
        hamiltonian.matvec, hamiltonian.dim, tol=tol, k=k, seed=seed,
        krylov_dim=krylov_dim, max_restarts=max_restarts,
    )
    logger.info(
        f"Ground state L={hamiltonian.length} theta={hamiltonian.theta:.6g}: "
        f"E={result.energy:.12g}, residual={result.residual:.2e}, {result.iterations} iterations"
    )
    return GroundStateResult(
        energy=result.energy,
        vector=result.vector,
        residual=result.residual,
        ritz_values=result.ritz_values,
        iterations=result.iterations,
    )


def energy_variance(hamiltonian: SparseHamiltonian, psi: np.ndarray) -> float:
    """<H^2> - <H>^2 evaluated as ||(H - <H>) psi||^2 for a unit psi."""
    h_psi = hamiltonian.matvec(psi)
    mean = np.vdot(psi, h_psi).real
    return float(np.linalg.norm(h_psi - mean * psi) ** 2)


# ========== Matrix-free operator sums ==========

def _bond_matrix(kind: OperatorKind, theta: Optional[float]) -> np.ndarray:
    kind = OperatorKind(kind)
    if kind is OperatorKind.EXCHANGE_SUM:
        return build_exchange().matrix
    if kind is OperatorKind.SQUARED_EXCHANGE_SUM:
        return build_squared_exchange().matrix
    if theta is None:
        raise DomainError("theta is required to apply H(theta)")
    return build_bond_hamiltonian(theta).matrix


def apply_bond_sum(bond: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """sum_i bond(i, i+1) psi without forming the 6^L x 6^L operator."""
    psi = np.asarray(psi)
    length = chain_length(psi)
    if length < 2:
        raise DomainError("A bond sum needs at least two sites")
    flat = psi.reshape(-1)
    out = np.zeros(flat.shape, dtype=np.result_type(flat.dtype, bond.dtype))
    for site in range(length - 1):
        shape = (SITE_DIM ** site, SITE_DIM ** 2, SITE_DIM ** (length - site - 2))
        view = out.reshape(shape)
        view += bond @ flat.reshape(shape)
    return out.reshape(psi.shape)


def apply_operator_sum(kind: OperatorKind, psi: np.ndarray, theta: Optional[float] = None,
                       length: Optional[int] = None) -> np.ndarray:
    if length is not None and np.asarray(psi).size != hilbert_dim(length):
        raise DomainError(f"State has {np.asarray(psi).size} amplitudes, expected 6^{length}")
    return apply_bond_sum(_bond_matrix(kind, theta), psi)


def expectation(kind: OperatorKind, psi: np.ndarray, theta: Optional[float] = None) -> float:
    return float(np.vdot(psi, apply_operator_sum(kind, psi, theta)).real / np.vdot(psi, psi).real)


# ========== Reduced states and entropy ==========

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Reduced state on the contiguous block of sites first..last (1-based)."""
    matrix: np.ndarray
    block: Tuple[int, int]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def block_length(self) -> int:
        return self.block[1] - self.block[0] + 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_valid(self, tol: float = 1e-12) -> bool:
        hermitian = np.allclose(self.matrix, self.matrix.conj().T, atol=tol, rtol=0.0)
        return hermitian and abs(self.trace - 1.0) <= tol and self.eigenvalues.min() >= -tol


def _split(psi: np.ndarray, ell: int) -> np.ndarray:
    length = chain_length(psi)
    if not 1 <= ell <= length - 1:
        raise DomainError(f"Block length must be in 1..{length - 1}, got {ell}")
    return np.asarray(psi).reshape(SITE_DIM ** ell, SITE_DIM ** (length - ell))


def reduced_density_matrix(psi: np.ndarray, ell: int, complement: bool = False) -> DensityMatrix:
    """rho_A for A = sites 1..ell, or rho_B for B = sites ell+1..L when complement is set."""
    amplitudes = _split(psi, ell)
    norm = np.vdot(amplitudes, amplitudes).real
    if complement:
        matrix = amplitudes.T @ amplitudes.conj()
        block = (ell + 1, chain_length(psi))
    else:
        matrix = amplitudes @ amplitudes.conj().T
        block = (1, ell)
    return DensityMatrix(matrix=matrix / norm, block=block)


def schmidt_probabilities(psi: np.ndarray, ell: int) -> np.ndarray:
    """Squared Schmidt coefficients across the cut after site ell, descending."""
    singular = np.linalg.svd(_split(psi, ell), compute_uv=False)
    weights = singular ** 2
    return weights / weights.sum()


def von_neumann_entropy(probabilities, cutoff: float = ENTROPY_CUTOFF) -> float:
    """-sum p ln p over p > cutoff (natural log)."""
    p = np.asarray(probabilities, dtype=float)
    p = p[p > cutoff]
    return float(-np.sum(p * np.log(p)))


def entanglement_entropy(rho: DensityMatrix) -> float:
    return von_neumann_entropy(rho.eigenvalues)


def entanglement_profile(psi: np.ndarray) -> List[float]:
    """Entropy at every cut 1..L-1 of a chain state."""
    length = chain_length(psi)
    return [von_neumann_entropy(schmidt_probabilities(psi, ell)) for ell in range(1, length)]
