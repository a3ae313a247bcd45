"""SU(4) spin operators on the six-dimensional antisymmetric on-site representation.

Each site holds two fermions out of four flavors. The on-site basis is the
lexicographic list of flavor pairs, and every matrix in the package is written
in that basis (site i is the slow index of a two-site product).
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

FLAVORS = 4
SITE_DIM = 6
BOND_DIM = SITE_DIM * SITE_DIM
XVBS_THETA = float(np.arctan(2.0 / 3.0))

Occupation = Tuple[int, ...]


class BondKind(str, Enum):
    EXCHANGE = 'exchange'
    SQUARED_EXCHANGE = 'squared-exchange'
    BOND_HAMILTONIAN = 'bond-hamiltonian'


@dataclass(frozen=True, eq=False)
class LocalGenerator:
    """S^mu_nu = c+_mu c_nu - 1/2 delta_mu_nu on one site (flavors are 1-based)."""
    mu: int
    nu: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class BondOperator:
    """A 36x36 real symmetric operator on sites (i, i+1)."""
    matrix: np.ndarray
    kind: BondKind
    theta: Optional[float] = None


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


# ========== Fermionic bookkeeping ==========

def _annihilate(flavor: int, occupied: Occupation) -> Optional[Tuple[int, Occupation]]:
    if flavor not in occupied:
        return None
    position = occupied.index(flavor)
    return (-1) ** position, occupied[:position] + occupied[position + 1:]


def _create(flavor: int, occupied: Occupation) -> Optional[Tuple[int, Occupation]]:
    if flavor in occupied:
        return None
    position = sum(1 for other in occupied if other < flavor)
    return (-1) ** position, occupied[:position] + (flavor,) + occupied[position:]


def _apply_bilinear(mu: int, nu: int, occupied: Occupation) -> Optional[Tuple[int, Occupation]]:
    """Act with c+_mu c_nu on a normal-ordered occupation tuple."""
    annihilated = _annihilate(nu, occupied)
    if annihilated is None:
        return None
    sign, remaining = annihilated
    created = _create(mu, remaining)
    if created is None:
        return None
    return sign * created[0], created[1]


def _check_flavor(flavor: int, name: str):
    if not isinstance(flavor, (int, np.integer)) or not 1 <= flavor <= FLAVORS:
        raise DomainError(f"{name} must be a flavor index in 1..{FLAVORS}, got {flavor!r}")


def build_basis() -> List[Tuple[int, int]]:
    """Ordered on-site basis: kets c+_a c+_b |0> with a < b, lexicographic."""
    return list(itertools.combinations(range(1, FLAVORS + 1), 2))


@lru_cache(maxsize=None)
def _basis_index() -> dict:
    return {pair: index for index, pair in enumerate(build_basis())}


def create_pair(mu: int, nu: int) -> Optional[Tuple[int, int]]:
    """(sign, basis index) of c+_mu c+_nu |0>, or None when mu == nu."""
    _check_flavor(mu, 'mu')
    _check_flavor(nu, 'nu')
    first = _create(nu, ())
    second = _create(mu, first[1])
    if second is None:
        return None
    return first[0] * second[0], _basis_index()[second[1]]


def levi_civita() -> np.ndarray:
    """Rank-4 antisymmetric tensor with eps[0, 1, 2, 3] = +1."""
    eps = np.zeros((FLAVORS,) * FLAVORS)
    for permutation in itertools.permutations(range(FLAVORS)):
        inversions = sum(
            1 for i, j in itertools.combinations(range(FLAVORS), 2)
            if permutation[i] > permutation[j]
        )
        eps[permutation] = (-1) ** inversions
    return eps


# ========== Generators and bond operators ==========

@lru_cache(maxsize=None)
def build_generator(mu: int, nu: int) -> LocalGenerator:
    _check_flavor(mu, 'mu')
    _check_flavor(nu, 'nu')
    index = _basis_index()
    matrix = np.zeros((SITE_DIM, SITE_DIM))
    for column, pair in enumerate(build_basis()):
        result = _apply_bilinear(mu, nu, pair)
        if result is not None:
            sign, occupied = result
            matrix[index[occupied], column] = sign
    if mu == nu:
        matrix -= 0.5 * np.eye(SITE_DIM)
    return LocalGenerator(mu=mu, nu=nu, matrix=_frozen(matrix))


def all_generators() -> List[LocalGenerator]:
    flavors = range(1, FLAVORS + 1)
    return [build_generator(mu, nu) for mu in flavors for nu in flavors]


def total_generators(n_sites: int) -> List[np.ndarray]:
    """The 16 block generators sum_j S^mu_nu(j); they span the 15-dim su(4)."""
    if n_sites < 1:
        raise DomainError(f"Block must hold at least one site, got {n_sites}")
    totals = []
    for generator in all_generators():
        total = np.zeros((SITE_DIM ** n_sites,) * 2)
        for site in range(n_sites):
            left = np.eye(SITE_DIM ** site)
            right = np.eye(SITE_DIM ** (n_sites - site - 1))
            total += np.kron(np.kron(left, generator.matrix), right)
        totals.append(total)
    return totals


@lru_cache(maxsize=None)
def build_exchange() -> BondOperator:
    """C2 = sum_{mu,nu} S^mu_nu (x) S^nu_mu on two adjacent sites."""
    flavors = range(1, FLAVORS + 1)
    matrix = np.zeros((BOND_DIM, BOND_DIM))
    for mu in flavors:
        for nu in flavors:
            matrix += np.kron(build_generator(mu, nu).matrix, build_generator(nu, mu).matrix)
    return BondOperator(matrix=_frozen(matrix), kind=BondKind.EXCHANGE)


@lru_cache(maxsize=None)
def build_squared_exchange() -> BondOperator:
    exchange = build_exchange().matrix
    return BondOperator(matrix=_frozen(exchange @ exchange), kind=BondKind.SQUARED_EXCHANGE)


def bond_weights(theta: float) -> Tuple[float, float]:
    """(cos theta, sin theta / 4), the coefficients of C2 and C2^2."""
    if not np.isfinite(theta):
        raise DomainError(f"theta must be finite, got {theta!r}")
    weights = np.array([np.cos(theta), np.sin(theta) / 4.0])
    # cos(pi/2) evaluates to 6e-17; snap rounding residue to an exact zero
    weights[np.abs(weights) < 4 * np.finfo(float).eps] = 0.0
    return float(weights[0]), float(weights[1])


def build_bond_hamiltonian(theta: float) -> BondOperator:
    """H_i(theta) = cos(theta) C2 + sin(theta)/4 C2^2."""
    exchange_weight, squared_weight = bond_weights(theta)
    if squared_weight == 0.0:
        matrix = exchange_weight * build_exchange().matrix
    elif exchange_weight == 0.0:
        matrix = squared_weight * build_squared_exchange().matrix
    else:
        matrix = (exchange_weight * build_exchange().matrix
                  + squared_weight * build_squared_exchange().matrix)
    return BondOperator(matrix=_frozen(matrix), kind=BondKind.BOND_HAMILTONIAN, theta=float(theta))


def distinct_levels(matrix: np.ndarray, tol: float = 1e-10) -> List[Tuple[float, int]]:
    """Group the spectrum of a symmetric matrix into (level, multiplicity) pairs."""
    levels: List[Tuple[float, int]] = []
    for value in np.linalg.eigvalsh(matrix):
        if levels and abs(value - levels[-1][0]) <= tol:
            level, count = levels[-1]
            levels[-1] = (level, count + 1)
        else:
            levels.append((float(value), 1))
    return levels


def dump_operator_csv(matrix: np.ndarray, path) -> Path:
    """Write an operator as dense row-major CSV with 17 significant digits."""
    path = Path(path)
    try:
        pd.DataFrame(np.asarray(matrix)).to_csv(
            path, header=False, index=False, float_format='%.17g', lineterminator='\n'
        )
    except OSError as e:
        raise ConfigurationError(f"Could not write operator dump to {path}: {str(e)}")
    logger.debug(f"Dumped {matrix.shape[0]}x{matrix.shape[1]} operator to {path}")
    return path
