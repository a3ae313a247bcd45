"""RunConfig validation and the pipelines behind each chainlab subcommand."""
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from .artifacts import RunManifest, load_ground_state, save_ground_state, write_csv, write_json
from .bw_reconstruction import WeightConvention, fit
from .chain_model import (assemble_hamiltonian, energy_variance, entanglement_profile, ground_state,
                          reduced_density_matrix)
from .exceptions import ConfigurationError, DomainError
from .qcm_reconstruction import correlation_matrix, fluctuation_scan, reconstruct_theta, recovery_table
from .xvbs_mps import EntropyFormula, VerificationStatus, entropy_profile

logger = logging.getLogger(__name__)

COMMANDS = ('ground', 'entropy-profile', 'xvbs-entropy', 'fluct-scan', 'qcm', 'bw-fit')
STATE_COMMANDS = ('entropy-profile', 'fluct-scan', 'qcm', 'bw-fit')
DEFAULT_LENGTH = {
    'ground': 6,
    'entropy-profile': 7,
    'xvbs-entropy': 15,
    'fluct-scan': 6,
    'qcm': 6,
    'bw-fit': 7,
}
MAX_ED_LENGTH = 8
MAX_BW_BLOCK = 5


@dataclass
class RunConfig:
    command: str
    length: int
    theta0: float = 0.45
    theta_min: float = 0.05
    theta_max: float = 0.85
    theta_step: float = 0.02
    beta_min: float = 0.1
    beta_max: float = 10.0
    beta_points: int = 25
    cut: Optional[int] = None
    subsystem: int = 3
    tol: float = 1e-10
    seed: int = 1234
    ritz: int = 6
    krylov_dim: int = 100
    max_restarts: int = 30
    out: Path = Path('runs')
    weight_convention: str = WeightConvention.INTEGER.value
    joint_beta: bool = True
    formula: str = EntropyFormula.EXACT.value
    sweep: bool = False
    state: Optional[Path] = None

    @classmethod
    def from_options(cls, options: dict, defaults: Optional[dict] = None) -> 'RunConfig':
        """Merge CLI options over the CHAINLAB settings; None means "not given"."""
        defaults = defaults or {}
        command = options.get('command')
        if command not in COMMANDS:
            raise ConfigurationError(f"Unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
        fallback = {
            'length': DEFAULT_LENGTH[command],
            'tol': defaults.get('TOLERANCE', cls.tol),
            'seed': defaults.get('SEED', cls.seed),
            'ritz': defaults.get('RITZ_COUNT', cls.ritz),
            'krylov_dim': defaults.get('KRYLOV_DIM', cls.krylov_dim),
            'max_restarts': defaults.get('MAX_RESTARTS', cls.max_restarts),
            'out': defaults.get('OUTPUT_DIR', cls.out),
        }
        values = {'command': command}
        for name in cls.__dataclass_fields__:
            if name == 'command':
                continue
            given = options.get(name)
            if given is not None:
                values[name] = given
            elif name in fallback:
                values[name] = fallback[name]
        config = cls(**values)
        config.out = Path(config.out)
        if config.state is not None:
            config.state = Path(config.state)
        config.validate()
        return config

    def validate(self):
        errors = []
        if self.command == 'xvbs-entropy':
            if self.length < 3 or self.length % 2 == 0:
                errors.append(f"xvbs-entropy needs an odd length >= 3, got {self.length}")
        elif not 2 <= self.length <= MAX_ED_LENGTH:
            errors.append(f"{self.command} supports lengths 2..{MAX_ED_LENGTH}, got {self.length}")
        if not math.isfinite(self.theta0):
            errors.append(f"theta0 must be finite, got {self.theta0}")
        if not self.tol > 0:
            errors.append(f"tol must be positive, got {self.tol}")
        if self.ritz < 2:
            errors.append(f"ritz must be >= 2, got {self.ritz}")
        if self.krylov_dim < 2 or self.max_restarts < 0:
            errors.append(f"invalid Krylov settings: dim={self.krylov_dim}, restarts={self.max_restarts}")
        if not self.theta_step > 0:
            errors.append(f"theta-step must be positive, got {self.theta_step}")
        if self.theta_max < self.theta_min:
            errors.append(f"theta-max {self.theta_max} is below theta-min {self.theta_min}")
        if not 0 < self.beta_min <= self.beta_max:
            errors.append(f"beta range must satisfy 0 < min <= max, got [{self.beta_min}, {self.beta_max}]")
        if self.beta_points < 1:
            errors.append(f"beta-points must be >= 1, got {self.beta_points}")
        if self.cut is not None and not 1 <= self.cut <= self.length - 1:
            errors.append(f"cut must be in 1..{self.length - 1}, got {self.cut}")
        if self.command == 'bw-fit' and not 2 <= self.subsystem <= min(MAX_BW_BLOCK, self.length - 1):
            errors.append(
                f"subsystem must be in 2..{min(MAX_BW_BLOCK, self.length - 1)} for L={self.length}, got {self.subsystem}"
            )
        if self.weight_convention not in [c.value for c in WeightConvention]:
            errors.append(f"unknown weight convention {self.weight_convention!r}")
        if self.formula not in [f.value for f in EntropyFormula]:
            errors.append(f"unknown entropy formula {self.formula!r}")
        if self.state is not None and self.command not in STATE_COMMANDS:
            errors.append(f"--state is not used by {self.command}")
        if self.state is not None and not Path(self.state).exists():
            errors.append(f"state file {self.state} does not exist")
        if errors:
            raise ConfigurationError('; '.join(errors))

    def theta_grid(self) -> np.ndarray:
        count = int(math.floor((self.theta_max - self.theta_min) / self.theta_step + 1e-9)) + 1
        return self.theta_min + self.theta_step * np.arange(count)

    def echo(self) -> dict:
        return {name: (str(value) if isinstance(value, Path) else value) for name, value in asdict(self).items()}


@dataclass
class RunOutcome:
    status: int
    outputs: List[Path] = field(default_factory=list)
    manifest: Optional[Path] = None
    summary: str = ''


# ========== Pipelines ==========

def _solve(config: RunConfig, theta: float, hamiltonian=None):
    return ground_state(
        hamiltonian or assemble_hamiltonian(config.length, theta), tol=config.tol, k=config.ritz,
        seed=config.seed, krylov_dim=config.krylov_dim, max_restarts=config.max_restarts,
    )


def _input_state(config: RunConfig):
    """(theta, psi) from --state or from a fresh ground-state solve at theta0."""
    if config.state is not None:
        length, theta, psi = load_ground_state(config.state)
        if length != config.length:
            raise ConfigurationError(f"{config.state} holds an L={length} state but --length is {config.length}")
        logger.info(f"Loaded L={length} state at theta={theta:.6g} from {config.state}")
        return theta, psi
    return config.theta0, _solve(config, config.theta0).vector


def _run_ground(config: RunConfig, out: Path):
    hamiltonian = assemble_hamiltonian(config.length, config.theta0)
    result = _solve(config, config.theta0, hamiltonian)
    binary = save_ground_state(out / f'ground_state_L{config.length}.bin', config.length, config.theta0, result.vector)
    summary = write_json({
        'length': config.length,
        'theta': config.theta0,
        'energy': result.energy,
        'residual': result.residual,
        'variance': energy_variance(hamiltonian, result.vector),
        'iterations': result.iterations,
        **result.degeneracy_report,
    }, out / f'ground_state_L{config.length}.json')
    return [binary, summary], f"E0 = {result.energy:.12g} (residual {result.residual:.2e})"


def _run_entropy_profile(config: RunConfig, out: Path):
    theta, psi = _input_state(config)
    entropies = entanglement_profile(psi)
    cuts = list(range(1, config.length)) if config.cut is None else [config.cut]
    frame = pd.DataFrame({
        'cut_site': cuts,
        'theta': [theta] * len(cuts),
        'entropy': [entropies[cut - 1] for cut in cuts],
    })
    path = write_csv(frame, out / f'entropy_profile_L{config.length}.csv')
    return [path], f"{len(cuts)} cuts, max entropy {max(frame['entropy']):.6g}"


def _run_xvbs_entropy(config: RunConfig, out: Path):
    frame = entropy_profile(config.length, EntropyFormula(config.formula))
    if config.cut is not None:
        frame = frame[frame['cut_site'] == config.cut].reset_index(drop=True)
    table = write_csv(frame, out / f'xvbs_entropy_L{config.length}.csv')
    differences = frame['abs_difference']
    agreeing = int((differences <= 1e-10).sum())
    undefined = int(frame['closed_form_value'].isna().sum())
    if undefined == len(frame):
        status = VerificationStatus.UNDEFINED
    elif agreeing == len(frame):
        status = VerificationStatus.AGREES
    else:
        status = VerificationStatus.DISCREPANT
    summary = write_json({
        'length': config.length,
        'formula': config.formula,
        'cuts': int(len(frame)),
        'agreeing_cuts': agreeing,
        'undefined_cuts': undefined,
        'max_abs_difference': float(differences.max()) if differences.notna().any() else None,
        'status': status.value,
    }, out / f'xvbs_entropy_L{config.length}.json')
    return [table, summary], f"{agreeing}/{len(frame)} cuts agree with the transfer matrix"


def _run_fluct_scan(config: RunConfig, out: Path):
    theta, psi = _input_state(config)
    curve = fluctuation_scan(psi, config.theta_grid())
    path = write_csv(curve.to_frame(), out / f'fluctuation_L{config.length}.csv')
    return [path], f"variance minimum at theta = {curve.theta_min:.6g} (state at {theta:.6g})"


def _run_qcm(config: RunConfig, out: Path):
    theta, psi = _input_state(config)
    matrix = correlation_matrix(psi, theta0=theta)
    estimate = reconstruct_theta(matrix)
    outputs = [write_json({
        'length': config.length,
        'theta0': theta,
        'correlation_matrix': matrix.entries,
        'means': matrix.means,
        **estimate.as_dict(),
    }, out / f'qcm_L{config.length}.json')]
    if config.sweep:
        table = recovery_table(config.length, config.theta_grid(), tol=config.tol, k=config.ritz,
                               seed=config.seed, krylov_dim=config.krylov_dim, max_restarts=config.max_restarts)
        outputs.append(write_csv(table, out / f'qcm_recovery_L{config.length}.csv'))
    flag = ' (ambiguous)' if estimate.ambiguous else ''
    return outputs, f"theta_hat = {estimate.theta_hat:.10g}{flag} from theta0 = {theta:.6g}"


def _run_bw_fit(config: RunConfig, out: Path):
    theta, psi = _input_state(config)
    rho = reduced_density_matrix(psi, config.subsystem)
    theta_grid = config.theta_grid()
    result = fit(
        rho,
        theta_range=(float(theta_grid[0]), float(theta_grid[-1])),
        beta_range=(config.beta_min, config.beta_max),
        theta_points=len(theta_grid),
        beta_points=config.beta_points,
        convention=WeightConvention(config.weight_convention),
        joint_beta=config.joint_beta,
    )
    stem = f'L{config.length}_l{config.subsystem}'
    surface = write_csv(result.scan_surface, out / f'bw_surface_{stem}.csv')
    summary = write_json({
        'length': config.length,
        'subsystem': config.subsystem,
        'theta0': theta,
        **result.summary(),
    }, out / f'bw_fit_{stem}.json')
    return [surface, summary], f"theta_hat = {result.theta_hat:.8g}, beta_hat = {result.beta_hat:.8g}"


PIPELINES = {
    'ground': _run_ground,
    'entropy-profile': _run_entropy_profile,
    'xvbs-entropy': _run_xvbs_entropy,
    'fluct-scan': _run_fluct_scan,
    'qcm': _run_qcm,
    'bw-fit': _run_bw_fit,
}


def run(config: RunConfig) -> RunOutcome:
    """Execute one validated command and write its outputs plus a manifest."""
    config.validate()
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"Cannot create output directory {out}: {str(e)}")
    manifest = RunManifest(command=config.command, config=config.echo())
    logger.info(f"Running {config.command} (L={config.length}) into {out}")
    try:
        outputs, summary = PIPELINES[config.command](config, out)
    except DomainError:
        logger.error(f"{config.command} rejected its input")
        raise
    manifest.record(outputs)
    manifest_path = manifest.finish(out)
    return RunOutcome(status=0, outputs=outputs, manifest=manifest_path, summary=summary)
