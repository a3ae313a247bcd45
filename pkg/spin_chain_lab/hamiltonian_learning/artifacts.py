"""Output files: CSV tables, JSON summaries, binary ground states and run manifests."""
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from . import __version__
from .exceptions import ConfigurationError, DomainError
from .su4_algebra import SITE_DIM

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
HEADER = np.dtype([('length', '<i8'), ('theta', '<f8')])


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    return value


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    try:
        frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    except OSError as e:
        raise ConfigurationError(f"Could not write output file {path}: {str(e)}")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(payload: dict, path: PathLike) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + '\n'
    try:
        path.write_text(text, encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"Could not write output file {path}: {str(e)}")
    return path


def save_ground_state(path: PathLike, length: int, theta: float, vector: np.ndarray) -> Path:
    """Little-endian int64 L, float64 theta, then 6^L float64 amplitudes."""
    vector = np.asarray(vector)
    if np.iscomplexobj(vector):
        if np.any(vector.imag):
            raise DomainError("Only real ground-state vectors can be stored")
        vector = vector.real
    if vector.size != SITE_DIM ** length:
        raise DomainError(f"Vector has {vector.size} amplitudes, expected 6^{length}")
    path = Path(path)
    header = np.array([(length, theta)], dtype=HEADER)
    with open(path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(vector.astype('<f8').tobytes())
    return path


def load_ground_state(path: PathLike) -> Tuple[int, float, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"Ground-state file not found at {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER.itemsize:
        raise DomainError(f"{path} is too short to hold a ground-state header")
    header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
    length, theta = int(header['length']), float(header['theta'])
    vector = np.frombuffer(raw[HEADER.itemsize:], dtype='<f8').astype(float)
    if length < 1 or vector.size != SITE_DIM ** length:
        raise DomainError(f"{path}: header says L={length} but holds {vector.size} amplitudes")
    return length, theta, vector


def file_checksum(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Config echo, version, timing and SHA-256 of every file a run produced."""
    command: str
    config: dict
    version: str = __version__
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock_seconds: float = 0.0
    outputs: Dict[str, str] = field(default_factory=dict)
    _start: float = field(default_factory=time.perf_counter, repr=False)

    def record(self, paths: List[Path]):
        for path in paths:
            self.outputs[Path(path).name] = file_checksum(path)

    def finish(self, directory: PathLike) -> Path:
        self.wall_clock_seconds = time.perf_counter() - self._start
        payload = {
            'command': self.command,
            'config': self.config,
            'version': self.version,
            'started_at': self.started_at,
            'wall_clock_seconds': self.wall_clock_seconds,
            'outputs': self.outputs,
        }
        path = write_json(payload, Path(directory) / f'{self.command}.manifest.json')
        logger.info(f"Manifest for {self.command} written to {path}")
        return path
