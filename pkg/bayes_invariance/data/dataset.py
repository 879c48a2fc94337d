"""Multi-environment datasets and feature selectors.

A dataset is a list of environment blocks sharing one feature count p.
Environment labels found in files are arbitrary integers; blocks are
re-indexed 0..E-1 in order of first appearance and keep the original label.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from ..errors import DataIOError, DimensionMismatch, EmptyEnvironment, NonFiniteValue, ShapeMismatch
from ..utils.common import bits_to_string, string_to_bits
from ..utils.logging import logger


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureSelector:
    """Binary inclusion vector z over p features."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"Selector entries must be 0 or 1, got {self.bits}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> "FeatureSelector":
        return cls(string_to_bits(text))

    @classmethod
    def from_indices(cls, indices: Iterable[int], p: int) -> "FeatureSelector":
        bits = [0] * p
        for j in indices:
            bits[j] = 1
        return cls(tuple(bits))

    @classmethod
    def empty(cls, p: int) -> "FeatureSelector":
        return cls((0,) * p)

    @classmethod
    def full(cls, p: int) -> "FeatureSelector":
        return cls((1,) * p)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return bits_to_string(self.bits)

    @property
    def cardinality(self) -> int:
        """||z||_0"""
        return sum(self.bits)

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.bits) if b)

    def complement(self) -> "FeatureSelector":
        return FeatureSelector(tuple(1 - b for b in self.bits))

    def is_subset_of(self, other: "FeatureSelector") -> bool:
        self._check_length(len(other))
        return all(a <= b for a, b in zip(self.bits, other.bits))

    def select(self, X: np.ndarray) -> np.ndarray:
        """Return x^z, the columns of X where the bit is set."""
        self._check_length(X.shape[1])
        return X[:, self.mask]

    def exclude(self, X: np.ndarray) -> np.ndarray:
        """Return x^{-z}, the columns of X where the bit is clear."""
        self._check_length(X.shape[1])
        return X[:, ~self.mask]

    def _check_length(self, p: int):
        if len(self.bits) != p:
            raise DimensionMismatch(f"Selector has {len(self.bits)} entries, expected {p}")


@dataclass(frozen=True)
class EnvBlock:
    """Samples drawn IID from one environment."""

    env_id: int
    X: np.ndarray
    y: np.ndarray
    label: int = 0

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(self.X))
        object.__setattr__(self, "y", _frozen(np.ravel(self.y)))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class MultiEnvDataset:
    """Observations grouped by environment; immutable once built."""

    environments: tuple[EnvBlock, ...]
    p: int
    _pooled: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "environments", tuple(self.environments))

    @property
    def n_envs(self) -> int:
        return len(self.environments)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(block.n for block in self.environments)

    @property
    def n_total(self) -> int:
        return sum(self.sizes)

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-concatenation of all environments."""
        if "Xy" not in self._pooled:
            X = np.vstack([block.X for block in self.environments])
            y = np.concatenate([block.y for block in self.environments])
            X.setflags(write=False)
            y.setflags(write=False)
            self._pooled["Xy"] = (X, y)
        return self._pooled["Xy"]

    def subset(self, env_ids: Sequence[int]) -> "MultiEnvDataset":
        """Keep only the listed environments (re-indexed in the given order)."""
        blocks = []
        for new_id, env_id in enumerate(env_ids):
            block = self.environments[env_id]
            blocks.append(EnvBlock(new_id, block.X, block.y, label=block.label))
        return validate_dataset(MultiEnvDataset(tuple(blocks), self.p))

    def replicate(self, times: int) -> "MultiEnvDataset":
        """Repeat every environment block `times` times as separate environments."""
        blocks = []
        for _ in range(times):
            for block in self.environments:
                blocks.append(EnvBlock(len(blocks), block.X, block.y, label=len(blocks)))
        return validate_dataset(MultiEnvDataset(tuple(blocks), self.p))


def validate_dataset(raw: MultiEnvDataset) -> MultiEnvDataset:
    """Return the dataset if every invariant holds, raise otherwise."""
    if raw.p < 1:
        raise ShapeMismatch(f"Feature count must be positive, got {raw.p}")
    if not raw.environments:
        raise EmptyEnvironment("Dataset has no environments")

    for block in raw.environments:
        if block.X.ndim != 2 or block.X.shape[1] != raw.p:
            raise ShapeMismatch(
                f"Environment {block.label} has feature shape {block.X.shape}, expected (n, {raw.p})"
            )
        if block.X.shape[0] != block.n:
            raise ShapeMismatch(
                f"Environment {block.label} has {block.X.shape[0]} feature rows but {block.n} outcomes"
            )
        if block.n < 1:
            raise EmptyEnvironment(f"Environment {block.label} has no rows")
        if not (np.all(np.isfinite(block.X)) and np.all(np.isfinite(block.y))):
            raise NonFiniteValue(f"Environment {block.label} contains NaN or Inf")
    return raw


def from_arrays(X: np.ndarray, y: np.ndarray, env: Sequence[int]) -> MultiEnvDataset:
    """Build a validated dataset from stacked arrays and per-row environment labels."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    env = np.asarray(env).astype(int).ravel()
    if X.ndim != 2 or X.shape[0] != len(y) or len(env) != len(y):
        raise ShapeMismatch(f"Inconsistent shapes: X {X.shape}, y {y.shape}, env {env.shape}")

    # pd.unique keeps first-appearance order
    labels = pd.unique(env)
    blocks = tuple(
        EnvBlock(env_id, X[env == label], y[env == label], label=int(label))
        for env_id, label in enumerate(labels)
    )
    return validate_dataset(MultiEnvDataset(blocks, X.shape[1]))


def from_blocks(blocks: Sequence[tuple[np.ndarray, np.ndarray]]) -> MultiEnvDataset:
    """Build a validated dataset from (X, y) pairs, one per environment."""
    if not blocks:
        raise EmptyEnvironment("Dataset has no environments")
    env_blocks = tuple(EnvBlock(i, X, y, label=i) for i, (X, y) in enumerate(blocks))
    p = env_blocks[0].X.shape[1] if env_blocks[0].X.ndim == 2 else 0
    return validate_dataset(MultiEnvDataset(env_blocks, p))


def _frame_to_dataset(frame: pd.DataFrame, source: str) -> MultiEnvDataset:
    if "env" not in frame.columns or "y" not in frame.columns:
        raise DataIOError(f"{source}: expected header 'env,y,x1,...,xp', got {list(frame.columns)}")
    feature_cols = [c for c in frame.columns if c not in ("env", "y")]
    try:
        X = frame[feature_cols].to_numpy(dtype=float)
        y = frame["y"].to_numpy(dtype=float)
        env = frame["env"].to_numpy(dtype=int)
    except (TypeError, ValueError) as e:
        raise DataIOError(f"{source}: could not parse values: {e}") from e
    return from_arrays(X, y, env)


def _env_label(csv_file: Path) -> int:
    try:
        return int(csv_file.stem)
    except ValueError as e:
        raise DataIOError(f"Environment file {csv_file.name} is not named by an integer label") from e


def read_dataset_csv(path) -> MultiEnvDataset:
    """Read a dataset from one CSV file (`env,y,x1..xp`) or a directory of per-environment CSVs.

    In the directory form each file holds `y,x1..xp` (an `env` column is ignored)
    and the file stem, an integer, is the environment label.
    """
    path = Path(path)
    logger.info(f"Reading dataset from {path}")
    try:
        if path.is_dir():
            frames = []
            # environments are indexed by numeric label, so 2.csv precedes 10.csv
            files = sorted(path.glob("*.csv"), key=_env_label)
            if not files:
                raise DataIOError(f"No CSV files found in {path}")
            for csv_file in files:
                frame = pd.read_csv(csv_file)
                frame = frame.drop(columns=["env"], errors="ignore")
                frame.insert(0, "env", _env_label(csv_file))
                frames.append(frame)
            return _frame_to_dataset(pd.concat(frames, ignore_index=True), str(path))
        return _frame_to_dataset(pd.read_csv(path), str(path))
    except (OSError, ValueError) as e:
        raise DataIOError(f"Could not read dataset {path}: {e}") from e


def dataset_to_frame(data: MultiEnvDataset) -> pd.DataFrame:
    frames = []
    for block in data.environments:
        frame = pd.DataFrame(block.X, columns=[f"x{j + 1}" for j in range(data.p)])
        frame.insert(0, "y", block.y)
        frame.insert(0, "env", block.label)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def write_dataset_csv(data: MultiEnvDataset, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        dataset_to_frame(data).to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise DataIOError(f"Could not write dataset {path}: {e}") from e
    logger.info(f"Wrote dataset ({data.n_envs} environments, {data.n_total} rows) to {path}")
    return path
