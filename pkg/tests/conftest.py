"""
Pytest fixtures and configuration for bayes-invariance tests.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

# Load test environment
from dotenv import load_dotenv
load_dotenv(dotenv_path=PROJECT_ROOT / ".env")

from bayes_invariance.data.dataset import from_blocks
from bayes_invariance.simulation.presets import get_preset
from bayes_invariance.simulation.synthetic import generate
from bayes_invariance.simulation.uq_examples import uq_example


# --- Fixtures: Random state ---

@pytest.fixture
def rng():
    """Return a seeded numpy Generator."""
    return np.random.default_rng(12345)


# --- Fixtures: Datasets ---

@pytest.fixture
def toy_dataset(rng):
    """Three environments, p=3, y depends on x1 only with an invariant mechanism."""
    blocks = []
    for shift in (0.0, 1.5, -2.0):
        X = rng.normal(loc=shift, scale=1.0 + abs(shift) / 2, size=(60, 3))
        y = 1.0 + 2.0 * X[:, 0] + rng.normal(scale=0.3, size=60)
        blocks.append((X, y))
    return from_blocks(blocks)


@pytest.fixture
def single_env_dataset(rng):
    """One environment with p=3."""
    X = rng.normal(size=(50, 3))
    y = X @ np.array([1.0, -0.5, 0.0]) + rng.normal(scale=0.5, size=50)
    return from_blocks([(X, y)])


@pytest.fixture
def uq1_three_envs():
    """Example 1 process with all three environments, n=200."""
    return uq_example(1, E=3, n=200, seed=3)


@pytest.fixture
def c1_truth():
    """Ground truth and data from the p=3 theory preset, full-strength interventions."""
    return generate(get_preset("appendix-c1-p3", strength=1.0, seed=11))

