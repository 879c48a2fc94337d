import os
from pathlib import Path

# Settings are read from environment variables (a project .env file is loaded
# by main.py before this module is imported). None of them is required.

# Where commands write their artefacts when --out is not given
BIP_OUTPUT_DIR = Path(os.getenv("BIP_OUTPUT_DIR", Path.home() / "BayesInvarianceRuns"))

# Refuse to enumerate UniformFull supports above this many features (2^25 ~ 33M candidates)
BIP_MAX_ENUM_P = int(os.getenv("BIP_MAX_ENUM_P", "25"))

# Default worker count for candidate evaluation and sweeps
BIP_THREADS = int(os.getenv("BIP_THREADS", "1"))

# Monte Carlo budget for the heterogeneity functional
BIP_MC_SAMPLES = int(os.getenv("BIP_MC_SAMPLES", "100000"))

# LRU bound on cached per-selector likelihood ratios during VI
BIP_FIT_CACHE_SIZE = int(os.getenv("BIP_FIT_CACHE_SIZE", "100000"))

BIP_LOG_LEVEL = os.getenv("BIP_LOG_LEVEL", "INFO").upper()

# Posterior thresholds reported by fit-vi and the exact marginal summaries
SELECTION_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)

# Version accepted in JSON run configuration documents
RUN_CONFIG_VERSION = 1
