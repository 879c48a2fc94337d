"""Priors over feature selectors and enumeration of their support.

Enumeration order is lexicographic on the bitstring with feature 1 as the
most significant bit, so the empty selector comes first.
"""
import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from ..config import BIP_MAX_ENUM_P
from ..errors import ConfigError, DataIOError, DimensionMismatch, SupportTooLarge
from .dataset import FeatureSelector


class _OutsideSupport:
    """Log-mass sentinel for selectors the prior excludes (never produced by arithmetic)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(_OutsideSupport, cls).__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OUTSIDE_SUPPORT"

    def __bool__(self) -> bool:
        return False


OUTSIDE_SUPPORT = _OutsideSupport()

LogMass = Union[float, _OutsideSupport]


class PriorKind(str, Enum):
    UNIFORM_FULL = "uniform"
    UNIFORM_MAX_CARDINALITY = "max-cardinality"
    EXPLICIT_TABLE = "table"


@dataclass(frozen=True)
class Prior:
    kind: PriorKind
    p: int
    p_max: Optional[int] = None
    table: tuple[tuple[FeatureSelector, float], ...] = ()

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"Prior needs a positive feature count, got {self.p}")
        if self.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
            if self.p_max is None or self.p_max < 0:
                raise ConfigError(f"max-cardinality prior needs p_max >= 0, got {self.p_max}")
        if self.kind == PriorKind.EXPLICIT_TABLE:
            if not self.table:
                raise ConfigError("Explicit prior table is empty")
            seen = set()
            for z, weight in self.table:
                if len(z) != self.p:
                    raise DimensionMismatch(f"Prior table entry {z} has length {len(z)}, expected {self.p}")
                if not (weight > 0 and math.isfinite(weight)):
                    raise ConfigError(f"Prior table weight for {z} must be positive, got {weight}")
                if z.bits in seen:
                    raise ConfigError(f"Duplicate prior table entry {z}")
                seen.add(z.bits)

    @classmethod
    def uniform_full(cls, p: int) -> "Prior":
        return cls(PriorKind.UNIFORM_FULL, p)

    @classmethod
    def max_cardinality(cls, p: int, p_max: int) -> "Prior":
        return cls(PriorKind.UNIFORM_MAX_CARDINALITY, p, p_max=p_max)

    @classmethod
    def explicit(cls, entries) -> "Prior":
        table = tuple((z, float(w)) for z, w in entries)
        if not table:
            raise ConfigError("Explicit prior table is empty")
        return cls(PriorKind.EXPLICIT_TABLE, len(table[0][0]), table=table)

    @property
    def is_uniform(self) -> bool:
        """True when the prior is constant on its support."""
        return self.kind in (PriorKind.UNIFORM_FULL, PriorKind.UNIFORM_MAX_CARDINALITY)

    def support_size(self) -> int:
        if self.kind == PriorKind.UNIFORM_FULL:
            return 2 ** self.p
        if self.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
            return sum(math.comb(self.p, k) for k in range(min(self.p_max, self.p) + 1))
        return len(self.table)

    def log_support_size(self) -> float:
        if self.kind == PriorKind.UNIFORM_FULL:
            return self.p * math.log(2.0)
        if self.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
            k = np.arange(min(self.p_max, self.p) + 1)
            log_binom = gammaln(self.p + 1) - gammaln(k + 1) - gammaln(self.p - k + 1)
            return float(logsumexp(log_binom))
        return math.log(len(self.table))

    def in_support(self, z: FeatureSelector) -> bool:
        return prior_log_mass(self, z) is not OUTSIDE_SUPPORT

    def describe(self) -> str:
        if self.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
            return f"uniform over selectors with at most {self.p_max} of {self.p} features"
        if self.kind == PriorKind.EXPLICIT_TABLE:
            return f"explicit table with {len(self.table)} selectors"
        return f"uniform over all 2^{self.p} selectors"


def prior_log_mass(prior: Prior, z: FeatureSelector) -> LogMass:
    """log p(z), or OUTSIDE_SUPPORT when the prior excludes z."""
    if len(z) != prior.p:
        raise DimensionMismatch(f"Selector has {len(z)} entries, prior is over {prior.p} features")

    if prior.kind == PriorKind.UNIFORM_FULL:
        return -prior.p * math.log(2.0)

    if prior.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
        if z.cardinality > prior.p_max:
            return OUTSIDE_SUPPORT
        return -prior.log_support_size()

    total = math.log(sum(w for _, w in prior.table))
    for entry, weight in prior.table:
        if entry.bits == z.bits:
            return math.log(weight) - total
    return OUTSIDE_SUPPORT


def _code_to_selector(code: int, p: int) -> FeatureSelector:
    return FeatureSelector(tuple((code >> (p - 1 - j)) & 1 for j in range(p)))


def _selector_code(z: FeatureSelector) -> int:
    code = 0
    for b in z.bits:
        code = (code << 1) | b
    return code


def check_enumerable(prior: Prior, max_p: Optional[int] = None):
    """Raise SupportTooLarge when enumerating the support would exceed the cap."""
    max_p = BIP_MAX_ENUM_P if max_p is None else max_p
    if prior.kind == PriorKind.UNIFORM_FULL:
        if prior.p > max_p:
            raise SupportTooLarge(
                f"Uniform prior over p={prior.p} features has 2^{prior.p} selectors "
                f"(cap is p={max_p}); use fit-vi or a max-cardinality prior"
            )
    elif prior.support_size() > 2 ** max_p:
        raise SupportTooLarge(
            f"Prior support has {prior.support_size()} selectors (cap is 2^{max_p}); use fit-vi"
        )


def enumerate_support(
    prior: Prior,
    p: Optional[int] = None,
    max_p: Optional[int] = None,
    start: int = 0,
    stop: Optional[int] = None,
) -> Iterator[FeatureSelector]:
    """Yield each supported selector once, in lexicographic order.

    Args:
        prior: Prior whose support to enumerate
        p: Feature count; must match the prior when given
        max_p: Enumeration cap (defaults to BIP_MAX_ENUM_P)
        start, stop: Index range of the ordered support, for splitting work

    Returns:
        Iterator of FeatureSelector
    """
    if p is not None and p != prior.p:
        raise DimensionMismatch(f"Prior is over {prior.p} features, asked to enumerate {p}")
    check_enumerable(prior, max_p)
    p = prior.p

    if prior.kind == PriorKind.UNIFORM_FULL:
        total = 2 ** p
        stop = total if stop is None else min(stop, total)
        return (_code_to_selector(code, p) for code in range(start, stop))

    if prior.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
        codes = []
        for k in range(min(prior.p_max, p) + 1):
            for combo in itertools.combinations(range(p), k):
                codes.append(sum(1 << (p - 1 - j) for j in combo))
        codes.sort()
        return (_code_to_selector(code, p) for code in itertools.islice(codes, start, stop))

    ordered = sorted((z for z, _ in prior.table), key=_selector_code)
    return iter(ordered[start:stop])


def parse_prior_spec(spec: str, p: int, p_max: Optional[int] = None) -> Prior:
    """Build a prior from a CLI/config spec.

    Accepted forms: 'uniform', 'max-cardinality' (with p_max),
    'max-cardinality:K', or a path to a JSON table
    {"entries": [{"z": "101", "weight": 1.0}, ...]}.
    """
    spec = (spec or "uniform").strip()
    if spec == PriorKind.UNIFORM_FULL.value:
        return Prior.uniform_full(p)
    if spec.startswith(PriorKind.UNIFORM_MAX_CARDINALITY.value):
        _, _, suffix = spec.partition(":")
        if suffix:
            try:
                p_max = int(suffix)
            except ValueError as e:
                raise ConfigError(f"Invalid p_max in prior spec '{spec}'") from e
        if p_max is None:
            raise ConfigError("max-cardinality prior requires p_max")
        return Prior.max_cardinality(p, p_max)

    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"Unknown prior spec '{spec}' (expected uniform, max-cardinality[:K] or a table file)")
    try:
        document = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"Could not read prior table {path}: {e}") from e
    try:
        entries = [(FeatureSelector.from_string(item["z"]), float(item["weight"])) for item in document["entries"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed prior table {path}: {e}") from e
    prior = Prior.explicit(entries)
    if prior.p != p:
        raise DimensionMismatch(f"Prior table is over {prior.p} features, dataset has {p}")
    return prior
