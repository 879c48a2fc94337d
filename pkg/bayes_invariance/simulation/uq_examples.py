"""Two-feature processes with several invariant selectors among the first two environments.

Node ids: x1 = 0, x2 = 1, y = 2. Every noise term has standard deviation 0.1.
With all three environments each example has a single invariant selector;
restricted to the first two a second selector is invariant as well.
"""
import numpy as np

from ..data.dataset import FeatureSelector, MultiEnvDataset, from_blocks
from ..errors import ConfigInvalid, UnknownExample
from .synthetic import EnvParams, GroundTruth, sample_environment

X1, X2, Y = 0, 1, 2
NOISE_VAR = 0.1 ** 2
X1_MEANS = (0.0, 2.0, 5.0)


def _env(edges: dict, intercepts: tuple[float, float, float]) -> EnvParams:
    weights = np.zeros((3, 3))
    for (child, parent), value in edges.items():
        weights[child, parent] = value
    return EnvParams(weights, np.array(intercepts, dtype=float), np.full(3, NOISE_VAR))


def _example_1() -> tuple[tuple[int, ...], list[EnvParams], str, str]:
    # y | x1 shared; x2 is a child of y, and also of x1 in the third environment
    envs = [
        _env({(Y, X1): 1.0, (X2, Y): 1.0}, (X1_MEANS[0], 0.1, 0.5)),
        _env({(Y, X1): 1.0, (X2, Y): 1.0}, (X1_MEANS[1], 0.1, 0.5)),
        _env({(Y, X1): 1.0, (X2, Y): 1.0, (X2, X1): 1.0}, (X1_MEANS[2], 0.1, 0.5)),
    ]
    return (X1, Y, X2), envs, "10", "11"


def _example_2() -> tuple[tuple[int, ...], list[EnvParams], str, str]:
    # y | x1, x2 shared; x2's mean only moves in the third environment
    edges = {(Y, X1): 1.0, (Y, X2): 1.0}
    envs = [
        _env(edges, (X1_MEANS[0], 0.5, 0.1)),
        _env(edges, (X1_MEANS[1], 0.5, 0.1)),
        _env(edges, (X1_MEANS[2], -0.5, 0.1)),
    ]
    return (X1, X2, Y), envs, "11", "10"


def _example_3() -> tuple[tuple[int, ...], list[EnvParams], str, str]:
    # y | x1 shared; x2 depends on x1 only, until the third environment makes it a child of y
    envs = [
        _env({(Y, X1): 1.0, (X2, X1): 1.0}, (X1_MEANS[0], 0.1, 0.5)),
        _env({(Y, X1): 1.0, (X2, X1): -2.0}, (X1_MEANS[1], 0.1, 0.5)),
        _env({(Y, X1): 1.0, (X2, X1): 1.0, (X2, Y): 1.0}, (X1_MEANS[2], 0.0, 0.5)),
    ]
    return (X1, Y, X2), envs, "10", "11"


EXAMPLES = {1: _example_1, 2: _example_2, 3: _example_3}


def _intervened(envs: list[EnvParams]) -> tuple[tuple[int, ...], ...]:
    base = envs[0]
    out = []
    for params in envs:
        changed = tuple(
            j
            for j in (X1, X2)
            if not (
                np.array_equal(params.weights[j], base.weights[j])
                and params.intercepts[j] == base.intercepts[j]
                and params.variances[j] == base.variances[j]
            )
        )
        out.append(changed)
    return tuple(out)


def uq_example(example_id: int, E: int = 3, n: int = 200, seed: int = 0) -> tuple[MultiEnvDataset, GroundTruth]:
    """Sample n rows per environment from one of the three published processes.

    Args:
        example_id: 1, 2 or 3
        E: 2 (first two environments) or 3
        n: rows per environment
        seed: sampling seed

    Returns:
        (dataset, ground truth); with E=2 the ground truth lists the second
        invariant selector in alternative_invariant
    """
    if example_id not in EXAMPLES:
        raise UnknownExample(f"Unknown example {example_id}; choose 1, 2 or 3")
    if E not in (2, 3):
        raise ConfigInvalid(f"Examples are defined for E=2 or E=3, got {E}")
    if n < 1:
        raise ConfigInvalid(f"n must be positive, got {n}")

    order, envs, z_star, alternative = EXAMPLES[example_id]()
    envs = envs[:E]
    seqs = np.random.SeedSequence(seed).spawn(E)
    blocks = [sample_environment(params, order, n, np.random.default_rng(seq)) for params, seq in zip(envs, seqs)]

    truth = GroundTruth(
        z_star=FeatureSelector.from_string(z_star),
        order=order,
        env_params=tuple(envs),
        intervened=_intervened(envs),
        alternative_invariant=(FeatureSelector.from_string(alternative),) if E == 2 else (),
        source=f"uq-example{example_id}",
    )
    return from_blocks(blocks), truth
