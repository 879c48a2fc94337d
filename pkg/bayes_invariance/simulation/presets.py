"""Named generator configurations."""
from dataclasses import replace
from typing import Optional

from ..data.dataset import MultiEnvDataset
from ..errors import ConfigError
from .synthetic import BoundRule, GroundTruth, SynthConfig, generate
from .uq_examples import uq_example

# theory study: p=3, coefficients only change through intercept and variance
APPENDIX_C1_P3 = SynthConfig(
    p=3,
    E=5,
    n=200,
    p_act=(1.0,),
    lb=0.5,
    ub=2.0,
    sigma_min_sq=0.1,
    sigma_max_sq=0.2,
    p_star_min=1,
    p_star_max=3,
    m_range=(0.0, 1.0),
    lambda_min_range=(0.1, 0.2),
    lambda_diff_range=(0.1, 0.5),
    p_change_range=(1.0, 1.0),
    rho_int_range=(1.0, 1.0),
    lb_rule=BoundRule(0.01, 1.0, 2.0),
    ub_rule=BoundRule(0.5, 1.0, 2.0),
    name="appendix-c1-p3",
)

# method comparison, low dimension
APPENDIX_C3_P10 = SynthConfig(
    p=10,
    E=5,
    n=500,
    p_act=(0.6, 0.7, 0.8, 0.9),
    lb=1.0,
    ub=2.1,
    sigma_min_sq=0.1,
    sigma_max_sq=0.2,
    p_star_min=1,
    p_star_max=5,
    m_range=(0.0, 1.0),
    lambda_min_range=(0.1, 0.2),
    lambda_diff_range=(0.1, 0.5),
    p_change_range=(0.1, 0.3),
    rho_int_range=(0.5, 1.0),
    lb_rule=BoundRule(0.01, 2.0, 1.0),
    ub_rule=BoundRule(0.5, 2.0, 1.0),
    name="appendix-c3-p10",
)

# method comparison, high dimension (sparser graphs, smaller interventional coefficients)
APPENDIX_C3_P450 = replace(
    APPENDIX_C3_P10,
    p=450,
    p_act=(0.1, 0.15, 0.2, 0.25),
    p_star_max=10,
    m_range=(0.0, 0.4),
    lb_rule=BoundRule(0.01, 1.0, 1.0),
    ub_rule=BoundRule(0.01, 1.5, 1.0),
    name="appendix-c3-p450",
)

PRESETS = {
    cfg.name: cfg for cfg in (APPENDIX_C1_P3, APPENDIX_C3_P10, APPENDIX_C3_P450)
}

UQ_PRESETS = {"uq-example1": 1, "uq-example2": 2, "uq-example3": 3}


def preset_names() -> list[str]:
    return sorted(PRESETS) + sorted(UQ_PRESETS)


def get_preset(
    name: str,
    p: Optional[int] = None,
    E: Optional[int] = None,
    n: Optional[int] = None,
    strength: Optional[float] = None,
    seed: Optional[int] = None,
) -> SynthConfig:
    """Look up a generator preset and apply overrides.

    A p override smaller than the preset's p_star_max lowers p_star_max to p.
    """
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(preset_names())}")
    cfg = PRESETS[name]
    if p is not None:
        cfg = replace(cfg, p=p, p_star_max=min(cfg.p_star_max, p), p_star_min=min(cfg.p_star_min, p))
    if E is not None:
        cfg = replace(cfg, E=E)
    if n is not None:
        cfg = replace(cfg, n=n)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if strength is not None:
        cfg = cfg.with_strength(strength)
    return cfg.validate()


def simulate_preset(
    name: str,
    p: Optional[int] = None,
    E: Optional[int] = None,
    n: Optional[int] = None,
    strength: Optional[float] = None,
    seed: int = 0,
) -> tuple[MultiEnvDataset, GroundTruth]:
    """Generate a dataset from a structural preset or one of the uq-example processes."""
    if name in UQ_PRESETS:
        return uq_example(UQ_PRESETS[name], E=3 if E is None else E, n=200 if n is None else n, seed=seed)
    return generate(get_preset(name, p=p, E=E, n=n, strength=strength, seed=seed))
