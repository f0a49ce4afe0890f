"""Age-aware grant-free random access laboratory.

Thin Python layer over the C++ core: sparse-recovery solvers (ISTA and the
age-gated unfolded decoder), access-parameter optimization, autoencoder
training with a learned pilot, convergence-bound certification, and the
closed-loop AoI simulator.
"""

from agfra._core import (
    CoherenceReport,
    SystemConfig,
    TrainState,
    age_gated_threshold,
    avg_aoi,
    certify,
    coherence,
    default_step_size,
    encode,
    gaussian_pilot,
    gradient_check,
    ista_solve,
    lista_age_forward,
    normalize_columns,
    optimize_access,
    s_max,
    simulate,
    soft_threshold,
    success_rate,
    train,
)

__all__ = [
    "CoherenceReport",
    "SystemConfig",
    "TrainState",
    "age_gated_threshold",
    "avg_aoi",
    "certify",
    "coherence",
    "default_step_size",
    "encode",
    "gaussian_pilot",
    "gradient_check",
    "ista_solve",
    "lista_age_forward",
    "normalize_columns",
    "optimize_access",
    "s_max",
    "simulate",
    "soft_threshold",
    "success_rate",
    "train",
]

__version__ = "0.1.0"
