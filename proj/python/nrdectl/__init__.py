"""Neural RDE feedback controls for non-Markovian stochastic control."""

from ._nrdectl import (
    fbm_covariance,
    fgn_autocovariance,
    gradcheck,
    load_config,
    merton,
    riccati_value,
    run,
    sample_increments,
    shuffle,
    signature,
    signature_coeff,
)

__all__ = [
    "fbm_covariance",
    "fgn_autocovariance",
    "gradcheck",
    "load_config",
    "merton",
    "riccati_value",
    "run",
    "sample_increments",
    "shuffle",
    "signature",
    "signature_coeff",
]
