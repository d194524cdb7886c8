"""Reference predictor speaking the mixlens wire protocol.

Wraps seven named spectral statistics as mid-level outputs and a fixed
linear head to emotion outputs. Run it with::

    mixlens-adapter config.json

or ``python3 -m mixlens_adapter config.json``. It exists as a template:
replace the statistics with a real model's features and the head with its
final layer, keep the loop, and any mixlens client can explain it.
"""

from .features import get_statistic, statistic_names
from .model import (
    MIDLEVEL_NAMES,
    AdapterConfig,
    ConfigError,
    SpectralStatsModel,
    load_config,
)
from .serving import read_wav, serve

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "ConfigError",
    "MIDLEVEL_NAMES",
    "SpectralStatsModel",
    "get_statistic",
    "load_config",
    "read_wav",
    "serve",
    "statistic_names",
    "__version__",
]
