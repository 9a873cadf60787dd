"""Heavy-traffic analysis and simulation of a cyclic polling system with
retrials and deterministic glue periods."""

from .model import (
    InvalidConfig,
    LoadProfile,
    PollingConfig,
    ServiceDistribution,
    StationParams,
    five_station_profile,
    load_config,
    normalize,
    validate,
)
from .branching import BranchingSummary, summarize

__all__ = [
    "BranchingSummary",
    "InvalidConfig",
    "LoadProfile",
    "PollingConfig",
    "ServiceDistribution",
    "StationParams",
    "five_station_profile",
    "load_config",
    "normalize",
    "summarize",
    "validate",
]
__version__ = "0.1.0"
