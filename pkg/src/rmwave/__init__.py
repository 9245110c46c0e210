"""Rosenzweig-MacArthur kinetics, large-speed traveling waves and wave-train simulation."""

from rmwave.model import ModelParams, PlanarState, RawParams

__version__ = "0.1.0"

__all__ = ["ModelParams", "PlanarState", "RawParams", "__version__"]
