"""Greedy grammar-constrained medial axis extraction for color images."""
from .config import RunConfig
from .cost import CostConfig, CostVolume, build_cost_volume
from .growth import Extraction, GrowthConfig, MedialAxis, extract
from .shock import ShockConfig, extract_seeds

__version__ = "0.1.0"

__all__ = ["RunConfig", "CostConfig", "CostVolume", "build_cost_volume", "Extraction",
           "GrowthConfig", "MedialAxis", "extract", "ShockConfig", "extract_seeds"]
