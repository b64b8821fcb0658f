"""Air highway placement over cost maps and reachability-based platoon simulation."""

from .errors import AirHighwayError

__version__ = "0.1.0"
__all__ = ["AirHighwayError", "__version__"]
