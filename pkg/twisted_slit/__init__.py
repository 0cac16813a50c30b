# Twisted double-slit simulation package
"""
Twisted-light delay, fiber-collapse and HOM simulation.
"""

__version__ = "1.0.0"

from .beam import BeamParams, RadialField, SuperpositionState
from .errors import TwistedSlitError

__all__ = ["BeamParams", "RadialField", "SuperpositionState", "TwistedSlitError", "__version__"]
