"""scanrig: distributed capture-rig planning, acquisition, and simulation."""

__version__ = "0.1.0"
