"""Integrable lattice spin chain, Ablowitz-Ladik dynamics, lattice Hasimoto
transforms, exact bracket verification, and Monte Carlo invariance
experiments on finite windows."""

__version__ = "0.1.0"

from .core import (ALField, Beta, FrameSequence, RngStream, Rotation,
                   SpinField, Trajectory, Window)

__all__ = [
    "ALField", "Beta", "FrameSequence", "RngStream", "Rotation",
    "SpinField", "Trajectory", "Window", "__version__",
]
