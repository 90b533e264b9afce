"""HD-sEMG hand-pose estimation toolkit."""

__version__ = "0.1.0"
