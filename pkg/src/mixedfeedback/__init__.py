"""Circuit models and solvers for mixed-feedback (difference-of-monotone) systems."""
from .signals import Signal, Unit
from .solvers import DCSolveConfig, SimConfig, dc_solve, simulate

__version__ = "0.1.0"
__all__ = ["Signal", "Unit", "SimConfig", "DCSolveConfig", "simulate", "dc_solve"]
