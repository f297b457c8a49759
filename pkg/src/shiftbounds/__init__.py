"""Entropic lower bounds on the error of shift-parameter estimates that use prior information."""

from . import bounds, distributions, kernels, quantum, simulation
from .bounds import BoundReport, KiEstimate
from .distributions import GriddedDistribution, IntegerDistribution
from .quantum import DensityOperator, Generator, Povm, UniformGrid
from .simulation import Scenario, run_scenario

__version__ = "0.1.0"

__all__ = ["bounds", "distributions", "kernels", "quantum", "simulation", "BoundReport",
           "KiEstimate", "GriddedDistribution", "IntegerDistribution", "DensityOperator",
           "Generator", "Povm", "UniformGrid", "Scenario", "run_scenario", "__version__"]
