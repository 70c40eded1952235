"""Poisson approximation for large contours in low-temperature Ising models."""

__version__ = "0.1.0"

from .interval import Interval
from .contours import (
    Contour,
    ContourFamily,
    Window,
    alpha0_bounds,
    alpha0_interval,
    beta_star_bracket,
    compatible,
    contour_distance,
    enumerate_anchored,
    enumerate_shapes,
    enumerate_window,
)
from .bounds import BoundParams, BoundReport, coupling_bound, tv_bound
from .families import FiniteFamily, LatticeFamily, WindowRegion, KeySetRegion
from .process import (
    ProcessParams,
    coupled_clans,
    exact_gibbs_small,
    forward_dynamics,
    grow_clan,
    classify,
    sample_eta_zero,
    sample_eta_zero_many,
)

__all__ = [
    "Interval", "Contour", "ContourFamily", "Window", "alpha0_bounds", "alpha0_interval",
    "beta_star_bracket", "compatible", "contour_distance", "enumerate_anchored",
    "enumerate_shapes", "enumerate_window", "BoundParams", "BoundReport", "coupling_bound",
    "tv_bound", "FiniteFamily", "LatticeFamily", "WindowRegion", "KeySetRegion",
    "ProcessParams", "coupled_clans", "exact_gibbs_small", "forward_dynamics", "grow_clan",
    "classify", "sample_eta_zero", "sample_eta_zero_many",
]
