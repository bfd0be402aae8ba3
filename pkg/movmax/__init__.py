"""
movmax - Moving-Maximum Max-Stable Models

Simulation, closed-form bivariate distributions and rank-based estimation
of the dependence parameters of stationary moving-maximum processes with
Gaussian, exponential and Student-t kernels.
"""

__version__ = "0.1.0"
__author__ = "movmax Contributors"
__license__ = "MIT"

from .cli import main

__all__ = ["main"]
