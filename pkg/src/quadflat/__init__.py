"""Quadcopter simulation with Euler-angle-free Snap and Mellinger controllers."""

from ._backend import BACKEND

__version__ = "0.1.0"
