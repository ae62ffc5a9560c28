"""Numerical laboratory for the doubly nonlinear equation d/dt(|v|^{p-2} v) = div(|grad v|^{p-2} grad v)."""
from ._backend import BACKEND
from .grid import (
    GridDomain,
    build_disk,
    build_interval,
    build_masked,
    build_rectangle,
    scale_domain,
    shrink_domain,
)

__version__ = "0.1.0"
