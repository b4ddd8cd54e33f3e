"""Time-variant norm-constrained interpolation on finite index windows.

Submodules: ``core`` (block operator matrices), ``problem`` (data, the
(Z1, Z2) <-> (H, F) bijection, central solution, 4x4 completion), ``majorant``
(Cayley transform, harmonic majorants, state space example), ``param``
(parametrization of all solutions, uniqueness), ``rcl`` (relaxed commutant
lifting) and ``cli``.
"""

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "BlockMatrix",
    "BlockSpace",
    "Check",
    "Subspace",
    "Tolerance",
    "Window",
    "InterpolationData",
    "ZPair",
    "central_solution",
    "check_interpolation",
    "construct",
]

from .core import (
    DEFAULT_TOL,
    BlockMatrix,
    BlockSpace,
    Check,
    Subspace,
    Tolerance,
    Window,
)
from .problem import InterpolationData, ZPair, central_solution, check_interpolation, construct
