"""Operator fields over the spectrum of ``Q^2``: quantized constants of motion,
their fiber decomposition and the connection-induced derivative.

Submodules
----------
phase_space
    Exact polynomial symbols, the Poisson bracket, symplectic flows and radial
    vector fields.
weyl
    Weyl quantization by an integral-kernel backend and a differential backend.
hilbert_field
    Sections over the polar grid, the connection, trivialization and resampling.
op_field
    Fiber extraction, field derivatives, horizontality and the derivative formula.
cli
    Verification suites and the ``opfield`` command.
"""

__version__ = "0.1.0"

from .grids import CartesianGrid, PolarGrid, PolarSection  # noqa: E402
from .phase_space import PolySymbol, RadialVectorField, poisson_bracket  # noqa: E402
from .weyl import quantize_diffop, quantize_kernel  # noqa: E402
from .op_field import OperatorField, extract_fibers  # noqa: E402

__all__ = [
    "__version__",
    "CartesianGrid",
    "PolarGrid",
    "PolarSection",
    "PolySymbol",
    "RadialVectorField",
    "poisson_bracket",
    "quantize_kernel",
    "quantize_diffop",
    "OperatorField",
    "extract_fibers",
]
