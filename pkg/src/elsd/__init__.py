"""Moving-object detection in low-resolution video via matrix decomposition.

Decomposes a frame matrix into a low-rank background, a structured-sparse
foreground and a bounded residual with an ADMM solver, and provides
synthetic data generation plus detection-metric evaluation around it.
"""

from .linalg import FrameMatrix, MatrixNorms, SvdFactors, norms, svt, thin_svd
from .solver import LSD, ELSD, DecompositionResult, SolverConfig, solve
from .structured import (
    GroupSet,
    PROX_BACKEND,
    build_grid_groups,
    prox_batch,
    prox_structured,
    structured_norm,
)
from .synth import SynthScenario, generate

__version__ = "0.1.0"

__all__ = [
    "FrameMatrix",
    "MatrixNorms",
    "SvdFactors",
    "norms",
    "svt",
    "thin_svd",
    "LSD",
    "ELSD",
    "DecompositionResult",
    "SolverConfig",
    "solve",
    "GroupSet",
    "PROX_BACKEND",
    "build_grid_groups",
    "prox_batch",
    "prox_structured",
    "structured_norm",
    "SynthScenario",
    "generate",
    "__version__",
]
