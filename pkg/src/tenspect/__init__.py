"""Perron l^p-eigenpairs of nonnegative tensors.

Shifted higher-order power methods, restarted simplified topological
epsilon extrapolation, and the synthetic and graph-derived test problems
used to study them.
"""

from .tensor import (
    SparseTensor,
    apply,
    apply_mode,
    conjugate,
    duality_map,
    p_norm,
    rayleigh,
    rayleigh_gradient,
    read_tensor,
    write_tensor,
)
from .spectral import (
    ConePattern,
    EmptyConeError,
    IterationTrace,
    SolveConfig,
    cone_pattern,
    hilbert_distance,
    is_weakly_irreducible,
    residual,
    solve,
    step_alg1,
    step_alg2,
)

__version__ = "0.1.0"
