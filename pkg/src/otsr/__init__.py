"""Sparse super-resolution with entropic optimal transport.

The package approximates a nonnegative histogram by a sparse one that
minimizes a Sinkhorn transport cost plus an entropy penalty, and uses the
peak count of that approximation to classify astronomical image patches.
"""

from .core import (
    CostMatrix,
    TransportPlan,
    cost_grid2d,
    cost_lattice1d,
    entropy,
    entropy_grad,
    is_probvec,
    make_probvec,
)
from .exceptions import *  # noqa: F401,F403
from .sinkhorn import SinkhornConfig, SinkhornResult, grad_wrt_first, sinkhorn
from .solver import (
    SIMULATION_DEFAULTS,
    STAR_DEFAULTS,
    SolverConfig,
    SparseSolveTrace,
    objective,
    project_tangent,
    sparse_approx,
)
from .topology import h0_rank, threshold_superlevel

__version__ = "0.1.0"
