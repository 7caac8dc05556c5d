"""Nonlocal-in-time quasilinear diffusion on uniform grids.

Kernels by cell integrals, structural exponents, level-set iteration tools and
an implicit solver for ``d/dt (k * (u - u0)) - div a(Du) = b``.
"""

from .degiorgi import (
    IterationTrace,
    LevelSequence,
    RecursionParams,
    apriori_bound,
    energy_rhs,
    lemma_iterate,
    level_measure,
    run_iteration,
    truncated_energy,
)
from .exponents import (
    ExponentSet,
    SharpnessCase,
    StructureParams,
    check_embedding_identities,
    check_fractional_admissibility,
    derive_exponents,
    sharpness_exponents,
)
from .grid import DomainGrid, GridFunction
from .kernels import (
    FracParams,
    KernelGrid,
    KernelPair,
    TimeGrid,
    check_fundamental_identity,
    convolve,
    delta_kernel,
    pc_pair,
    resolvent_kernel,
    rl_kernel,
    yosida_kernel,
)
from .solver import Nonlinearity, SolveConfig, fractional_ode, solve, step_weights

__version__ = "0.1.0"
