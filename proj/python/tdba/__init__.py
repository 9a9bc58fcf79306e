"""Time-dependent stochastic basis adaptation for 1D diffusion equations."""

from tdba._core import (
    KLExpansion,
    basis_terms,
    compare,
    gauss_hermite,
    hermite,
    kde,
    kl_expansion,
    lognormal_params,
    run,
    solve_linear_diffusion,
    solve_richards,
    sparse_grid,
)

__all__ = [
    "KLExpansion",
    "basis_terms",
    "compare",
    "gauss_hermite",
    "hermite",
    "kde",
    "kl_expansion",
    "lognormal_params",
    "run",
    "solve_linear_diffusion",
    "solve_richards",
    "sparse_grid",
]
