"""Classical algebraic multigrid."""

from .coarsen import COARSENERS, CfSplitting, cljp_coarsen, is_valid_splitting, rs_coarsen
from .hierarchy import (AmgHierarchy, AmgLevel, AmgOptions, AmgPreconditioner,
                        CoarseningStagnation, amg_setup, amg_solve, galerkin, vcycle)
from .interp import INTERPOLATORS, InterpolationError, interp_direct, interp_standard
from .smoothers import SMOOTHER_KINDS, Smoother, SmootherConfig, make_smoother, smooth
from .strength import StrengthGraph, strength

__all__ = [
    "StrengthGraph", "strength",
    "CfSplitting", "rs_coarsen", "cljp_coarsen", "is_valid_splitting", "COARSENERS",
    "InterpolationError", "interp_direct", "interp_standard", "INTERPOLATORS",
    "SmootherConfig", "Smoother", "make_smoother", "smooth", "SMOOTHER_KINDS",
    "AmgOptions", "AmgLevel", "AmgHierarchy", "AmgPreconditioner", "CoarseningStagnation",
    "amg_setup", "vcycle", "amg_solve", "galerkin",
]
