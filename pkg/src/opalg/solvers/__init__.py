"""Solver factories and generated solver operators."""

from .common import BreakdownInfo, IterativeSolver, IterativeSolverFactory, SolveStatus
from .gmres import DEFAULT_KRYLOV_DIM, Gmres
from .ir import Ir
from .krylov import Bicgstab, Cg, Cgs, Fcg
from .triangular import LowerTrs, TriangularSolver, UpperTrs

SOLVER_FACTORIES = {
    "cg": Cg,
    "fcg": Fcg,
    "cgs": Cgs,
    "bicgstab": Bicgstab,
    "gmres": Gmres,
    "ir": Ir,
}

__all__ = [
    "Bicgstab", "BreakdownInfo", "Cg", "Cgs", "DEFAULT_KRYLOV_DIM", "Fcg",
    "Gmres", "Ir", "IterativeSolver", "IterativeSolverFactory", "LowerTrs",
    "SOLVER_FACTORIES", "SolveStatus", "TriangularSolver", "UpperTrs",
]
