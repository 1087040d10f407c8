"""Initialize the dpskit package."""

from dpskit.client import VerdictCache, cached_membership
from dpskit.cop import (
    dps_cp_bridge_check,
    horn_matrix,
    k0_membership,
    kt_membership,
    search_objective,
)
from dpskit.enums import Formalism, Hierarchy, Regime, Verdict
from dpskit.hermitian import HermitianMatrix, RealSymmetric
from dpskit.ppt2 import ExperimentConfig, run_experiment
from dpskit.relax import build_model, check_membership, to_lmi
from dpskit.sdp import SolveReport, SolverOptions, solve_feasibility
from dpskit.states import TripleXYZ, rho_from_triple, triple_from_rho

__all__ = [
    "ExperimentConfig",
    "Formalism",
    "HermitianMatrix",
    "Hierarchy",
    "RealSymmetric",
    "Regime",
    "SolveReport",
    "SolverOptions",
    "TripleXYZ",
    "Verdict",
    "VerdictCache",
    "build_model",
    "cached_membership",
    "check_membership",
    "dps_cp_bridge_check",
    "horn_matrix",
    "k0_membership",
    "kt_membership",
    "rho_from_triple",
    "run_experiment",
    "search_objective",
    "solve_feasibility",
    "to_lmi",
    "triple_from_rho",
]
