"""Hopf bifurcations of van der Pol lattices on the 3-torus."""

from .model import (LatticeParams, LatticeState, Variant, coupling_matrix, jacobian, node_index,
                    rhs)
from .spectral import (BifurcationRecord, ModeBasis, bifurcation_catalog, canonical_modes,
                       closed_form_spectrum, critical_a_vdpl, eigenvalues_vdp, eigenvalues_vdpl,
                       g_of_mode, h_of_mode, k_of_mode, limit_periods_vdpl, mode_basis,
                       mode_project)
from .symmetry import (GroupElement, TwistedSubgroup, act, branch_count, parse_subgroup,
                       symmetry_classes, verify_orbit_symmetry)
from .stability import (StabilityVerdict, Verdict, floquet_multipliers,
                        lyapunov_coefficient_vdpl_single, vdp_instability_criterion,
                        vdpl_threshold)
from .orbits import (PeriodicOrbit, admissible_period_catalog, existence_search,
                     find_orbit_shooting, integrate, trace_branch)

__version__ = "0.1.0"

__all__ = [
    "BifurcationRecord",
    "GroupElement",
    "LatticeParams",
    "LatticeState",
    "ModeBasis",
    "PeriodicOrbit",
    "StabilityVerdict",
    "TwistedSubgroup",
    "Variant",
    "Verdict",
    "act",
    "admissible_period_catalog",
    "bifurcation_catalog",
    "branch_count",
    "canonical_modes",
    "closed_form_spectrum",
    "coupling_matrix",
    "critical_a_vdpl",
    "eigenvalues_vdp",
    "eigenvalues_vdpl",
    "existence_search",
    "find_orbit_shooting",
    "floquet_multipliers",
    "g_of_mode",
    "h_of_mode",
    "integrate",
    "jacobian",
    "k_of_mode",
    "limit_periods_vdpl",
    "lyapunov_coefficient_vdpl_single",
    "mode_basis",
    "mode_project",
    "node_index",
    "parse_subgroup",
    "rhs",
    "symmetry_classes",
    "trace_branch",
    "vdp_instability_criterion",
    "vdpl_threshold",
    "verify_orbit_symmetry",
]
