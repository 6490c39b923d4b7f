"""Diffusion auctions for selling identical items through a social network."""
from importlib import resources

from .allocation import (
    Allocation,
    AllocationTree,
    InfeasibleProgram,
    WelfareProgram,
    build_allocation_tree,
    competitor_closure,
    constrained_welfare,
    efficient_allocation,
    top_k_critical_children,
)
from .critical import CriticalStructure, NotAParticipant, critical_structure, critical_structure_oracle, precedes
from .mechanisms import (
    InternalInvariant,
    NoParticipants,
    Outcome,
    payment_decomposition,
    run_gidm,
    run_idm,
    run_vcg_local,
)
from .network import (
    SELLER,
    BuyerType,
    FeasibilityError,
    Network,
    Report,
    check_feasible,
    participants,
    truthful_profile,
)

__version__ = "0.1.0"

__all__ = [
    "SELLER", "Allocation", "AllocationTree", "BuyerType", "CriticalStructure", "FeasibilityError",
    "InfeasibleProgram", "InternalInvariant", "Network", "NoParticipants", "NotAParticipant", "Outcome", "Report",
    "WelfareProgram", "build_allocation_tree", "check_feasible", "competitor_closure", "constrained_welfare",
    "critical_structure", "critical_structure_oracle", "efficient_allocation", "fixture_path", "participants",
    "payment_decomposition", "precedes", "run_gidm", "run_idm", "run_vcg_local", "top_k_critical_children",
    "truthful_profile",
]


def fixture_path(name: str = "figure1"):
    """Path of a bundled network file, e.g. ``fixture_path("figure1")``."""
    return resources.files(__name__).joinpath("data", f"{name}.net")
