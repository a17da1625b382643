"""Structure-preserving toolkit for linear port-Hamiltonian systems with boundary control."""

from importlib import resources

from phnode.analysis import (
    DiscreteNode,
    adjoint_node,
    check_maximal_dissipative,
    contraction_scan,
    main_operator,
    positive_real_scan,
    sym_part_bound,
    transfer_eval,
    wellposedness_proxy,
)
from phnode.core import (
    PHStructure,
    assemble_dissipation_matrix,
    hamiltonian,
    power_terms,
    to_node,
    validate_ph_structure,
)
from phnode.discretize import (
    HyperbolicModel,
    apply_io_redefinition,
    assemble_diffusion_node,
    assemble_hyperbolic_node,
    build_sbp,
    check_port_condition,
    complete_boundary_matrices,
)
from phnode.models import CATALOG, assemble, build_model
from phnode.quadham import DensitySpec, EnergyMetric, build_energy_metric
from phnode.timeint import InputSignal, energy_audit, implicit_midpoint_step, simulate

__version__ = "0.1.0"


def bundled_model_files() -> dict[str, str]:
    """Paths of the example model files shipped with the package, by stem."""
    root = resources.files("phnode") / "data"
    return {p.name[:-5]: str(p) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".json")}


__all__ = [
    "PHStructure", "validate_ph_structure", "assemble_dissipation_matrix", "hamiltonian", "power_terms",
    "to_node", "DiscreteNode", "main_operator", "check_maximal_dissipative", "contraction_scan",
    "adjoint_node", "transfer_eval", "positive_real_scan", "wellposedness_proxy", "sym_part_bound",
    "DensitySpec", "EnergyMetric", "build_energy_metric", "HyperbolicModel", "build_sbp",
    "check_port_condition", "complete_boundary_matrices", "assemble_hyperbolic_node",
    "apply_io_redefinition", "assemble_diffusion_node", "CATALOG", "build_model", "assemble",
    "InputSignal", "implicit_midpoint_step", "simulate", "energy_audit", "bundled_model_files",
]
