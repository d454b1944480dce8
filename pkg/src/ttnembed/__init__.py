"""Embedding tree tensor networks into shallow circuits of two-qubit gates."""
from .circuit import (
    Gate,
    GateLayer,
    LayeredCircuit,
    apply_circuit,
    circuit_state,
    identity_layer,
    layer_from_chi2,
    random_layer,
)
from .decompose import absorb_layer_adjoint, absorb_layers_adjoint, penetrate, split_gate, systematic_decomposition
from .estimator import TTNEmbedder
from .exceptions import ConfigError, ConvergenceError, PreconditionError, ResourceError, ShapeError, TopologyError
from .network import (
    TreeTensorNetwork,
    TreeTopology,
    balanced_topology,
    build_topology,
    caterpillar_topology,
    from_statevector,
    infidelity,
    inner_product,
    lattice_bisection_topology,
    random_ttn,
    set_center,
    to_statevector,
    truncate_to_chi,
)
from .optimize import EmbedReport, SweepConfig, embed, environment, pairing, svd_update, sweep_optimize
from .states import LatticeSpec, bas_state, heisenberg_ground_state, heisenberg_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "Gate",
    "GateLayer",
    "LayeredCircuit",
    "apply_circuit",
    "circuit_state",
    "identity_layer",
    "layer_from_chi2",
    "random_layer",
    "absorb_layer_adjoint",
    "absorb_layers_adjoint",
    "penetrate",
    "split_gate",
    "systematic_decomposition",
    "TTNEmbedder",
    "ConfigError",
    "ConvergenceError",
    "PreconditionError",
    "ResourceError",
    "ShapeError",
    "TopologyError",
    "TreeTensorNetwork",
    "TreeTopology",
    "balanced_topology",
    "build_topology",
    "caterpillar_topology",
    "from_statevector",
    "infidelity",
    "inner_product",
    "lattice_bisection_topology",
    "random_ttn",
    "set_center",
    "to_statevector",
    "truncate_to_chi",
    "EmbedReport",
    "SweepConfig",
    "embed",
    "environment",
    "pairing",
    "svd_update",
    "sweep_optimize",
    "LatticeSpec",
    "bas_state",
    "heisenberg_ground_state",
    "heisenberg_hamiltonian",
]
