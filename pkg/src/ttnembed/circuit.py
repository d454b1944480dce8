"""Tree-wired layers of two-qubit gates and dense state-vector simulation.

A layer holds one gate per internal tree node, in BFS order. The gate of
node ``i`` acts on ``(rep(left child), rep(right child))`` where ``rep`` is
the leftmost leaf below a subtree. Gate matrices are indexed
``U[(a_out, b_out), (a_in, b_in)]`` with ``a`` the first listed qubit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import PreconditionError, ResourceError, TopologyError
from .network import MAX_DENSE_QUBITS, TreeTensorNetwork, TreeTopology, canonical_deviation
from .tensor_core import complete_isometry_to_unitary

__all__ = [
    "Gate",
    "GateLayer",
    "LayeredCircuit",
    "identity_layer",
    "random_layer",
    "layer_from_chi2",
    "apply_gate",
    "apply_circuit",
    "circuit_state",
    "zero_state",
    "random_unitary",
    "circuit_from_layers",
]


@dataclass(frozen=True)
class Gate:
    node_id: int
    qubits: Tuple[int, int]
    unitary: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.unitary, dtype=complex)
        if u.shape != (4, 4):
            raise ValueError(f"gate on node {self.node_id} must be 4x4, got {u.shape}")
        if self.qubits[0] == self.qubits[1]:
            raise ValueError(f"gate on node {self.node_id} acts twice on qubit {self.qubits[0]}")
        object.__setattr__(self, "unitary", u)

    def with_unitary(self, u: np.ndarray) -> "Gate":
        return Gate(self.node_id, self.qubits, u)


@dataclass(frozen=True)
class GateLayer:
    gates: Tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def unitaries(self):
        return [g.unitary for g in self.gates]

    def max_unitarity_error(self) -> float:
        eye = np.eye(4)
        return max(float(np.max(np.abs(g.unitary.conj().T @ g.unitary - eye))) for g in self.gates)

    def adjoint(self) -> "GateLayer":
        """Layer of conjugate-transposed gates (same node order)."""
        return GateLayer(tuple(g.with_unitary(g.unitary.conj().T) for g in self.gates))


@dataclass(frozen=True)
class LayeredCircuit:
    """Layers applied to ``|0...0>`` in list order (``layers[0]`` acts first)."""

    n_qubits: int
    layers: Tuple[GateLayer, ...] = ()
    topology: Optional[TreeTopology] = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            for g in layer:
                if not all(0 <= q < self.n_qubits for q in g.qubits):
                    raise TopologyError(f"gate qubits {g.qubits} out of range for {self.n_qubits} qubits")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def with_layers(self, layers: Iterable[GateLayer]) -> "LayeredCircuit":
        return LayeredCircuit(self.n_qubits, tuple(layers), self.topology)


def identity_layer(topology: TreeTopology) -> GateLayer:
    eye = np.eye(4, dtype=complex)
    return GateLayer(tuple(Gate(i, topology.gate_qubits(i), eye) for i in topology.node_ids))


def random_unitary(d: int, rng=None) -> np.ndarray:
    """Haar-random ``d x d`` unitary."""
    rng = np.random.default_rng(rng)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_layer(topology: TreeTopology, rng=None) -> GateLayer:
    rng = np.random.default_rng(rng)
    return GateLayer(tuple(Gate(i, topology.gate_qubits(i), random_unitary(4, rng)) for i in topology.node_ids))


def layer_from_chi2(ttn2: TreeTensorNetwork) -> GateLayer:
    """Turn a canonical bond-2 network (center at root) into one gate layer.

    Applying the layer to ``|0...0>`` reproduces the network's state. Bonds
    of dimension 1 are zero-padded to 2; the isometry of each node fills the
    columns where the second qubit (the ancilla) is ``|0>``.
    """
    top = ttn2.topology
    if ttn2.center != 1:
        raise PreconditionError("layer_from_chi2 needs the canonical center at the root")
    if ttn2.max_bond() > 2:
        raise PreconditionError(f"all bonds must be <= 2, found {ttn2.max_bond()}")
    dev = canonical_deviation(ttn2)
    if dev > 1e-8:
        raise PreconditionError(f"network is not canonical (deviation {dev:.2e})")

    gates = []
    for node in top.node_ids:
        t = ttn2.tensors[node]
        dp = t.shape[0]
        padded = np.zeros((dp, 2, 2), dtype=complex)
        padded[:, : t.shape[1], : t.shape[2]] = t
        iso = padded.reshape(dp, 4).T
        if node == 1:
            nrm = np.linalg.norm(iso)
            iso = iso / nrm
        full = complete_isometry_to_unitary(iso)
        # isometry columns go to inputs (p, ancilla=0) -> indices 0 and 2
        slots = [0, 2][:dp]
        rest = [c for c in range(4) if c not in slots]
        u = np.empty((4, 4), dtype=complex)
        u[:, slots + rest] = full
        gates.append(Gate(node, top.gate_qubits(node), u))
    return GateLayer(tuple(gates))


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def apply_gate(state: np.ndarray, u: np.ndarray, qa: int, qb: int) -> np.ndarray:
    """Apply a 4x4 gate to qubits ``(qa, qb)`` of a ``(2,)*N`` shaped state."""
    g = u.reshape(2, 2, 2, 2)
    out = np.tensordot(g, state, axes=([2, 3], [qa, qb]))
    return np.moveaxis(out, [0, 1], [qa, qb])


def _gate_sequence(circuit: LayeredCircuit, adjoint: bool):
    if not adjoint:
        for layer in circuit.layers:
            for g in layer:
                yield g.unitary, g.qubits
    else:
        for layer in reversed(circuit.layers):
            for g in reversed(layer.gates):
                yield g.unitary.conj().T, g.qubits


def apply_circuit(circuit: LayeredCircuit, psi: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Apply the circuit (or its adjoint) to a dense state vector."""
    n = circuit.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ResourceError(f"{n} qubits exceeds the dense limit")
    psi = np.asarray(psi, dtype=complex)
    if psi.size != 2**n:
        raise TopologyError(f"state has {psi.size} amplitudes, circuit acts on {n} qubits")
    state = psi.reshape((2,) * n)
    for u, (qa, qb) in _gate_sequence(circuit, adjoint):
        if not (0 <= qa < n and 0 <= qb < n):
            raise TopologyError(f"qubit index out of range: {(qa, qb)}")
        state = apply_gate(state, u, qa, qb)
    return np.ascontiguousarray(state).reshape(-1)


def circuit_state(circuit: LayeredCircuit) -> np.ndarray:
    """``circuit |0...0>``."""
    return apply_circuit(circuit, zero_state(circuit.n_qubits))


def circuit_from_layers(layers: Sequence[GateLayer], topology: TreeTopology) -> LayeredCircuit:
    return LayeredCircuit(topology.n_qubits, tuple(layers), topology)
