"""JSON serialisation of topologies, networks, circuits and state vectors.

Complex arrays are stored as ``{"shape": [...], "data": [[re, im], ...]}``
with ``data`` in row-major (C) order. State vectors use qubit 0 as the most
significant bit of the basis index. Every top-level document carries a
``"format"`` tag so :func:`load_json` can dispatch on it::

    topology:    {"format": "topology", "n_qubits": N, "tree": nested pairs}
    ttn:         {"format": "ttn", "topology": {...}, "center": c,
                  "chi_max": int | null, "tensors": {"1": array, ...}}
    circuit:     {"format": "circuit", "n_qubits": N, "topology": {...} | null,
                  "layers": [[{"node_id": i, "qubits": [a, b],
                               "unitary": array}, ...], ...]}
    statevector: {"format": "statevector", "n_qubits": N, "length": 2**N,
                  "data": [[re, im], ...]}

Circuit layers are listed in application order: the first layer acts first
on ``|0...0>``.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from .circuit import Gate, GateLayer, LayeredCircuit
from .exceptions import ShapeError
from .network import TreeTensorNetwork, TreeTopology

__all__ = [
    "array_to_json",
    "array_from_json",
    "topology_to_dict",
    "topology_from_dict",
    "ttn_to_dict",
    "ttn_from_dict",
    "circuit_to_dict",
    "circuit_from_dict",
    "state_to_dict",
    "state_from_dict",
    "to_dict",
    "from_dict",
    "save_json",
    "load_json",
]


def array_to_json(a: np.ndarray) -> Dict[str, Any]:
    a = np.asarray(a, dtype=complex)
    flat = a.ravel()
    return {"shape": list(a.shape), "data": np.stack([flat.real, flat.imag], axis=1).tolist()}


def array_from_json(obj: Dict[str, Any]) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    data = np.asarray(obj["data"], dtype=float).reshape(-1, 2)
    if data.shape[0] != int(np.prod(shape)):
        raise ShapeError(f"{data.shape[0]} entries do not fill shape {shape}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(shape)


def _nested_to_json(nested):
    if isinstance(nested, (int, np.integer)):
        return int(nested)
    return [_nested_to_json(nested[0]), _nested_to_json(nested[1])]


def _nested_from_json(obj):
    if isinstance(obj, int):
        return obj
    if not isinstance(obj, list) or len(obj) != 2:
        raise ValueError(f"tree entries must be ints or [left, right] pairs, got {obj!r}")
    return (_nested_from_json(obj[0]), _nested_from_json(obj[1]))


def topology_to_dict(top: TreeTopology) -> Dict[str, Any]:
    return {"format": "topology", "n_qubits": top.n_qubits, "tree": _nested_to_json(top.to_nested())}


def topology_from_dict(obj: Dict[str, Any]) -> TreeTopology:
    top = TreeTopology.from_nested(_nested_from_json(obj["tree"]))
    if "n_qubits" in obj and int(obj["n_qubits"]) != top.n_qubits:
        raise ValueError(f"n_qubits={obj['n_qubits']} does not match the tree ({top.n_qubits} leaves)")
    return top


def ttn_to_dict(ttn: TreeTensorNetwork) -> Dict[str, Any]:
    return {
        "format": "ttn",
        "topology": topology_to_dict(ttn.topology),
        "center": ttn.center,
        "chi_max": ttn.chi_max,
        "tensors": {str(k): array_to_json(v) for k, v in sorted(ttn.tensors.items())},
    }


def ttn_from_dict(obj: Dict[str, Any]) -> TreeTensorNetwork:
    top = topology_from_dict(obj["topology"])
    tensors = {int(k): array_from_json(v) for k, v in obj["tensors"].items()}
    ttn = TreeTensorNetwork(top, tensors, center=int(obj.get("center", 1)), chi_max=obj.get("chi_max"))
    ttn.validate()
    return ttn


def circuit_to_dict(circuit: LayeredCircuit) -> Dict[str, Any]:
    return {
        "format": "circuit",
        "n_qubits": circuit.n_qubits,
        "topology": None if circuit.topology is None else topology_to_dict(circuit.topology),
        "layers": [
            [{"node_id": g.node_id, "qubits": list(g.qubits), "unitary": array_to_json(g.unitary)} for g in layer]
            for layer in circuit.layers
        ],
    }


def circuit_from_dict(obj: Dict[str, Any]) -> LayeredCircuit:
    top = None if obj.get("topology") is None else topology_from_dict(obj["topology"])
    layers = []
    for layer in obj["layers"]:
        gates = tuple(
            Gate(int(g["node_id"]), (int(g["qubits"][0]), int(g["qubits"][1])), array_from_json(g["unitary"])) for g in layer
        )
        layers.append(GateLayer(gates))
    return LayeredCircuit(int(obj["n_qubits"]), tuple(layers), top)


def state_to_dict(psi: np.ndarray) -> Dict[str, Any]:
    psi = np.asarray(psi, dtype=complex).ravel()
    n = int(psi.size).bit_length() - 1
    if psi.size != 2**n:
        raise ShapeError(f"state length {psi.size} is not a power of two")
    return {"format": "statevector", "n_qubits": n, "length": int(psi.size), "data": array_to_json(psi)["data"]}


def state_from_dict(obj: Dict[str, Any]) -> np.ndarray:
    length = int(obj["length"])
    return array_from_json({"shape": [length], "data": obj["data"]})


_WRITERS = {
    TreeTopology: topology_to_dict,
    TreeTensorNetwork: ttn_to_dict,
    LayeredCircuit: circuit_to_dict,
}
_READERS = {
    "topology": topology_from_dict,
    "ttn": ttn_from_dict,
    "circuit": circuit_from_dict,
    "statevector": state_from_dict,
}


def to_dict(obj) -> Dict[str, Any]:
    for cls, writer in _WRITERS.items():
        if isinstance(obj, cls):
            return writer(obj)
    if isinstance(obj, np.ndarray):
        return state_to_dict(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def from_dict(obj: Dict[str, Any]):
    fmt = obj.get("format")
    if fmt not in _READERS:
        raise ValueError(f"unknown or missing format tag {fmt!r}")
    return _READERS[fmt](obj)


def save_json(obj, path: Union[str, Path]) -> None:
    """Write a topology, network, circuit or state vector to ``path``."""
    Path(path).write_text(json.dumps(to_dict(obj)))


def load_json(path: Union[str, Path]):
    return from_dict(json.loads(Path(path).read_text()))
