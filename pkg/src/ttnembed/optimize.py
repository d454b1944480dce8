"""Environment-tensor sweeps and the four embedding strategies.

Pairing convention: for the environment ``E`` of a gate slot and any 4x4
matrix ``G`` placed in that slot, ``<target| circuit(G) |0> = vdot(E, G)``
i.e. ``sum(conj(E) * G)``. With ``E = U S V^dagger`` the maximiser over
unitaries is ``U V^dagger`` and the maximum is ``sum(S)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .circuit import GateLayer, LayeredCircuit, apply_gate, circuit_state, identity_layer, layer_from_chi2, zero_state
from .decompose import AUTO, DEFAULT_REL_TOL, absorb_layers_adjoint, iter_decomposition
from .exceptions import TopologyError
from .network import TreeTensorNetwork, infidelity, set_center, to_statevector, truncate_to_chi
from .tensor_core import unitary_fractional_power

__all__ = [
    "METHODS",
    "SweepConfig",
    "EmbedReport",
    "environment",
    "pairing",
    "svd_update",
    "sweep_optimize",
    "embed",
]

METHODS = ("D_all", "O_all", "Iter_I", "Iter_D")


@dataclass(frozen=True)
class SweepConfig:
    """Sweep count, learning rate and early-stop tolerance.

    ``convergence_tol`` stops the sweeps once the infidelity changes by less
    than this between consecutive sweeps; set it to 0 to always run all
    ``sweeps``.
    """

    sweeps: int = 100
    learning_rate: float = 1.0
    convergence_tol: float = 1e-12

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be non-negative")


@dataclass
class EmbedReport:
    """Infidelity trace of one embedding run.

    ``records`` holds one dict per (layer count, sweep) with keys ``K``,
    ``sweep``, ``infidelity``, ``infidelity_to_state`` (None without a
    reference vector) and ``seconds`` (wall time since the run started).
    Sweep 0 is the circuit before any optimisation at that depth.
    """

    method: str
    records: List[Dict[str, Any]] = field(default_factory=list)
    circuits: Dict[int, LayeredCircuit] = field(default_factory=dict, repr=False)
    wall_time: float = 0.0
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def circuit(self) -> Optional[LayeredCircuit]:
        """Circuit at the largest layer count."""
        return self.circuits[max(self.circuits)] if self.circuits else None

    def final_infidelities(self, key: str = "infidelity") -> Dict[int, float]:
        out: Dict[int, float] = {}
        for rec in self.records:
            out[rec["K"]] = rec[key]
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "config": self.config,
            "wall_time": self.wall_time,
            "records": self.records,
        }

    def to_csv(self, path_or_buf=None, include_timing: bool = True) -> str:
        """Flat CSV with one row per record."""
        import csv
        import io

        cols = ["method", "K", "sweep", "infidelity", "infidelity_to_state"]
        if include_timing:
            cols.append("seconds")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for rec in self.records:
            row = {**rec, "method": self.method}
            writer.writerow([_fmt(row.get(c)) for c in cols])
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return x


# -- dense reference backend ---------------------------------------------------


def _target_tensor(target, n: int) -> np.ndarray:
    if isinstance(target, TreeTensorNetwork):
        if target.n_qubits != n:
            raise TopologyError(f"target has {target.n_qubits} qubits, circuit {n}")
        vec = to_statevector(target)
    else:
        vec = np.asarray(target, dtype=complex).ravel()
        if vec.size != 2**n:
            raise TopologyError(f"target has {vec.size} amplitudes, circuit acts on {n} qubits")
    return vec.reshape((2,) * n)


def _pair_env(chi: np.ndarray, phi: np.ndarray, qa: int, qb: int) -> np.ndarray:
    rest = [q for q in range(chi.ndim) if q not in (qa, qb)]
    order = [qa, qb] + rest
    a = np.transpose(chi, order).reshape(4, -1)
    b = np.transpose(phi, order).reshape(4, -1)
    return a @ b.conj().T


def environment(target, circuit: LayeredCircuit, k: int, i: int) -> np.ndarray:
    """Environment of the gate on node ``i`` in layer ``k`` (both 1-based).

    Layer ``k`` is the k-th layer applied to ``|0...0>``.
    """
    n = circuit.n_qubits
    if not 1 <= k <= circuit.depth:
        raise IndexError(f"layer index {k} out of range 1..{circuit.depth}")
    layer = circuit.layers[k - 1]
    pos = [g.node_id for g in layer].index(i) if i in [g.node_id for g in layer] else None
    if pos is None:
        raise IndexError(f"no gate on node {i} in layer {k}")
    flat = [g for lay in circuit.layers for g in lay]
    m = sum(len(lay) for lay in circuit.layers[: k - 1]) + pos

    phi = zero_state(n).reshape((2,) * n)
    for g in flat[:m]:
        phi = apply_gate(phi, g.unitary, *g.qubits)
    chi = _target_tensor(target, n)
    for g in reversed(flat[m + 1 :]):
        chi = apply_gate(chi, g.unitary.conj().T, *g.qubits)
    return _pair_env(chi, phi, *flat[m].qubits)


def pairing(env: np.ndarray, gate: np.ndarray) -> complex:
    """Overlap obtained by placing ``gate`` into the slot described by ``env``."""
    return complex(np.vdot(env, gate))


def svd_update(env: np.ndarray) -> Tuple[np.ndarray, float]:
    """Unitary maximising ``|pairing(env, .)|`` and the maximum value."""
    env = np.asarray(env, dtype=complex)
    if not np.any(env):
        return np.eye(env.shape[0], dtype=complex), 0.0
    u, s, vh = np.linalg.svd(env)
    return u @ vh, float(np.sum(s))


UpdateCallback = Callable[[int, int, int, float, LayeredCircuit], None]


def sweep_optimize(
    circuit: LayeredCircuit,
    target,
    cfg: SweepConfig = SweepConfig(),
    callback: Optional[UpdateCallback] = None,
) -> Tuple[LayeredCircuit, List[float]]:
    """Sweep every gate, layer by layer in application order, BFS within a layer.

    Each gate is replaced by ``U_old (U_old^dagger U_new)^r`` with ``U_new``
    from :func:`svd_update`. Returns the optimised circuit and the
    infidelity after each sweep. ``callback(t, k, node, overlap, circuit)``
    fires after every single gate update; building the circuit for it costs
    time, so leave it ``None`` in production runs.
    """
    n = circuit.n_qubits
    tgt = _target_tensor(target, n)
    slots = [(k, g.node_id, g.qubits) for k, lay in enumerate(circuit.layers, start=1) for g in lay]
    us = [g.unitary.copy() for lay in circuit.layers for g in lay]
    m_total = len(us)
    r = cfg.learning_rate
    trace: List[float] = []
    if m_total == 0:
        return circuit, trace

    zero = zero_state(n).reshape((2,) * n)
    prev = None
    for t in range(1, cfg.sweeps + 1):
        chi = tgt
        for m in range(m_total - 1, 0, -1):
            chi = apply_gate(chi, us[m].conj().T, *slots[m][2])
        phi = zero
        overlap = 0.0
        for m in range(m_total):
            qa, qb = slots[m][2]
            env = _pair_env(chi, phi, qa, qb)
            if r > 0.0:
                u_new, _ = svd_update(env)
                old = us[m]
                if r == 1.0:
                    us[m] = u_new
                else:
                    us[m] = old @ unitary_fractional_power(old.conj().T @ u_new, r)
            overlap = abs(pairing(env, us[m]))
            if callback is not None:
                callback(t, slots[m][0], slots[m][1], overlap, _rebuild(circuit, us))
            phi = apply_gate(phi, us[m], qa, qb)
            if m + 1 < m_total:
                chi = apply_gate(chi, us[m + 1], *slots[m + 1][2])
        inf = float(min(1.0, max(0.0, 1.0 - overlap)))
        trace.append(inf)
        if prev is not None and abs(prev - inf) < cfg.convergence_tol:
            break
        prev = inf
    return _rebuild(circuit, us), trace


def _rebuild(circuit: LayeredCircuit, us: Sequence[np.ndarray]) -> LayeredCircuit:
    layers = []
    pos = 0
    for lay in circuit.layers:
        gates = []
        for g in lay:
            gates.append(g.with_unitary(us[pos]))
            pos += 1
        layers.append(GateLayer(tuple(gates)))
    return circuit.with_layers(layers)


# -- strategies ----------------------------------------------------------------


def embed(
    psi0: TreeTensorNetwork,
    method: str,
    n_layers: int,
    cfg: SweepConfig = SweepConfig(),
    chi_cap: Union[int, None, str] = AUTO,
    rel_tol: float = DEFAULT_REL_TOL,
    reference: Optional[np.ndarray] = None,
    keep_circuits: bool = True,
) -> EmbedReport:
    """Embed ``psi0`` into tree-wired circuits of 1..``n_layers`` layers.

    Methods: ``D_all`` (decomposition only), ``O_all`` (identity layers,
    then sweeps), ``Iter_I`` (add an identity layer, sweep all layers,
    repeat) and ``Iter_D`` (add a decomposition layer, sweep all layers,
    re-absorb the optimised circuit into a fresh copy of ``psi0``, repeat).

    Infidelities are measured against ``psi0``; when ``reference`` (a dense
    vector, e.g. the state ``psi0`` was built from) is given the distance to
    it is recorded too.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    top = psi0.topology
    psi0 = psi0 if psi0.center == 1 else set_center(psi0, 1)
    target = to_statevector(psi0)
    ref = None if reference is None else np.asarray(reference, dtype=complex).ravel()
    report = EmbedReport(
        method=method,
        config={
            "n_layers": n_layers,
            "sweeps": cfg.sweeps,
            "learning_rate": cfg.learning_rate,
            "convergence_tol": cfg.convergence_tol,
            "chi_cap": chi_cap,
            "rel_tol": rel_tol,
        },
    )
    start = time.perf_counter()

    def record(k, sweep, circuit, state=None):
        state = circuit_state(circuit) if state is None else state
        report.records.append(
            {
                "K": k,
                "sweep": sweep,
                "infidelity": infidelity(target, state),
                "infidelity_to_state": None if ref is None else infidelity(ref, state),
                "seconds": time.perf_counter() - start,
            }
        )

    def optimise(k, circuit):
        record(k, 0, circuit)
        circuit, trace = sweep_optimize(circuit, target, cfg)
        state = circuit_state(circuit)
        # per-sweep values come from the sweep trace; the last row is recomputed densely
        for t, inf in enumerate(trace[:-1], start=1):
            report.records.append({"K": k, "sweep": t, "infidelity": inf, "infidelity_to_state": None, "seconds": None})
        record(k, len(trace), circuit, state)
        return circuit

    def keep(k, circuit):
        if keep_circuits or k == n_layers:
            report.circuits[k] = circuit

    if method == "D_all":
        extracted: List[GateLayer] = []
        for k, (layer, _) in enumerate(iter_decomposition(psi0, n_layers, chi_cap, rel_tol), start=1):
            extracted.append(layer)
            circuit = LayeredCircuit(top.n_qubits, tuple(reversed(extracted)), top)
            record(k, 0, circuit)
            keep(k, circuit)
    elif method == "O_all":
        for k in range(1, n_layers + 1):
            circuit = LayeredCircuit(top.n_qubits, tuple(identity_layer(top) for _ in range(k)), top)
            keep(k, optimise(k, circuit))
    elif method == "Iter_I":
        circuit = LayeredCircuit(top.n_qubits, (), top)
        for k in range(1, n_layers + 1):
            circuit = circuit.with_layers((identity_layer(top),) + circuit.layers)
            circuit = optimise(k, circuit)
            keep(k, circuit)
    else:
        psi = psi0
        circuit = LayeredCircuit(top.n_qubits, (), top)
        for k in range(1, n_layers + 1):
            new = layer_from_chi2(truncate_to_chi(psi, 2))
            circuit = circuit.with_layers((new,) + circuit.layers)
            circuit = optimise(k, circuit)
            keep(k, circuit)
            if k < n_layers:
                psi = absorb_layers_adjoint(psi0, circuit.layers, chi_cap=chi_cap, rel_tol=rel_tol)
    report.wall_time = time.perf_counter() - start
    return report
