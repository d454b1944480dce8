"""Systematic decomposition of a tree tensor network into gate layers.

Each round truncates the current network to bond dimension 2, reads off a
gate layer, and absorbs the adjoint of that layer back into the network.
Absorption keeps the tree shape: every gate is split into two halves which
are walked up the tree by repeated contract-and-resplit moves
("penetration") until both halves meet at the gate's own node.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .circuit import GateLayer, LayeredCircuit, layer_from_chi2
from .exceptions import PreconditionError, ShapeError, TopologyError
from .network import TreeTensorNetwork, _move_center_step, normalize, set_center, truncate_to_chi
from .tensor_core import contract, is_unitary, svd_split

__all__ = [
    "GateHalves",
    "split_gate",
    "penetrate",
    "absorb_layer_adjoint",
    "absorb_layers_adjoint",
    "iter_decomposition",
    "systematic_decomposition",
]

DEFAULT_REL_TOL = 1e-12
AUTO = "auto"


@dataclass(frozen=True)
class GateHalves:
    """Operator-Schmidt factors of a two-qubit gate.

    ``up`` has axes (a_in, a_out, bond) and ``lo`` (bond, b_in, b_out) so that
    ``U[(a_out, b_out), (a_in, b_in)] = sum_k up[a_in, a_out, k] lo[k, b_in, b_out]``.
    """

    up: np.ndarray
    lo: np.ndarray

    @property
    def bond_dim(self) -> int:
        return self.up.shape[2]

    def to_matrix(self) -> np.ndarray:
        t = np.einsum("iok,kjp->opij", self.up, self.lo)
        return t.reshape(4, 4)


def split_gate(gate: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> GateHalves:
    """Split a 4x4 unitary between its two wires, sqrt(s) on each side."""
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (4, 4):
        raise ShapeError(f"expected a 4x4 gate, got {gate.shape}")
    if not is_unitary(gate, atol=1e-8):
        raise PreconditionError("split_gate expects a unitary")
    t = gate.reshape(2, 2, 2, 2)  # (a_out, b_out, a_in, b_in)
    split = svd_split(t, [2, 0], rel_tol=rel_tol)  # left: (a_in, a_out, k)
    root = np.sqrt(split.singular_values)
    up = split.left * root
    lo = split.right * root[:, None, None]  # (k, b_out, b_in)
    return GateHalves(up=up, lo=np.transpose(lo, (0, 2, 1)))


def penetrate(
    moving: np.ndarray,
    through: np.ndarray,
    shared: Tuple[int, int],
    passing: Sequence[int],
    far: Sequence[int],
    chi_cap: Optional[int] = None,
    rel_tol: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Move ``moving`` to the other side of ``through``.

    ``shared`` names the connecting bond as ``(axis of moving, axis of
    through)``. ``passing`` lists axes of ``moving`` that travel with it and
    ``far`` the axes of ``through`` on the side being crossed to.

    Returns ``(through', moving', error)``. ``through'`` carries the
    remaining axes of ``moving``, then the remaining axes of ``through``,
    then the new bond. ``moving'`` carries the new bond, then ``far``, then
    ``passing``. ``error`` is the norm of the discarded singular values.
    """
    if chi_cap is not None and chi_cap < 1:
        raise ValueError(f"chi_cap must be >= 1, got {chi_cap}")
    am, at = shared[0] % moving.ndim, shared[1] % through.ndim
    if moving.shape[am] != through.shape[at]:
        raise ShapeError(
            f"no shared bond: moving axis {am} (dim {moving.shape[am]}) vs "
            f"through axis {at} (dim {through.shape[at]})"
        )
    passing = [a % moving.ndim for a in passing]
    far = [a % through.ndim for a in far]
    if am in passing or at in far:
        raise ValueError("the shared bond cannot also be a passing/far axis")

    m_free = [a for a in range(moving.ndim) if a != am]
    t_free = [a for a in range(through.ndim) if a != at]
    joint = contract(moving, [am], through, [at])
    pos_m = {a: k for k, a in enumerate(m_free)}
    pos_t = {a: len(m_free) + k for k, a in enumerate(t_free)}
    stay = [pos_m[a] for a in m_free if a not in passing] + [pos_t[a] for a in t_free if a not in far]
    go = [pos_t[a] for a in far] + [pos_m[a] for a in passing]

    split = svd_split(joint, stay, max_bond=chi_cap, rel_tol=rel_tol)
    moved = split.right * split.singular_values.reshape((-1,) + (1,) * (split.right.ndim - 1))
    # right factor axes follow joint's order; reorder to (bond, *go)
    rest_order = [a for a in range(joint.ndim) if a not in stay]
    perm = [0] + [1 + rest_order.index(a) for a in go]
    return split.left, np.transpose(moved, perm), split.discarded_norm


def _resolve_cap(ttn: TreeTensorNetwork, chi_cap) -> Optional[int]:
    if chi_cap == AUTO:
        return ttn.chi_max
    if chi_cap is not None and chi_cap < 1:
        raise ValueError(f"chi_cap must be >= 1, got {chi_cap}")
    return chi_cap


def _walk_center(tensors, top, src: int, dst: int) -> int:
    walk = top.path(src, dst)
    for a, b in zip(walk[:-1], walk[1:]):
        _move_center_step(tensors, top, a, b)
    return dst


def absorb_layer_adjoint(
    ttn: TreeTensorNetwork,
    layer: GateLayer,
    chi_cap: Union[int, None, str] = AUTO,
    rel_tol: float = DEFAULT_REL_TOL,
    return_error: bool = False,
):
    """Apply the adjoint of ``layer`` to ``ttn`` while keeping its tree shape.

    Gates are processed from the highest node id down to the root. For each
    node the gate adjoint is split into halves; each half is walked from its
    leaf up to the node, one penetration per tree edge, and contracted into
    the node tensor on arrival. The canonical center rides along with the
    climbing half, so each truncation sees an isometric environment (up to
    the loop closed by the bond between the two halves). Bond growth is capped at ``chi_cap``:
    ``"auto"`` uses the network's ``chi_max`` and ``None`` means unbounded.

    With ``return_error=True`` also return the sum over all penetration SVDs
    of the discarded singular-value norms.
    """
    top = ttn.topology
    gates = {g.node_id: g for g in layer}
    if set(gates) != set(top.node_ids):
        raise TopologyError("layer nodes do not match the network topology")
    for node, g in gates.items():
        if tuple(g.qubits) != top.gate_qubits(node):
            raise TopologyError(f"gate on node {node} acts on {g.qubits}, expected {top.gate_qubits(node)}")
    cap = _resolve_cap(ttn, chi_cap)

    tensors = dict(ttn.tensors)
    center = ttn.center
    total_err = 0.0
    for node in reversed(list(top.node_ids)):
        halves = split_gate(gates[node].unitary.conj().T, rel_tol=rel_tol)
        qa, qb = top.gate_qubits(node)
        movers = (
            (np.transpose(halves.up, (1, 0, 2)), qa),  # (down, up, bond)
            (np.transpose(halves.lo, (2, 1, 0)), qb),
        )
        for half, qubit in movers:
            at, axis = top.leaf_parent[qubit]
            # the half carries the canonical center while it climbs
            center = _walk_center(tensors, top, center, at)
            while at != node:
                new_t, half, err = penetrate(half, tensors[at], (1, axis), passing=[2], far=[0], chi_cap=cap, rel_tol=rel_tol)
                # new_t axes: (half.down, sibling, bond) -> (bond, left, right)
                new_t = np.moveaxis(new_t, -1, 0)
                if axis == 2:
                    new_t = new_t.transpose(0, 2, 1)
                tensors[at] = new_t
                total_err += err
                axis = top.axis_in_parent(at)
                at = top.parent(at)  # type: ignore[assignment]
            center = node
            # contract onto the node; the half's bond becomes (or closes) the trailing axis
            a = tensors[node]
            if a.ndim == 3:
                x = np.tensordot(half, a, axes=([1], [axis]))  # (down, k, *others)
                x = np.moveaxis(x, 0, 1 + axis)  # (k, p, l, r)
                tensors[node] = np.moveaxis(x, 0, -1)
            else:
                x = np.tensordot(half, a, axes=([1, 2], [axis, 3]))  # (down, *others)
                tensors[node] = np.moveaxis(x, 0, axis)
    cur = replace(ttn, tensors=tensors, center=center)
    cur = normalize(set_center(cur, 1))
    if return_error:
        return cur, total_err
    return cur


def absorb_layers_adjoint(
    ttn: TreeTensorNetwork,
    layers: Sequence[GateLayer],
    chi_cap: Union[int, None, str] = AUTO,
    rel_tol: float = DEFAULT_REL_TOL,
) -> TreeTensorNetwork:
    """Absorb the adjoint of a whole circuit (``layers`` in application order)."""
    cur = ttn
    for layer in reversed(list(layers)):
        cur = absorb_layer_adjoint(cur, layer, chi_cap=chi_cap, rel_tol=rel_tol)
    return cur


def iter_decomposition(
    psi0: TreeTensorNetwork,
    n_layers: int,
    chi_cap: Union[int, None, str] = AUTO,
    rel_tol: float = DEFAULT_REL_TOL,
) -> Iterator[Tuple[GateLayer, TreeTensorNetwork]]:
    """Yield ``(layer_k, psi_(k+1))`` for ``k = 1 .. n_layers``."""
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    cap = _resolve_cap(psi0, chi_cap)
    psi = psi0 if psi0.center == 1 else set_center(psi0, 1)
    for _ in range(n_layers):
        layer = layer_from_chi2(truncate_to_chi(psi, 2))
        psi = absorb_layer_adjoint(psi, layer, chi_cap=cap, rel_tol=rel_tol)
        yield layer, psi


def systematic_decomposition(
    psi0: TreeTensorNetwork,
    n_layers: int,
    chi_cap: Union[int, None, str] = AUTO,
    rel_tol: float = DEFAULT_REL_TOL,
) -> LayeredCircuit:
    """Circuit of ``n_layers`` layers approximating ``psi0``.

    Disentangling layers come out first-to-last; the circuit applies them in
    reverse, so the last extracted layer acts first on ``|0...0>``.
    """
    layers: List[GateLayer] = [layer for layer, _ in iter_decomposition(psi0, n_layers, chi_cap, rel_tol)]
    return LayeredCircuit(psi0.n_qubits, tuple(reversed(layers)), psi0.topology)
