"""Binary tree tensor networks in canonical form.

Conventions
-----------
* Internal nodes carry tensors and are numbered ``1 .. N-1`` in BFS order
  from the root. Leaves are the qubits ``0 .. N-1``.
* Every node tensor has axes ``(parent, left, right)``. The root's parent
  axis has dimension 1. A child axis that faces a leaf is the physical leg
  of that qubit (dimension 2).
* State vectors are ordered with qubit 0 as the most significant bit.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import PreconditionError, ResourceError, TopologyError
from .tensor_core import contract, svd_split

__all__ = [
    "Child",
    "TreeTopology",
    "TreeTensorNetwork",
    "balanced_topology",
    "caterpillar_topology",
    "lattice_bisection_topology",
    "build_topology",
    "TOPOLOGY_KINDS",
    "from_statevector",
    "random_ttn",
    "product_ttn",
    "set_center",
    "truncate_to_chi",
    "to_statevector",
    "inner_product",
    "infidelity",
    "canonical_deviation",
    "MAX_DENSE_QUBITS",
]

MAX_DENSE_QUBITS = 24


class Child(NamedTuple):
    """Reference to a child: an internal node id or a leaf qubit."""

    is_leaf: bool
    index: int


Nested = Union[int, Tuple["Nested", "Nested"]]


@dataclass(frozen=True)
class TreeTopology:
    """Immutable rooted binary tree over ``n_qubits`` leaves.

    Build it from a nested pair structure, e.g. ``((0, 1), (2, 3))``, with
    :meth:`from_nested` or one of the module-level builders.
    """

    n_qubits: int
    children: Tuple[Tuple[Child, Child], ...]
    parents: Tuple[Optional[int], ...] = field(repr=False)
    leaf_parent: Tuple[Tuple[int, int], ...] = field(repr=False)

    @classmethod
    def from_nested(cls, nested: Nested) -> "TreeTopology":
        if isinstance(nested, int):
            raise TopologyError("a tree needs at least two leaves")
        seen: List[int] = []
        children: List[Tuple[Child, Child]] = []
        parents: List[Optional[int]] = []
        queue: deque = deque([(nested, None)])
        # BFS: ids are handed out in dequeue order, root = 1
        while queue:
            node, parent = queue.popleft()
            if not (isinstance(node, (tuple, list)) and len(node) == 2):
                raise TopologyError(f"internal node must be a pair, got {node!r}")
            node_id = len(children) + 1
            parents.append(parent)
            refs = []
            for sub in node:
                if isinstance(sub, (int, np.integer)) and not isinstance(sub, bool):
                    seen.append(int(sub))
                    refs.append(Child(True, int(sub)))
                else:
                    refs.append(None)
                    queue.append((sub, node_id))
            children.append(refs)  # type: ignore[arg-type]
        # resolve internal ids: they were enqueued in order, so count forward
        next_id = 2
        for refs in children:
            for pos, ref in enumerate(refs):
                if ref is None:
                    refs[pos] = Child(False, next_id)  # type: ignore[index]
                    next_id += 1
        n = len(seen)
        if sorted(seen) != list(range(n)):
            raise TopologyError(f"leaves must be a permutation of 0..{n - 1}, got {sorted(seen)}")
        leaf_parent = [None] * n
        for node_id, refs in enumerate(children, start=1):
            for axis, ref in enumerate(refs, start=1):
                if ref.is_leaf:
                    leaf_parent[ref.index] = (node_id, axis)
        return cls(
            n_qubits=n,
            children=tuple(tuple(refs) for refs in children),  # type: ignore[misc]
            parents=tuple(parents),
            leaf_parent=tuple(leaf_parent),  # type: ignore[arg-type]
        )

    @property
    def n_nodes(self) -> int:
        return len(self.children)

    @property
    def node_ids(self) -> range:
        return range(1, self.n_nodes + 1)

    def child(self, node: int, axis: int) -> Child:
        return self.children[node - 1][axis - 1]

    def parent(self, node: int) -> Optional[int]:
        return self.parents[node - 1]

    def axis_in_parent(self, node: int) -> int:
        """Axis (1 or 2) of the parent tensor that points at ``node``."""
        p = self.parent(node)
        if p is None:
            raise TopologyError("the root has no parent")
        for axis in (1, 2):
            ref = self.child(p, axis)
            if not ref.is_leaf and ref.index == node:
                return axis
        raise TopologyError(f"node {node} not found under its parent")  # pragma: no cover

    def check_node(self, node: int) -> None:
        if not (isinstance(node, (int, np.integer)) and 1 <= node <= self.n_nodes):
            raise TopologyError(f"unknown node id {node!r}")

    def representative(self, ref: Union[Child, int]) -> int:
        """Leftmost leaf qubit below ``ref`` (a node id or a Child)."""
        if isinstance(ref, Child):
            if ref.is_leaf:
                return ref.index
            node = ref.index
        else:
            node = ref
        while True:
            left = self.child(node, 1)
            if left.is_leaf:
                return left.index
            node = left.index

    def gate_qubits(self, node: int) -> Tuple[int, int]:
        return (self.representative(self.child(node, 1)), self.representative(self.child(node, 2)))

    def path_to_root(self, node: int) -> List[int]:
        out = [node]
        while self.parent(out[-1]) is not None:
            out.append(self.parent(out[-1]))  # type: ignore[arg-type]
        return out

    def path(self, start: int, stop: int) -> List[int]:
        """Node ids on the unique tree path from ``start`` to ``stop`` inclusive."""
        up = self.path_to_root(start)
        down = self.path_to_root(stop)
        common = set(up) & set(down)
        i = next(k for k, v in enumerate(up) if v in common)
        j = down.index(up[i])
        return up[: i + 1] + down[:j][::-1]

    def subtree_qubits(self, ref: Union[Child, int]) -> List[int]:
        """Leaf qubits below ``ref`` in left-to-right order."""
        if isinstance(ref, Child):
            if ref.is_leaf:
                return [ref.index]
            ref = ref.index
        return self.subtree_qubits(self.child(ref, 1)) + self.subtree_qubits(self.child(ref, 2))

    def to_nested(self, node: int = 1) -> Nested:
        out = []
        for ref in self.children[node - 1]:
            out.append(ref.index if ref.is_leaf else self.to_nested(ref.index))
        return tuple(out)  # type: ignore[return-value]

    def dfs_edges(self) -> Iterator[Tuple[int, int]]:
        """Internal ``(parent, axis)`` edges in preorder DFS from the root."""
        stack = [1]
        while stack:
            node = stack.pop()
            refs = self.children[node - 1]
            for axis in (1, 2):
                if not refs[axis - 1].is_leaf:
                    yield node, axis
            for axis in (2, 1):
                if not refs[axis - 1].is_leaf:
                    stack.append(refs[axis - 1].index)

    def is_caterpillar(self) -> bool:
        return all(any(ref.is_leaf for ref in refs) for refs in self.children)


def balanced_topology(n_qubits: int, order: Optional[Sequence[int]] = None) -> TreeTopology:
    """Balanced tree by recursive halving of the qubit ordering."""
    order = list(range(n_qubits)) if order is None else [int(q) for q in order]
    if len(order) < 2:
        raise TopologyError("need at least two qubits")

    def build(qs):
        if len(qs) == 1:
            return qs[0]
        mid = (len(qs) + 1) // 2
        return (build(qs[:mid]), build(qs[mid:]))

    return TreeTopology.from_nested(build(order))


def caterpillar_topology(n_qubits: int, order: Optional[Sequence[int]] = None) -> TreeTopology:
    """Chain-shaped tree; each internal node has one leaf child (an MPS)."""
    order = list(range(n_qubits)) if order is None else [int(q) for q in order]
    if len(order) < 2:
        raise TopologyError("need at least two qubits")
    nested: Nested = (order[-2], order[-1])
    for q in reversed(order[:-2]):
        nested = (q, nested)
    return TreeTopology.from_nested(nested)


def lattice_bisection_topology(rows: int, cols: int) -> TreeTopology:
    """Tree that recursively bisects a row-major ``rows x cols`` lattice.

    The longer side is cut first; on ties the columns are split, so a 4x4
    lattice becomes two 4x2 halves, then 2x2 blocks.
    """
    if rows * cols < 2:
        raise TopologyError("need at least two sites")

    def build(r0, r1, c0, c1):
        nr, nc = r1 - r0, c1 - c0
        if nr * nc == 1:
            return r0 * cols + c0
        if nc >= nr:
            mid = c0 + (nc + 1) // 2
            return (build(r0, r1, c0, mid), build(r0, r1, mid, c1))
        mid = r0 + (nr + 1) // 2
        return (build(r0, mid, c0, c1), build(mid, r1, c0, c1))

    return TreeTopology.from_nested(build(0, rows, 0, cols))


TOPOLOGY_KINDS = ("balanced-tree", "mps-caterpillar")


def build_topology(
    kind: str,
    n_qubits: int,
    lattice: Optional[Tuple[int, int]] = None,
    order: Optional[Sequence[int]] = None,
) -> TreeTopology:
    """Topology by name.

    ``balanced-tree`` bisects the lattice when ``lattice=(rows, cols)`` is
    given and no custom ``order`` is set; otherwise it halves the qubit
    ordering recursively. ``mps-caterpillar`` follows ``order`` (default
    row-major).
    """
    if kind == "balanced-tree":
        if lattice is not None and order is None:
            rows, cols = lattice
            if rows * cols != n_qubits:
                raise TopologyError(f"lattice {rows}x{cols} does not have {n_qubits} sites")
            return lattice_bisection_topology(rows, cols)
        return balanced_topology(n_qubits, order)
    if kind == "mps-caterpillar":
        return caterpillar_topology(n_qubits, order)
    raise TopologyError(f"unknown topology kind {kind!r}; choose from {TOPOLOGY_KINDS}")


@dataclass(frozen=True)
class TreeTensorNetwork:
    """Tree tensor network state.

    ``tensors`` maps node id to an array with axes (parent, left, right).
    ``chi_max`` is the configured bond cap; ``center`` the canonical center.
    Treat instances as immutable: operations return new networks.
    """

    topology: TreeTopology
    tensors: Dict[int, np.ndarray]
    center: int = 1
    chi_max: Optional[int] = None

    @property
    def n_qubits(self) -> int:
        return self.topology.n_qubits

    def bond_dim(self, node: int, axis: int) -> int:
        return self.tensors[node].shape[axis]

    def bond_dims(self) -> Dict[Tuple[int, int], int]:
        """Internal bond dimensions keyed by ``(parent, axis)``."""
        return {(p, a): self.tensors[p].shape[a] for p, a in self.topology.dfs_edges()}

    def max_bond(self) -> int:
        dims = self.bond_dims()
        return max(dims.values()) if dims else 1

    def norm(self) -> float:
        if canonical_deviation(self) < 1e-8:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(abs(inner_product(self, self))))

    def copy(self) -> "TreeTensorNetwork":
        return replace(self, tensors={k: v.copy() for k, v in self.tensors.items()})

    def validate(self) -> None:
        top = self.topology
        if set(self.tensors) != set(top.node_ids):
            raise TopologyError("tensor ids do not match the topology nodes")
        if self.tensors[1].shape[0] != 1:
            raise TopologyError("root parent bond must have dimension 1")
        for node in top.node_ids:
            t = self.tensors[node]
            if t.ndim != 3:
                raise TopologyError(f"node {node} tensor must have 3 axes, got {t.ndim}")
            for axis in (1, 2):
                ref = top.child(node, axis)
                if ref.is_leaf:
                    if t.shape[axis] != 2:
                        raise TopologyError(f"physical leg of qubit {ref.index} must have dimension 2")
                elif self.tensors[ref.index].shape[0] != t.shape[axis]:
                    raise TopologyError(f"bond ({node}, {ref.index}) dimensions disagree")


# -- canonical form helpers --------------------------------------------------


def _facing_axis(top: TreeTopology, node: int, target: int) -> int:
    """Axis of ``node`` that points towards ``target`` (0 = parent)."""
    if node == target:
        raise ValueError("node and target coincide")
    step = top.path(node, target)[1]
    if step == top.parent(node):
        return 0
    for axis in (1, 2):
        ref = top.child(node, axis)
        if not ref.is_leaf and ref.index == step:
            return axis
    raise TopologyError("path step is not adjacent")  # pragma: no cover


def canonical_deviation(ttn: TreeTensorNetwork, center: Optional[int] = None) -> float:
    """Largest deviation from the isometry condition over non-center nodes."""
    center = ttn.center if center is None else center
    worst = 0.0
    for node in ttn.topology.node_ids:
        if node == center:
            continue
        axis = _facing_axis(ttn.topology, node, center)
        t = ttn.tensors[node]
        m = np.moveaxis(t, axis, -1).reshape(-1, t.shape[axis])
        dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])))
        worst = max(worst, float(dev))
    return worst


def _absorb_into(t: np.ndarray, axis: int, r: np.ndarray) -> np.ndarray:
    """Replace leg ``axis`` of ``t`` by ``r @ leg``."""
    return np.moveaxis(np.tensordot(r, t, axes=([1], [axis])), 0, axis)


def _move_center_step(tensors: Dict[int, np.ndarray], top: TreeTopology, src: int, dst: int) -> None:
    axis_src = _facing_axis(top, src, dst)
    axis_dst = _facing_axis(top, dst, src)
    t = tensors[src]
    m = np.moveaxis(t, axis_src, -1)
    shp = m.shape
    q, r = np.linalg.qr(m.reshape(-1, shp[-1]))
    tensors[src] = np.moveaxis(q.reshape(shp[:-1] + (q.shape[1],)), -1, axis_src)
    tensors[dst] = _absorb_into(tensors[dst], axis_dst, r)


def set_center(ttn: TreeTensorNetwork, target: int) -> TreeTensorNetwork:
    """Move the canonical center to ``target`` with QR steps along the tree path."""
    top = ttn.topology
    top.check_node(target)
    if target == ttn.center:
        return ttn
    tensors = dict(ttn.tensors)
    walk = top.path(ttn.center, target)
    for src, dst in zip(walk[:-1], walk[1:]):
        _move_center_step(tensors, top, src, dst)
    return replace(ttn, tensors=tensors, center=target)


def canonicalize(ttn: TreeTensorNetwork, center: int = 1) -> TreeTensorNetwork:
    """Bring an arbitrary network into canonical form about ``center``."""
    top = ttn.topology
    tensors = dict(ttn.tensors)
    # leaves-up QR sweep towards the root, then walk down
    for node in reversed(list(top.node_ids)):
        if node == 1:
            continue
        _move_center_step(tensors, top, node, top.parent(node))  # type: ignore[arg-type]
    out = replace(ttn, tensors=tensors, center=1)
    return set_center(out, center)


def normalize(ttn: TreeTensorNetwork) -> TreeTensorNetwork:
    """Rescale a canonical network to unit norm."""
    nrm = np.linalg.norm(ttn.tensors[ttn.center])
    if nrm == 0.0:
        raise PreconditionError("cannot normalise a zero state")
    tensors = dict(ttn.tensors)
    tensors[ttn.center] = tensors[ttn.center] / nrm
    return replace(ttn, tensors=tensors)


def truncate_to_chi(ttn: TreeTensorNetwork, chi: int, rel_tol: float = 0.0) -> TreeTensorNetwork:
    """Cap every internal bond at ``chi`` and renormalise.

    Edges are visited in preorder DFS. Before each edge is cut the center is
    moved onto the parent end, so the local SVD sees the exact Schmidt
    spectrum of that bond. The center is returned to where it started.
    """
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    out, _ = _truncate(ttn, chi, rel_tol)
    return out


def _truncate(ttn: TreeTensorNetwork, chi: int, rel_tol: float = 0.0) -> Tuple[TreeTensorNetwork, float]:
    top = ttn.topology
    discarded_weight = 0.0
    cur = ttn
    for node, axis in top.dfs_edges():
        if cur.tensors[node].shape[axis] <= chi and rel_tol == 0.0:
            continue
        cur = set_center(cur, node)
        tensors = dict(cur.tensors)
        split = svd_split(tensors[node], [a for a in range(3) if a != axis], max_bond=chi, rel_tol=rel_tol)
        discarded_weight += split.discarded_norm**2
        left = split.left * split.singular_values
        tensors[node] = np.moveaxis(left, -1, axis)
        child = top.child(node, axis).index
        tensors[child] = _absorb_into(tensors[child], 0, split.right.reshape(split.bond_dim, -1))
        cur = replace(cur, tensors=tensors)
    cur = normalize(set_center(cur, ttn.center))
    cap = chi if cur.chi_max is None else min(chi, cur.chi_max)
    return replace(cur, chi_max=cap), discarded_weight


# -- construction ------------------------------------------------------------


def _check_dense(n: int) -> None:
    if n > MAX_DENSE_QUBITS:
        raise ResourceError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")


def from_statevector(
    psi: np.ndarray,
    topology: TreeTopology,
    chi_max: Optional[int] = None,
    rel_tol: float = 1e-13,
    return_weight: bool = False,
):
    """Build a canonical TTN from a dense state by SVDs from the leaves upward.

    Singular values below ``rel_tol`` (relative to the largest) are treated
    as numerical zeros and dropped. The result has its center at the root
    and unit norm. With
    ``return_weight=True`` also return the total discarded squared singular
    weight ``w``; the infidelity to ``psi`` is then ``1 - sqrt(1 - w)``.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    n = topology.n_qubits
    _check_dense(n)
    if psi.size != 2**n:
        raise TopologyError(f"state has {psi.size} amplitudes, topology expects 2**{n}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-10:
        raise PreconditionError(f"state is not normalised (norm {nrm:.12f})")

    # labels of the remainder's axes: ('q', qubit) or ('n', node)
    rest = psi.reshape((2,) * n)
    labels: List[Tuple[str, int]] = [("q", q) for q in range(n)]
    tensors: Dict[int, np.ndarray] = {}
    weight = 0.0
    for node in reversed(list(topology.node_ids)):
        refs = topology.children[node - 1]
        child_labels = [("q", r.index) if r.is_leaf else ("n", r.index) for r in refs]
        pos = [labels.index(lab) for lab in child_labels]
        if node == 1:
            others = [ax for ax in range(rest.ndim) if ax not in pos]
            assert not others
            tensors[1] = np.transpose(rest, pos)[None, :, :]
            break
        split = svd_split(rest, pos, max_bond=chi_max, rel_tol=rel_tol)
        weight += split.discarded_norm**2
        tensors[node] = np.moveaxis(split.left, -1, 0)
        rest = split.right * split.singular_values.reshape((-1,) + (1,) * (split.right.ndim - 1))
        labels = [("n", node)] + [lab for i, lab in enumerate(labels) if i not in pos]
    ttn = normalize(TreeTensorNetwork(topology, tensors, center=1, chi_max=chi_max))
    if return_weight:
        return ttn, weight
    return ttn


def product_ttn(bits: Sequence[int], topology: TreeTopology) -> TreeTensorNetwork:
    """Bond-dimension-1 network for the computational basis state ``bits``."""
    bits = [int(b) for b in bits]
    if len(bits) != topology.n_qubits:
        raise TopologyError("bit string length does not match the topology")
    tensors = {}
    for node in topology.node_ids:
        dims = [2 if topology.child(node, a).is_leaf else 1 for a in (1, 2)]
        t = np.zeros((1, *dims), dtype=complex)
        idx = [0, 0, 0]
        for a in (1, 2):
            ref = topology.child(node, a)
            if ref.is_leaf:
                idx[a] = bits[ref.index]
        t[tuple(idx)] = 1.0
        tensors[node] = t
    return TreeTensorNetwork(topology, tensors, center=1, chi_max=1)


def random_ttn(
    topology: TreeTopology,
    chi: int,
    rng: Optional[np.random.Generator] = None,
    real: bool = False,
) -> TreeTensorNetwork:
    """Random canonical network with bonds of at most ``chi`` (center at root)."""
    rng = np.random.default_rng(rng)
    n_below: Dict[int, int] = {}
    for node in reversed(list(topology.node_ids)):
        n_below[node] = len(topology.subtree_qubits(node))

    def bond(node):
        # never exceed the dimension of either side of the cut
        n_side = n_below[node]
        return int(min(chi, 2**n_side, 2 ** (topology.n_qubits - n_side)))

    tensors = {}
    for node in topology.node_ids:
        dims = [1 if node == 1 else bond(node)]
        for a in (1, 2):
            ref = topology.child(node, a)
            dims.append(2 if ref.is_leaf else bond(ref.index))
        t = rng.standard_normal(dims)
        if not real:
            t = t + 1j * rng.standard_normal(dims)
        tensors[node] = t.astype(complex)
    ttn = TreeTensorNetwork(topology, tensors, center=1, chi_max=chi)
    return normalize(canonicalize(ttn, 1))


# -- contraction -------------------------------------------------------------


def to_statevector(ttn: TreeTensorNetwork) -> np.ndarray:
    """Contract the network into a dense vector (qubit 0 most significant)."""
    top = ttn.topology
    _check_dense(top.n_qubits)

    eye2 = np.eye(2, dtype=complex)

    def sub(ref):
        # tensor with axes (bond, *qubits) and the qubit list
        if ref.is_leaf:
            return eye2, [ref.index]
        t = ttn.tensors[ref.index]
        left, ql = sub(top.child(ref.index, 1))
        right, qr = sub(top.child(ref.index, 2))
        t = np.tensordot(t, left, axes=([1], [0]))
        t = np.tensordot(t, right, axes=([1], [0]))
        return t, ql + qr

    t, qubits = sub(Child(False, 1))
    t = t[0]
    perm = np.argsort(qubits)
    return np.transpose(t, perm).reshape(-1)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, TreeTensorNetwork):
        return to_statevector(x)
    return np.asarray(x, dtype=complex).ravel()


def _n_qubits(x) -> int:
    if isinstance(x, TreeTensorNetwork):
        return x.n_qubits
    size = np.asarray(x).size
    n = int(round(np.log2(size))) if size > 0 else -1
    if n < 0 or 2**n != size:
        raise TopologyError(f"state length {size} is not a power of two")
    return n


def inner_product(a, b) -> complex:
    """``<a|b>`` for networks and/or dense vectors.

    Two networks with the same topology are contracted leaf-to-root without
    forming state vectors.
    """
    na, nb = _n_qubits(a), _n_qubits(b)
    if na != nb:
        raise TopologyError(f"qubit counts differ ({na} vs {nb})")
    if (
        isinstance(a, TreeTensorNetwork)
        and isinstance(b, TreeTensorNetwork)
        and a.topology.children == b.topology.children
    ):
        return _tree_overlap(a, b)
    return complex(np.vdot(_as_vector(a), _as_vector(b)))


def _tree_overlap(a: TreeTensorNetwork, b: TreeTensorNetwork) -> complex:
    top = a.topology
    env: Dict[int, np.ndarray] = {}
    for node in reversed(list(top.node_ids)):
        ta, tb = a.tensors[node], b.tensors[node]
        # contract left and right child environments into b's tensor
        x = tb
        for axis in (1, 2):
            ref = top.child(node, axis)
            if not ref.is_leaf:
                x = _absorb_into(x, axis, env[ref.index])
        env[node] = np.tensordot(ta.conj(), x, axes=([1, 2], [1, 2]))
    return complex(env[1][0, 0])


def infidelity(a, b) -> float:
    """``1 - |<a|b>|`` clamped to [0, 1]."""
    ov = abs(inner_product(a, b))
    return float(min(1.0, max(0.0, 1.0 - ov)))
