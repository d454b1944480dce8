import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttnembed.exceptions import PreconditionError, ResourceError, TopologyError
from ttnembed.network import (
    TreeTopology,
    _truncate,
    balanced_topology,
    build_topology,
    canonical_deviation,
    canonicalize,
    caterpillar_topology,
    from_statevector,
    infidelity,
    inner_product,
    lattice_bisection_topology,
    product_ttn,
    random_ttn,
    set_center,
    to_statevector,
    truncate_to_chi,
)
from ttnembed.states import bas_state

from conftest import ghz, overlap_infidelity, random_state


# -- topology ------------------------------------------------------------------


def test_balanced_topology_structure():
    top = balanced_topology(8)
    assert top.n_nodes == 7
    assert top.to_nested() == (((0, 1), (2, 3)), ((4, 5), (6, 7)))
    assert top.gate_qubits(1) == (0, 4)
    assert top.gate_qubits(2) == (0, 2)
    assert top.gate_qubits(7) == (6, 7)


def test_bfs_numbering():
    top = balanced_topology(8)
    # node i's internal children carry larger ids than i, and ids grow level by level
    for node in top.node_ids:
        for axis in (1, 2):
            ref = top.child(node, axis)
            if not ref.is_leaf:
                assert ref.index > node
                assert top.parent(ref.index) == node
    assert top.parent(1) is None


def test_caterpillar_is_mps():
    top = caterpillar_topology(5)
    assert top.is_caterpillar()
    assert top.to_nested() == (0, (1, (2, (3, 4))))
    assert not balanced_topology(8).is_caterpillar()


def test_lattice_bisection_4x4_blocks():
    top = lattice_bisection_topology(4, 4)
    half_a, half_b = top.subtree_qubits(top.child(1, 1)), top.subtree_qubits(top.child(1, 2))
    assert sorted(half_a) == [0, 1, 4, 5, 8, 9, 12, 13]
    assert sorted(half_b) == [2, 3, 6, 7, 10, 11, 14, 15]
    blocks = sorted(sorted(top.subtree_qubits(n)) for n in (4, 5, 6, 7))
    assert blocks == [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]


def test_build_topology_kinds():
    assert build_topology("balanced-tree", 16, lattice=(4, 4)) == lattice_bisection_topology(4, 4)
    assert build_topology("balanced-tree", 8) == balanced_topology(8)
    assert build_topology("mps-caterpillar", 6).is_caterpillar()
    with pytest.raises(TopologyError):
        build_topology("ring", 4)
    with pytest.raises(TopologyError):
        build_topology("balanced-tree", 8, lattice=(2, 3))


def test_from_nested_rejects_bad_leaves():
    with pytest.raises(TopologyError):
        TreeTopology.from_nested(((0, 1), (1, 2)))
    with pytest.raises(TopologyError):
        TreeTopology.from_nested(((0, 1), (2, 5)))


def _random_nested(draw_order, shape):
    it = iter(draw_order)

    def build(s):
        if s is None:
            return next(it)
        return (build(s[0]), build(s[1]))

    return build(shape)


tree_shapes = st.recursive(st.none(), lambda inner: st.tuples(inner, inner), max_leaves=10).filter(
    lambda s: s is not None
)


def _count(s):
    return 1 if s is None else _count(s[0]) + _count(s[1])


@settings(max_examples=40, deadline=None)
@given(shape=tree_shapes, data=st.data())
def test_topology_invariants(shape, data):
    n = _count(shape)
    order = data.draw(st.permutations(list(range(n))))
    top = TreeTopology.from_nested(_random_nested(order, shape))
    assert top.n_nodes == n - 1
    leaves = sorted(q for node in top.node_ids for ref in top.children[node - 1] if ref.is_leaf for q in [ref.index])
    assert leaves == list(range(n))
    assert top.to_nested() == _random_nested(order, shape)
    for node in top.node_ids:
        qa, qb = top.gate_qubits(node)
        assert qa != qb
        assert top.path_to_root(node)[-1] == 1


# -- construction and contraction -----------------------------------------------


def test_product_state_chi_one():
    bits = [0, 1, 0, 1]
    psi = np.zeros(16, dtype=complex)
    psi[0b0101] = 1.0
    for top in (balanced_topology(4), caterpillar_topology(4)):
        ttn = from_statevector(psi, top, chi_max=1)
        assert ttn.max_bond() == 1
        assert infidelity(ttn, psi) < 1e-14
        assert infidelity(product_ttn(bits, top), psi) < 1e-14


def test_zero_product_gives_e0():
    ttn = product_ttn([0] * 5, balanced_topology(5))
    vec = to_statevector(ttn)
    assert vec[0] == 1.0 and np.count_nonzero(vec) == 1


def test_ghz_exact_at_chi_two():
    psi = ghz(4)
    # every tree bipartition of GHZ has Schmidt rank 2
    for cut in range(1, 4):
        s = np.linalg.svd(psi.reshape(2**cut, -1), compute_uv=False)
        assert np.count_nonzero(s > 1e-12) == 2
    ttn = from_statevector(psi, balanced_topology(4), chi_max=2)
    assert infidelity(ttn, psi) < 1e-12
    assert ttn.max_bond() == 2


def test_roundtrip_random_state(rng):
    psi = random_state(7, rng)
    ttn = from_statevector(psi, balanced_topology(7))
    assert abs(np.vdot(to_statevector(ttn), psi)) > 1 - 1e-12
    assert canonical_deviation(ttn) < 1e-8
    assert abs(ttn.norm() - 1) < 1e-12


def test_bas_truncation_weight_matches_overlap():
    psi = bas_state(4, 4)
    for top in (lattice_bisection_topology(4, 4), balanced_topology(16), caterpillar_topology(16)):
        ttn, weight = from_statevector(psi, top, chi_max=8, return_weight=True)
        assert ttn.max_bond() <= 8
        dense = overlap_infidelity(psi, to_statevector(ttn))
        assert abs(dense - (1 - np.sqrt(1 - weight))) < 1e-10


def test_from_statevector_errors():
    top = balanced_topology(4)
    with pytest.raises(PreconditionError):
        from_statevector(np.ones(16), top)
    with pytest.raises(TopologyError):
        from_statevector(ghz(3), top)


def test_set_center_round_trip(rng):
    ttn = random_ttn(balanced_topology(8), 4, rng)
    before = to_statevector(ttn)
    leaf_parent = ttn.topology.leaf_parent[5][0]
    moved = set_center(ttn, leaf_parent)
    assert moved.center == leaf_parent
    assert canonical_deviation(moved) < 1e-8
    back = set_center(moved, 1)
    assert overlap_infidelity(before, to_statevector(moved)) < 1e-10
    assert overlap_infidelity(before, to_statevector(back)) < 1e-10
    assert set_center(ttn, 1) is ttn or set_center(ttn, 1).tensors == ttn.tensors


def test_set_center_unknown_node(rng):
    ttn = random_ttn(balanced_topology(4), 2, rng)
    with pytest.raises(TopologyError):
        set_center(ttn, 9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), target=st.integers(1, 7), chi=st.integers(1, 6))
def test_set_center_and_truncate_properties(seed, target, chi):
    rng = np.random.default_rng(seed)
    ttn = random_ttn(balanced_topology(8), 4, rng)
    vec = to_statevector(ttn)
    moved = set_center(ttn, target)
    assert abs(abs(np.vdot(vec, to_statevector(moved))) - 1) < 1e-10
    assert canonical_deviation(moved) < 1e-8
    out, weight = _truncate(ttn, chi)
    assert 0.0 <= weight <= 1.0 + 1e-10
    for edge, dim in out.bond_dims().items():
        assert dim <= min(chi, ttn.bond_dims()[edge])
    assert abs(np.linalg.norm(to_statevector(out)) - 1) < 1e-10
    if chi >= ttn.max_bond():
        assert abs(abs(np.vdot(vec, to_statevector(out))) - 1) < 1e-10


def test_truncate_ghz_to_one():
    ttn = from_statevector(ghz(4), balanced_topology(4), chi_max=2)
    out = truncate_to_chi(ttn, 1)
    assert out.max_bond() == 1
    assert abs(infidelity(out, ghz(4)) - (1 - 1 / np.sqrt(2))) < 1e-12


def test_truncate_noop_when_chi_large(rng):
    ttn = random_ttn(caterpillar_topology(6), 3, rng)
    out = truncate_to_chi(ttn, 8)
    assert infidelity(ttn, out) < 1e-12
    with pytest.raises(ValueError):
        truncate_to_chi(ttn, 0)


def test_truncate_bas_dense_oracle():
    psi = bas_state(4, 4)
    ttn = from_statevector(psi, lattice_bisection_topology(4, 4), chi_max=8)
    small, weight = _truncate(ttn, 2)
    assert small.max_bond() <= 2
    assert canonical_deviation(small) < 1e-8
    vec = to_statevector(ttn)
    dense = overlap_infidelity(vec, to_statevector(small))
    assert abs(dense - infidelity(ttn, small)) < 1e-10
    # sequential per-bond truncation: 1 - sqrt(1 - w) bounds from below
    assert dense >= 1 - np.sqrt(1 - weight) - 1e-10


def test_inner_product_matches_dense(rng):
    top = balanced_topology(8)
    a, b = random_ttn(top, 3, rng), random_ttn(top, 4, rng)
    dense = np.vdot(to_statevector(a), to_statevector(b))
    assert abs(inner_product(a, b) - dense) < 1e-10
    assert abs(inner_product(a, a) - 1) < 1e-12


def test_inner_product_orthogonal_basis_states():
    top = balanced_topology(4)
    assert abs(inner_product(product_ttn([0, 0, 1, 0], top), product_ttn([0, 1, 1, 0], top))) < 1e-15


def test_caterpillar_inner_product_chain_oracle(rng):
    top = caterpillar_topology(7)
    a, b = random_ttn(top, 3, rng), random_ttn(top, 3, rng)
    # transfer-matrix contraction along the chain; the last node holds two leaves
    env = np.ones((1, 1), dtype=complex)
    for node in range(1, 7):
        ta, tb = a.tensors[node], b.tensors[node]
        if node < 6:
            env = np.einsum("xy,xpr,ypt->rt", env, ta.conj(), tb)
        else:
            val = np.einsum("xy,xpr,ypr->", env, ta.conj(), tb)
    assert abs(inner_product(a, b) - val) < 1e-12


def test_infidelity_examples(rng):
    psi = random_state(3, rng)
    assert infidelity(psi, psi) < 1e-14
    e0, e1 = np.eye(8)[0], np.eye(8)[1]
    assert infidelity(e0, e1) == 1.0
    assert abs(infidelity(e0, 0.8 * e0 + 0.6 * e1) - 0.2) < 1e-12
    with pytest.raises(TopologyError):
        inner_product(np.eye(8)[0], np.eye(16)[0])


def test_dense_limit():
    top = caterpillar_topology(25)
    with pytest.raises(ResourceError):
        to_statevector(product_ttn([0] * 25, top))


def test_canonicalize_moves_center(rng):
    ttn = random_ttn(balanced_topology(6), 3, rng)
    out = canonicalize(ttn, center=3)
    assert out.center == 3 and canonical_deviation(out) < 1e-8
    assert infidelity(ttn, out) < 1e-10
