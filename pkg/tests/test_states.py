import numpy as np
import pytest
import scipy.sparse as sp

from ttnembed.exceptions import ResourceError
from ttnembed.states import (
    LatticeSpec,
    bas_patterns,
    bas_state,
    ground_state,
    heisenberg_ground_state,
    heisenberg_hamiltonian,
    lattice_bonds,
    sz_sector,
)

SX = np.array([[0, 1], [1, 0]]) / 2
SY = np.array([[0, -1j], [1j, 0]]) / 2
SZ = np.array([[1, 0], [0, -1]]) / 2


def _site_op(op, site, n):
    mats = [np.eye(2)] * n
    mats[site] = op
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def _dense_heisenberg(spec):
    # term-by-term construction from Pauli products
    n = spec.n_sites
    nn, nnn = lattice_bonds(spec)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for bonds, j in ((nn, spec.j1), (nnn, spec.j2)):
        for a, b in bonds:
            for op in (SX, SY, SZ):
                h += j * _site_op(op, a, n) @ _site_op(op, b, n)
    return h


def _total_sz(n):
    return sum(_site_op(SZ, s, n) for s in range(n))


def test_bas_1x1():
    assert np.allclose(bas_state(1, 1), [1 / np.sqrt(2)] * 2)


def test_bas_2x2_patterns():
    psi = bas_state(2, 2)
    nonzero = sorted(format(i, "04b") for i in np.flatnonzero(np.abs(psi) > 0))
    assert nonzero == sorted(["0000", "1100", "0011", "1010", "0101", "1111"])
    assert np.allclose(psi[np.abs(psi) > 0], 1 / np.sqrt(6))


def test_bas_enumeration_oracle():
    for rows, cols in [(2, 3), (3, 3), (4, 4)]:
        # brute force: keep images whose rows are all constant or columns all constant
        expected = 0
        for idx in range(2 ** (rows * cols)):
            img = np.array([(idx >> (rows * cols - 1 - s)) & 1 for s in range(rows * cols)]).reshape(rows, cols)
            if np.all(img == img[:, :1]) or np.all(img == img[:1, :]):
                expected += 1
        psi = bas_state(rows, cols)
        assert np.count_nonzero(psi) == expected == 2**rows + 2**cols - 2
        assert abs(np.linalg.norm(psi) - 1) < 1e-14
        assert len(bas_patterns(rows, cols)) == expected


def test_bas_size_limit():
    with pytest.raises(ResourceError):
        bas_state(5, 5)


def test_two_site_chain_spectrum():
    h = heisenberg_hamiltonian(LatticeSpec(1, 2)).toarray()
    assert np.allclose(np.linalg.eigvalsh(h), [-0.75, 0.25, 0.25, 0.25])
    gs = ground_state(heisenberg_hamiltonian(LatticeSpec(1, 2)))
    assert abs(gs.energy + 0.75) < 1e-12
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert abs(abs(np.vdot(singlet, gs.psi)) - 1) < 1e-12


def test_hermitian_and_sz_conserving():
    spec = LatticeSpec(2, 2, j2=0.5)
    h = heisenberg_hamiltonian(spec).toarray()
    assert np.max(np.abs(h - h.conj().T)) < 1e-12
    sz = _total_sz(4)
    assert np.max(np.abs(h @ sz - sz @ h)) < 1e-12


@pytest.mark.parametrize("spec", [LatticeSpec(2, 3, j2=0.5), LatticeSpec(3, 3, "periodic", 1.0, 0.3)])
def test_matches_dense_construction(spec, rng):
    h = heisenberg_hamiltonian(spec).toarray()
    assert np.max(np.abs(h - _dense_heisenberg(spec))) < 1e-12


def test_4x4_matvec_against_term_oracle(rng):
    spec = LatticeSpec(4, 4, j2=0.5)
    h = heisenberg_hamiltonian(spec)
    n = 16
    nn, nnn = lattice_bonds(spec)
    assert len(nn) == 24 and len(nnn) == 18
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    # apply each S_a . S_b on the reshaped vector
    t = v.reshape((2,) * n)
    out = np.zeros_like(t)
    for bonds, j in ((nn, spec.j1), (nnn, spec.j2)):
        for a, b in bonds:
            for op in (SX, SY, SZ):
                w = np.moveaxis(np.tensordot(op, t, axes=([1], [a])), 0, a)
                w = np.moveaxis(np.tensordot(op, w, axes=([1], [b])), 0, b)
                out += j * w
    assert np.max(np.abs(h @ v - out.reshape(-1))) < 1e-10


def test_sector_restriction_matches_full():
    spec = LatticeSpec(2, 3, j2=0.5)
    full = heisenberg_hamiltonian(spec).toarray()
    basis = sz_sector(6, 3)
    block = heisenberg_hamiltonian(spec, n_up=3).toarray()
    assert np.allclose(block, full[np.ix_(basis, basis)])


def test_four_site_ring():
    spec = LatticeSpec(1, 4, boundary="periodic")
    h = heisenberg_hamiltonian(spec).toarray()
    assert abs(np.linalg.eigvalsh(h)[0] + 2.0) < 1e-12
    assert abs(heisenberg_ground_state(spec).energy + 2.0) < 1e-10


def test_4x4_ground_state_certificate(rng):
    spec = LatticeSpec(4, 4, j2=0.5)
    gs = heisenberg_ground_state(spec)
    h = heisenberg_hamiltonian(spec)
    assert gs.residual < 1e-8
    assert np.linalg.norm(h @ gs.psi - gs.energy * gs.psi) < 1e-8
    assert abs(np.linalg.norm(gs.psi) - 1) < 1e-12
    for _ in range(100):
        v = rng.standard_normal(2**16) + 1j * rng.standard_normal(2**16)
        v /= np.linalg.norm(v)
        assert gs.energy <= np.real(np.vdot(v, h @ v)) + 1e-10
    print(f"4x4 J2/J1=0.5 open: E0 = {gs.energy:.8f}")


def test_degenerate_ground_space_flagged():
    h = sp.diags([0.0, 0.0, 1.0])
    gs = ground_state(h)
    assert gs.degenerate
    assert abs(gs.energy) < 1e-14


def test_lattice_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(0, 3)
    with pytest.raises(ValueError):
        LatticeSpec(2, 2, boundary="twisted")
