"""Target states: bars-and-stripes superposition and J1-J2 Heisenberg ground states.

Sites are numbered row-major and site 0 is the most significant bit of the
basis-state index.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, ResourceError

__all__ = [
    "LatticeSpec",
    "bas_patterns",
    "bas_state",
    "lattice_bonds",
    "heisenberg_hamiltonian",
    "ground_state",
    "heisenberg_ground_state",
    "sz_sector",
    "GroundState",
]

logger = logging.getLogger(__name__)

MAX_SITES = 24


@dataclass(frozen=True)
class LatticeSpec:
    rows: int
    cols: int
    boundary: Literal["open", "periodic"] = "open"
    j1: float = 1.0
    j2: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.rows * self.cols > MAX_SITES:
            raise ResourceError(f"{self.rows}x{self.cols} lattice exceeds {MAX_SITES} sites")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols


def bas_patterns(rows: int, cols: int) -> np.ndarray:
    """Distinct bars-and-stripes images, flattened row-major, sorted."""
    if rows * cols > MAX_SITES:
        raise ResourceError(f"{rows}x{cols} exceeds {MAX_SITES} sites")
    pats = set()
    for bits in itertools.product((0, 1), repeat=rows):
        pats.add(tuple(np.repeat(np.array(bits)[:, None], cols, axis=1).ravel()))
    for bits in itertools.product((0, 1), repeat=cols):
        pats.add(tuple(np.repeat(np.array(bits)[None, :], rows, axis=0).ravel()))
    return np.array(sorted(pats), dtype=np.int64)


def bas_state(rows: int, cols: int) -> np.ndarray:
    """Uniform superposition over the bars-and-stripes patterns."""
    pats = bas_patterns(rows, cols)
    n = rows * cols
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    idx = pats @ weights
    psi = np.zeros(2**n, dtype=complex)
    psi[idx] = 1.0 / np.sqrt(len(pats))
    return psi


def lattice_bonds(spec: LatticeSpec) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    """Nearest-neighbour and diagonal next-nearest-neighbour site pairs."""
    r, c = spec.rows, spec.cols
    periodic = spec.boundary == "periodic"

    def site(i, j):
        if periodic:
            return (i % r) * c + (j % c)
        if 0 <= i < r and 0 <= j < c:
            return i * c + j
        return None

    nn, nnn = set(), set()
    for i in range(r):
        for j in range(c):
            a = site(i, j)
            for di, dj, bucket in ((0, 1, nn), (1, 0, nn), (1, 1, nnn), (1, -1, nnn)):
                b = site(i + di, j + dj)
                if b is None or b == a:
                    continue
                bucket.add((min(a, b), max(a, b)))
    return sorted(nn), sorted(nnn)


def _sz_basis(n: int, n_up: Optional[int]) -> np.ndarray:
    states = np.arange(2**n, dtype=np.int64)
    if n_up is None:
        return states
    pop = np.zeros(states.size, dtype=np.int64)
    for k in range(n):
        pop += (states >> k) & 1
    return states[pop == n_up]


def heisenberg_hamiltonian(spec: LatticeSpec, n_up: Optional[int] = None) -> sp.csr_matrix:
    """Sparse J1-J2 Heisenberg Hamiltonian with S = sigma / 2.

    With ``n_up`` given the operator is restricted to that magnetisation
    sector (basis in increasing index order); otherwise it acts on the full
    ``2**N`` space.
    """
    n = spec.n_sites
    nn, nnn = lattice_bonds(spec)
    couplings = [(a, b, spec.j1) for a, b in nn] + [(a, b, spec.j2) for a, b in nnn]
    couplings = [(a, b, j) for a, b, j in couplings if j != 0.0]

    basis = _sz_basis(n, n_up)
    dim = basis.size
    lookup = None
    if n_up is not None:
        lookup = np.full(2**n, -1, dtype=np.int64)
        lookup[basis] = np.arange(dim)

    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for a, b, j in couplings:
        # site s sits at bit position n-1-s
        ba, bb = n - 1 - a, n - 1 - b
        sa = (basis >> ba) & 1
        sb = (basis >> bb) & 1
        same = sa == sb
        diag += np.where(same, 0.25 * j, -0.25 * j)
        src = np.nonzero(~same)[0]
        flipped = basis[src] ^ ((1 << ba) | (1 << bb))
        dst = flipped if lookup is None else lookup[flipped]
        rows.append(dst)
        cols.append(src)
        vals.append(np.full(src.size, 0.5 * j))
    off = sp.coo_matrix(
        (np.concatenate(vals) if vals else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
        shape=(dim, dim),
    )
    return (sp.diags(diag) + off).tocsr()


@dataclass(frozen=True)
class GroundState:
    energy: float
    psi: np.ndarray
    residual: float
    degenerate: bool
    gap: float


def ground_state(
    h,
    basis: Optional[np.ndarray] = None,
    n_qubits: Optional[int] = None,
    seed: int = 0,
    tol: float = 1e-12,
    maxiter: Optional[int] = None,
    residual_tol: float = 1e-8,
) -> GroundState:
    """Lowest eigenpair of a Hermitian operator via Lanczos.

    ``basis`` maps the operator's rows to full-space basis indices when ``h``
    is a symmetry-sector block; ``n_qubits`` then sets the full space size.
    The returned vector lives in the full space with its largest-magnitude
    amplitude real and positive.
    """
    dim = h.shape[0]
    rng = np.random.default_rng(seed)
    if dim <= 256:
        dense = h.toarray() if sp.issparse(h) else np.asarray(h)
        w, v = np.linalg.eigh(dense)
        energies, vecs = w[:2], v[:, :2]
    else:
        v0 = rng.standard_normal(dim)
        try:
            energies, vecs = spla.eigsh(h, k=2, which="SA", v0=v0, tol=tol, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(energies)
        energies, vecs = energies[order], vecs[:, order]
    e0 = float(energies[0])
    vec = vecs[:, 0].astype(complex)
    res = float(np.linalg.norm(h @ vec - e0 * vec))
    if res > residual_tol:
        raise ConvergenceError(f"ground-state residual {res:.2e} exceeds {residual_tol:.0e}")
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else float("inf")
    degenerate = gap < 1e-8
    if degenerate:
        logger.warning("ground space looks degenerate (gap %.2e); returning one vector from it", gap)

    if basis is None:
        psi = vec
    else:
        if n_qubits is None:
            raise ValueError("n_qubits is required together with basis")
        psi = np.zeros(2**n_qubits, dtype=complex)
        psi[basis] = vec
    k = int(np.argmax(np.abs(psi)))
    psi = psi * (np.conj(psi[k]) / abs(psi[k]))
    psi = psi / np.linalg.norm(psi)
    return GroundState(energy=e0, psi=psi, residual=res, degenerate=degenerate, gap=gap)


def heisenberg_ground_state(spec: LatticeSpec, seed: int = 0, sector: Union[int, None, str] = "auto") -> GroundState:
    """Ground state of the J1-J2 model, searched in the S^z = 0 sector.

    ``sector="auto"`` uses S^z = 0 for an even site count and the full space
    otherwise; pass an up-spin count or ``None`` to override.
    """
    n = spec.n_sites
    if sector == "auto":
        sector = n // 2 if n % 2 == 0 else None
    h = heisenberg_hamiltonian(spec, n_up=sector)  # type: ignore[arg-type]
    basis = None if sector is None else sz_sector(n, sector)  # type: ignore[arg-type]
    return ground_state(h, basis=basis, n_qubits=n, seed=seed)


def sz_sector(n: int, n_up: int) -> np.ndarray:
    """Full-space indices with exactly ``n_up`` up spins, increasing."""
    return _sz_basis(n, n_up)

