"""scikit-learn style wrapper around the embedding pipeline.

``fit`` compresses a target state into a tree tensor network and embeds it
into a tree-wired circuit. ``transform`` runs the fitted circuit backwards
(disentangling states toward ``|0...0>``) and ``inverse_transform`` runs it
forwards.
"""
from __future__ import annotations

from typing import Optional, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import apply_circuit, circuit_state
from .decompose import AUTO, DEFAULT_REL_TOL
from .network import TOPOLOGY_KINDS, TreeTensorNetwork, TreeTopology, build_topology, from_statevector, set_center
from .optimize import METHODS, SweepConfig, embed
from .utils.validation import check_fraction, check_option, check_positive_int, check_state_batch, check_state_vector

__all__ = ["TTNEmbedder"]


class TTNEmbedder(TransformerMixin, BaseEstimator):
    """Embed a quantum state into a shallow circuit of tree-wired two-qubit gates.

    Parameters
    ----------
    method : {"Iter_D", "D_all", "O_all", "Iter_I"}
        Embedding strategy.
    n_layers : int
        Number of gate layers ``K``.
    chi : int
        Bond dimension of the intermediate tree tensor network.
    topology : str or TreeTopology
        ``"balanced-tree"``, ``"mps-caterpillar"`` or an explicit topology.
    lattice : tuple of int, optional
        ``(rows, cols)`` of a 2-D lattice target; the balanced tree then
        bisects the lattice.
    sweeps, learning_rate, convergence_tol
        Sweep settings, see :class:`~ttnembed.optimize.SweepConfig`.
    chi_cap : int, None or "auto"
        Bond cap while absorbing layers; ``"auto"`` reuses ``chi``.
    rel_tol : float
        Relative singular-value cutoff during absorption.

    Attributes
    ----------
    n_qubits_ : int
    ttn_ : TreeTensorNetwork
        Compressed target that the circuit is fitted to.
    circuit_ : LayeredCircuit
    report_ : EmbedReport
    infidelity_ : float
        Final infidelity of the circuit state against ``ttn_``.
    """

    def __init__(
        self,
        method: str = "Iter_D",
        n_layers: int = 3,
        chi: int = 8,
        topology: Union[str, TreeTopology] = "balanced-tree",
        lattice: Optional[Tuple[int, int]] = None,
        sweeps: int = 100,
        learning_rate: float = 0.65,
        convergence_tol: float = 1e-12,
        chi_cap: Union[int, None, str] = AUTO,
        rel_tol: float = DEFAULT_REL_TOL,
    ):
        self.method = method
        self.n_layers = n_layers
        self.chi = chi
        self.topology = topology
        self.lattice = lattice
        self.sweeps = sweeps
        self.learning_rate = learning_rate
        self.convergence_tol = convergence_tol
        self.chi_cap = chi_cap
        self.rel_tol = rel_tol

    def _check_params(self):
        check_option("method", self.method, METHODS)
        check_positive_int("n_layers", self.n_layers)
        check_positive_int("chi", self.chi)
        check_positive_int("sweeps", self.sweeps)
        check_fraction("learning_rate", self.learning_rate)
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be non-negative")
        if self.chi_cap not in (None, AUTO):
            check_positive_int("chi_cap", self.chi_cap)
        if not isinstance(self.topology, TreeTopology):
            check_option("topology", self.topology, TOPOLOGY_KINDS)

    def _resolve_topology(self, n: int) -> TreeTopology:
        if isinstance(self.topology, TreeTopology):
            if self.topology.n_qubits != n:
                raise ValueError(f"topology has {self.topology.n_qubits} leaves, target has {n} qubits")
            return self.topology
        return build_topology(self.topology, n, lattice=self.lattice)

    def fit(self, X, y=None):
        """Fit the circuit to one target state.

        ``X`` is a normalised state vector (1-D or a single row) or a
        :class:`TreeTensorNetwork`; ``y`` is ignored.
        """
        self._check_params()
        reference = None
        if isinstance(X, TreeTensorNetwork):
            psi0 = X if X.center == 1 else set_center(X, 1)
        else:
            reference = check_state_vector(X)
            top = self._resolve_topology(int(reference.size).bit_length() - 1)
            psi0 = from_statevector(reference, top, chi_max=self.chi)
        cfg = SweepConfig(self.sweeps, self.learning_rate, self.convergence_tol)
        report = embed(
            psi0,
            self.method,
            self.n_layers,
            cfg,
            chi_cap=self.chi_cap,
            rel_tol=self.rel_tol,
            reference=reference,
            keep_circuits=False,
        )
        self.n_qubits_ = psi0.n_qubits
        self.ttn_ = psi0
        self.report_ = report
        self.circuit_ = report.circuit
        self.infidelity_ = report.final_infidelities()[self.n_layers]
        return self

    def transform(self, X):
        """Apply the circuit adjoint to each row of ``X``."""
        check_is_fitted(self, "circuit_")
        batch = check_state_batch(X, n_qubits=self.n_qubits_)
        out = np.stack([apply_circuit(self.circuit_, row, adjoint=True) for row in batch])
        return out[0] if np.asarray(X).ndim == 1 else out

    def inverse_transform(self, X):
        """Apply the circuit to each row of ``X``."""
        check_is_fitted(self, "circuit_")
        batch = check_state_batch(X, n_qubits=self.n_qubits_)
        out = np.stack([apply_circuit(self.circuit_, row) for row in batch])
        return out[0] if np.asarray(X).ndim == 1 else out

    def prepare_state(self) -> np.ndarray:
        """State the fitted circuit prepares from ``|0...0>``."""
        check_is_fitted(self, "circuit_")
        return circuit_state(self.circuit_)

    def score(self, X, y=None) -> float:
        """Mean fidelity ``|<x|circuit|0>|`` over the rows of ``X``."""
        batch = check_state_batch(X, n_qubits=getattr(self, "n_qubits_", None))
        prepared = self.prepare_state()
        return float(np.mean(np.abs(batch.conj() @ prepared)))
