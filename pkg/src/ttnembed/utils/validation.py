"""Input checks shared by the estimator and the command-line driver.

scikit-learn's ``check_array`` rejects complex input, so state vectors get
their own complex-aware checks here.
"""
from __future__ import annotations

import numbers
from typing import Iterable, Optional

import numpy as np

from ..exceptions import ShapeError
from ..network import MAX_DENSE_QUBITS


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(name: str, value, allow_zero: bool = True) -> float:
    """Real number in [0, 1] (or (0, 1] with ``allow_zero=False``)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    low_ok = value >= 0.0 if allow_zero else value > 0.0
    if not (low_ok and value <= 1.0) or not np.isfinite(value):
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {interval}, got {value}")
    return value


def check_option(name: str, value, options: Iterable):
    options = tuple(options)
    if value not in options:
        raise ValueError(f"{name} must be one of {options}, got {value!r}")
    return value


def _n_qubits_of(size: int) -> int:
    n = int(size).bit_length() - 1
    if size < 4 or size != 1 << n:
        raise ShapeError(f"state length must be a power of two >= 4, got {size}")
    if n > MAX_DENSE_QUBITS:
        raise ShapeError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
    return n


def check_state_vector(x, normalize: bool = False, atol: float = 1e-8, n_qubits: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a finite complex 1-D state of length ``2**N``.

    A single-row 2-D array is flattened. Without ``normalize`` the norm must
    be 1 within ``atol``.
    """
    arr = np.asarray(x)
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-D state vector, got shape {arr.shape}")
    arr = arr.astype(complex)
    n = _n_qubits_of(arr.size)
    if n_qubits is not None and n != n_qubits:
        raise ShapeError(f"expected {n_qubits} qubits, got {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state vector contains NaN or inf")
    nrm = float(np.linalg.norm(arr))
    if nrm == 0.0:
        raise ValueError("state vector is zero")
    if normalize:
        return arr / nrm
    if abs(nrm - 1.0) > atol:
        raise ValueError(f"state vector is not normalised (norm {nrm:.6g})")
    return arr


def check_state_batch(X, n_qubits: Optional[int] = None, normalize: bool = False) -> np.ndarray:
    """2-D array of states, one per row."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"expected shape (n_samples, 2**N), got {arr.shape}")
    return np.stack([check_state_vector(row, normalize=normalize, n_qubits=n_qubits) for row in arr])
