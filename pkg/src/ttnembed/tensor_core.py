"""Dense complex tensor kernels.

Tensors are plain ``numpy.ndarray`` objects (C order, complex128). Every
function here is pure: inputs are never modified.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import PreconditionError, ShapeError

__all__ = [
    "SvdSplit",
    "contract",
    "svd_split",
    "complete_isometry_to_unitary",
    "unitary_fractional_power",
    "is_unitary",
]

GS_DEPENDENCE_TOL = 1e-8


def contract(a: np.ndarray, axes_a: Sequence[int], b: np.ndarray, axes_b: Sequence[int]) -> np.ndarray:
    """Contract paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` (original order) followed by
    the free axes of ``b``.
    """
    axes_a = [ax % a.ndim for ax in axes_a]
    axes_b = [ax % b.ndim for ax in axes_b]
    if len(axes_a) != len(axes_b):
        raise ShapeError(f"got {len(axes_a)} axes for a but {len(axes_b)} for b")
    for xa, xb in zip(axes_a, axes_b):
        if a.shape[xa] != b.shape[xb]:
            raise ShapeError(
                f"axis {xa} of a (dim {a.shape[xa]}) does not match "
                f"axis {xb} of b (dim {b.shape[xb]})"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass(frozen=True)
class SvdSplit:
    """Result of :func:`svd_split`.

    ``left`` has the left axes followed by the new bond, ``right`` has the
    new bond followed by the remaining axes. Singular values are not
    absorbed into either factor.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    truncation_error: float
    discarded_norm: float

    @property
    def bond_dim(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return contract(self.left * self.singular_values, [-1], self.right, [0])


def svd_split(
    t: np.ndarray,
    left_axes: Sequence[int],
    max_bond: Optional[int] = None,
    rel_tol: float = 0.0,
) -> SvdSplit:
    """Split ``t`` into two factors across ``left_axes`` | remaining axes.

    Singular values with ``s_j / s_0 < rel_tol`` are dropped first, then the
    kept count is capped at ``max_bond`` (``None`` means unbounded). Values
    below the numerical-rank floor ``max(m, n) * eps * s_0`` are always
    dropped, and at least one singular value is always kept.

    ``truncation_error`` is the discarded weight relative to the full
    Frobenius norm; ``discarded_norm`` is the same quantity unnormalised.
    """
    left_axes = [ax % t.ndim for ax in left_axes]
    if not left_axes or len(set(left_axes)) >= t.ndim:
        raise ValueError("left_axes must be a nonempty proper subset of the tensor axes")
    if len(set(left_axes)) != len(left_axes):
        raise ValueError("left_axes contains duplicates")
    if not 0.0 <= rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in [0, 1), got {rel_tol}")
    if max_bond is not None and max_bond < 1:
        raise ValueError(f"max_bond must be positive, got {max_bond}")

    right_axes = [ax for ax in range(t.ndim) if ax not in left_axes]
    left_shape = [t.shape[ax] for ax in left_axes]
    right_shape = [t.shape[ax] for ax in right_axes]
    mat = np.transpose(t, left_axes + right_axes).reshape(
        int(np.prod(left_shape)), int(np.prod(right_shape))
    )
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = _svd_fallback(mat)

    keep = len(s)
    if s[0] > 0.0:
        floor = max(rel_tol, max(mat.shape) * np.finfo(float).eps)
        keep = max(1, int(np.count_nonzero(s > floor * s[0])))
    if max_bond is not None:
        keep = min(keep, max_bond)

    total = float(np.sqrt(np.sum(s**2)))
    discarded = float(np.sqrt(np.sum(s[keep:] ** 2)))
    rel = discarded / total if total > 0.0 else 0.0
    return SvdSplit(
        left=u[:, :keep].reshape(left_shape + [keep]),
        singular_values=s[:keep].copy(),
        right=vh[:keep].reshape([keep] + right_shape),
        truncation_error=rel,
        discarded_norm=discarded,
    )


def _svd_fallback(mat):
    # gesdd occasionally fails to converge; gesvd is slower but robust
    import scipy.linalg

    return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def is_unitary(w: np.ndarray, atol: float = 1e-8) -> bool:
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return False
    return bool(np.allclose(w.conj().T @ w, np.eye(w.shape[0]), atol=atol, rtol=0.0))


def complete_isometry_to_unitary(v: np.ndarray) -> np.ndarray:
    """Extend a ``d x k`` isometry to a ``d x d`` unitary by Gram-Schmidt.

    The first ``k`` columns of the result are exactly the columns of ``v``.
    The remaining columns are built from the standard basis vectors in index
    order; candidates whose projected norm falls below 1e-8 are skipped.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    d, k = v.shape
    if k > d:
        raise ShapeError(f"isometry has more columns ({k}) than rows ({d})")
    dev = float(np.max(np.abs(v.conj().T @ v - np.eye(k)))) if k else 0.0
    if dev > 1e-8:
        raise PreconditionError(f"columns are not orthonormal (max deviation {dev:.3e})")

    cols = [v[:, j] for j in range(k)]
    for idx in range(d):
        if len(cols) == d:
            break
        cand = np.zeros(d, dtype=complex)
        cand[idx] = 1.0
        # two passes of classical Gram-Schmidt
        for _ in range(2):
            for c in cols:
                cand = cand - c * np.vdot(c, cand)
        nrm = np.linalg.norm(cand)
        if nrm < GS_DEPENDENCE_TOL:
            continue
        cols.append(cand / nrm)
    if len(cols) != d:
        raise PreconditionError("could not complete the isometry to a full basis")
    out = np.stack(cols, axis=1)
    out[:, :k] = v
    return out


def unitary_fractional_power(w: np.ndarray, r: float) -> np.ndarray:
    """Principal-branch power ``w**r`` of a unitary matrix.

    Eigenphases are taken in (-pi, pi]. An eigenvalue sitting exactly at -1
    is on the branch cut; it is mapped to phase +pi, so ``r`` close to zero
    still tends continuously to the identity on every other eigenvector.
    """
    w = np.asarray(w, dtype=complex)
    if not is_unitary(w, atol=1e-8):
        raise PreconditionError("unitary_fractional_power needs a unitary input")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    d = w.shape[0]
    if r == 0.0:
        return np.eye(d, dtype=complex)
    if r == 1.0:
        return w.copy()
    # Schur form of a normal matrix is diagonal with a unitary basis, which
    # stays orthonormal under degenerate eigenvalues (unlike eig).
    import scipy.linalg

    t, z = scipy.linalg.schur(w, output="complex")
    lam = np.diag(t)
    theta = np.angle(lam)
    theta = np.where(theta <= -np.pi, np.pi, theta)
    out = (z * np.exp(1j * r * theta)) @ z.conj().T
    return out
