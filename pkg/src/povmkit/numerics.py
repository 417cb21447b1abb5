"""Tolerance-aware dense complex Hermitian linear algebra.

All matrices are plain ``numpy.ndarray`` objects of complex dtype.  Functions
here never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import NotHermitian, NotPsd, Singular

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "HermitianEig",
    "op_norm",
    "hermitian_residual",
    "hermitize",
    "eig_hermitian",
    "numerical_rank",
    "is_psd",
    "psd_sqrt",
    "psd_inv_sqrt",
    "is_projection",
    "phase_fix",
    "ket",
    "dyad",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every module.

    ``herm_tol``, ``psd_tol`` and ``id_tol`` are relative slacks (scaled by
    ``1 + ||A||`` or ``sqrt(d)`` where stated), ``rank_rel_tol`` multiplies
    ``max(rows, cols) * sigma_max`` in rank decisions, ``eigval1_tol`` is the
    distance from 1 at which an eigenvalue still counts as 1.
    """

    herm_tol: float = 1e-9
    psd_tol: float = 1e-9
    id_tol: float = 1e-9
    rank_rel_tol: float = float(np.finfo(float).eps)
    eig_tol: float = 1e-9
    eigval1_tol: float = 1e-7

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"tolerance {name} must be a positive finite number, got {value!r}")

    def with_overrides(self, **overrides: float | None) -> "Tolerances":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_TOL = Tolerances()


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray  # ascending, real
    eigenvectors: np.ndarray  # orthonormal columns


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def op_norm(a: np.ndarray) -> float:
    """Operator (spectral) norm; 0 for empty matrices."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_residual(a: np.ndarray) -> float:
    return op_norm(a - a.conj().T)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def dyad(u: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
    """``|u><v|`` (``|u><u|`` when ``v`` is omitted)."""
    v = u if v is None else v
    return np.outer(u, np.conj(v))


def eig_hermitian(a, tol: Tolerances = DEFAULT_TOL) -> HermitianEig:
    """Spectral decomposition of a Hermitian matrix.

    Raises
    ------
    NotHermitian
        If ``||A - A*|| > herm_tol * (1 + ||A||)``.
    """
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian(f"matrix is not square: {a.shape}")
    scale = 1.0 + op_norm(a)
    res = hermitian_residual(a)
    if res > tol.herm_tol * scale:
        raise NotHermitian(f"Hermiticity residual {res:.3e} exceeds {tol.herm_tol * scale:.3e}")
    w, v = np.linalg.eigh(hermitize(a))
    return HermitianEig(w, v)


def numerical_rank(a, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of singular values above ``rank_rel_tol * max(rows, cols) * sigma_max``."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    cutoff = tol.rank_rel_tol * max(a.shape) * s[0]
    return int(np.count_nonzero(s > cutoff))


def is_psd(a, tol: Tolerances = DEFAULT_TOL) -> bool:
    try:
        w = eig_hermitian(a, tol).eigenvalues
    except NotHermitian:
        return False
    smax = float(np.max(np.abs(w))) if w.size else 0.0
    return bool(w.size == 0 or w[0] >= -tol.psd_tol * (1.0 + smax))


def _psd_eig(a, tol: Tolerances) -> HermitianEig:
    w, v = eig_hermitian(a, tol)
    smax = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[0] < -tol.psd_tol * (1.0 + smax):
        raise NotPsd(f"smallest eigenvalue {w[0]:.3e} is below -psd_tol")
    return HermitianEig(np.clip(w, 0.0, None), v)


def psd_sqrt(a, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Positive square root; slightly negative eigenvalues (within psd_tol) are clamped to 0.

    Eigenvalues at rounding level are zeroed too, since the square root
    would otherwise lift ``1e-17`` noise to ``3e-9``.
    """
    w, v = _psd_eig(a, tol)
    if w.size:
        w = np.where(w <= w.size * np.finfo(float).eps * w[-1], 0.0, w)
    return hermitize((v * np.sqrt(w)) @ v.conj().T)


def psd_inv_sqrt(a, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Inverse positive square root of a positive definite matrix.

    Unlike :func:`psd_sqrt` nothing is clamped: an eigenvalue at or below
    ``rank_rel_tol * sigma_max`` raises :class:`Singular`.
    """
    w, v = _psd_eig(a, tol)
    if w.size == 0:
        return np.zeros((0, 0), dtype=complex)
    if w[0] <= tol.rank_rel_tol * w[-1] or w[-1] == 0.0:
        raise Singular(f"smallest eigenvalue {w[0]:.3e} too small to invert (largest {w[-1]:.3e})")
    return hermitize((v / np.sqrt(w)) @ v.conj().T)


def is_projection(a, tol: Tolerances = DEFAULT_TOL) -> bool:
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    bound = tol.herm_tol * (1.0 + op_norm(a))
    return hermitian_residual(a) <= bound and op_norm(a @ a - a) <= bound


def phase_fix(v: np.ndarray, threshold: float = 1e-10) -> np.ndarray:
    """Rotate the global phase so that the first non-negligible entry is real positive."""
    v = np.asarray(v, dtype=complex)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return v.copy()
    idx = int(np.argmax(np.abs(v) > threshold * scale))
    z = v[idx]
    return v * (abs(z) / z)
