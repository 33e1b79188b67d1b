# -*- coding: utf-8 -*-
"""
Matrix Kernel
Dense complex-matrix primitives and spectral solvers used by every cMPS module
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from core.exceptions import DegenerateNullSpace, NoNullVector, ShapeMismatch, SolverFailure

logger = logging.getLogger(__name__)

DEFAULT_NULL_TOL = 1e-8


@dataclass(frozen=True)
class EigPair:
    """Eigenvalue with its unit right vector and optional left vector"""
    value: complex
    right_vector: np.ndarray
    left_vector: Optional[np.ndarray] = None


# ========================= Utils =========================
def as_cmatrix(a) -> np.ndarray:
    """Coerce input to a 2-D complex128 array"""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got array with ndim={m.ndim}")
    return m


def ensure_finite(a: np.ndarray) -> np.ndarray:
    """Raise SolverFailure if any entry is NaN or Inf"""
    if not np.all(np.isfinite(a)):
        raise SolverFailure("non-finite entries in matrix result")
    return a


def require_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {a.shape}")


def vec(rho: np.ndarray) -> np.ndarray:
    """Row-major vectorization |a><b*| -> |a>|b>"""
    return np.ascontiguousarray(rho).reshape(-1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of vec"""
    return np.asarray(v).reshape(dim, dim)


def trace_product(a: np.ndarray, rho: np.ndarray) -> Tuple[float, float]:
    """Return (Re tr(a rho), Im tr(a rho))"""
    t = np.einsum('ij,ji->', a, rho)
    return float(t.real), float(t.imag)


# ==================== Elementary operations ====================
def kron(a, b) -> np.ndarray:
    """Kronecker product: (i*b_rows + k, j*b_cols + l) -> a[i, j] * b[k, l]"""
    return ensure_finite(np.kron(as_cmatrix(a), as_cmatrix(b)))


def adjoint(a) -> np.ndarray:
    """Conjugate transpose"""
    return as_cmatrix(a).conj().T


def commutator(a, b) -> np.ndarray:
    """ab - ba for square matrices of equal shape"""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    require_square(a)
    if a.shape != b.shape:
        raise ShapeMismatch(f"commutator of shapes {a.shape} and {b.shape}")
    return ensure_finite(a @ b - b @ a)


def hermitize(a) -> np.ndarray:
    """(a + a^dagger) / 2"""
    a = as_cmatrix(a)
    require_square(a)
    return 0.5 * (a + a.conj().T)


# ==================== Spectral solvers ====================
def spectrum(a, left: bool = False):
    """
    Full eigen-decomposition sorted by descending real part.
    Returns (values, right_vectors[, left_vectors]) with vectors in columns.
    """
    a = as_cmatrix(a)
    require_square(a)
    ensure_finite(a)
    try:
        if left:
            values, vl, vr = scipy.linalg.eig(a, left=True, right=True)
        else:
            values, vr = scipy.linalg.eig(a, right=True)
            vl = None
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverFailure(f"eigen-decomposition failed: {e}") from e

    if not np.all(np.isfinite(values)):
        raise SolverFailure("eigen-decomposition returned non-finite eigenvalues")

    order = np.lexsort((values.imag, -values.real))
    values = values[order]
    vr = vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0, keepdims=True)
    if vl is not None:
        vl = vl[:, order]
        return values, vr, vl
    return values, vr


def eig_full(a, left: bool = False) -> List[EigPair]:
    """All eigenpairs, eigenvalues sorted by descending real part"""
    if left:
        values, vr, vl = spectrum(a, left=True)
        return [EigPair(complex(values[i]), vr[:, i:i + 1], vl[:, i:i + 1].conj().T)
                for i in range(len(values))]
    values, vr = spectrum(a)
    return [EigPair(complex(values[i]), vr[:, i:i + 1]) for i in range(len(values))]


def null_threshold(a: np.ndarray, tol: float) -> float:
    """Absolute threshold tol * max(||a||_1, 1)"""
    return tol * max(float(np.linalg.norm(a, 1)), 1.0)


def select_null(values: np.ndarray, vectors: np.ndarray, threshold: float) -> EigPair:
    """Pick the unique eigenvector whose eigenvalue lies below threshold in modulus"""
    moduli = np.abs(values)
    below = np.flatnonzero(moduli < threshold)
    if len(below) == 0:
        raise NoNullVector(float(moduli.min()), threshold)
    if len(below) > 1:
        raise DegenerateNullSpace(len(below), threshold)
    i = int(below[0])
    v = vectors[:, i:i + 1]
    return EigPair(complex(values[i]), v / np.linalg.norm(v))


def null_right(a, tol: float = DEFAULT_NULL_TOL) -> EigPair:
    """
    Right eigenvector of the eigenvalue of smallest modulus, unit 2-norm.
    The returned EigPair reports the eigenvalue actually used.
    """
    a = as_cmatrix(a)
    values, vr = spectrum(a)
    return select_null(values, vr, null_threshold(a, tol))
