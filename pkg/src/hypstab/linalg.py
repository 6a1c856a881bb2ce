"""Small dense matrix primitives.

Matrices are plain numpy arrays; :func:`as_matrix` is the single validation
gate (2-D, finite entries).  Sizes are tiny (n <= ~10), so every routine
favours robustness and reproducibility over speed.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import (
    ComplexSpectrum,
    NonConvergence,
    NotDiagonalizable,
    NotSymmetric,
    SingularMatrix,
    ZeroEigenvalue,
)

SINGULAR_RTOL = 1e-12
EIG_IMAG_TOL = 1e-9
EIG_ZERO_TOL = 1e-9
EIG_RESIDUAL_TOL = 1e-9
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


def as_matrix(m, *, square=False, complex_ok=False, name="matrix"):
    """Return `m` as a finite 2-D float (or complex) array."""
    dtype = complex if complex_ok and np.iscomplexobj(m) else float
    try:
        a = np.array(m, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name}: not a numeric matrix ({exc})") from None
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"{name}: expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: entries must be finite")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got shape {a.shape}")
    return a


def invert(m) -> np.ndarray:
    """Inverse via LU with partial pivoting.

    Raises SingularMatrix when a pivot falls below ``1e-12`` times the
    largest row norm of the input.
    """
    a = as_matrix(m, square=True)
    scale = np.max(np.linalg.norm(a, axis=1))
    if scale == 0.0:
        raise SingularMatrix("zero matrix is singular")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < SINGULAR_RTOL * scale:
        raise SingularMatrix(
            f"pivot {np.min(pivots):.3e} below {SINGULAR_RTOL:g} x row norm {scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), np.eye(a.shape[0]), check_finite=False)


def _normalize_columns(v: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column becomes exactly +1
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    return v / pivots


def eig_real(m):
    """Eigen-decomposition of a strictly hyperbolic matrix.

    Returns
    -------
    lam : ndarray, shape (n,)
        Real eigenvalues sorted strictly decreasing.
    T : ndarray, shape (n, n)
        Eigenvectors as columns, each scaled so that its largest-magnitude
        entry equals +1.
    """
    a = as_matrix(m, square=True)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigen-solve failed: {exc}") from None
    bad = np.abs(np.imag(w)) > EIG_IMAG_TOL
    if np.any(bad):
        raise ComplexSpectrum(f"complex eigenvalue {w[bad][0]:.6g}")
    w = np.real(w)
    v = np.real(v)
    small = np.abs(w) < EIG_ZERO_TOL
    if np.any(small):
        raise ZeroEigenvalue(f"eigenvalue {w[small][0]:.3e} is numerically zero")
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = _normalize_columns(v[:, order])
    if w.size > 1:
        gaps = -np.diff(w)
        if np.min(gaps) < EIG_ZERO_TOL * max(1.0, np.max(np.abs(w))):
            j = int(np.argmin(gaps))
            raise NotDiagonalizable(f"repeated eigenvalue {w[j]:.6g}")
    scale = max(1.0, float(np.max(np.abs(a))))
    res = np.linalg.norm(a @ v - v * w, axis=0)
    tol = EIG_RESIDUAL_TOL * scale * np.linalg.norm(v, axis=0)
    if np.any(res > tol):
        j = int(np.argmax(res - tol))
        raise NotDiagonalizable(f"eigenvector residual {res[j]:.3e} for eigenvalue {w[j]:.6g}")
    return w, v


def operator_norm_2(m) -> float:
    """Largest singular value, as sqrt of the top eigenvalue of m^T m."""
    a = np.asarray(m)
    g = a.conj().T @ a
    top = np.linalg.eigvalsh(g)[-1]
    return float(np.sqrt(max(top, 0.0)))


def _radius_2x2(a: np.ndarray) -> np.ndarray:
    tr = a[..., 0, 0] + a[..., 1, 1]
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    disc = np.sqrt((tr * tr - 4.0 * det).astype(complex))
    return np.maximum(np.abs(tr + disc), np.abs(tr - disc)) / 2.0


def spectral_radius(m) -> float:
    """max |lambda| over the eigenvalues of a square (possibly complex) matrix."""
    a = as_matrix(m, square=True, complex_ok=True)
    n = a.shape[0]
    if n == 1:
        return float(abs(a[0, 0]))
    if n == 2:
        return float(_radius_2x2(a))
    try:
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from None


def spectral_radius_batch(stack: np.ndarray) -> np.ndarray:
    """Spectral radii of a stack of square matrices, shape (..., n, n)."""
    stack = np.asarray(stack)
    n = stack.shape[-1]
    if n == 1:
        return np.abs(stack[..., 0, 0])
    if n == 2:
        return _radius_2x2(stack)
    return np.max(np.abs(np.linalg.eigvals(stack)), axis=-1)


def min_symmetric_eigenvalue(m) -> float:
    a = as_matrix(m, square=True)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric(f"asymmetry {np.max(np.abs(a - a.T)):.3e}")
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def is_psd(m, tol: float = PSD_TOL) -> bool:
    return min_symmetric_eigenvalue(m) >= -tol
