"""Physical systems and their Riemann (characteristic) coordinates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import as_matrix, eig_real, invert


@dataclass(frozen=True)
class HyperbolicSystem:
    """``Y_t + M Y_x + N Y = 0`` on ``[0, L]``; ``N=None`` is a conservation law."""

    M: np.ndarray
    N: Optional[np.ndarray] = None
    L: float = 1.0

    def __post_init__(self):
        M = as_matrix(self.M, square=True, name="M")
        object.__setattr__(self, "M", M)
        if self.N is not None:
            N = as_matrix(self.N, square=True, name="N")
            if N.shape != M.shape:
                raise ValueError(f"N has shape {N.shape}, expected {M.shape}")
            object.__setattr__(self, "N", N)
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"domain length must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def n(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class RiemannForm:
    lam: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    m: int
    S: Optional[np.ndarray] = None
    L: float = 1.0
    blocks: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def is_balance_law(self) -> bool:
        return self.S is not None


def _blocks(T: np.ndarray, m: int) -> dict:
    return {
        "T11": T[:m, :m],
        "T12": T[:m, m:],
        "T21": T[m:, :m],
        "T22": T[m:, m:],
    }


def riemann_form_from(lam, T, N=None, L=1.0) -> RiemannForm:
    """Assemble a RiemannForm from a given eigen-basis (no eigen-solve)."""
    lam = np.asarray(lam, dtype=float)
    T = as_matrix(T, square=True, name="T")
    T_inv = invert(T)
    m = int(np.sum(lam > 0))
    S = None if N is None else T_inv @ np.asarray(N, dtype=float) @ T
    return RiemannForm(lam=lam, T=T, T_inv=T_inv, m=m, S=S, L=float(L), blocks=_blocks(T, m))


def to_riemann(sys: HyperbolicSystem) -> RiemannForm:
    """Diagonalize ``M`` with eigenvalues sorted descending.

    Errors from the eigen-solve (complex spectrum, zero or repeated speeds)
    propagate unchanged.
    """
    lam, T = eig_real(sys.M)
    return riemann_form_from(lam, T, sys.N, sys.L)


def physical_to_riemann(rf: RiemannForm, y) -> np.ndarray:
    return rf.T_inv @ np.asarray(y, dtype=float)


def riemann_to_physical(rf: RiemannForm, r) -> np.ndarray:
    return rf.T @ np.asarray(r, dtype=float)


def rescale_columns(rf: RiemannForm, scales) -> RiemannForm:
    """Same system with eigenvector columns multiplied by `scales`."""
    scales = np.asarray(scales, dtype=float)
    T = rf.T * scales
    S = None
    if rf.S is not None:
        S = rf.S * (1.0 / scales)[:, None] * scales[None, :]
    return RiemannForm(
        lam=rf.lam, T=T, T_inv=invert(T), m=rf.m, S=S, L=rf.L, blocks=_blocks(T, rf.m)
    )
