"""Physical boundary feedback and its Riemann-coordinate coupling matrix.

The physical boundary law is

    A Y(t,0) + B Y(t,L) = K0 Y(t,0) + KL Y(t,L)

where K0/KL have zero columns for unobservable variables.  Substituting
``Y = T R`` and solving for the incoming traces gives

    (R+(t,0), R-(t,L)) = K (R+(t,L), R-(t,0)),   K = C^{-1} D.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import IllPosedBoundary, MaskViolation, NotApplicable, SingularMatrix
from .linalg import as_matrix, invert
from .riemann import RiemannForm

RANK_RTOL = 1e-9
RANK_ONE_ATOL = 1e-10
ANTI_DIAG_TOL = 1e-12


def _mask(obs, n, name):
    if obs is None:
        return (True,) * n
    obs = tuple(bool(o) for o in obs)
    if len(obs) != n:
        raise ValueError(f"{name}: expected {n} observability flags, got {len(obs)}")
    return obs


@dataclass(frozen=True)
class BoundaryControl:
    """Physical constraints ``A``, ``B`` and observability-restricted controls.

    ``strict=True`` makes :func:`enforce_observability` reject nonzero
    control entries for unobservable variables instead of zeroing them.
    """

    A: np.ndarray
    B: np.ndarray
    K0: Optional[np.ndarray] = None
    KL: Optional[np.ndarray] = None
    obs0: Optional[tuple] = None
    obsL: Optional[tuple] = None
    strict: bool = True

    def __post_init__(self):
        A = as_matrix(self.A, square=True, name="A")
        n = A.shape[0]
        fields = {"A": A}
        for key in ("B", "K0", "KL"):
            val = getattr(self, key)
            mat = np.zeros((n, n)) if val is None else as_matrix(val, square=True, name=key)
            if mat.shape != (n, n):
                raise ValueError(f"{key} has shape {mat.shape}, expected {(n, n)}")
            fields[key] = mat
        fields["obs0"] = _mask(self.obs0, n, "obs0")
        fields["obsL"] = _mask(self.obsL, n, "obsL")
        for key, val in fields.items():
            object.__setattr__(self, key, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def is_masked(self) -> bool:
        hidden0 = ~np.array(self.obs0)
        hiddenL = ~np.array(self.obsL)
        return not (np.any(self.K0[:, hidden0]) or np.any(self.KL[:, hiddenL]))


def enforce_observability(bc: BoundaryControl) -> BoundaryControl:
    """Zero the control columns of unobservable variables (idempotent)."""
    hidden0 = ~np.array(bc.obs0)
    hiddenL = ~np.array(bc.obsL)
    if bc.strict:
        for name, mat, hidden in (("K0", bc.K0, hidden0), ("KL", bc.KL, hiddenL)):
            cols = [int(j) for j in np.flatnonzero(hidden) if np.any(mat[:, j])]
            if cols:
                raise MaskViolation(f"{name} has nonzero entries in unobservable column(s) {cols}")
        return bc
    K0 = bc.K0.copy()
    KL = bc.KL.copy()
    K0[:, hidden0] = 0.0
    KL[:, hiddenL] = 0.0
    return replace(bc, K0=K0, KL=KL)


@dataclass(frozen=True)
class CouplingMatrix:
    """Riemann-coordinate feedback matrix with its detected structure.

    Rows are ordered (R+ at x=0) over (R- at x=L); columns (R+ at x=L)
    over (R- at x=0).  ``structure`` is ``"general"``, ``"rank_one"``
    (``K = u v^T``) or ``"anti_diagonal_2x2"`` (``K = [[0, a], [b, 0]]``).
    """

    K: np.ndarray
    structure: str = "general"
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    a: Optional[float] = None
    b: Optional[float] = None
    m: Optional[int] = None

    @property
    def n(self) -> int:
        return self.K.shape[0]


def detect_structure(K, m=None) -> CouplingMatrix:
    K = as_matrix(K, square=True, name="K")
    n = K.shape[0]
    if n == 2 and abs(K[0, 0]) <= ANTI_DIAG_TOL and abs(K[1, 1]) <= ANTI_DIAG_TOL:
        return CouplingMatrix(K, "anti_diagonal_2x2", a=float(K[0, 1]), b=float(K[1, 0]), m=m)
    U, s, Vt = np.linalg.svd(K)
    if s[0] == 0.0:
        zero = np.zeros(n)
        return CouplingMatrix(K, "rank_one", u=zero, v=zero.copy(), m=m)
    if n == 1 or s[1] < RANK_RTOL * s[0]:
        u = U[:, 0] * s[0]
        v = Vt[0].copy()
        if np.max(np.abs(K - np.outer(u, v))) <= RANK_ONE_ATOL * max(1.0, s[0]):
            return CouplingMatrix(K, "rank_one", u=u, v=v, m=m)
    return CouplingMatrix(K, "general", m=m)


def coupling_blocks(rf: RiemannForm, bc: BoundaryControl):
    """The matrices ``C`` and ``D`` of the transformed boundary law.

    With ``A' = A - K0`` and ``B' = KL - B`` the boundary law reads
    ``A' T R(0) = B' T R(L)``; splitting ``T`` column-wise into its
    positive-speed part ``T[:, :m]`` and negative-speed part ``T[:, m:]``
    gives ``C = [A' T+, -B' T-]`` and ``D = [B' T+, -A' T-]``.
    """
    m = rf.m
    Tp, Tm = rf.T[:, :m], rf.T[:, m:]
    Ap = bc.A - bc.K0
    Bp = bc.KL - bc.B
    C = np.hstack([Ap @ Tp, -Bp @ Tm])
    D = np.hstack([Bp @ Tp, -Ap @ Tm])
    return C, D


def build_coupling(rf: RiemannForm, bc: BoundaryControl) -> CouplingMatrix:
    if bc.n != rf.n:
        raise ValueError(f"boundary control is {bc.n}x{bc.n}, system has n={rf.n}")
    bc = enforce_observability(bc)
    C, D = coupling_blocks(rf, bc)
    try:
        C_inv = invert(C)
    except SingularMatrix as exc:
        raise IllPosedBoundary(
            f"boundary law cannot be solved for the incoming traces: {exc}"
        ) from None
    return detect_structure(C_inv @ D, m=rf.m)


def rank_one_condition(rf: RiemannForm, bc: BoundaryControl, u, v) -> float:
    """``|v^T T| . |((A - K0) T)^{-1} u|`` for ``KL = u v^T``, all speeds positive.

    Absolute values are taken entrywise before the inner product.  Values
    below one are equivalent to robust exponential stability.
    """
    if rf.m != rf.n:
        raise NotApplicable("rank-one criterion needs all characteristic speeds positive")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.max(np.abs(bc.KL - np.outer(u, v))) > RANK_ONE_ATOL * max(1.0, np.max(np.abs(bc.KL))):
        raise ValueError("KL is not equal to u v^T")
    W = invert((bc.A - bc.K0) @ rf.T)
    return float(np.abs(v @ rf.T) @ np.abs(W @ u))
