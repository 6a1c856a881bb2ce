"""Built-in example systems: density-flow (pipe) and linearized Saint-Venant.

Both are 2x2 with one positive and one negative characteristic speed and
local boundary feedback, so their coupling matrices are anti-diagonal and
the stability indices have closed forms, implemented here as oracles for
the generic pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .boundary import BoundaryControl
from .errors import DegenerateDenominator, EmptyRange, Supercritical
from .riemann import HyperbolicSystem

DENOM_TOL = 1e-12


def _ratio(num, den, what):
    if abs(den) < DENOM_TOL:
        raise DegenerateDenominator(f"{what}: denominator {den:.3e} vanishes")
    return num / den


def _controls(n, k0_row, kL_row):
    K0 = np.zeros((n, n))
    KL = np.zeros((n, n))
    K0[0] = k0_row
    KL[1] = kL_row
    return K0, KL


# ---------------------------------------------------------------------------
# density-flow


@dataclass(frozen=True)
class DensityFlowParams:
    """``H_t + Q_x = 0``, ``Q_t + l1 l2 H_x + (l1 - l2) Q_x = 0`` with flux boundaries.

    Controls act on the flux deviation:
    ``Q(0) - Q* = k0_11 (H(0) - H*) + k0_12 (Q(0) - Q*)`` and
    ``Q(L) - Q* = kL_21 (H(L) - H*) + kL_22 (Q(L) - Q*)``.
    Masks are ordered (H, Q).
    """

    lambda1: float
    lambda2: float
    H_star: float = 0.0
    Q_star: float = 0.0
    k0_11: float = 0.0
    k0_12: float = 0.0
    kL_21: float = 0.0
    kL_22: float = 0.0
    obs0: Tuple[bool, bool] = (True, True)
    obsL: Tuple[bool, bool] = (True, True)
    L: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("density-flow speeds lambda1, lambda2 must be positive")

    @property
    def equilibrium(self):
        return np.array([self.H_star, self.Q_star])


def density_flow(p: DensityFlowParams):
    l1, l2 = p.lambda1, p.lambda2
    M = np.array([[0.0, 1.0], [l1 * l2, l1 - l2]])
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [0.0, 1.0]])
    K0, KL = _controls(2, [p.k0_11, p.k0_12], [p.kL_21, p.kL_22])
    bc = BoundaryControl(A, B, K0, KL, p.obs0, p.obsL, strict=p.strict)
    return HyperbolicSystem(M, None, p.L), bc


DENSITY_FLOW_CASES = ("full", "Q_only", "H_only", "H_at_0_only")

# observability masks (H, Q) at x=0 and x=L for each case
DENSITY_FLOW_MASKS = {
    "full": ((True, True), (True, True)),
    "Q_only": ((False, True), (False, True)),
    "H_only": ((True, False), (True, False)),
    "H_at_0_only": ((True, False), (False, False)),
}


def density_flow_rho0_sq(case: str, p: DensityFlowParams) -> float:
    """Closed-form ``rho0(K)^2`` for the four observability cases."""
    l1, l2 = p.lambda1, p.lambda2
    a, b, c, d = p.k0_11, p.k0_12, p.kL_21, p.kL_22
    if case == "full":
        num = (-a + (b - 1.0) * l2) * (c + (d - 1.0) * l1)
        den = (-a + (1.0 - b) * l1) * (c + (1.0 - d) * l2)
        return abs(_ratio(num, den, "full observation"))
    if case == "Q_only":
        _ratio(1.0, (1.0 - b) * l1 * (1.0 - d) * l2, "flux-only observation")
        return 1.0
    if case == "H_only":
        num = (-a - l2) * (c - l1)
        den = (-a + l1) * (c + l2)
        return abs(_ratio(num, den, "depth-only observation"))
    if case == "H_at_0_only":
        num = (-a - l2) * l1
        den = (-a + l1) * l2
        return abs(_ratio(num, den, "depth observed at x=0 only"))
    raise ValueError(f"unknown observability case {case!r}; expected one of {DENSITY_FLOW_CASES}")


# ---------------------------------------------------------------------------
# Saint-Venant


@dataclass(frozen=True)
class SaintVenantParams:
    """Linearized shallow water in a prismatic rectangular channel.

    Discharge is imposed by pumps at both ends, so only local controls
    appear: ``k0_*`` act at x=0, ``kL_*`` at x=L.  Masks are ordered (H, V).
    ``C_f`` is the friction coefficient; the bed slope is derived so the
    uniform state is an equilibrium.
    """

    H_star: float
    V_star: float
    g: float = 9.81
    C_f: float = 0.1
    k0_11: float = 0.0
    k0_12: float = 0.0
    kL_21: float = 0.0
    kL_22: float = 0.0
    obs0: Tuple[bool, bool] = (True, True)
    obsL: Tuple[bool, bool] = (True, True)
    L: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if not (self.H_star > 0 and self.V_star > 0 and self.g > 0 and self.C_f > 0):
            raise ValueError("H_star, V_star, g and C_f must be positive")
        if self.V_star >= math.sqrt(self.g * self.H_star):
            raise Supercritical(
                f"Froude number {self.froude:.4g} >= 1; the linearization needs subcritical flow"
            )

    @property
    def equilibrium(self):
        return np.array([self.H_star, self.V_star])

    @property
    def celerity(self) -> float:
        return math.sqrt(self.g * self.H_star)

    @property
    def froude(self) -> float:
        return self.V_star / math.sqrt(self.g * self.H_star)

    @property
    def S_b(self) -> float:
        return self.C_f * self.V_star**2 / (self.g * self.H_star)

    @property
    def lambdas(self):
        return self.V_star + self.celerity, self.V_star - self.celerity

    @property
    def gamma(self) -> float:
        c = self.C_f * self.V_star**2 / self.H_star
        return c * (1.0 / self.V_star - 1.0 / (2.0 * self.celerity))

    @property
    def delta(self) -> float:
        c = self.C_f * self.V_star**2 / self.H_star
        return c * (1.0 / self.V_star + 1.0 / (2.0 * self.celerity))

    @property
    def lyapunov_weights(self):
        """Diagonal P making S^T P + P S positive semi-definite (rank one)."""
        return np.array([self.gamma, self.delta])

    @property
    def d1(self) -> float:
        return math.sqrt(self.gamma * self.lambdas[0])

    @property
    def d2(self) -> float:
        return math.sqrt(self.delta * abs(self.lambdas[1]))


def saint_venant(p: SaintVenantParams):
    H, V, C = p.H_star, p.V_star, p.C_f
    M = np.array([[V, H], [p.g, V]])
    N = np.array([[0.0, 0.0], [-C * V**2 / H**2, 2.0 * C * V / H]])
    A = np.array([[V, H], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [V, H]])
    K0, KL = _controls(2, [p.k0_11, p.k0_12], [p.kL_21, p.kL_22])
    bc = BoundaryControl(A, B, K0, KL, p.obs0, p.obsL, strict=p.strict)
    return HyperbolicSystem(M, N, p.L), bc


def _sv_terms(p: SaintVenantParams):
    s = math.sqrt(p.H_star / p.g)
    a0 = (p.V_star - p.k0_11) * s
    b0 = p.H_star - p.k0_12
    aL = (p.V_star - p.kL_21) * s
    bL = p.H_star - p.kL_22
    left = abs(_ratio(a0 - b0, a0 + b0, "x=0 boundary term"))
    right = abs(_ratio(aL + bL, aL - bL, "x=L boundary term"))
    return left, right


def saint_venant_condition(p: SaintVenantParams) -> float:
    """``||Delta K Delta^-1||`` in closed form; below one certifies exponential stability."""
    left, right = _sv_terms(p)
    return max(p.d1 / p.d2 * left, p.d2 / p.d1 * right)


@dataclass(frozen=True)
class Interval:
    """Open interval of admissible control values.

    ``lo_sharp``/``hi_sharp`` mark ends where the stability condition
    itself equals one; other ends come from clipping to the control range.
    """

    lo: float
    hi: float
    lo_sharp: bool
    hi_sharp: bool

    def __contains__(self, x) -> bool:
        return self.lo < x < self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _interval(lo, hi, lo_sharp, hi_sharp, floor=0.0) -> Optional[Interval]:
    if lo < floor:
        lo, lo_sharp = floor, False
    if hi <= lo:
        return None
    return Interval(lo, hi, lo_sharp, hi_sharp)


CONTROL_NAMES = ("k0_11", "k0_12", "kL_21", "kL_22")


def saint_venant_ranges(p: SaintVenantParams, fixed: str, value: float) -> List[Interval]:
    """Admissible interval(s) for the partner control when `fixed` is set to `value`.

    Partners: k0_11 <-> k0_12 and kL_21 <-> kL_22.  Velocity-type controls
    live in (0, V*), depth-type ones in (0, H*); a fixed value of zero is
    the restricted-observability case.  Raises EmptyRange when no interval
    survives.
    """
    if fixed not in CONTROL_NAMES:
        raise ValueError(f"unknown control {fixed!r}; expected one of {CONTROL_NAMES}")
    H, V = p.H_star, p.V_star
    s = math.sqrt(H / p.g)
    q = (p.d1 - p.d2) / (p.d1 + p.d2)
    cap = V if fixed in ("k0_11", "kL_21") else H
    if not (0.0 <= value < cap):
        raise ValueError(f"{fixed} = {value} outside its admissible range [0, {cap})")

    out = []
    if fixed == "kL_21":
        a = (V - value) * s
        out.append(_interval(H - q * a, H, True, False))
        out.append(_interval(0.0, H - a / q, False, True))
    elif fixed == "kL_22":
        b = H - value
        out.append(_interval(V - q * b / s, V, True, False))
        out.append(_interval(0.0, V - b / (q * s), False, True))
    elif fixed == "k0_11":
        a = (V - value) * s
        out.append(_interval(H - a / q, H - q * a, True, True))
    else:
        b = H - value
        out.append(_interval(V - b / (q * s), V - q * b / s, True, True))
    out = [iv for iv in out if iv is not None]
    if not out:
        raise EmptyRange(f"no admissible interval for the partner of {fixed} = {value}")
    return out
