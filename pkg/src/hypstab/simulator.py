"""Closed-loop upwind simulation in Riemann coordinates.

Cells are centred at ``x_j = (j + 1/2) dx``.  Each step reads the outgoing
traces from the boundary cells (R+ from the last cell, R- from the first),
maps them through the coupling matrix into ghost cells, and advances every
characteristic component with first-order upwinding; a balance-law source
is added explicitly at the same time level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .boundary import CouplingMatrix
from .errors import InsufficientData
from .riemann import RiemannForm

BLOWUP_LIMIT = 1e12
FIT_FLOOR = 1e-14


@dataclass(frozen=True)
class Profile:
    """Initial value ``c + a sin(f pi x)`` of one physical variable."""

    c: float = 0.0
    a: float = 0.0
    f: float = 1.0

    def __call__(self, x):
        return self.c + self.a * np.sin(self.f * np.pi * x)


@dataclass(frozen=True)
class SimConfig:
    dx: float = 0.01
    cfl_factor: float = 0.75
    t_end: float = 10.0
    sample_stride: int = 1
    initial: Tuple[Profile, ...] = ()
    equilibrium: Optional[Sequence[float]] = None
    fit_window: Tuple[float, float] = (0.3, 1.0)

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if not 0 < self.cfl_factor <= 1:
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError(f"sample_stride must be a positive integer, got {self.sample_stride}")
        lo, hi = self.fit_window
        if not 0 <= lo < hi <= 1:
            raise ValueError(f"fit_window must satisfy 0 <= start < end <= 1, got {self.fit_window}")

    def cells(self, L: float) -> int:
        count = L / self.dx
        nc = int(round(count))
        if nc < 1 or abs(count - nc) > 1e-12 * max(1.0, count):
            raise ValueError(f"dx = {self.dx} does not divide the domain length {L}")
        return nc

    def time_step(self, lam) -> Tuple[float, int]:
        """CFL step ``cfl * dx / max|lambda|``, shortened so t_end is hit exactly."""
        dt = self.cfl_factor * self.dx / float(np.max(np.abs(lam)))
        steps = max(1, math.ceil(self.t_end / dt * (1.0 - 1e-12)))
        return self.t_end / steps, steps


@dataclass(frozen=True)
class DecayFit:
    nu: float
    c_decay: float
    window: Tuple[float, float]
    residual: float


@dataclass(frozen=True)
class SimResult:
    times: np.ndarray
    norms: np.ndarray
    final_state: np.ndarray  # physical deviation Y - Y*, shape (n, cells)
    x: np.ndarray
    dt: float
    decay: Optional[DecayFit] = None
    blew_up: bool = False
    max_abs: np.ndarray = field(default=None, repr=False)


def fit_decay(times, norms, window, norm0=None) -> DecayFit:
    """Least-squares line through ``(t, ln norm)`` on ``window``.

    ``nu`` is minus the slope; ``c_decay = exp(intercept) / norm0`` with
    ``norm0`` defaulting to the first sample.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    t_a, t_b = window
    use = (times >= t_a) & (times <= t_b) & (norms > FIT_FLOOR)
    if np.count_nonzero(use) < 5:
        raise InsufficientData(
            f"{np.count_nonzero(use)} usable samples in window [{t_a:g}, {t_b:g}], need 5"
        )
    t, y = times[use], np.log(norms[use])
    slope, intercept = np.polyfit(t, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * t + intercept)) ** 2)))
    if norm0 is None:
        norm0 = norms[0]
    c_decay = float(np.exp(intercept) / norm0) if norm0 > 0 else float("nan")
    return DecayFit(float(-slope), c_decay, (float(t_a), float(t_b)), residual)


def initial_riemann_state(rf: RiemannForm, cfg: SimConfig, x) -> np.ndarray:
    n = rf.n
    profiles = cfg.initial or tuple(Profile() for _ in range(n))
    if len(profiles) != n:
        raise ValueError(f"{len(profiles)} initial profiles for a system with n={n}")
    eq = np.zeros(n) if cfg.equilibrium is None else np.asarray(cfg.equilibrium, dtype=float)
    y = np.stack([prof(x) for prof in profiles]) - eq[:, None]
    return rf.T_inv @ y


def run(
    rf: RiemannForm,
    K,
    cfg: SimConfig,
    *,
    periodic: bool = False,
    r0: Optional[np.ndarray] = None,
    track_max: bool = False,
) -> SimResult:
    """Integrate the closed loop up to ``cfg.t_end``.

    ``periodic=True`` replaces the boundary feedback with an exact periodic
    wrap (pure transport, used for convergence checks).  ``r0`` overrides
    the initial Riemann state built from ``cfg.initial``.
    """
    Kmat = K.K if isinstance(K, CouplingMatrix) else np.asarray(K, dtype=float)
    n, m = rf.n, rf.m
    nc = cfg.cells(rf.L)
    x = (np.arange(nc) + 0.5) * cfg.dx
    dt, steps = cfg.time_step(rf.lam)
    nu = rf.lam * dt / cfg.dx  # signed Courant numbers
    pos = slice(0, m)
    neg = slice(m, n)
    c_pos = nu[pos][:, None]
    c_neg = -nu[neg][:, None]
    S = rf.S

    R = initial_riemann_state(rf, cfg, x) if r0 is None else np.array(r0, dtype=float)
    padded = np.zeros((n, nc + 2))

    def l2(R):
        y = rf.T @ R
        return math.sqrt(cfg.dx * float(np.sum(y * y)))

    times = [0.0]
    norms = [l2(R)]
    maxima = [np.max(np.abs(R), axis=1)] if track_max else None
    blew_up = False
    for k in range(1, steps + 1):
        padded[:, 1:-1] = R
        if periodic:
            padded[:, 0] = R[:, -1]
            padded[:, -1] = R[:, 0]
        else:
            outgoing = np.concatenate([R[pos, -1], R[neg, 0]])
            incoming = Kmat @ outgoing
            padded[pos, 0] = incoming[:m]
            padded[neg, -1] = incoming[m:]
        new = R.copy()
        if m:
            new[pos] -= c_pos * (padded[pos, 1:-1] - padded[pos, :-2])
        if m < n:
            new[neg] -= c_neg * (padded[neg, 1:-1] - padded[neg, 2:])
        if S is not None:
            new -= dt * (S @ R)
        R = new
        if track_max:
            maxima.append(np.max(np.abs(R), axis=1))
        if not np.all(np.abs(R) < BLOWUP_LIMIT):
            blew_up = True
            times.append(k * dt)
            norms.append(l2(R) if np.all(np.isfinite(R)) else float("inf"))
            break
        if k % cfg.sample_stride == 0 or k == steps:
            times.append(k * dt)
            norms.append(l2(R))

    times = np.array(times)
    norms = np.array(norms)
    decay = None
    if not blew_up:
        t_end = times[-1]
        window = (cfg.fit_window[0] * t_end, cfg.fit_window[1] * t_end)
        try:
            decay = fit_decay(times, norms, window)
        except InsufficientData:
            decay = None
    return SimResult(
        times=times,
        norms=norms,
        final_state=rf.T @ R,
        x=x,
        dt=dt,
        decay=decay,
        blew_up=blew_up,
        max_abs=None if maxima is None else np.array(maxima),
    )
