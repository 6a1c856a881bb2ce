"""Stability indices of a coupling matrix and the resulting verdicts.

``rho0(K) = max_theta rho(diag(exp(i theta)) K)`` decides robust exponential
stability (necessary and sufficient), ``rho1(K) = inf_Delta ||Delta K Delta^-1||``
gives a sufficient condition for exponential stability.  Numerically the
first is estimated from below (maximization) and the second from above
(minimization), so the two estimates bracket the common value for n <= 5.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .boundary import CouplingMatrix, detect_structure
from .linalg import (
    PSD_TOL,
    min_symmetric_eigenvalue,
    operator_norm_2,
    spectral_radius_batch,
)

ROBUST = "robust_stable"
NOT_ROBUST = "not_robust_stable"
BOUNDARY = "boundary_case"
STABLE = "stable"
INCONCLUSIVE = "inconclusive"

NORM_MARGIN = 1e-9


@dataclass(frozen=True)
class Budget:
    """Search budgets and tolerances for the numeric estimators."""

    rho0_grid: int = 64
    rho0_max_grid: int = 32768
    rho0_seeds: int = 5
    rho0_random: int = 200
    rho1_starts: int = 20
    rho1_span: float = 3.0
    seed: int = 0
    boundary_tol: float = 1e-6


DEFAULT_BUDGET = Budget()


def _as_coupling(K) -> CouplingMatrix:
    if isinstance(K, CouplingMatrix):
        return K
    return detect_structure(K)


def _nelder_mead(fun, x0, step, xatol, fatol, maxfev):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0, x0 + step * np.eye(x0.size)])
    res = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": fatol, "maxfev": maxfev},
    )
    return res.x, float(res.fun)


def _polish(fun, x, fx, step=0.05, rounds=4):
    # restart NM from its own optimum until it stops improving
    for _ in range(rounds):
        x_new, f_new = _nelder_mead(fun, x, step, 1e-11, 1e-14, 500 * x.size)
        if f_new < fx - 1e-15:
            improvement = fx - f_new
            x, fx = x_new, f_new
            if improvement < 1e-14:
                break
        else:
            step *= 0.1
            if step < 1e-9:
                break
    return x, fx


# ---------------------------------------------------------------------------
# rho0


def _phase_radius(K, phases):
    # phases: (N, n-1) free angles, first angle pinned to 0
    N = phases.shape[0]
    z = np.exp(1j * np.hstack([np.zeros((N, 1)), phases]))
    return spectral_radius_batch(z[:, :, None] * K[None, :, :])


def rho0_numeric(K, budget: Budget = DEFAULT_BUDGET):
    """Lower-bound estimate of rho0 and the maximizing phase vector."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n == 1:
        return abs(float(K[0, 0])), np.zeros(1)
    free = n - 1
    if n <= 4:
        per_axis = budget.rho0_grid
        while per_axis ** free > budget.rho0_max_grid:
            per_axis //= 2
        axis = 2.0 * np.pi * np.arange(per_axis) / per_axis
        # real K: theta and -theta give conjugate matrices, so one angle needs only [0, pi]
        half = axis[: per_axis // 2 + 1]
        mesh = np.meshgrid(half, *([axis] * (free - 1)), indexing="ij")
        phases = np.stack([g.ravel() for g in mesh], axis=1)
        step = 2.0 * np.pi / per_axis
    else:
        rng = np.random.default_rng(budget.seed)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(budget.rho0_random, free))
        step = 0.3
    values = _phase_radius(K, phases)
    order = np.argsort(-values, kind="stable")
    best_x, best = phases[order[0]], float(values[order[0]])

    def neg(theta):
        z = np.exp(1j * np.concatenate([[0.0], theta]))
        return -float(spectral_radius_batch(z[:, None] * K))

    for k in order[: budget.rho0_seeds]:
        x, fx = _nelder_mead(neg, phases[k], step, 1e-6, 1e-10, 200 * free)
        if -fx > best:
            best_x, best = x, -fx
    x, fx = _polish(neg, best_x, -best, step=step / 4)
    if -fx > best:
        best_x, best = x, -fx
    return best, np.concatenate([[0.0], best_x])


def rho0(K, budget: Budget = DEFAULT_BUDGET, force_numeric: bool = False):
    """Return ``(value, method)`` with method in analytic_rank_one / analytic_antidiag / numeric."""
    cm = _as_coupling(K)
    if not force_numeric:
        if cm.structure == "rank_one":
            return float(np.abs(cm.v) @ np.abs(cm.u)), "analytic_rank_one"
        if cm.structure == "anti_diagonal_2x2":
            return float(np.sqrt(abs(cm.a * cm.b))), "analytic_antidiag"
    value, _ = rho0_numeric(cm.K, budget)
    return value, "numeric"


# ---------------------------------------------------------------------------
# rho1


def _scaled_norm(K, s):
    return operator_norm_2(K * np.exp(s[:, None] - s[None, :]))


def frobenius_balance(K, sweeps=500, tol=1e-15):
    """Log-scaling ``s`` minimizing the off-diagonal Frobenius norm of e^S K e^-S.

    Osborne iteration.  The result is equivariant under diagonal similarity,
    which makes the downstream search independent of how K was scaled.
    """
    K = np.abs(np.asarray(K, dtype=float))
    n = K.shape[0]
    off = K.copy()
    np.fill_diagonal(off, 0.0)
    s = np.zeros(n)
    for _ in range(sweeps):
        moved = 0.0
        for i in range(n):
            w = np.exp(s - s[i])
            r = np.sqrt(np.sum((off[i] / w) ** 2))  # row i of e^S K e^-S up to e^{s_i}
            c = np.sqrt(np.sum((off[:, i] * w) ** 2))
            if r == 0.0 or c == 0.0:
                continue
            delta = 0.5 * np.log(c / r)
            delta = np.clip(delta, -20.0 - s[i], 20.0 - s[i])
            s[i] += delta
            moved = max(moved, abs(delta))
        if moved < tol:
            break
    return s - s[0]


def optimal_scaling(K, budget: Budget = DEFAULT_BUDGET):
    """Upper-bound estimate of rho1 with its diagonal scaling.

    Returns ``(value, delta)`` where ``delta`` (first entry 1) satisfies
    ``||diag(delta) K diag(delta)^-1||_2 == value``.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n == 1:
        return abs(float(K[0, 0])), np.ones(1)
    s0 = frobenius_balance(K)
    Kb = K * np.exp(s0[:, None] - s0[None, :])

    def f(x):
        return _scaled_norm(Kb, np.concatenate([[0.0], x]))

    free = n - 1
    rng = np.random.default_rng(budget.seed)
    starts = [np.zeros(free)]
    starts += list(rng.uniform(-budget.rho1_span, budget.rho1_span, size=(budget.rho1_starts, free)))
    best_x, best = starts[0], f(starts[0])
    for x0 in starts:
        x, fx = _nelder_mead(f, x0, 0.5, 1e-3, 1e-7, 100 * free)
        if fx < best:
            best_x, best = x, fx
    best_x, best = _polish(f, best_x, best)
    s = s0 + np.concatenate([[0.0], best_x])
    delta = np.exp(s - s[0])
    return operator_norm_2(K * delta[:, None] / delta[None, :]), delta


def rho1(K, budget: Budget = DEFAULT_BUDGET, force_numeric: bool = False):
    """Return ``(value, method)``; analytic cases coincide with :func:`rho0`."""
    cm = _as_coupling(K)
    if not force_numeric and cm.structure in ("rank_one", "anti_diagonal_2x2"):
        return rho0(cm, budget)
    value, _ = optimal_scaling(cm.K, budget)
    return value, "numeric"


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class BalanceCertificate:
    p: np.ndarray
    delta: np.ndarray
    min_eig: float
    norm: float


@dataclass(frozen=True)
class StabilityReport:
    rho0: float
    rho1: float
    method0: str
    method1: str
    verdict_robust: str
    verdict_exponential: str
    balance_certificate: Optional[BalanceCertificate] = None
    balance_attempt: Optional[BalanceCertificate] = field(default=None, repr=False)
    balance_law: bool = False

    @property
    def is_stable(self) -> bool:
        # rho0 ignores the source term, so for balance laws only the Lyapunov test counts
        if self.balance_law:
            return self.verdict_exponential == STABLE
        return self.verdict_exponential == STABLE or self.verdict_robust == ROBUST


def robust_verdict(value: float, tol: float) -> str:
    if abs(value - 1.0) <= tol:
        return BOUNDARY
    return ROBUST if value < 1.0 else NOT_ROBUST


def _indices(K, budget):
    cm = _as_coupling(K)
    r0, m0 = rho0(cm, budget)
    r1, m1 = rho1(cm, budget)
    return cm, r0, m0, r1, m1


def verdict_conservation(K, budget: Budget = DEFAULT_BUDGET) -> StabilityReport:
    _, r0, m0, r1, m1 = _indices(K, budget)
    exp_verdict = STABLE if r1 < 1.0 - NORM_MARGIN else INCONCLUSIVE
    return StabilityReport(r0, r1, m0, m1, robust_verdict(r0, budget.boundary_tol), exp_verdict)


# ---------------------------------------------------------------------------
# balance laws


def lyapunov_matrix(S, p):
    P = np.diag(p)
    return S.T @ P + P @ S


def _min_eig(S, p):
    return min_symmetric_eigenvalue(lyapunov_matrix(S, p))


def _ratio_min_eig(S, r):
    return _min_eig(S, np.array([1.0, r]))


def _golden_max(fun, lo, hi, iters=200):
    """Maximize a unimodal function on [lo, hi]."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a < 1e-15 * max(1.0, abs(a), abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


RATIO_GRID = np.logspace(-4.0, 4.0, 400)


def _ratio_scan(S):
    """Min-eigenvalue of S^T P + P S along the grid P = diag(1, r)."""
    return np.array([_ratio_min_eig(S, r) for r in RATIO_GRID])


def feasible_ratio_interval(S):
    """Exact set of r > 0 with S^T diag(1, r) + diag(1, r) S PSD, as (lo, hi) or None.

    For 2x2 the condition is ``S11 >= 0``, ``S22 >= 0`` and a concave
    quadratic ``q(r) = det >= 0``; a double root is a single admissible ratio.
    """
    (s11, s12), (s21, s22) = S
    scale = max(1.0, float(np.max(np.abs(S))))
    if s11 < -PSD_TOL * scale or s22 < -PSD_TOL * scale:
        return None
    a = -(s21**2)
    b = 4.0 * s11 * s22 - 2.0 * s12 * s21
    c = -(s12**2)
    if a == 0.0:
        if b > 0.0:
            return (-c / b, np.inf)
        return (0.0, np.inf) if c == 0.0 and b == 0.0 else None
    disc = b * b - 4.0 * a * c
    noise = 1e-12 * (b * b + abs(4.0 * a * c))
    if disc < -noise:
        return None
    # a discriminant at round-off level is a double root
    root = np.sqrt(disc) if disc > noise else 0.0
    r1, r2 = sorted([(-b + root) / (2.0 * a), (-b - root) / (2.0 * a)])
    if r2 <= 0.0:
        return None
    return (max(r1, 0.0), r2)


# weights below this fraction of the largest one count as zero (P must be definite)
MIN_WEIGHT_RATIO = 1e-8
LOG_WEIGHT_SPAN = -np.log(MIN_WEIGHT_RATIO)


def _admissible(S, p) -> bool:
    return p.min() >= MIN_WEIGHT_RATIO * p.max() and _min_eig(S, p / p.max()) >= -PSD_TOL


def _ratio_candidates(S):
    """Admissible ratios ``p2/p1``: 1 if feasible, the interval midpoint, then the grid."""
    ratios = []
    if _ratio_min_eig(S, 1.0) >= -PSD_TOL:
        ratios.append(1.0)
    interval = feasible_ratio_interval(S)
    if interval is not None:
        lo, hi = interval
        if np.isfinite(hi):
            mid = 0.5 * (lo + hi) if lo > 0.0 else 0.5 * hi
        else:
            mid = max(2.0 * lo, 1.0)
        if _admissible(S, np.array([1.0, mid])):
            ratios.append(mid)
    vals = _ratio_scan(S)
    ratios += list(RATIO_GRID[vals >= -PSD_TOL])
    return ratios, interval


def find_P(S, seed: int = 0) -> Optional[np.ndarray]:
    """Diagonal entries of a positive P with S^T P + P S positive semi-definite.

    Returns None when the search finds no such P; the Lyapunov test is only
    a sufficient condition, so None means "inconclusive".  Weights are
    kept within a factor 1e8 of each other so P stays numerically definite.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if n == 1:
        return np.ones(1) if S[0, 0] >= -PSD_TOL else None
    if n == 2:
        ratios, _ = _ratio_candidates(S)
        return np.array([1.0, ratios[0]]) if ratios else None
    if _admissible(S, np.ones(n)):
        return np.ones(n)

    rng = np.random.default_rng(seed)
    logs = rng.uniform(-4.0, 4.0, size=(500, n - 1)) * np.log(10.0)
    samples = np.hstack([np.zeros((500, 1)), logs])
    scores = np.empty(500)
    for i, t in enumerate(samples):
        p = np.exp(t)
        scores[i] = _min_eig(S, p / p.max())
        if scores[i] >= -PSD_TOL:
            return p / p.max()

    def weights(x):
        t = np.concatenate([[0.0], x])
        t = np.clip(t, t.max() - LOG_WEIGHT_SPAN, None)
        p = np.exp(t - t.max())
        return p

    def penalty(x):
        return max(0.0, -_min_eig(S, weights(x))) ** 2

    def margin(x):
        return -_min_eig(S, weights(x))

    for k in np.argsort(-scores)[:5]:
        x, _ = _nelder_mead(penalty, samples[k, 1:], 0.5, 1e-12, 1e-30, 2000 * n)
        x, _ = _polish(margin, x, margin(x))
        p = weights(x)
        if _admissible(S, p):
            return p
    return None


def _certificate(K, S, lam, p):
    delta = np.sqrt(p * np.abs(lam))
    norm = operator_norm_2(K * delta[:, None] / delta[None, :])
    return BalanceCertificate(np.asarray(p, float), delta, _min_eig(S, p), norm)


def _alternative_certificates(K, S, lam, seed):
    """Other admissible P when the first one fails the norm test."""
    n = S.shape[0]
    if n == 2:
        ratios, interval = _ratio_candidates(S)
        if interval is not None and ratios:
            # admissible ratios form an interval and the norm is convex in log r
            lo = np.log(max(interval[0], RATIO_GRID[0] * 1e-4))
            hi = np.log(min(interval[1], RATIO_GRID[-1] * 1e4))
            if hi > lo:
                t, _ = _golden_max(
                    lambda t: -_certificate(K, S, lam, np.array([1.0, np.exp(t)])).norm, lo, hi
                )
                ratios.append(float(np.exp(t)))
        for r in ratios:
            yield _certificate(K, S, lam, np.array([1.0, r]))
        return

    def objective(x):
        p = np.exp(np.concatenate([[0.0], x]))
        c = _certificate(K, S, lam, p)
        return c.norm + 1e6 * max(0.0, -c.min_eig / p.max()) ** 2

    p0 = find_P(S, seed)
    if p0 is None:
        return
    x, _ = _nelder_mead(objective, np.log(p0[1:] / p0[0]), 0.5, 1e-10, 1e-14, 4000 * n)
    yield _certificate(K, S, lam, np.exp(np.concatenate([[0.0], x])))


def verdict_balance(K, S, lam, budget: Budget = DEFAULT_BUDGET) -> StabilityReport:
    """Lyapunov test for ``R_t + Lambda R_x + S R = 0`` with boundary coupling K."""
    cm, r0, m0, r1, m1 = _indices(K, budget)
    S = np.asarray(S, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p = find_P(S, budget.seed)
    certificate = attempt = None
    if p is not None:
        attempt = _certificate(cm.K, S, lam, p)
        if attempt.norm >= 1.0 - NORM_MARGIN:
            for alt in _alternative_certificates(cm.K, S, lam, budget.seed):
                if _admissible(S, alt.p) and alt.norm < attempt.norm:
                    attempt = alt
        if attempt.norm < 1.0 - NORM_MARGIN and _admissible(S, attempt.p):
            certificate = attempt
    return StabilityReport(
        r0,
        r1,
        m0,
        m1,
        robust_verdict(r0, budget.boundary_tol),
        STABLE if certificate is not None else INCONCLUSIVE,
        balance_certificate=certificate,
        balance_attempt=attempt,
        balance_law=True,
    )
