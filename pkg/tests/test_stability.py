import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypstab.boundary import build_coupling, detect_structure
from hypstab.linalg import operator_norm_2
from hypstab.models import DensityFlowParams, SaintVenantParams, density_flow, saint_venant
from hypstab.riemann import to_riemann
from hypstab.stability import (
    BOUNDARY,
    INCONCLUSIVE,
    NOT_ROBUST,
    ROBUST,
    STABLE,
    Budget,
    feasible_ratio_interval,
    find_P,
    frobenius_balance,
    lyapunov_matrix,
    optimal_scaling,
    rho0,
    rho0_numeric,
    rho1,
    robust_verdict,
    verdict_balance,
    verdict_conservation,
)


def _min_eig(S, p):
    return np.linalg.eigvalsh(lyapunov_matrix(S, p))[0]


def test_rho0_examples():
    assert rho0(np.outer([1.0, 1.0], [1.0, 1.0])) == (pytest.approx(2.0), "analytic_rank_one")
    assert rho0([[0.0, 1.0], [4.0, 0.0]]) == (pytest.approx(2.0), "analytic_antidiag")
    assert rho0(np.outer([1.0, 1.0], [1.0, 1.0]), force_numeric=True)[0] == pytest.approx(2.0, abs=1e-8)


def test_rho0_density_flow_flow_only():
    p = DensityFlowParams(1.0, 2.0, k0_12=0.3, kL_22=-0.4, obs0=(False, True), obsL=(False, True))
    sys_, bc = density_flow(p)
    K = build_coupling(to_riemann(sys_), bc)
    assert rho0(K)[0] ** 2 == pytest.approx(1.0, abs=1e-12)


def test_rho1_diagonal():
    K = np.diag([0.3, -0.7, 0.5])
    assert rho1(K)[0] == pytest.approx(0.7, abs=1e-9)
    assert rho0(K)[0] == pytest.approx(0.7, abs=1e-9)


def test_rho1_random_3x3_brackets_rho0(rng):
    for _ in range(10):
        K = rng.normal(size=(3, 3))
        r0, r1 = rho0(K)[0], rho1(K)[0]
        assert r0 <= r1 + 1e-6
        assert abs(r0 - r1) < 1e-3


def test_certificate_consistency(rng):
    K = rng.normal(size=(4, 4))
    value, delta = optimal_scaling(K)
    assert delta[0] == pytest.approx(1.0)
    assert operator_norm_2(K * delta[:, None] / delta[None, :]) == value


def test_rho0_numeric_argmax_reproduces_value(rng):
    K = rng.normal(size=(3, 3))
    value, theta = rho0_numeric(K)
    assert np.max(np.abs(np.linalg.eigvals(np.diag(np.exp(1j * theta)) @ K))) == pytest.approx(value, abs=1e-12)


def test_similarity_invariance(rng):
    for n in (2, 3, 4, 5):
        K = rng.normal(size=(n, n))
        d = np.exp(rng.uniform(-2, 2, n))
        K2 = K * d[:, None] / d[None, :]
        assert rho0(K2)[0] == pytest.approx(rho0(K)[0], abs=1e-6)
        assert rho1(K2)[0] == pytest.approx(rho1(K)[0], abs=1e-6)


def test_frobenius_balance_equivariant(rng):
    K = rng.normal(size=(4, 4))
    s = frobenius_balance(K)
    d = np.exp(rng.uniform(-2, 2, 4))
    s2 = frobenius_balance(K * d[:, None] / d[None, :])
    # balanced matrices coincide
    B1 = K * np.exp(s[:, None] - s[None, :])
    B2 = (K * d[:, None] / d[None, :]) * np.exp(s2[:, None] - s2[None, :])
    np.testing.assert_allclose(B1, B2, rtol=1e-8, atol=1e-12)


def test_homogeneity(rng):
    for n in (3, 4):
        K = rng.normal(size=(n, n))
        r0, r1 = rho0(K)[0], rho1(K)[0]
        for t in (0.25, 0.8):
            assert rho0(t * K)[0] == pytest.approx(t * r0, abs=1e-8)
            assert rho1(t * K)[0] == pytest.approx(t * r1, abs=1e-8)


def test_n6_inequality(rng):
    K = rng.normal(size=(6, 6))
    assert rho0(K)[0] <= rho1(K)[0] + 1e-6


def test_verdict_bands():
    assert robust_verdict(1.0 + 5e-7, 1e-6) == BOUNDARY
    assert robust_verdict(0.9, 1e-6) == ROBUST
    assert robust_verdict(1.1, 1e-6) == NOT_ROBUST


def test_verdict_conservation_zero_and_flow_only():
    rep = verdict_conservation(np.zeros((2, 2)))
    assert (rep.verdict_robust, rep.verdict_exponential) == (ROBUST, STABLE)
    p = DensityFlowParams(1.0, 2.0, obs0=(False, True), obsL=(False, True))
    sys_, bc = density_flow(p)
    rep = verdict_conservation(build_coupling(to_riemann(sys_), bc))
    assert (rep.verdict_robust, rep.verdict_exponential) == (BOUNDARY, INCONCLUSIVE)
    assert not rep.is_stable


def test_verdict_conservation_half():
    rep = verdict_conservation(detect_structure([[0.5, 0.0], [0.2, 0.0]]))
    assert rep.rho0 == pytest.approx(0.5)
    assert rep.verdict_robust == ROBUST


def test_find_P_examples(sv_params):
    np.testing.assert_array_equal(find_P(np.zeros((2, 2))), [1.0, 1.0])
    assert find_P(np.diag([-1.0, 1.0])) is None
    g, d = sv_params.gamma, sv_params.delta
    S = np.array([[g, d], [g, d]])
    p = find_P(S)
    assert p[1] / p[0] == pytest.approx(d / g, rel=1e-9)
    assert _min_eig(S, p) >= -1e-10


def test_find_P_identity_for_zero_S_generic_n():
    np.testing.assert_array_equal(find_P(np.zeros((3, 3))), np.ones(3))


def test_find_P_needs_non_identity_weights():
    # S^T P + P S is PSD only for p2/p1 in a narrow band away from 1
    S = np.array([[1.0, -4.0, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert _min_eig(S, np.ones(3)) < 0
    p = find_P(S)
    assert p is not None
    assert _min_eig(S, p) >= -1e-10
    assert p.min() >= 1e-8 * p.max()


def test_find_P_higher_dimension(rng):
    # diagonal-dominant positive S has a feasible P; a negative diagonal entry never does
    S = np.diag([1.0, 2.0, 3.0]) + 0.1 * rng.normal(size=(3, 3))
    p = find_P(S)
    assert p is not None and _min_eig(S, p) >= -1e-10
    assert find_P(np.diag([1.0, -0.5, 2.0])) is None


def test_feasible_interval_double_root(sv_params):
    g, d = sv_params.gamma, sv_params.delta
    lo, hi = feasible_ratio_interval(np.array([[g, d], [g, d]]))
    assert lo == pytest.approx(d / g, rel=1e-12) and hi == pytest.approx(d / g, rel=1e-12)


def test_verdict_balance_zero_K(sv_params):
    rf = to_riemann(saint_venant(sv_params)[0])
    rep = verdict_balance(np.zeros((2, 2)), rf.S, rf.lam)
    assert rep.verdict_exponential == STABLE
    assert rep.balance_certificate.norm == 0.0


@pytest.mark.parametrize(
    "kL_21, kL_22, verdict",
    [(0.0, 1.75, STABLE), (2.5, 0.0, STABLE), (2.5, 0.5, STABLE), (0.0, 0.0, INCONCLUSIVE)],
)
def test_verdict_balance_saint_venant(kL_21, kL_22, verdict):
    p = SaintVenantParams(2.0, 3.0, kL_21=kL_21, kL_22=kL_22)
    sys_, bc = saint_venant(p)
    rf = to_riemann(sys_)
    rep = verdict_balance(build_coupling(rf, bc), rf.S, rf.lam)
    assert rep.verdict_exponential == verdict
    cert = rep.balance_certificate or rep.balance_attempt
    assert cert.min_eig >= -1e-10
    if rep.balance_certificate is not None:
        assert rep.balance_certificate.norm < 1.0


def test_budget_seed_changes_nothing_for_small_n(rng):
    K = rng.normal(size=(3, 3))
    a = rho1(K, Budget(seed=0))[0]
    b = rho1(K, Budget(seed=7))[0]
    assert a == pytest.approx(b, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_antidiag_numeric_matches_closed_form(a, b):
    K = np.array([[0.0, a], [b, 0.0]])
    want = np.sqrt(abs(a * b))
    assert rho0(K, force_numeric=True)[0] == pytest.approx(want, abs=1e-6)
    assert rho1(K, force_numeric=True)[0] == pytest.approx(want, abs=1e-6)
