import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from oracles import golden_argmin

from varexp.constructions import (
    ConcaveExponents,
    PhiParams,
    SelectionError,
    bracket_constant,
    build_logistic_z0,
    build_phi,
    check_logistic_f,
    coefficient_range,
    concave_cbar,
    lhopital_ratio,
    psi,
    select_k_sublinear,
    select_lambda0_logistic,
    select_lambda_sublinear,
    select_M_concave,
    smallest_power_of_two,
)
from varexp.grid import distance_field, make_grid
from varexp.modular import ExponentSet, luxemburg_norm
from varexp.subsuper import NonlocalProblem, SubSuperPair, verify_pair


def p_var(x):
    return 1.8 + 0.1 * np.sin(np.pi * x)


@pytest.fixture
def g():
    return make_grid(1, (0, 1), 129)


@pytest.fixture
def sublinear(g):
    e = ExponentSet.build(g, p=p_var, beta=0.2, alpha=0.1, q=2.0, r=2.0)
    return NonlocalProblem(g, e, A=lambda x, t: 1 + t + 0 * x[0], f=lambda x, t: np.abs(t) ** 0.2)


# ---------------------------------------------------------------- phi


def test_phi_params_identities(g):
    p = g.sample(p_var)
    for k in (3.0, 17.0, 250.0):
        prm = PhiParams.from_k(k, p)
        assert math.exp(prm.k * prm.sigma) == pytest.approx(2 ** (1 / prm.p_plus), abs=1e-12)
        assert prm.mu == math.exp(-prm.a * prm.k)
        assert prm.delta == pytest.approx(g.inradius / 4)
    # max |p'| = 0.1 pi up to the discrete gradient
    assert prm.a == pytest.approx(0.8 / (1 + 0.1 * np.pi), rel=1e-3)


def test_phi_params_rejections(g):
    p = g.constant(2.0)
    with pytest.raises(ValueError, match="inradius"):
        PhiParams.from_k(10.0, p, delta=0.2)
    with pytest.raises(ValueError, match="sigma"):
        PhiParams.from_k(0.5, p)  # sigma = ln2/1 > delta


def test_phi_examples():
    g = make_grid(1, (0, 1), 101)
    p = g.constant(2.0)
    k = math.log(2) / (2 * 0.05)  # puts sigma on the node x = 0.05
    prm = PhiParams.from_k(k, p)
    phi = build_phi(prm, g, p).values
    assert phi[0] == phi[-1] == 0.0
    assert phi[5] == pytest.approx(math.sqrt(2) - 1, abs=1e-7)
    d = distance_field(g).values
    plateau = phi[d >= 2 * prm.delta]
    assert np.ptp(plateau) == 0.0


def test_phi_middle_branch_matches_quadrature():
    g = make_grid(1, (0, 1), 65)
    p = g.sample(lambda x: 1.6 + 0.3 * x)
    prm = PhiParams.from_k(20.0, p)
    m, s, dl, k = prm.exponent, prm.sigma, prm.delta, prm.k
    for d in np.linspace(s, 2 * dl, 9):
        val, _ = quad(lambda t: k * math.exp(k * s) * ((2 * dl - t) / (2 * dl - s)) ** m, s, d,
                      epsabs=1e-13, epsrel=1e-13)
        assert prm.profile(d) == pytest.approx(math.expm1(k * s) + val, abs=1e-10)


def test_phi_continuity():
    g = make_grid(1, (0, 1), 65)
    prm = PhiParams.from_k(12.0, g.sample(lambda x: 1.5 + x))
    for d0 in (prm.sigma, 2 * prm.delta):
        lo, hi = prm.profile(d0 * (1 - 1e-13)), prm.profile(d0 * (1 + 1e-13))
        assert abs(lo - hi) < 1e-9


@settings(max_examples=40, deadline=None)
@given(k=st.floats(2.0, 500.0), pm=st.floats(1.1, 3.0))
def test_phi_nondecreasing_in_distance(k, pm):
    g = make_grid(1, (0, 1), 33)
    p = g.constant(pm)
    try:
        prm = PhiParams.from_k(k, p)
    except ValueError:
        return
    d = np.sort(np.random.default_rng(0).uniform(0, 0.5, 400))
    assert np.all(np.diff(prm.profile(d)) >= -1e-12)


def test_phi_2d_zero_on_boundary():
    g = make_grid(2, [(0, 1), (0, 2)], (17, 33))
    prm = PhiParams.from_k(30.0, g.constant(2.0))
    phi = build_phi(prm, g)
    assert np.all(phi.values[g.boundary_mask] == 0)
    assert np.all(phi.interior() > 0)


# ---------------------------------------------------------------- k and lambda


def test_lhopital_ratio_decreasing():
    a = 0.8 / (1 + 0.1 * np.pi)
    r = lhopital_ratio(np.array([10.0, 20.0, 40.0]), 1.8, 0.3, a)
    assert r[0] > r[1] > r[2]
    # hand evaluation at k = 10
    assert r[0] == pytest.approx(10**0.8 * math.exp(-a * 10 * 0.5) * abs(math.log(10) - 10 * a), rel=1e-12)
    assert lhopital_ratio(400.0, 1.8, 0.3, a) < 1e-30


def test_select_k_default(g, sublinear):
    ks = select_k_sublinear(sublinear, A_upper=1.2)
    prm = ks.params
    assert math.exp(prm.k * prm.sigma) == pytest.approx(2 ** (1 / prm.p_plus), abs=1e-12)
    assert prm.k * prm.mu <= 1
    assert ks.trials[-1]["ok"] and not any(t["ok"] for t in ks.trials[:-1])
    assert np.all(ks.sub.interior() > 0)
    # sub side of the pair with any supersolution far above it
    pair = SubSuperPair(ks.sub, g.field(np.where(g.boundary_mask, 0, 10.0)))
    rep = verify_pair(pair, NonlocalProblem(g, sublinear.exponents, A=lambda x, t: 1.2 + 0 * x[0], f=sublinear.f))
    assert rep.sub_violation <= 1e-8


def test_select_k_reports_blockers(sublinear):
    with pytest.raises(SelectionError) as exc:
        select_k_sublinear(sublinear, A_upper=1.0, k_cap=4.0)
    assert exc.value.trials and "blocked" in str(exc.value)


def test_select_k_requires_sublinear_exponents(g):
    e = ExponentSet.build(g, p=1.5, beta=0.5)
    prob = NonlocalProblem(g, e, A=lambda x, t: 1 + 0 * x[0], f=lambda x, t: np.abs(t) ** 0.5)
    with pytest.raises(ValueError):
        select_k_sublinear(prob, 1.0)


def test_power_of_two_examples():
    assert smallest_power_of_two(2.0, 0.375) == 4.0  # threshold 2^1.6
    assert smallest_power_of_two(1.0, 0.375) == 2.0
    assert smallest_power_of_two(0.01, 0.5) == 2.0
    assert smallest_power_of_two(5.0, 0.0) == 8.0
    assert smallest_power_of_two(8.0, 0.0) == 8.0


@settings(max_examples=100, deadline=None)
@given(c=st.floats(1e-3, 1e6), s=st.floats(0.0, 0.95))
def test_power_of_two_is_minimal(c, s):
    lam = smallest_power_of_two(c, s)
    assert lam > 1 and c * lam**s <= lam
    half = lam / 2
    assert half <= 1 or c * half**s > half


def test_select_lambda_sublinear(g, sublinear):
    lc = select_lambda_sublinear(sublinear, K_knob=2.0, a0=1.0)
    e = sublinear.exponents
    assert lc.lam > 1 and math.log2(lc.lam).is_integer()
    assert lc.s == pytest.approx(0.375)
    assert lc.z.max() <= lc.K * lc.lam ** (1 / (e.p_minus - 1))
    bound = lc.z.values ** 0.2 * luxemburg_norm(lc.z, e.q) ** 0.1
    assert np.all(bound <= lc.lam)


def test_select_lambda_raises_K_when_needed():
    g = make_grid(1, (0, 12), 97)
    e = ExponentSet.build(g, p=2.0, beta=0.3)
    prob = NonlocalProblem(g, e, A=lambda x, t: 1 + 0 * x[0], f=lambda x, t: np.abs(t) ** 0.3)
    lc = select_lambda_sublinear(prob, K_knob=1.01)
    assert lc.K_raised and lc.K > 1.01
    assert lc.z.max() <= lc.K * lc.lam


def test_bracket_constants(g):
    e = ExponentSet.build(g, p=2.0)
    prob = NonlocalProblem(g, e, A=lambda x, t: (0.1 + t) / (1 + t) + 0 * x[0], f=lambda x, t: 0 * t)
    bc = bracket_constant(prob, 1e-3, a_inf=1.0)
    assert bc.a1 >= 0.8 and bc.value == pytest.approx(0.101 / 1.001, rel=1e-12)
    ts = np.geomspace(1e-3, 1e4, 500)
    assert all(prob.eval_A(t).min() >= bc.value for t in ts)
    # A bounded below by a_inf/2 everywhere: a1 collapses to lo
    prob = NonlocalProblem(g, e, A=lambda x, t: 1 + 1 / (1 + t) + 0 * x[0], f=lambda x, t: 0 * t)
    bc = bracket_constant(prob, 0.2, a_inf=1.0)
    assert bc.a1 == 0.2 and bc.value == 0.5
    lo, hi = coefficient_range(prob, 0.0, 1.0)
    assert lo == pytest.approx(1.5) and hi == pytest.approx(2.0)


# ---------------------------------------------------------------- concave-convex


EXPS = ConcaveExponents(1.8, 0.5, 2.0)


def test_select_M_example():
    ch = select_M_concave(1.0, 0.1, EXPS)
    assert ch.L == pytest.approx(0.25 ** (0.8 / 1.5), rel=1e-14)
    assert ch.L == pytest.approx(0.4774, abs=1e-4)
    assert ch.M == pytest.approx(ch.L * 10 ** (0.8 / 1.5), rel=1e-14)


@pytest.mark.parametrize("lam,theta", [(1.0, 0.1), (1.0, 0.01), (3.0, 1.0), (0.2, 5e-4)])
def test_select_M_is_golden_section_argmin(lam, theta):
    ch = select_M_concave(lam, theta, EXPS)
    ref = golden_argmin(lam, theta, EXPS, 1e-4, 1e4)
    assert abs(ch.M - ref) / ref < 1e-8


def test_select_M_is_stationary():
    ch = select_M_concave(1.0, 0.1, EXPS, A_lambda=1.5, Cbar=1.1)
    M, h = ch.M, 1e-5 * ch.M
    dpsi = (psi(M + h, 1.0, 0.1, EXPS, 1.5, 1.1) - psi(M - h, 1.0, 0.1, EXPS, 1.5, 1.1)) / (2 * h)
    assert abs(dpsi) * M / ch.psi_M < 1e-8


def test_psi_min_decreases_with_theta():
    g = make_grid(1, (0, 1), 65)
    e = ExponentSet.build(g, p=p_var, beta=0.3, alpha=0.2, eta=1.5, gamma=0.5)
    Cbar = concave_cbar(e, 1.05)
    assert Cbar == pytest.approx(1.05**2, rel=1e-10)
    vals = [select_M_concave(1.0, th, e, 1.5, Cbar) for th in (1.0, 0.1, 0.01)]
    assert vals[0].psi_M > vals[1].psi_M > vals[2].psi_M
    assert not vals[0].admissible and vals[1].admissible and vals[2].admissible


def test_select_M_rejects_bad_ordering():
    with pytest.raises(ValueError):
        select_M_concave(1.0, 0.1, (1.8, 0.9, 2.0))
    with pytest.raises(ValueError):
        select_M_concave(1.0, 0.1, (1.8, 0.3, 0.7))


# ---------------------------------------------------------------- logistic


def logistic_problem(g, p=2.0, alpha=0.0, A=None):
    e = ExponentSet.build(g, p=p, alpha=alpha, q=2.0, r=2.0)
    A = A or (lambda x, t: 1 + 0 * x[0])
    return NonlocalProblem(g, e, A=A, f=lambda x, t: t * (1 - t))


def fd_logistic(g, lam, init, iters=200):
    """Damped Newton on the 3-point scheme for -z'' = lam z (1 - z)."""
    h = g.h[0]
    z = init[1:-1].copy()
    n = len(z)
    L = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h**2

    def F(v):
        return L @ v - lam * v * (1 - v)

    for _ in range(iters):
        r = F(z)
        if np.max(np.abs(r)) < 1e-12:
            break
        step = np.linalg.solve(L - np.diag(lam * (1 - 2 * z)), r)
        t = 1.0
        while np.linalg.norm(F(z - t * step)) >= np.linalg.norm(r) and t > 1e-8:
            t /= 2
        z = z - t * step
    return np.concatenate([[0.0], z, [0.0]])


def test_logistic_hypothesis_check(g):
    assert check_logistic_f(logistic_problem(g), 1.0) == []
    prob = NonlocalProblem(g, ExponentSet.build(g, p=2.0), A=lambda x, t: 1 + 0 * x[0], f=lambda x, t: t * (2 - t))
    assert any("theta" in m for m in check_logistic_f(prob, 1.0))
    with pytest.raises(ValueError):
        build_logistic_z0(prob, 1.0)


def test_logistic_zero_lambda(g):
    seed = build_logistic_z0(logistic_problem(g), 1.0, lambda_tilde=0.0)
    assert not seed.ok and "too small" in seed.message
    assert np.all(seed.z0.values == 0) and seed.energy == 0.0


def test_logistic_seed_matches_newton_oracle(g):
    seed = build_logistic_z0(logistic_problem(g), 1.0, lambda_tilde=200.0)
    assert seed.ok and seed.energy < 0
    z = seed.z0.values
    assert np.all(z[1:-1] > 0) and z.max() <= 1 + 1e-8
    # start from the supersolution 1; the positive solution is unique
    ref = fd_logistic(g, 200.0, np.where(g.boundary_mask, 0.0, 1.0))
    np.testing.assert_allclose(z, ref, atol=1e-8)


def test_logistic_auto_lambda(g):
    seed = build_logistic_z0(logistic_problem(g), 1.0)
    assert seed.ok and seed.probe_energy < 0
    assert seed.lambda_tilde == 16.0


def test_lambda0_trivial_cases(g):
    # alpha = 0: C = 1 and mu0 = A0
    prob = logistic_problem(g, A=lambda x, t: 2 + t + 0 * x[0])
    seed = build_logistic_z0(prob, 1.0)
    ch = select_lambda0_logistic(seed, prob, 1.0)
    assert ch.C == 1.0 and ch.mu0 == ch.A0 == pytest.approx(3.0)
    # A = 1: mu0 = 1 / C
    prob = logistic_problem(g, alpha=0.5)
    seed = build_logistic_z0(prob, 1.0)
    ch = select_lambda0_logistic(seed, prob, 1.0)
    assert ch.A0 == 1.0 and ch.mu0 == pytest.approx(1 / ch.C, rel=1e-15)
    assert ch.C == pytest.approx(math.sqrt(luxemburg_norm(seed.z0, g.constant(2.0))))


def test_lambda0_pair_passes_and_fails_below(g):
    prob = logistic_problem(g, p=lambda x: 1.9 + 0.05 * np.sin(2 * np.pi * x), alpha=0.5,
                            A=lambda x, t: (1 + t**2) * (1 + 0.5 * x[0]))
    seed = build_logistic_z0(prob, 1.0)
    ch = select_lambda0_logistic(seed, prob, 1.0)
    pair = SubSuperPair(seed.z0, g.constant(1.0))
    assert verify_pair(pair, prob.with_scales(lambda_scale=ch.lam0)).ok
    low = verify_pair(pair, prob.with_scales(lambda_scale=ch.lam0 / 100))
    assert low.sub_violation > 1e-8 and low.sup_violation <= 0


def test_lambda0_rejects_degenerate_seed(g):
    prob = logistic_problem(g, alpha=0.5)
    seed = build_logistic_z0(prob, 1.0, lambda_tilde=0.0)
    with pytest.raises(ValueError):
        select_lambda0_logistic(seed, prob, 1.0)
