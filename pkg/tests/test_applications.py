import numpy as np
import pytest

from oracles import lux_norm_1d, plap_1d
from varexp.applications import (
    concave_convex_problem,
    run_concave_convex,
    run_logistic,
    run_sublinear,
    sublinear_problem,
)
from varexp.constructions import SelectionError
from varexp.grid import make_grid
from varexp.modular import ExponentSet
from varexp.subsuper import NonlocalProblem, SolverOptions, verify_pair


@pytest.fixture
def g():
    return make_grid(1, (0, 1), 129)


def p_var(x):
    return 1.8 + 0.1 * np.sin(np.pi * x)


def check_solution(res, H, rtol):
    """Residual of the discrete equation at the returned field, via the oracle stencil."""
    u = res.solve.solution.values
    x = res.problem.grid.axes[0]
    lhs = plap_1d(x, u, res.problem.exponents.p.values)
    rhs = H(x, u)[1:-1]
    assert np.max(np.abs(lhs - rhs)) <= rtol * np.max(np.abs(rhs))


def test_sublinear_A1(g):
    e = ExponentSet.build(g, p=p_var, beta=0.2, alpha=0.1, q=2.0, r=2.0)
    res = run_sublinear(sublinear_problem(e, lambda x, t: 1 + t + 0 * x[0]), a0=1.0, tol_fp=1e-10,
                        opts=SolverOptions(tol=1e-12))
    assert res.ok
    assert res.pair_report.sub_violation <= 1e-8 and res.pair_report.sup_violation <= 1e-8
    u = res.solve.solution
    assert np.all(u.interior() > 0)

    def H(x, v):
        two = np.full_like(x, 2.0)
        return np.abs(v) ** 0.2 * lux_norm_1d(x, v, two) ** 0.1 / (1 + lux_norm_1d(x, v, two))
    check_solution(res, H, 1e-6)


def test_sublinear_A2(g):
    e = ExponentSet.build(g, p=p_var, beta=0.2, alpha=0.1, q=2.0, r=2.0)
    prob = sublinear_problem(e, lambda x, t: 1 + 1 / (1 + t) + 0 * x[0])
    res = run_sublinear(prob, a0=2.0, case="A2", a_inf=1.0)
    assert res.ok
    assert res.params["A_k"] == 0.5
    with pytest.raises(ValueError):
        run_sublinear(prob, a0=2.0, case="A2")


@pytest.mark.parametrize("theta", [0.1, 0.01])
def test_concave_convex(g, theta):
    e = ExponentSet.build(g, p=p_var, beta=0.3, alpha=0.2, eta=1.5, gamma=0.5)
    prob = concave_convex_problem(e, lambda x, t: 3 + 3 / (1 + t) + 0 * x[0], 1.0, theta)
    res = run_concave_convex(prob, a0=6.0, b0=3.0, tol_fp=1e-12, opts=SolverOptions(tol=1e-11))
    assert res.ok and res.params["psi_M"] <= 1 and res.params["M"] >= 1
    u = res.solve.solution.values
    assert np.all(u[1:-1] > 0)

    def H(x, v):
        two = np.full_like(x, 2.0)
        nr = lux_norm_1d(x, v, two)
        return (v**0.3 * nr**0.2 + theta * v**1.5 * nr**0.5) / (3 + 3 / (1 + nr))
    check_solution(res, H, 1e-6)


def test_concave_convex_theta_too_large(g):
    e = ExponentSet.build(g, p=p_var, beta=0.3, alpha=0.2, eta=1.5, gamma=0.5)
    prob = concave_convex_problem(e, lambda x, t: 3 + 3 / (1 + t) + 0 * x[0], 1.0, 1.0)
    with pytest.raises(SelectionError, match="too large"):
        run_concave_convex(prob, a0=6.0, b0=3.0)


@pytest.mark.parametrize("p", [2.0, lambda x: 1.9 + 0.05 * np.sin(2 * np.pi * x)])
def test_logistic(g, p):
    e = ExponentSet.build(g, p=p, alpha=0.5, q=2.0, r=2.0)
    prob = NonlocalProblem(g, e, A=lambda x, t: (1 + t**2) * (1 + 0.5 * x[0]), f=lambda x, t: t * (1 - t))
    res = run_logistic(prob, theta=1.0)
    assert res.ok
    u = res.solve.solution.values
    assert np.all(u[1:-1] > 0) and u.max() <= 1
    assert res.params["J_z0"] < 0
    # below lam0 the pair check is expected to fail on the sub side
    low = verify_pair(res.pair, prob.with_scales(lambda_scale=res.params["lam0"] / 100))
    assert low.sub_violation > 0


def test_logistic_below_lam0_is_noted(g):
    e = ExponentSet.build(g, p=2.0, alpha=0.5)
    prob = NonlocalProblem(g, e, A=lambda x, t: 1 + t**2 + 0 * x[0], f=lambda x, t: t * (1 - t))
    res = run_logistic(prob, theta=1.0, lam=1.0)
    assert res.notes and not res.pair_report.ok
