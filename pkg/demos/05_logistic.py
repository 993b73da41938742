"""
Logistic nonlocal problem
=========================

For ``f(t) = t(1 - t)`` the subsolution comes from a minimiser ``z0`` of a
truncated energy, which is negative once the load parameter is large.  The
constant ``1`` is a supersolution, and a threshold ``lam0`` makes the pair
``(mu0 z0, 1)`` admissible.
"""

import numpy as np

from varexp import ExponentSet, make_grid
from varexp.applications import run_logistic
from varexp.constructions import build_logistic_z0
from varexp.subsuper import NonlocalProblem, verify_pair

g = make_grid(1, (0, 1), 129)
for label, p in (("p = 2", 2.0), ("p varies", lambda x: 1.9 + 0.05 * np.sin(2 * np.pi * x))):
    e = ExponentSet.build(g, p=p, alpha=0.5)
    prob = NonlocalProblem(g, e, A=lambda x, t: (1 + t**2) * (1 + 0.5 * x[0]), f=lambda x, t: t * (1 - t))
    seed = build_logistic_z0(prob, theta=1.0)
    print(f"{label}: lambda~ = {seed.lambda_tilde:g}, J(z0) = {seed.energy:.4f}, max z0 = {seed.z0.max():.4f}")
    res = run_logistic(prob, theta=1.0)
    lam0 = res.params["lam0"]
    u = res.solve.solution
    print(f"  lam0 = {lam0:.3f}, pair ok = {res.pair_report.ok}, {res.solve.iterations} iterations, "
          f"u in [{u.interior().min():.2e}, {u.max():.4f}]")
    # below the threshold the subsolution inequality fails
    low = verify_pair(res.pair, prob.with_scales(lambda_scale=lam0 / 10))
    print(f"  at lam0/10 the sub violation is {low.sub_violation:.3e}")
