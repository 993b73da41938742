"""
Concave-convex nonlinearities
=============================

With a load ``lam u^beta |u|^alpha + theta u^eta |u|^gamma`` the supersolution
``z_M`` exists only if ``theta`` is small compared with ``lam``.  The size
``M`` minimises a two-term power function ``Psi``; the construction goes
through when ``Psi(M) <= 1``.
"""

import numpy as np

from varexp import ExponentSet, make_grid
from varexp.applications import concave_convex_problem, run_concave_convex
from varexp.constructions import SelectionError, select_M_concave

g = make_grid(1, (0, 1), 129)
e = ExponentSet.build(g, p=lambda x: 1.8 + 0.1 * np.sin(np.pi * x), beta=0.3, alpha=0.2, eta=1.5, gamma=0.5)

def A(x, t):
    return 3 + 3 / (1 + t) + 0 * x[0]

# Psi for the bare exponents (unit bracket constants) as theta shrinks
for theta in (1.0, 0.1, 0.01, 0.001):
    ch = select_M_concave(1.0, theta, e)
    print(f"theta = {theta:<6g} M = {ch.M:8.4f}  Psi(M) = {ch.psi_M:.4f}")

for theta in (1.0, 0.1, 0.01):
    prob = concave_convex_problem(e, A, 1.0, theta)
    try:
        res = run_concave_convex(prob, a0=6.0, b0=3.0)
    except SelectionError as exc:
        print(f"theta = {theta}: rejected ({exc})")
        continue
    s = res.solve
    print(f"theta = {theta}: M = {res.params['M']:.4f}, Psi = {res.params['psi_M']:.3f}, "
          f"{s.iterations} iterations, max u = {s.solution.max():.3e}, ordered = {s.ordering_ok}")
