"""
Torsion functions and their growth
==================================

``z_lam`` solves ``-div(|grad z|^{p-2} grad z) = lam`` with zero boundary
values.  It is the supersolution seed in every construction, so its size as a
function of ``lam`` matters: for constant ``p`` the sup norm grows like
``lam^{1/(p-1)}``.
"""

import numpy as np

from varexp import make_grid, torsion
from varexp.plaplace import DirichletProblem, solve_dirichlet

g = make_grid(1, (0, 1), 257)

# p = 2, load 8: the exact solution is 4x(1 - x)
rep = solve_dirichlet(DirichletProblem(g, g.constant(2.0), g.constant(8.0)))
x = g.axes[0]
print("p=2 max error vs 4x(1-x):", np.max(np.abs(rep.minimizer.values - 4 * x * (1 - x))))

# p = 4, load 1
rep = solve_dirichlet(DirichletProblem(g, g.constant(4.0), g.constant(1.0)))
exact = 0.75 * (0.5 ** (4 / 3) - np.abs(x - 0.5) ** (4 / 3))
print("p=4 max error vs closed form:", np.max(np.abs(rep.minimizer.values - exact)),
      f"({rep.iterations} Newton steps)")

lams = 2.0 ** np.arange(7)
for pv in (2.0, 3.0, 1.6):
    sup = [torsion(lam, g.constant(pv)).sup_norm() for lam in lams]
    slope = np.polyfit(np.log(lams), np.log(sup), 1)[0]
    print(f"p = {pv}: fitted slope {slope:.4f}, predicted {1 / (pv - 1):.4f}")

# variable exponent: the slope falls between the extreme predictions
p = g.sample(lambda x: 1.8 + 0.1 * np.sin(np.pi * x))
sup = [torsion(lam, p).sup_norm() for lam in lams]
print("variable p slope:", np.polyfit(np.log(lams), np.log(sup), 1)[0],
      f"(between {1 / (p.max() - 1):.3f} and {1 / (p.min() - 1):.3f})")
