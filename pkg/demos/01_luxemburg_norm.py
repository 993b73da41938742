"""
Variable-exponent norms
=======================

The Luxemburg norm of ``u`` in ``L^{p(x)}`` is the scale ``lam`` at which the
modular of ``u / lam`` equals one.  For a constant exponent it is the usual
``L^p`` norm; for a varying one the modular and the norm are only related by
the two-sided power bounds checked below.
"""

import numpy as np

from varexp import ExponentSet, luxemburg_norm, make_grid, modular
from varexp.modular import holder_gap

g = make_grid(1, (0, 1), 256)
p = g.sample(lambda x: 1.8 + 0.15 * np.sin(2 * np.pi * x))
print(f"p ranges over [{p.min():.3f}, {p.max():.3f}]")

# constant exponent: compare with the trapezoid L^3 norm
u = g.sample(lambda x: np.sin(np.pi * x))
three = g.constant(3.0)
w = g.weights
print("L^3 norm, direct :", np.sum(w * np.abs(u.values) ** 3) ** (1 / 3))
print("L^3 norm, Luxemburg:", luxemburg_norm(u, three))

# variable exponent: rho(u / |u|) = 1 and the power sandwich
rng = np.random.default_rng(0)
for scale in (1e-2, 1.0, 1e2):
    v = g.field(rng.normal(size=g.shape) * scale)
    nrm, rho = luxemburg_norm(v, p), modular(v, p)
    lo, hi = sorted((nrm ** p.min(), nrm ** p.max()))
    print(f"scale {scale:g}: |v| = {nrm:.4e}, rho(v) = {rho:.4e}, "
          f"bounds [{lo:.4e}, {hi:.4e}], rho(v/|v|) - 1 = {modular(v / nrm, p) - 1:+.1e}")

# Hölder: int |uv| <= 2 |u|_p |v|_p'
pc = g.field(p.values / (p.values - 1))
gaps = [holder_gap(g.field(rng.normal(size=g.shape)), g.field(rng.normal(size=g.shape)), p, pc)
        for _ in range(100)]
print(f"smallest Hölder gap over 100 pairs: {min(gaps):.3e}")

e = ExponentSet.build(g, p=p, alpha=0.1, beta=0.2)
print(f"exponent set: p- = {e.p_minus:.3f}, p+ = {e.p_plus:.3f}")
