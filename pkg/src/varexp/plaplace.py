"""Discrete p(x)-Laplacian with homogeneous Dirichlet data.

The operator is discretised with piecewise-linear elements: cells in 1D,
each rectangle cell split into two right triangles in 2D.  The gradient is
constant per element and the exponent on an element is the mean of its
vertex values.  Loads use the lumped mass, which coincides with the
trapezoidal weights of the grid, so the mass-scaled nodal residual

    (A(u)_i - int rhs phi_i) / w_i

approximates ``-div(|grad u|^{p-2} grad u) - rhs`` pointwise.  All residual
tolerances in this package are measured in that scaled sup-norm.

Dirichlet problems are solved by minimising the convex energy

    E(u) = sum_e vol_e / p_e [(|g_e|^2 + eps^2)^{p_e/2} - eps^{p_e}] - sum_i w_i rhs_i u_i

with Newton directions and Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .grid import Grid, ScalarField, as_values, check_same_grid

__all__ = [
    "DirichletProblem",
    "EnergyReport",
    "ComparisonReport",
    "ConvergenceError",
    "energy",
    "energy_gradient",
    "apply_plaplacian",
    "solve_dirichlet",
    "torsion",
    "compare_weak",
]


class ConvergenceError(RuntimeError):
    """An iterative solve stopped without meeting its tolerance."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class _Mesh:
    D: tuple[sp.csr_matrix, ...]  # element gradient components, (n_elem, n_nodes) each
    vol: np.ndarray
    elem_nodes: np.ndarray
    interior: np.ndarray  # flat indices of interior nodes
    D_int: tuple[sp.csr_matrix, ...]


@lru_cache(maxsize=16)
def _mesh(grid: Grid) -> _Mesh:
    if grid.dim == 1:
        (n,), (h,) = grid.n, grid.h
        i = np.arange(n - 1)
        rows = np.repeat(np.arange(n - 1), 2)
        cols = np.column_stack([i, i + 1]).ravel()
        vals = np.tile([-1.0 / h, 1.0 / h], n - 1)
        D = (sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n)),)
        vol = np.full(n - 1, h)
        elem_nodes = np.column_stack([i, i + 1])
    else:
        (nx, ny), (hx, hy) = grid.n, grid.h
        idx = np.arange(nx * ny).reshape(nx, ny)
        a = idx[:-1, :-1].ravel()   # (i, j)
        b = idx[1:, :-1].ravel()    # (i+1, j)
        c = idx[:-1, 1:].ravel()    # (i, j+1)
        d = idx[1:, 1:].ravel()     # (i+1, j+1)
        m = a.size
        # lower triangle (a, b, c), upper triangle (d, c, b)
        ex = np.concatenate([a, c]), np.concatenate([b, d])
        ey = np.concatenate([a, b]), np.concatenate([c, d])

        def diff_matrix(lo, hi, h):
            r = np.concatenate([np.arange(2 * m), np.arange(2 * m)])
            cc = np.concatenate([lo, hi])
            v = np.concatenate([np.full(2 * m, -1.0 / h), np.full(2 * m, 1.0 / h)])
            return sp.csr_matrix((v, (r, cc)), shape=(2 * m, nx * ny))

        D = (diff_matrix(*ex, hx), diff_matrix(*ey, hy))
        vol = np.full(2 * m, 0.5 * hx * hy)
        elem_nodes = np.concatenate([np.column_stack([a, b, c]), np.column_stack([d, c, b])])
    interior = np.flatnonzero(grid.interior_mask.ravel())
    D_int = tuple(Dk[:, interior].tocsc() for Dk in D)
    return _Mesh(D, vol, elem_nodes, interior, D_int)


def _elem_exponent(mesh: _Mesh, p: np.ndarray) -> np.ndarray:
    return p.ravel()[mesh.elem_nodes].mean(axis=1)


def _elem_gradients(mesh: _Mesh, u: np.ndarray) -> np.ndarray:
    uf = u.ravel()
    return np.stack([Dk @ uf for Dk in mesh.D])


def _flux_factor(s: np.ndarray, pe: np.ndarray, eps: float) -> np.ndarray:
    """``(s + eps^2)^((p-2)/2)``, taken as 0 where the argument vanishes."""
    se = s + eps * eps
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(se > 0, se ** (0.5 * (pe - 2.0)), 0.0)
    return a


def _stiffness_action(mesh: _Mesh, u: np.ndarray, pe: np.ndarray, eps: float) -> np.ndarray:
    """Nodal vector ``int |grad u|_eps^{p-2} grad u . grad phi_i`` for every node."""
    G = _elem_gradients(mesh, u)
    a = _flux_factor(np.sum(G * G, axis=0), pe, eps) * mesh.vol
    out = np.zeros(u.size)
    for Dk, Gk in zip(mesh.D, G):
        out += Dk.T @ (a * Gk)
    return out


def _elastic_energy(mesh: _Mesh, u: np.ndarray, pe: np.ndarray, eps: float) -> float:
    G = _elem_gradients(mesh, u)
    s = np.sum(G * G, axis=0)
    if eps > 0:
        # eps^p [(1 + s/eps^2)^{p/2} - 1], accurate for |g| << eps
        dens = eps**pe * np.expm1(0.5 * pe * np.log1p(s / (eps * eps))) / pe
    else:
        dens = s ** (0.5 * pe) / pe
    return float(np.sum(mesh.vol * dens))


def _stiffness_hessian(mesh: _Mesh, u: np.ndarray, pe: np.ndarray, eps: float,
                       lagged: bool = False) -> sp.csc_matrix:
    """Hessian of the elastic energy restricted to interior nodes.

    With ``lagged=True`` the rank-one part is dropped, giving the
    lagged-diffusivity matrix; for ``p <= 2`` its quadratic model majorises
    the energy.
    """
    G = _elem_gradients(mesh, u)
    s = np.sum(G * G, axis=0)
    # floor keeps the singular p < 2 case finite when eps = 0; relative so tiny fields keep their scale
    se = np.maximum(s + eps * eps, max(1e-24 * float(np.max(s, initial=0.0)), 1e-280))
    a = se ** (0.5 * (pe - 2.0))
    b = 0.0 if lagged else (pe - 2.0) * se ** (0.5 * (pe - 4.0))
    H = None
    for k, Dk in enumerate(mesh.D_int):
        for l, Dl in enumerate(mesh.D_int):
            if lagged and k != l:
                continue
            coef = mesh.vol * (b * G[k] * G[l] + (a if k == l else 0.0))
            term = Dk.T @ sp.diags(coef) @ Dl
            H = term if H is None else H + term
    return H.tocsc()


# --------------------------------------------------------------------------
# public operator-level functions


def apply_plaplacian(u: ScalarField, p: ScalarField, eps_reg: float = 0.0) -> ScalarField:
    """Mass-scaled discrete ``-div(|grad u|^{p-2} grad u)`` at interior nodes (0 on the boundary).

    ``u`` may be nonzero on the boundary; it enters through the elements
    touching interior nodes.
    """
    grid = check_same_grid(u, p)
    mesh = _mesh(grid)
    pe = _elem_exponent(mesh, p.values)
    r = _stiffness_action(mesh, u.values, pe, eps_reg).reshape(grid.shape) / grid.weights
    r[grid.boundary_mask] = 0.0
    return ScalarField(grid, r)


def energy(u: ScalarField, p: ScalarField, rhs, eps_reg: float = 0.0) -> float:
    """Discrete ``int |grad u|^p / p - int rhs u`` (regularised when ``eps_reg > 0``)."""
    grid = check_same_grid(u, p)
    mesh = _mesh(grid)
    pe = _elem_exponent(mesh, p.values)
    f = as_values(rhs, grid)
    return _elastic_energy(mesh, u.values, pe, eps_reg) - float(np.sum((grid.weights * f * u.values).ravel()))


def energy_gradient(u: ScalarField, p: ScalarField, rhs, eps_reg: float = 0.0) -> ScalarField:
    """Partial derivatives of :func:`energy` with respect to the interior nodal values.

    This is the discrete weak residual tested against nodal hat functions;
    it is set to zero on boundary nodes.
    """
    grid = check_same_grid(u, p)
    mesh = _mesh(grid)
    pe = _elem_exponent(mesh, p.values)
    f = as_values(rhs, grid)
    g = _stiffness_action(mesh, u.values, pe, eps_reg).reshape(grid.shape) - grid.weights * f
    g[grid.boundary_mask] = 0.0
    return ScalarField(grid, g)


# --------------------------------------------------------------------------
# minimisation


@dataclass(frozen=True)
class DirichletProblem:
    """``-div(|grad u|^{p-2} grad u) = rhs`` in the box, ``u = 0`` on its boundary."""

    grid: Grid
    p: ScalarField
    rhs: ScalarField
    eps_reg: float = 1e-8
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        check_same_grid(self.p, self.rhs)
        if self.p.grid != self.grid:
            raise ValueError("p lives on a different grid")
        if not self.p.min() > 1.0:
            raise ValueError(f"need p_minus > 1, got {self.p.min():.6g}")
        if self.eps_reg < 0 or self.tol <= 0:
            raise ValueError("eps_reg must be >= 0 and tol > 0")


@dataclass
class EnergyReport:
    minimizer: ScalarField
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    energy_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class _Load:
    """Pointwise load ``Phi(u)`` with derivative ``phi`` and curvature ``dphi``."""

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    curv: Callable[[np.ndarray], np.ndarray]


def _linear_load(f: np.ndarray) -> _Load:
    f = f.ravel()
    return _Load(lambda u: f * u, lambda u: f, lambda u: np.zeros_like(u))


def _minimize(grid: Grid, p: np.ndarray, load: _Load, init: np.ndarray, eps: float,
              tol: float, max_iter: int) -> EnergyReport:
    mesh = _mesh(grid)
    pe = _elem_exponent(mesh, p)
    w = grid.weights.ravel()
    idx = mesh.interior
    wi = w[idx]

    u = np.array(init, dtype=float).ravel()
    u[grid.boundary_mask.ravel()] = 0.0

    def parts(v):
        el = _elastic_energy(mesh, v, pe, eps)
        ld = float(np.sum(w * load.value(v)))
        return el - ld, abs(el) + float(np.sum(np.abs(w * load.value(v))))

    def grad(v):
        return _stiffness_action(mesh, v, pe, eps)[idx] - wi * load.deriv(v)[idx]

    E, scale = parts(u)
    g = grad(u)
    res = float(np.max(np.abs(g / wi)))
    trace = [E]
    it = 0
    def direction(lagged):
        K = _stiffness_hessian(mesh, u, pe, eps, lagged=lagged)
        curv = load.curv(u)[idx]
        # exact curvature first, then the convexified one if that is not a descent direction
        for shift in (-wi * curv, wi * np.maximum(-curv, 0.0)):
            try:
                cand = -spsolve((K + sp.diags(shift)).tocsc(), g)
            except RuntimeError:
                continue
            if np.all(np.isfinite(cand)) and g @ cand < 0:
                return cand
        return -g / wi

    def line_search(d):
        slope = float(g @ d)
        t = 1.0
        for _ in range(80):
            trial = u.copy()
            trial[idx] += t * d
            E_new, scale_new = parts(trial)
            if E_new <= E + 1e-4 * t * slope:
                return t, trial, E_new, scale_new
            # energy differences below roundoff cannot rank steps; fall back to the residual
            fuzz = 64 * np.finfo(float).eps * max(scale, scale_new)
            if E_new <= E + fuzz and np.max(np.abs(grad(trial) / wi)) < res:
                return t, trial, E_new, scale_new
            t *= 0.5
        return None

    singular = bool(np.min(pe) < 2.0)
    while res > tol and it < max_iter:
        it += 1
        step = line_search(direction(lagged=False))
        # Newton alone can crawl for p < 2 far from the minimiser
        if step is None or step[0] < 1.0 or singular:
            alt = line_search(direction(lagged=True))
            if alt is not None and (step is None or alt[2] < step[2]):
                step = alt
        if step is None:
            break
        _, u, E, scale = step
        g = grad(u)
        res = float(np.max(np.abs(g / wi)))
        trace.append(E)

    return EnergyReport(
        minimizer=ScalarField(grid, u.reshape(grid.shape)),
        energy=E,
        grad_norm=res,
        iterations=it,
        converged=res <= tol,
        energy_trace=trace,
    )


def solve_dirichlet(prob: DirichletProblem, init: ScalarField | None = None) -> EnergyReport:
    """Minimise the Dirichlet energy of ``prob`` starting from ``init`` (zero by default).

    Stops when the mass-scaled sup-norm of :func:`energy_gradient` over
    interior nodes is at most ``prob.tol``.  Non-convergence is reported
    through ``converged=False``, not raised.
    """
    u0 = np.zeros(prob.grid.shape) if init is None else as_values(init, prob.grid)
    return _minimize(prob.grid, prob.p.values, _linear_load(prob.rhs.values), u0,
                     prob.eps_reg, prob.tol, prob.max_iter)


def torsion(lam: float, p: ScalarField, grid: Grid | None = None, eps_reg: float = 1e-8,
            tol: float = 1e-10, max_iter: int = 200, init: ScalarField | None = None) -> ScalarField:
    """Solution of ``-Delta_p z = lam`` with zero boundary values.

    ``tol`` is relative: the solve stops at residual ``tol * max(1, lam)``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    grid = p.grid if grid is None else grid
    prob = DirichletProblem(grid, p, grid.constant(lam), eps_reg=eps_reg,
                            tol=tol * max(1.0, lam), max_iter=max_iter)
    rep = solve_dirichlet(prob, init)
    if not rep.converged:
        raise ConvergenceError(
            f"torsion solve for lam={lam:g} stopped at residual {rep.grad_norm:.3e} "
            f"after {rep.iterations} iterations", rep)
    return rep.minimizer


@dataclass
class ComparisonReport:
    max_gap: float
    violations: np.ndarray
    ordered: bool


def compare_weak(u: ScalarField, v: ScalarField, tol: float = 1e-8) -> ComparisonReport:
    """Report ``max(u - v)`` and the nodes where ``u > v + tol``."""
    check_same_grid(u, v)
    diff = u.values - v.values
    bad = np.argwhere(diff > tol)
    return ComparisonReport(max_gap=float(diff.max()), violations=bad, ordered=bad.size == 0)

