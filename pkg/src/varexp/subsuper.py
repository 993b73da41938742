"""Sub-supersolution machinery for the nonlocal problem

    -A(x, |u|_r) Delta_p u = lam f(x, u) |u|_q^alpha(x) + theta g(x, u) |u|_s^gamma(x),   u = 0 on the boundary.

Coefficient callables are evaluated on the whole node set: ``A(x, t)`` takes
the coordinate tuple of the grid and a scalar ``t``; ``f(x, t)`` and
``g(x, t)`` take the coordinate tuple and an array of nodal values.  Both
return arrays broadcastable to the grid shape.

The existence argument clamps candidates into ``[sub, sup]`` (``truncate``),
freezes the right-hand side (``nonlocal_rhs``) and solves a p(x)-Laplace
Dirichlet problem (``solve_S``).  ``fixed_point`` iterates that map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid, ScalarField, check_same_grid
from .modular import ExponentSet, luxemburg_norm, norm_power
from .plaplace import ConvergenceError, DirichletProblem, apply_plaplacian, solve_dirichlet

__all__ = [
    "NonlocalProblem",
    "SubSuperPair",
    "SolverOptions",
    "SolveReport",
    "PairReport",
    "NonpositiveCoefficientError",
    "truncate",
    "nonlocal_rhs",
    "rhs_bound",
    "solve_S",
    "fixed_point",
    "verify_pair",
]

log = logging.getLogger(__name__)

Coefficient = Callable[[tuple, np.ndarray], np.ndarray]


class NonpositiveCoefficientError(ValueError):
    """``A(x, t)`` was not positive at the norm where it had to be evaluated."""


@dataclass(frozen=True)
class NonlocalProblem:
    grid: Grid
    exponents: ExponentSet
    A: Coefficient
    f: Coefficient
    g: Coefficient | None = None
    lambda_scale: float = 1.0
    theta_scale: float = 1.0

    def __post_init__(self):
        if self.exponents.grid != self.grid:
            raise ValueError("exponents live on a different grid")

    def eval_A(self, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.A(self.grid.coords, float(t)), dtype=float), self.grid.shape)

    def eval_f(self, t: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.f(self.grid.coords, t), dtype=float), self.grid.shape)

    def eval_g(self, t: np.ndarray) -> np.ndarray:
        if self.g is None:
            return np.zeros(self.grid.shape)
        return np.broadcast_to(np.asarray(self.g(self.grid.coords, t), dtype=float), self.grid.shape)

    def with_scales(self, lambda_scale: float | None = None, theta_scale: float | None = None) -> "NonlocalProblem":
        return NonlocalProblem(
            self.grid, self.exponents, self.A, self.f, self.g,
            self.lambda_scale if lambda_scale is None else lambda_scale,
            self.theta_scale if theta_scale is None else theta_scale,
        )

    def numerator(self, u: ScalarField) -> np.ndarray:
        """``lam f(x, u) |u|_q^alpha + theta g(x, u) |u|_s^gamma`` at the nodes."""
        e = self.exponents
        out = self.lambda_scale * self.eval_f(u.values) * norm_power(luxemburg_norm(u, e.q), e.alpha)
        if self.g is not None:
            out = out + self.theta_scale * self.eval_g(u.values) * norm_power(luxemburg_norm(u, e.s), e.gamma)
        return out


@dataclass(frozen=True)
class SubSuperPair:
    """An ordered pair ``sub <= sup`` with ``sub = 0 <= sup`` on the boundary."""

    sub: ScalarField
    sup: ScalarField

    def __post_init__(self):
        grid = check_same_grid(self.sub, self.sup)
        if np.any(self.sub.values > self.sup.values + 1e-12):
            raise ValueError("sub must lie below sup at every node")
        bnd = grid.boundary_mask
        if np.any(np.abs(self.sub.values[bnd]) > 1e-12):
            raise ValueError("sub must vanish on the boundary")
        if np.any(self.sup.values[bnd] < 0.0):
            raise ValueError("sup must be nonnegative on the boundary")

    @property
    def grid(self) -> Grid:
        return self.sub.grid

    @property
    def sub_positive(self) -> bool:
        return bool(np.all(self.sub.interior() > 0))


@dataclass(frozen=True)
class SolverOptions:
    """Inner Dirichlet solver settings used by the solution operator."""

    eps_reg: float = 1e-8
    tol: float = 1e-7
    max_iter: int = 200


def truncate(u: ScalarField, pair: SubSuperPair) -> ScalarField:
    """Clamp ``u`` nodewise into ``[sub, sup]``."""
    check_same_grid(u, pair.sub)
    return ScalarField(u.grid, np.clip(u.values, pair.sub.values, pair.sup.values))


def nonlocal_rhs(v: ScalarField, prob: NonlocalProblem) -> ScalarField:
    """The frozen right-hand side ``H(v)``: numerator divided by ``A(x, |v|_r)``.

    The three Luxemburg norms are global scalars and are computed once.
    """
    check_same_grid(v, prob.exponents.p)
    nr = luxemburg_norm(v, prob.exponents.r)
    A = prob.eval_A(nr)
    if np.any(~(A > 0)):
        raise NonpositiveCoefficientError(
            f"A(x, |v|_r) must be positive on the order interval; at |v|_r = {nr:.6g} "
            f"min A = {np.min(A):.6g}")
    return ScalarField(v.grid, prob.numerator(v) / A)


def rhs_bound(prob: NonlocalProblem, pair: SubSuperPair, samples: int = 1024) -> float:
    """A priori bound ``K0 >= sup |H(w)|`` over ``w`` in the order interval.

    ``A`` is minimised over ``t`` between the ``r``-norms of the pair, ``f`` and
    ``g`` are maximised nodewise over ``[sub(x), sup(x)]`` and each norm power
    over the matching norm range; all by dense sampling.
    """
    e = prob.exponents
    sub, sup = pair.sub, pair.sup
    ts = np.linspace(luxemburg_norm(sub, e.r), luxemburg_norm(sup, e.r), samples)
    A_min = min(float(np.min(prob.eval_A(t))) for t in ts)
    if not A_min > 0:
        raise NonpositiveCoefficientError(f"A must be positive on the norm bracket (min {A_min:.6g})")
    s = np.linspace(0.0, 1.0, samples)
    f_max = g_max = 0.0
    for sj in s:
        w = sub.values + sj * (sup.values - sub.values)
        f_max = max(f_max, float(np.max(np.abs(prob.eval_f(w)))))
        if prob.g is not None:
            g_max = max(g_max, float(np.max(np.abs(prob.eval_g(w)))))

    def pow_max(m: ScalarField, power: ScalarField) -> float:
        lo, hi = luxemburg_norm(sub, m), luxemburg_norm(sup, m)
        # t^a is monotone in t for a >= 0, so the extremes sit at the bracket ends
        return float(max(np.max(norm_power(lo, power)), np.max(norm_power(hi, power))))

    total = abs(prob.lambda_scale) * f_max * pow_max(e.q, e.alpha)
    if prob.g is not None:
        total += abs(prob.theta_scale) * g_max * pow_max(e.s, e.gamma)
    return total / A_min


def _apply_S(v, prob, pair, opts, init=None):
    rhs = nonlocal_rhs(truncate(v, pair), prob)
    # below unit size, tolerance and regularisation follow the data so that
    # tiny right-hand sides (e.g. from mu*phi with mu ~ 1e-17) are still resolved
    scale = min(1.0, rhs.sup_norm())
    tol, eps = opts.tol, opts.eps_reg
    if scale > 0:
        tol *= scale
        eps *= scale ** (1 / (prob.exponents.p_minus - 1))
    dp = DirichletProblem(prob.grid, prob.exponents.p, rhs, eps_reg=eps, tol=tol, max_iter=opts.max_iter)
    rep = solve_dirichlet(dp, init)
    return rep, rhs


def solve_S(v: ScalarField, prob: NonlocalProblem, pair: SubSuperPair,
            opts: SolverOptions | None = None, init: ScalarField | None = None) -> ScalarField:
    """``S(v)``: solve ``-Delta_p u = H(T v)`` with zero boundary values."""
    opts = opts or SolverOptions()
    rep, rhs = _apply_S(v, prob, pair, opts, init)
    if not np.isfinite(rhs.sup_norm()):
        raise ValueError("right-hand side is not finite")
    if not rep.converged:
        raise ConvergenceError(
            f"inner Dirichlet solve stopped at residual {rep.grad_norm:.3e} "
            f"(tol {opts.tol:.1e}) after {rep.iterations} iterations", rep)
    return rep.minimizer


@dataclass
class SolveReport:
    solution: ScalarField
    iterations: int
    residual_trace: list[float]
    ordering_ok: bool
    K0: float
    converged: bool
    K0_bound: float = float("nan")
    inner_iterations: list[int] = field(default_factory=list)
    rhs_trace: list[float] = field(default_factory=list)
    relaxation_trace: list[float] = field(default_factory=list)
    message: str = ""


def fixed_point(prob: NonlocalProblem, pair: SubSuperPair, tol_fp: float = 1e-6, max_outer: int = 200,
                start: ScalarField | None = None, opts: SolverOptions | None = None,
                relaxation: float | str = 1.0, rtol_fp: float = 1e-3) -> SolveReport:
    """Iterate ``u <- (1 - w) u + w S(u)`` from ``start`` (``sub`` by default).

    ``relaxation=1`` is plain Picard iteration.  ``relaxation="auto"`` starts
    at 1 and halves the weight whenever the fixed-point residual grows, which
    tames the oscillation of strongly decreasing nonlinearities.  The
    iteration stops once ``sup |S(u) - u| <= tol_fp`` and also
    ``<= rtol_fp * sup |S(u)|`` (or 0), and returns ``S(u)``;
    ``iterations`` counts the updates made before that test passed, so a
    start that is already a fixed point reports 0.
    Existence of a fixed point does not imply convergence of this iteration,
    so exhausting ``max_outer`` is reported with ``converged=False``.
    """
    opts = opts or SolverOptions(tol=tol_fp / 10)
    auto = relaxation == "auto"
    omega = 1.0 if auto else float(relaxation)
    if not 0 < omega <= 1:
        raise ValueError("relaxation must lie in (0, 1]")
    u = pair.sub if start is None else start
    K0_bound = rhs_bound(prob, pair)
    residuals, inner, rhs_sup, omegas = [], [], [], []
    su = None
    converged = False
    message = ""
    for it in range(1, max_outer + 1):
        rep, rhs = _apply_S(u, prob, pair, opts, init=su)
        if not rep.converged:
            message = f"inner solve failed at outer iteration {it} (residual {rep.grad_norm:.3e})"
            su = rep.minimizer
            break
        su = rep.minimizer
        res = float(np.max(np.abs(su.values - u.values)))
        residuals.append(res)
        inner.append(rep.iterations)
        rhs_sup.append(rhs.sup_norm())
        if auto and len(residuals) > 1 and res >= residuals[-2]:
            omega = max(omega / 2, 1.0 / 256)
        omegas.append(omega)
        log.debug("outer %d: residual %.3e, inner %d, omega %.4g", it, res, rep.iterations, omega)
        # the relative guard stops a field smaller than tol_fp from passing as converged
        if res <= tol_fp and (res <= rtol_fp * su.sup_norm() or res == 0.0):
            converged = True
            break
        u = ScalarField(u.grid, (1 - omega) * u.values + omega * su.values)
    else:
        message = f"no convergence after {max_outer} outer iterations (residual {residuals[-1]:.3e})"
    solution = su if su is not None else u
    ordering_ok = bool(
        np.all(solution.values >= pair.sub.values - 1e-8) and np.all(solution.values <= pair.sup.values + 1e-8))
    return SolveReport(
        solution=solution,
        iterations=len(residuals) - 1 if converged else len(residuals),
        residual_trace=residuals,
        ordering_ok=ordering_ok,
        K0=max(rhs_sup) if rhs_sup else 0.0,
        converged=converged,
        K0_bound=K0_bound,
        inner_iterations=inner,
        rhs_trace=rhs_sup,
        relaxation_trace=omegas,
        message=message,
    )


@dataclass
class PairReport:
    sub_violation: float
    sup_violation: float
    tol: float
    norms_r: list[float]
    sub_nodes: np.ndarray
    sup_nodes: np.ndarray

    @property
    def ok(self) -> bool:
        return self.sub_violation <= self.tol and self.sup_violation <= self.tol


def verify_pair(pair: SubSuperPair, prob: NonlocalProblem, probe_count: int = 8, tol: float = 1e-8) -> PairReport:
    """Check both weak inequalities against every nonnegative nodal test function.

    A nonnegative nodal test function is a nonnegative combination of hat
    functions, so testing each interior hat suffices.  The weight ``w`` enters
    only through ``A(x, |w|_r)``; it is sampled at ``sub``, ``sup`` and
    ``probe_count`` convex combinations.  Violations are mass-scaled
    (pointwise units); positive means the inequality fails.
    """
    e = prob.exponents
    grid = pair.grid
    inner = grid.interior_mask
    lhs_sub = apply_plaplacian(pair.sub, e.p).values
    lhs_sup = apply_plaplacian(pair.sup, e.p).values
    num_sub = prob.numerator(pair.sub)
    num_sup = prob.numerator(pair.sup)
    ts = np.concatenate([[0.0, 1.0], np.linspace(0, 1, probe_count + 2)[1:-1]])
    worst_sub = worst_sup = -np.inf
    sub_nodes = sup_nodes = np.zeros((0, grid.dim), dtype=int)
    norms = []
    for t in ts:
        w = ScalarField(grid, (1 - t) * pair.sub.values + t * pair.sup.values)
        nr = luxemburg_norm(w, e.r)
        norms.append(nr)
        A = prob.eval_A(nr)
        if np.any(~(A > 0)):
            raise NonpositiveCoefficientError(f"A(x, {nr:.6g}) is not positive")
        d_sub = np.where(inner, lhs_sub - num_sub / A, -np.inf)
        d_sup = np.where(inner, num_sup / A - lhs_sup, -np.inf)
        if d_sub.max() > worst_sub:
            worst_sub = float(d_sub.max())
            sub_nodes = np.argwhere(d_sub > tol)
        if d_sup.max() > worst_sup:
            worst_sup = float(d_sup.max())
            sup_nodes = np.argwhere(d_sup > tol)
    return PairReport(worst_sub, worst_sup, tol, norms, sub_nodes, sup_nodes)
