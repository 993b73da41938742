"""End-to-end pipelines for the three model problems.

Each ``run_*`` function builds the sub-supersolution pair with the selectors
of :mod:`varexp.constructions`, checks it with :func:`verify_pair` and then
runs the fixed-point iteration between the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .constructions import (
    SelectionError,
    bracket_constant,
    build_logistic_z0,
    coefficient_range,
    concave_cbar,
    select_k_sublinear,
    select_lambda0_logistic,
    select_lambda_sublinear,
    select_M_concave,
)
from .modular import ExponentSet, luxemburg_norm
from .plaplace import torsion
from .subsuper import (
    NonlocalProblem,
    PairReport,
    SolveReport,
    SolverOptions,
    SubSuperPair,
    fixed_point,
    verify_pair,
)

__all__ = [
    "ApplicationResult",
    "power_nonlinearity",
    "sublinear_problem",
    "concave_convex_problem",
    "run_sublinear",
    "run_concave_convex",
    "run_logistic",
    "run_custom",
]

log = logging.getLogger(__name__)


@dataclass
class ApplicationResult:
    name: str
    problem: NonlocalProblem
    pair: SubSuperPair
    params: dict
    pair_report: PairReport
    solve: SolveReport | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.pair_report.ok and self.solve is not None
                and self.solve.converged and self.solve.ordering_ok)


def power_nonlinearity(expo):
    """``f(x, t) = |t|^(e(x) - 1) t`` for an exponent field ``expo``."""
    vals = np.asarray(expo.values, dtype=float)

    def f(x, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * np.abs(t) ** vals
    return f


def sublinear_problem(exponents: ExponentSet, A) -> NonlocalProblem:
    """``-A(x, |u|_r) Delta_p u = u^beta |u|_q^alpha``."""
    return NonlocalProblem(exponents.grid, exponents, A=A, f=power_nonlinearity(exponents.beta))


def concave_convex_problem(exponents: ExponentSet, A, lam: float, theta: float) -> NonlocalProblem:
    """``-A Delta_p u = lam u^beta |u|_q^alpha + theta u^eta |u|_s^gamma``."""
    return NonlocalProblem(exponents.grid, exponents, A=A, f=power_nonlinearity(exponents.beta),
                           g=power_nonlinearity(exponents.eta), lambda_scale=lam, theta_scale=theta)


def _finish(name, prob, pair, params, tol_fp, max_outer, relaxation, opts, notes=None):
    report = verify_pair(pair, prob)
    if not report.ok:
        log.warning("%s: pair check failed (sub %.3e, sup %.3e)", name, report.sub_violation, report.sup_violation)
    solve = fixed_point(prob, pair, tol_fp=tol_fp, max_outer=max_outer, opts=opts, relaxation=relaxation)
    return ApplicationResult(name, prob, pair, params, report, solve, notes or [])


def run_sublinear(prob: NonlocalProblem, a0: float = 1.0, case: str = "A1", a_inf: float | None = None,
                  K_knob: float = 2.0, delta: float | None = None, tol_fp: float = 1e-6,
                  max_outer: int = 200, relaxation: float | str = 1.0,
                  opts: SolverOptions | None = None) -> ApplicationResult:
    """Sub-supersolution pair ``(mu phi, z_lam)`` and fixed point for the sublinear problem.

    Case ``"A1"`` assumes ``A >= a0``; the torsion level ``lam`` is chosen
    first and ``phi`` is then fitted under ``max A`` over ``[0, |z_lam|_r]``.
    Case ``"A2"`` assumes ``0 < A <= a0`` with ``A -> a_inf``; ``phi`` is
    fitted under ``a0`` first and ``lam`` then uses the bracket constant.
    """
    e = prob.exponents
    params: dict = {"case": case, "a0": a0}
    if case == "A1":
        lc = select_lambda_sublinear(prob, K_knob=K_knob, a0=a0)
        A_lam = coefficient_range(prob, 0.0, luxemburg_norm(lc.z, e.r))[1]
        ks = select_k_sublinear(prob, A_lam, delta=delta)
        params["A_lambda"] = A_lam
    elif case == "A2":
        if a_inf is None:
            raise ValueError("case A2 needs a_inf")
        ks = select_k_sublinear(prob, a0, delta=delta)
        bc = bracket_constant(prob, luxemburg_norm(ks.sub, e.r), a_inf)
        lc = select_lambda_sublinear(prob, K_knob=K_knob, a0=bc.value)
        params.update(A_k=bc.value, m_k=bc.m, a1=bc.a1)
    else:
        raise ValueError(f"unknown case {case!r}")
    kp = ks.params
    params.update(k=kp.k, sigma=kp.sigma, mu=kp.mu, delta=kp.delta, a=kp.a, lam=lc.lam, K=lc.K,
                  K_raised=lc.K_raised)
    pair = SubSuperPair(ks.sub, lc.z)
    return _finish("sublinear", prob, pair, params, tol_fp, max_outer, relaxation, opts)


def run_concave_convex(prob: NonlocalProblem, a0: float, b0: float, K_knob: float = 1.05,
                       delta: float | None = None, tol_fp: float = 1e-6, max_outer: int = 200,
                       relaxation: float | str = 1.0, opts: SolverOptions | None = None,
                       max_rounds: int = 20) -> ApplicationResult:
    """Pair ``(mu phi, z_M)`` for the concave-convex problem under ``0 < A <= a0``, ``A -> b0``.

    ``lam`` and ``theta`` are taken from the problem's scales.  Raises
    :class:`SelectionError` when ``psi(M) > 1`` (``theta`` too large) or
    ``M < 1``.
    """
    e = prob.exponents
    lam, theta = prob.lambda_scale, prob.theta_scale
    ks = select_k_sublinear(prob, a0, delta=delta)
    bc = bracket_constant(prob, luxemburg_norm(ks.sub, e.r), b0)
    K = float(K_knob)
    if not K > 1:
        raise ValueError("K_knob must exceed 1")
    for _ in range(max_rounds):
        Cbar = concave_cbar(e, K)
        choice = select_M_concave(lam, theta, e, bc.value, Cbar)
        if not choice.admissible:
            raise SelectionError(f"psi(M) = {choice.psi_M:.6g} > 1: theta={theta:g} is too large for lam={lam:g}")
        if choice.M < 1:
            raise SelectionError(f"M = {choice.M:.6g} < 1: decrease theta")
        z = torsion(choice.M, e.p)
        need = z.max() / choice.M ** (1 / (e.p_minus - 1))
        if need <= K:
            break
        K = need * (1 + 1e-9)
    else:
        raise SelectionError("K did not stabilise")
    kp = ks.params
    params = {"lam": lam, "theta": theta, "a0": a0, "b0": b0, "k": kp.k, "sigma": kp.sigma, "mu": kp.mu,
              "delta": kp.delta, "A_lambda": bc.value, "a1": bc.a1, "K": K, "Cbar": Cbar,
              "M": choice.M, "L": choice.L, "psi_M": choice.psi_M}
    pair = SubSuperPair(ks.sub, z)
    return _finish("concave-convex", prob, pair, params, tol_fp, max_outer, relaxation, opts)


def run_logistic(prob: NonlocalProblem, theta: float = 1.0, lambda_tilde: float | None = None,
                 lam: float | None = None, tol_fp: float = 1e-6, max_outer: int = 400,
                 relaxation: float | str = "auto", opts: SolverOptions | None = None) -> ApplicationResult:
    """Pair ``(z0, theta)`` for the logistic problem at ``lam`` (``lam0`` by default).

    The fixed-point iteration is relaxed by default: ``f`` decreases near
    ``theta`` and plain Picard iteration tends to oscillate.
    """
    seed = build_logistic_z0(prob, theta, lambda_tilde)
    if not seed.ok:
        raise SelectionError(f"logistic seed rejected: {seed.message}")
    choice = select_lambda0_logistic(seed, prob, theta)
    notes = []
    if lam is None:
        lam = choice.lam0
    elif lam < choice.lam0:
        notes.append(f"lam={lam:g} is below lam0={choice.lam0:g}; the pair may fail")
    scaled = prob.with_scales(lambda_scale=lam)
    pair = SubSuperPair(seed.z0, prob.grid.constant(theta))
    params = {"theta": theta, "lambda_tilde": seed.lambda_tilde, "J_z0": seed.energy,
              "J_probe": seed.probe_energy, "C": choice.C, "A0": choice.A0, "mu0": choice.mu0,
              "lam0": choice.lam0, "lam": lam}
    return _finish("logistic", scaled, pair, params, tol_fp, max_outer, relaxation, opts, notes)


def run_custom(prob: NonlocalProblem, pair: SubSuperPair, tol_fp: float = 1e-6, max_outer: int = 200,
               relaxation: float | str = 1.0, opts: SolverOptions | None = None) -> ApplicationResult:
    """Verify a user-supplied pair and iterate between it."""
    params = {"lam": prob.lambda_scale, "theta": prob.theta_scale}
    return _finish("custom", prob, pair, params, tol_fp, max_outer, relaxation, opts)
