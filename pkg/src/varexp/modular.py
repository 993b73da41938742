"""Variable-exponent Lebesgue machinery: modular, Luxemburg norm, exponent checks.

For an exponent field ``m >= 1`` the modular is ``rho_m(u) = int |u|^m(x) dx``
and the Luxemburg norm is the unique ``lam > 0`` with ``rho_m(u / lam) = 1``.
Inf/sup of an exponent are taken over grid nodes and stand in for the
essential inf/sup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .grid import Grid, ScalarField, check_same_grid, integrate

__all__ = [
    "ExponentSet",
    "H0Report",
    "check_H0",
    "modular",
    "luxemburg_norm",
    "holder_gap",
]

_EXPONENT_NAMES = ("p", "q", "r", "s", "alpha", "beta", "gamma", "eta")


def _check_exponent(m: ScalarField, name: str = "exponent") -> None:
    if m.min() < 1.0:
        raise ValueError(f"{name} must be >= 1 everywhere (min is {m.min():.6g})")


def modular(u: ScalarField, m: ScalarField) -> float:
    """``int |u|^m(x) dx`` by trapezoidal quadrature."""
    check_same_grid(u, m)
    _check_exponent(m)
    return integrate(ScalarField(u.grid, np.abs(u.values) ** m.values))


def _scaled_modular(absu: np.ndarray, m: np.ndarray, w: np.ndarray, lam: float) -> float:
    return float(np.sum((w * (absu / lam) ** m).ravel()))


def luxemburg_norm(u: ScalarField, m: ScalarField, rtol: float = 1e-13) -> float:
    """Luxemburg norm ``inf{lam > 0 : rho_m(u/lam) <= 1}``.

    The scaled modular is continuous and strictly decreasing in ``lam``, so the
    norm is found by bracketing (doubling/halving from 1) and bisection.
    """
    check_same_grid(u, m)
    _check_exponent(m)
    absu = np.abs(u.values)
    w = u.grid.weights
    if not np.any(absu * w > 0):
        return 0.0
    m = m.values

    def rho(lam):
        return _scaled_modular(absu, m, w, lam)

    lo = hi = 1.0
    if rho(1.0) > 1.0:
        while rho(hi) > 1.0:
            lo, hi = hi, 2.0 * hi
    else:
        while rho(lo) <= 1.0:
            hi, lo = lo, 0.5 * lo
    # invariant: rho(lo) > 1 >= rho(hi)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class ExponentSet:
    """The exponent functions of the nonlocal problem, sampled on one grid.

    ``p`` drives the operator; ``q``, ``r``, ``s`` index the Lebesgue norms in
    the nonlocal terms; ``alpha``, ``gamma`` raise those norms; ``beta`` and
    ``eta`` are the pointwise powers used by the applications.
    """

    p: ScalarField
    q: ScalarField
    r: ScalarField
    s: ScalarField
    alpha: ScalarField
    beta: ScalarField
    gamma: ScalarField
    eta: ScalarField

    def __post_init__(self):
        check_same_grid(*(getattr(self, f.name) for f in fields(self)))

    @classmethod
    def build(cls, grid: Grid, p, q=2.0, r=2.0, s=2.0, alpha=0.0, beta=0.0, gamma=0.0, eta=0.0):
        """Assemble from constants, callables of the coordinates, or fields."""

        def as_field(v):
            if isinstance(v, ScalarField):
                return v
            if callable(v):
                return grid.sample(v)
            return grid.constant(v)

        return cls(*(as_field(v) for v in (p, q, r, s, alpha, beta, gamma, eta)))

    @property
    def grid(self) -> Grid:
        return self.p.grid

    def inf(self, name: str) -> float:
        return getattr(self, name).min()

    def sup(self, name: str) -> float:
        return getattr(self, name).max()

    @property
    def p_minus(self) -> float:
        return self.p.min()

    @property
    def p_plus(self) -> float:
        return self.p.max()


@dataclass
class H0Report:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_if_failed(self) -> None:
        if self.errors:
            raise ValueError("; ".join(self.errors))


def check_H0(e: ExponentSet, N: int | None = None) -> H0Report:
    """Check the standing exponent hypotheses.

    Hard failures: ``p_minus <= 1``, any of ``q, r, s`` below 1, any negative
    ``alpha``, ``gamma``, ``beta`` or ``eta``.  ``p_plus >= N`` only warns:
    the discrete solver is well posed without it.
    """
    N = e.grid.dim if N is None else N
    rep = H0Report()
    if not e.p_minus > 1.0:
        rep.errors.append(f"H0: need 1 < p_minus, got p_minus = {e.p_minus:.6g}")
    for name in ("q", "r", "s"):
        if e.inf(name) < 1.0:
            rep.errors.append(f"H0: need {name} >= 1 everywhere, got min {name} = {e.inf(name):.6g}")
    for name in ("alpha", "gamma", "beta", "eta"):
        if e.inf(name) < 0.0:
            rep.errors.append(f"H0: need {name} >= 0 everywhere, got min {name} = {e.inf(name):.6g}")
    if e.p_plus >= N:
        rep.warnings.append(f"p⁺ ≥ N: p_plus = {e.p_plus:.6g}, N = {N} (embedding clause not met)")
    return rep


def holder_gap(u: ScalarField, v: ScalarField, m: ScalarField, m_conj: ScalarField) -> float:
    """Slack in the variable-exponent Holder inequality.

    Returns ``(1/m_minus + 1/m'_minus) |u|_m |v|_m' - |int u v|``; a negative
    value would mean the inequality fails.
    """
    check_same_grid(u, v, m, m_conj)
    if np.max(np.abs(1.0 / m.values + 1.0 / m_conj.values - 1.0)) > 1e-10:
        raise ValueError("exponents are not conjugate: 1/m + 1/m' != 1")
    if not m.min() > 1.0:
        raise ValueError("need m_minus > 1")
    lhs = abs(integrate(u * v))
    rhs = (1.0 / m.min() + 1.0 / m_conj.min()) * luxemburg_norm(u, m) * luxemburg_norm(v, m_conj)
    return rhs - lhs


def norm_power(norm: float, power: ScalarField) -> np.ndarray:
    """``norm ** power(x)`` nodewise with the convention ``0**0 = 1``."""
    if norm == 0.0:
        return np.where(power.values == 0.0, 1.0, 0.0)
    return np.exp(power.values * math.log(norm))
