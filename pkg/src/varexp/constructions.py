"""Explicit sub- and supersolutions and the parameter choices that make them work.

* the boundary-layer profile ``phi`` and the subsolution ``mu * phi``;
* torsion supersolutions ``z_lam`` with the power-of-two choice of ``lam``;
* the closed-form minimiser ``M`` of the concave-convex admissibility function;
* the logistic seed ``z0`` (a minimiser of the truncated energy) and its ``lam0``.

Every selector returns the inputs it used so the choice can be audited, and
all of them fail loudly with diagnostics rather than returning a guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .grid import Grid, ScalarField, distance_field, gradient
from .modular import ExponentSet, luxemburg_norm, norm_power
from .plaplace import _Load, _minimize, apply_plaplacian, energy, torsion
from .subsuper import NonlocalProblem

__all__ = [
    "SelectionError",
    "PhiParams",
    "build_phi",
    "KSelection",
    "select_k_sublinear",
    "lhopital_ratio",
    "smallest_power_of_two",
    "LambdaChoice",
    "select_lambda_sublinear",
    "coefficient_range",
    "BracketConstant",
    "bracket_constant",
    "ConcaveExponents",
    "ConcaveChoice",
    "psi",
    "concave_cbar",
    "select_M_concave",
    "check_logistic_f",
    "LogisticSeed",
    "build_logistic_z0",
    "Lambda0Choice",
    "select_lambda0_logistic",
]

_T_SAMPLES = 1024


class SelectionError(ValueError):
    """A parameter search hit its cap; ``trials`` records what blocked it."""

    def __init__(self, msg, trials=None):
        super().__init__(msg)
        self.trials = trials or []


def _max_grad_norm(p: ScalarField) -> float:
    comps = gradient(p)
    return float(np.max(np.sqrt(sum(c**2 for c in comps))))


# ----------------------------------------------------------------------------
# boundary-layer subsolution


@dataclass(frozen=True)
class PhiParams:
    """Parameters of the boundary-layer profile.

    Use :meth:`from_k`; ``sigma``, ``mu`` and ``a`` are derived from ``k``
    and the exponent ``p``.
    """

    k: float
    delta: float
    sigma: float
    mu: float
    a: float
    p_minus: float
    p_plus: float

    def __post_init__(self):
        if not self.k > 0 or not self.delta > 0:
            raise ValueError("k and delta must be positive")
        if not 0 < self.sigma < self.delta:
            raise ValueError(f"need 0 < sigma < delta, got sigma={self.sigma:.4g}, delta={self.delta:.4g}")
        if not self.p_minus > 1:
            raise ValueError("p_minus must exceed 1")

    @classmethod
    def from_k(cls, k: float, p: ScalarField, delta: float | None = None) -> "PhiParams":
        grid = p.grid
        delta = grid.inradius / 4 if delta is None else float(delta)
        if not 3 * delta < grid.inradius:
            raise ValueError(f"3*delta = {3 * delta:.4g} must be below the inradius {grid.inradius:.4g}")
        p_minus, p_plus = p.min(), p.max()
        a = (p_minus - 1) / (_max_grad_norm(p) + 1)
        sigma = math.log(2.0) / (p_plus * k)
        return cls(k=float(k), delta=delta, sigma=sigma, mu=math.exp(-a * k), a=a,
                   p_minus=p_minus, p_plus=p_plus)

    @property
    def exponent(self) -> float:
        """The power ``2/(p_minus - 1)`` in the middle branch."""
        return 2.0 / (self.p_minus - 1)

    def profile(self, d: np.ndarray) -> np.ndarray:
        """``phi`` as a function of the boundary distance."""
        d = np.asarray(d, dtype=float)
        k, s, dl, m = self.k, self.sigma, self.delta, self.exponent
        base = math.expm1(k * s)
        c = 2 * dl - s
        lead = k * math.exp(k * s) * c / (m + 1)
        # closed form of int_s^d k e^{ks} ((2dl - t)/c)^m dt
        mid = base + lead * (1 - (np.clip(2 * dl - d, 0, None) / c) ** (m + 1))
        return np.where(d < s, np.expm1(k * d), np.where(d < 2 * dl, mid, base + lead))


def build_phi(params: PhiParams, grid: Grid, p: ScalarField | None = None) -> ScalarField:
    """Evaluate the boundary-layer profile at every node.

    The middle-branch integral is evaluated in closed form; it is a power of
    an affine function, so no quadrature error is incurred.
    """
    if not 3 * params.delta < grid.inradius:
        raise ValueError(f"3*delta = {3 * params.delta:.4g} must be below the inradius {grid.inradius:.4g}")
    if p is not None and abs(p.min() - params.p_minus) > 1e-12:
        raise ValueError("params were built for a different exponent")
    return ScalarField(grid, params.profile(distance_field(grid).values))


@dataclass
class KSelection:
    params: PhiParams
    sub: ScalarField
    trials: list[dict] = field(default_factory=list)


def _sub_checks(prob: NonlocalProblem, params: PhiParams, A_upper: float, rhs_cap: float) -> tuple[ScalarField, dict]:
    grid = prob.grid
    e = prob.exponents
    sub = params.mu * build_phi(params, grid)
    inner = grid.interior_mask
    lhs = apply_plaplacian(sub, e.p).values
    rhs = prob.numerator(sub) / A_upper
    d = distance_field(grid).values
    strip = (d > params.sigma) & (d < params.delta)
    info = {
        "k": params.k,
        "sigma_lt_delta": params.sigma < params.delta,
        "k_mu_le_1": params.k * params.mu <= 1,
        "sub_margin": float(np.max((lhs - rhs)[inner])),
        "cap_margin": float(np.max(lhs[inner]) - rhs_cap),
        "strip_max": float(np.max(sub.values[strip], initial=0.0)),
        "positive": bool(np.all(sub.values[inner] > 0)),
    }
    info["ok"] = (info["sigma_lt_delta"] and info["k_mu_le_1"] and info["sub_margin"] <= 0
                  and info["cap_margin"] <= 0 and info["strip_max"] <= 1 and info["positive"])
    return sub, info


def select_k_sublinear(prob: NonlocalProblem, A_upper: float, rhs_cap: float = 1.0,
                       delta: float | None = None, k_start: float = 1.0, k_cap: float = 2.0**16) -> KSelection:
    """Double ``k`` until ``mu * phi`` is a discrete subsolution.

    Accepted when, at every interior node, ``-Delta_p(mu phi)`` is at most
    the problem's numerator at ``mu phi`` divided by ``A_upper`` (an upper
    bound of ``A`` over the relevant norm bracket) and at most ``rhs_cap``,
    ``mu phi <= 1`` on the strip ``sigma < d < delta`` and ``k mu <= 1``.
    """
    e = prob.exponents
    if not e.sup("alpha") + e.sup("beta") < e.p_minus - 1:
        raise ValueError("need alpha+ + beta+ < p- - 1")
    if not A_upper > 0:
        raise ValueError("A_upper must be positive")
    trials = []
    k = float(k_start)
    while k <= k_cap:
        try:
            params = PhiParams.from_k(k, e.p, delta)
        except ValueError as exc:
            if "inradius" in str(exc):
                raise
            trials.append({"k": k, "ok": False, "error": str(exc)})
            k *= 2
            continue
        sub, info = _sub_checks(prob, params, A_upper, rhs_cap)
        trials.append(info)
        if info["ok"]:
            return KSelection(params, sub, trials)
        k *= 2
    last = trials[-1] if trials else {}
    blocked = [name for name in ("sub_margin", "cap_margin") if last.get(name, 0) > 0]
    if last.get("strip_max", 0) > 1:
        blocked.append("strip bound")
    if not last.get("positive", True):
        blocked.append("positivity (mu*phi underflows)")
    raise SelectionError(f"no admissible k up to {k_cap:g}; blocked by {', '.join(blocked) or 'parameter invariants'}",
                         trials)


def lhopital_ratio(k, p_minus: float, ab_plus: float, a: float, C: float = 1.0):
    """``C k^(p-1) / e^(a k (p-1-ab)) * |ln(k / e^(a k))|``; tends to 0 as k grows."""
    k = np.asarray(k, dtype=float)
    return C * k ** (p_minus - 1) * np.exp(-a * k * (p_minus - 1 - ab_plus)) * np.abs(np.log(k) - a * k)


# ----------------------------------------------------------------------------
# torsion supersolutions


def smallest_power_of_two(c: float, s: float, j_max: int = 1023) -> float:
    """Smallest ``lam = 2^j > 1`` with ``c * lam^s <= lam``, for ``0 <= s < 1``."""
    if not 0 <= s < 1:
        raise ValueError("s must lie in [0, 1)")
    if not c > 0:
        raise ValueError("c must be positive")
    # c lam^s <= lam  <=>  j (1 - s) >= log2 c; start near the answer, then walk
    j = max(1, math.floor(math.log2(c) / (1 - s)) - 1)
    while j > 1 and c * 2.0 ** (s * (j - 1)) <= 2.0 ** (j - 1):
        j -= 1
    while c * 2.0 ** (s * j) > 2.0**j:
        j += 1
        if j > j_max:
            raise OverflowError("threshold beyond double range")
    return 2.0**j


@dataclass
class LambdaChoice:
    lam: float
    K: float
    z: ScalarField
    c: float
    s: float
    K_raised: bool


def _const_norm(K: float, m: ScalarField) -> float:
    # the Luxemburg norm is homogeneous: |K|_m = K |1|_m
    return K * luxemburg_norm(m.grid.constant(1.0), m)


def select_lambda_sublinear(prob: NonlocalProblem, K_knob: float = 2.0, a0: float = 1.0,
                            max_rounds: int = 20) -> LambdaChoice:
    """Power-of-two ``lam`` for the torsion supersolution ``z_lam``.

    Picks the smallest ``lam = 2^j > 1`` with
    ``(1/a0) K^beta+ lam^((alpha+ + beta+)/(p- - 1)) max(|K|_q^alpha-, |K|_q^alpha+) <= lam``.
    The constant ``K`` must dominate ``max z_lam / lam^(1/(p- - 1))``; when the
    computed torsion function violates that, ``K`` is raised and the choice
    repeated.
    """
    e = prob.exponents
    pm = e.p_minus
    ab = e.sup("alpha") + e.sup("beta")
    if not ab < pm - 1:
        raise ValueError("need alpha+ + beta+ < p- - 1")
    if not K_knob > 1:
        raise ValueError("K_knob must exceed 1")
    if not a0 > 0:
        raise ValueError("a0 must be positive")
    s = ab / (pm - 1)
    K, raised = float(K_knob), False
    for _ in range(max_rounds):
        nK = _const_norm(K, e.q)
        c = K ** e.sup("beta") * max(nK ** e.inf("alpha"), nK ** e.sup("alpha")) / a0
        lam = smallest_power_of_two(c, s)
        z = torsion(lam, e.p)
        need = z.max() / lam ** (1 / (pm - 1))
        if need <= K:
            return LambdaChoice(lam, K, z, c, s, raised)
        K, raised = need * (1 + 1e-9), True
    raise SelectionError(f"K did not stabilise after {max_rounds} rounds (last K={K:.6g})")


# ----------------------------------------------------------------------------
# coefficient brackets


def coefficient_range(prob: NonlocalProblem, lo: float, hi: float, samples: int = _T_SAMPLES) -> tuple[float, float]:
    """Min and max of ``A`` over all nodes and ``samples`` values of t in [lo, hi]."""
    ts = np.linspace(lo, hi, samples) if hi > lo else np.array([lo])
    vals = [prob.eval_A(t) for t in ts]
    return float(min(v.min() for v in vals)), float(max(v.max() for v in vals))


@dataclass(frozen=True)
class BracketConstant:
    value: float
    m: float
    a1: float


def bracket_constant(prob: NonlocalProblem, lo: float, a_inf: float, a1: float | None = None,
                     t_max: float = 1e8, samples: int = _T_SAMPLES) -> BracketConstant:
    """``min(m, a_inf/2)`` with ``m`` the minimum of ``A`` over ``[lo, a1]``.

    ``a1`` is a point past which ``A >= a_inf/2``.  When not supplied it is
    located on a geometric t-grid up to ``t_max``.
    """
    if not a_inf > 0 or not lo > 0:
        raise ValueError("need a_inf > 0 and lo > 0")
    if a1 is None:
        ts = np.geomspace(lo, max(t_max, 2 * lo), samples)
        low = [t for t in ts if prob.eval_A(t).min() < a_inf / 2]
        a1 = float(ts[min(np.searchsorted(ts, low[-1]) + 1, len(ts) - 1)]) if low else lo
    m, _ = coefficient_range(prob, lo, max(a1, lo), samples)
    value = min(m, a_inf / 2)
    if not value > 0:
        raise ValueError(f"A is not positive on [{lo:.4g}, {a1:.4g}] (min {m:.4g})")
    return BracketConstant(value, m, a1)


# ----------------------------------------------------------------------------
# concave-convex


@dataclass(frozen=True)
class ConcaveExponents:
    """The three scalars that drive the concave-convex admissibility test."""

    p_minus: float
    ab_plus: float
    eg_plus: float

    @classmethod
    def from_set(cls, e: ExponentSet) -> "ConcaveExponents":
        return cls(e.p_minus, e.sup("alpha") + e.sup("beta"), e.sup("eta") + e.sup("gamma"))

    def check(self):
        if not self.ab_plus < self.p_minus - 1 < self.eg_plus:
            raise ValueError(
                f"need alpha+ + beta+ < p- - 1 < eta+ + gamma+, got {self.ab_plus:g}, {self.p_minus - 1:g}, {self.eg_plus:g}")
        return self

    @property
    def powers(self) -> tuple[float, float]:
        pm1 = self.p_minus - 1
        return self.ab_plus / pm1 - 1, self.eg_plus / pm1 - 1


def _as_concave(exps) -> ConcaveExponents:
    if isinstance(exps, ExponentSet):
        exps = ConcaveExponents.from_set(exps)
    elif not isinstance(exps, ConcaveExponents):
        exps = ConcaveExponents(*exps)
    return exps.check()


def psi(t, lam: float, theta: float, exps, A_lambda: float = 1.0, Cbar: float = 1.0):
    """``(lam Cbar t^e1 + theta Cbar t^e2) / A_lambda`` with ``e1 < 0 < e2``."""
    e1, e2 = _as_concave(exps).powers
    t = np.asarray(t, dtype=float)
    return Cbar * (lam * t**e1 + theta * t**e2) / A_lambda


def concave_cbar(e: ExponentSet, K: float) -> float:
    """``max(K^beta+, K^eta+) * max(|K|_q^alpha+-, |K|_s^gamma+-)``."""
    nq, ns = _const_norm(K, e.q), _const_norm(K, e.s)
    Kbar = max(nq ** e.sup("alpha"), nq ** e.inf("alpha"), ns ** e.sup("gamma"), ns ** e.inf("gamma"))
    return max(K ** e.sup("beta"), K ** e.sup("eta")) * Kbar


@dataclass(frozen=True)
class ConcaveChoice:
    M: float
    L: float
    psi_M: float
    admissible: bool


def select_M_concave(lam: float, theta: float, exps, A_lambda: float = 1.0, Cbar: float = 1.0) -> ConcaveChoice:
    """Closed-form global minimiser of ``psi`` and the admissibility flag ``psi(M) <= 1``.

    ``exps`` is an :class:`ExponentSet`, a :class:`ConcaveExponents` or a
    ``(p_minus, ab_plus, eg_plus)`` triple.
    """
    if not lam > 0 or not theta > 0:
        raise ValueError("lam and theta must be positive")
    x = _as_concave(exps)
    pm1 = x.p_minus - 1
    power = pm1 / (x.eg_plus - x.ab_plus)
    L = ((pm1 - x.ab_plus) / (x.eg_plus - pm1)) ** power
    M = L * (lam / theta) ** power
    val = float(psi(M, lam, theta, x, A_lambda, Cbar))
    return ConcaveChoice(M, L, val, val <= 1.0)


# ----------------------------------------------------------------------------
# logistic


def check_logistic_f(prob: NonlocalProblem, theta: float, samples: int = 64) -> list[str]:
    """Violations of ``f(x,0) = f(x,theta) = 0`` and ``f > 0`` on ``(0, theta)``."""
    out = []
    if np.max(np.abs(prob.eval_f(np.zeros(prob.grid.shape)))) > 1e-12:
        out.append("f(x, 0) must vanish")
    if np.max(np.abs(prob.eval_f(np.full(prob.grid.shape, theta)))) > 1e-12:
        out.append("f(x, theta) must vanish")
    for t in np.linspace(0, theta, samples + 2)[1:-1]:
        if np.min(prob.eval_f(np.full(prob.grid.shape, t))) <= 0:
            out.append(f"f must be positive on (0, theta); fails at t = {t:.4g}")
            break
    return out


class _TruncatedLoad:
    """``lam * F~`` with ``F~`` the primitive of f truncated to [0, theta]."""

    def __init__(self, prob: NonlocalProblem, theta: float, lam: float, order: int = 24):
        self.prob, self.theta, self.lam = prob, theta, lam
        self.nodes, self.wts = leggauss(order)
        self.shape = prob.grid.shape

    def f(self, u):
        u = u.reshape(self.shape)
        inside = (u >= 0) & (u <= self.theta)
        return np.where(inside, self.prob.eval_f(np.clip(u, 0, self.theta)), 0.0).ravel()

    def F(self, u):
        c = np.clip(u.reshape(self.shape), 0, self.theta)
        acc = np.zeros(self.shape)
        for s, w in zip(self.nodes, self.wts):
            acc += w * self.prob.eval_f(c * (s + 1) / 2)
        return (acc * c / 2).ravel()

    def df(self, u):
        h = 1e-6 * max(1.0, self.theta)
        return (self.f(u + h) - self.f(u - h)) / (2 * h)

    def load(self) -> _Load:
        lam = self.lam
        return _Load(lambda u: lam * self.F(u), lambda u: lam * self.f(u), lambda u: lam * self.df(u))


@dataclass
class LogisticSeed:
    z0: ScalarField
    energy: float
    probe: ScalarField
    probe_energy: float
    lambda_tilde: float
    ok: bool
    message: str = ""
    residual: float = 0.0


def default_probe(grid: Grid, theta: float) -> ScalarField:
    d = distance_field(grid).values
    return ScalarField(grid, 0.5 * theta * np.sin(0.5 * np.pi * d / d.max()))


def build_logistic_z0(prob: NonlocalProblem, theta: float, lambda_tilde: float | None = None,
                      probe: ScalarField | None = None, eps_reg: float = 1e-8, tol: float = 1e-11,
                      max_iter: int = 300) -> LogisticSeed:
    """Minimise ``J(u) = int |grad u|^p / p - lambda_tilde int F~(u)``.

    With ``lambda_tilde=None`` the smallest power of two making the probe's
    energy negative is used.  The result is flagged ``ok=False`` (not raised)
    when ``J(z0) >= 0``, i.e. ``lambda_tilde`` is too small.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    bad = check_logistic_f(prob, theta)
    if bad:
        raise ValueError("; ".join(bad))
    grid, p = prob.grid, prob.exponents.p
    probe = default_probe(grid, theta) if probe is None else probe
    elastic = energy(probe, p, 0.0)
    F_probe = float(np.sum(grid.weights.ravel() * _TruncatedLoad(prob, theta, 1.0).F(probe.values.ravel())))
    if lambda_tilde is None:
        if not F_probe > 0:
            raise ValueError("probe must have positive truncated primitive")
        lambda_tilde = 2.0 ** (math.floor(math.log2(elastic / F_probe)) + 1)
    if lambda_tilde < 0:
        raise ValueError("lambda_tilde must be nonnegative")
    probe_energy = elastic - lambda_tilde * F_probe
    load = _TruncatedLoad(prob, theta, lambda_tilde).load()
    init = probe.values if probe_energy < 0 else np.zeros(grid.shape)
    rep = _minimize(grid, p.values, load, init, eps_reg, tol * max(1.0, lambda_tilde), max_iter)
    z0 = rep.minimizer
    inner = grid.interior_mask
    msgs = []
    if not rep.converged:
        msgs.append(f"minimisation stopped at residual {rep.grad_norm:.3e}")
    if not rep.energy < 0:
        msgs.append(f"lambda_tilde={lambda_tilde:g} too small: J(z0)={rep.energy:.6g}, "
                    f"J(probe)={probe_energy:.6g}")
    elif not (np.all(z0.values[inner] > 0) and z0.max() <= theta + 1e-8 and z0.min() >= 0):
        msgs.append("z0 left (0, theta]")
    return LogisticSeed(z0, rep.energy, probe, probe_energy, float(lambda_tilde), not msgs,
                        "; ".join(msgs), rep.grad_norm)


@dataclass(frozen=True)
class Lambda0Choice:
    lam0: float
    mu0: float
    C: float
    A0: float


def select_lambda0_logistic(seed: LogisticSeed, prob: NonlocalProblem, theta: float,
                            samples: int = _T_SAMPLES) -> Lambda0Choice:
    """``lam0 = lambda_tilde * A0 / C``.

    ``C`` is the nodewise minimum of ``|z0|_q^alpha(x)`` and ``A0`` the
    maximum of ``A`` over ``t`` between ``|z0|_r`` and ``|theta|_r``.
    """
    e = prob.exponents
    z0 = seed.z0
    nq = luxemburg_norm(z0, e.q)
    if not nq > 0:
        raise ValueError("z0 vanishes identically; no positive lower bound C")
    C = float(np.min(norm_power(nq, e.alpha)))
    lo, hi = luxemburg_norm(z0, e.r), luxemburg_norm(prob.grid.constant(theta), e.r)
    a_min, A0 = coefficient_range(prob, lo, hi, samples)
    if not a_min > 0:
        raise ValueError(f"A must be positive on [{lo:.4g}, {hi:.4g}]")
    mu0 = A0 / C
    return Lambda0Choice(seed.lambda_tilde * mu0, mu0, C, A0)
