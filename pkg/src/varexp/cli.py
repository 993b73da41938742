"""Command-line driver: read an INI config, run one application, write CSV and summary files.

Exit codes: 0 when the fixed point converged and stayed ordered, 2 when an
iteration or a parameter search did not converge, 1 for configuration errors
(including failed exponent hypotheses, reported with an ``H0:`` prefix).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .applications import (
    ApplicationResult,
    concave_convex_problem,
    run_concave_convex,
    run_custom,
    run_logistic,
    run_sublinear,
    sublinear_problem,
)
from .constructions import SelectionError
from .expr import ExprError, Node, parse_expr
from .grid import distance_field, make_grid
from .modular import ExponentSet, check_H0, luxemburg_norm
from .plaplace import ConvergenceError, torsion
from .subsuper import NonlocalProblem, SolverOptions, SubSuperPair

log = logging.getLogger("varexp")

APPS = ("sublinear", "concave-convex", "logistic", "custom")
EXPONENTS = ("p", "q", "r", "s", "alpha", "beta", "gamma", "eta")
PRESETS = {
    "sinusoidal": "1.8 + 0.1*sin(pi*x1)",
    "oscillating": "1.9 + 0.05*sin(2*pi*x1)",
    "quadratic": "2",
}
SECTIONS = {
    "domain": {"dim", "extents", "n"},
    "exponents": set(EXPONENTS),
    "coefficients": {"a", "f", "g"},
    "application": {"name", "case", "a0", "a_inf", "b0", "k_knob", "lambda", "theta", "theta_cap",
                    "lambda_tilde", "delta"},
    "pair": {"sub", "sup", "sup_torsion"},
    "solver": {"tol_fp", "max_outer", "inner_tol", "eps_reg", "max_inner", "relaxation"},
    "output": {"dir"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    source: str
    dim: int
    extents: list
    n: tuple
    exponents: dict
    A: Node
    f: Node | None
    g: Node | None
    app: str
    knobs: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    pair: dict = field(default_factory=dict)
    out_dir: str | None = None


def resolve_config(name: str) -> Path:
    """A filesystem path, or the stem of a bundled config such as ``sublinear``."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("varexp") / "configs" / f"{path.stem if path.suffix == '.ini' else name}.ini"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")


def bundled_configs() -> list[str]:
    folder = resources.files("varexp") / "configs"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".ini"))


def _float(sec, key, default=None):
    if key not in sec:
        if default is None:
            return None
        return float(default)
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"{key} = {sec[key]!r} is not a number") from None


def _expr(text, scope, where):
    try:
        return parse_expr(PRESETS.get(text.strip(), text), scope)
    except ExprError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(name: str) -> RunConfig:
    path = resolve_config(name)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - SECTIONS[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    for sec in ("domain", "exponents", "coefficients", "application"):
        if sec not in cp:
            raise ConfigError(f"missing section [{sec}]")

    dom = cp["domain"]
    dim = int(dom.get("dim", "1"))
    if dim not in (1, 2):
        raise ConfigError("dim must be 1 or 2")
    try:
        ext = [tuple(float(v) for v in part.split()) for part in dom.get("extents", "0 1").split(",")]
        n = tuple(int(v) for v in dom.get("n", "65").replace(",", " ").split())
    except ValueError:
        raise ConfigError("extents and n must be numbers") from None
    if len(ext) != dim or any(len(e) != 2 for e in ext):
        raise ConfigError(f"extents needs {dim} 'lo hi' pair(s) separated by commas")
    if len(n) not in (1, dim):
        raise ConfigError(f"n needs 1 or {dim} values")

    xs = ("x1",) if dim == 1 else ("x1", "x2")
    ex = cp["exponents"]
    if "p" not in ex:
        raise ConfigError("[exponents] needs p")
    exps = {k: _expr(ex[k], xs, f"exponents.{k}") for k in EXPONENTS if k in ex}

    co = cp["coefficients"]
    if "a" not in co:
        raise ConfigError("[coefficients] needs A")
    xt = xs + ("t",)
    A = _expr(co["a"], xt, "coefficients.A")
    f = _expr(co["f"], xt, "coefficients.f") if "f" in co else None
    g = _expr(co["g"], xt, "coefficients.g") if "g" in co else None

    ap = cp["application"]
    app = ap.get("name", "").strip()
    knobs = {k: _float(ap, k) for k in SECTIONS["application"] - {"name", "case"} if k in ap}
    knobs["case"] = ap.get("case", "A1").strip()

    solver = {}
    if "solver" in cp:
        sv = cp["solver"]
        for k in ("tol_fp", "inner_tol", "eps_reg"):
            if k in sv:
                solver[k] = _float(sv, k)
        for k in ("max_outer", "max_inner"):
            if k in sv:
                solver[k] = int(sv[k])
        if "relaxation" in sv:
            rel = sv["relaxation"].strip()
            solver["relaxation"] = rel if rel == "auto" else float(rel)

    pair = {}
    if "pair" in cp:
        pr = cp["pair"]
        for k in ("sub", "sup"):
            if k in pr:
                pair[k] = _expr(pr[k], xs, f"pair.{k}")
        if "sup_torsion" in pr:
            pair["sup_torsion"] = _float(pr, "sup_torsion")
    out_dir = cp["output"].get("dir") if "output" in cp else None
    return RunConfig(str(path), dim, ext, n if len(n) == dim else n * dim, exps, A, f, g, app,
                     knobs, solver, pair, out_dir)


def _coefficient(node: Node, dim: int):
    names = ("x1", "x2")[:dim]

    def fn(x, t):
        env = dict(zip(names, x))
        env["t"] = t
        return node.evaluate(env)
    return fn


def _nodal(node: Node, grid):
    env = dict(zip(("x1", "x2"), grid.coords))
    return grid.field(np.broadcast_to(np.asarray(node.evaluate(env), dtype=float), grid.shape))


def execute(cfg: RunConfig) -> ApplicationResult:
    """Build the problem described by ``cfg`` and run its pipeline."""
    if cfg.app not in APPS:
        raise ConfigError(f"application must be one of {', '.join(APPS)}; got {cfg.app!r}")
    grid = make_grid(cfg.dim, cfg.extents if cfg.dim == 2 else cfg.extents[0], cfg.n)
    e = ExponentSet.build(grid, **{k: _nodal(v, grid) for k, v in cfg.exponents.items()})
    h0 = check_H0(e)
    if not h0.ok:
        raise ConfigError("; ".join(h0.errors))
    for w in h0.warnings:
        log.warning(w)
    A = _coefficient(cfg.A, cfg.dim)
    kn = cfg.knobs
    sv = cfg.solver
    tol_fp = sv.get("tol_fp", 1e-6)
    opts = SolverOptions(eps_reg=sv.get("eps_reg", 1e-8), tol=sv.get("inner_tol", tol_fp / 10),
                         max_iter=sv.get("max_inner", 200))
    common = {"tol_fp": tol_fp, "max_outer": sv.get("max_outer", 200), "opts": opts}
    if "relaxation" in sv:
        common["relaxation"] = sv["relaxation"]

    def need(key):
        if kn.get(key) is None:
            raise ConfigError(f"[application] {cfg.app} needs {key}")
        return kn[key]

    if cfg.app == "sublinear":
        prob = sublinear_problem(e, A)
        return run_sublinear(prob, a0=need("a0"), case=kn["case"], a_inf=kn.get("a_inf"),
                             K_knob=kn.get("k_knob", 2.0), delta=kn.get("delta"), **common)
    if cfg.app == "concave-convex":
        if kn.get("theta") is not None or kn.get("theta_cap") is None:
            thetas = [need("theta")]
        else:
            # no theta given: halve down from theta_cap until the supersolution exists
            thetas = [kn["theta_cap"] * 0.5**j for j in range(64)]
        for theta in thetas:
            prob = concave_convex_problem(e, A, need("lambda"), theta)
            try:
                return run_concave_convex(prob, a0=need("a0"), b0=need("b0"), K_knob=kn.get("k_knob", 1.05),
                                          delta=kn.get("delta"), **common)
            except SelectionError as exc:
                if "too large" not in str(exc) or theta == thetas[-1]:
                    raise
    if cfg.app == "logistic":
        if cfg.f is None:
            raise ConfigError("[coefficients] logistic needs f")
        prob = NonlocalProblem(grid, e, A=A, f=_coefficient(cfg.f, cfg.dim))
        common.setdefault("max_outer", 400)
        return run_logistic(prob, theta=kn.get("theta", 1.0), lambda_tilde=kn.get("lambda_tilde"),
                            lam=kn.get("lambda"), **common)
    # custom
    if cfg.f is None:
        raise ConfigError("[coefficients] custom needs f")
    prob = NonlocalProblem(grid, e, A=A, f=_coefficient(cfg.f, cfg.dim),
                           g=None if cfg.g is None else _coefficient(cfg.g, cfg.dim),
                           lambda_scale=kn.get("lambda", 1.0), theta_scale=kn.get("theta", 1.0))
    if "sub" not in cfg.pair:
        raise ConfigError("[pair] custom needs sub")
    sub = _nodal(cfg.pair["sub"], grid)
    if "sup" in cfg.pair:
        sup = _nodal(cfg.pair["sup"], grid)
    elif cfg.pair.get("sup_torsion"):
        sup = torsion(cfg.pair["sup_torsion"], e.p)
    else:
        raise ConfigError("[pair] custom needs sup or sup_torsion")
    return run_custom(prob, SubSuperPair(sub, sup), **common)


# ----------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(res: ApplicationResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    grid = res.problem.grid
    s = res.solve
    cols = [c.ravel() for c in grid.coords]
    cols += [s.solution.values.ravel(), res.pair.sub.values.ravel(), res.pair.sup.values.ravel(),
             distance_field(grid).values.ravel()]
    head = ["x1", "x2"][: grid.dim] + ["u", "sub", "sup", "distance"]
    np.savetxt(out / "solution.csv", np.column_stack(cols), fmt="%.17g", delimiter=",",
               header=",".join(head), comments="")
    trace = np.column_stack([np.arange(1, len(s.residual_trace) + 1), s.residual_trace,
                             s.inner_iterations, s.rhs_trace]) if s.residual_trace else np.zeros((0, 4))
    np.savetxt(out / "trace.csv", trace, fmt=["%d", "%.17g", "%d", "%.17g"], delimiter=",",
               header="iter,fp_residual,inner_iters,K0", comments="")


def write_summary(path: Path, entries: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in entries.items()))


def run(cfg: RunConfig, out: Path, quiet: bool = False) -> int:
    """Execute one config and write its artifacts into ``out``; returns the exit code."""
    t0 = time.perf_counter()
    summary: dict = {"config": cfg.source, "application": cfg.app}
    try:
        res = execute(cfg)
    except (ConfigError, ExprError) as exc:
        msg = str(exc)
        if not msg.startswith("H0:"):
            msg = f"config: {msg}"
        _report(msg, quiet, error=True)
        write_summary(out / "summary.txt", {**summary, "status": "config-error", "message": msg, "exit_code": 1})
        return 1
    except (SelectionError, ConvergenceError) as exc:
        _report(f"no convergence: {exc}", quiet, error=True)
        write_summary(out / "summary.txt", {**summary, "status": "selection-failed", "message": str(exc),
                                            "partial": True, "exit_code": 2})
        return 2
    except ValueError as exc:
        _report(f"config: {exc}", quiet, error=True)
        write_summary(out / "summary.txt", {**summary, "status": "config-error", "message": str(exc), "exit_code": 1})
        return 1
    s = res.solve
    code = 0 if (s.converged and s.ordering_ok) else 2
    write_outputs(res, out)
    e = res.problem.exponents
    u = s.solution
    summary.update({
        "status": "ok" if code == 0 else "not-converged",
        "exit_code": code,
        "partial": code != 0,
        "converged": s.converged,
        "ordering_ok": s.ordering_ok,
        "iterations": s.iterations,
        "fp_residual": s.residual_trace[-1] if s.residual_trace else float("nan"),
        "K0": s.K0,
        "K0_bound": s.K0_bound,
        "pair_ok": res.pair_report.ok,
        "sub_violation": res.pair_report.sub_violation,
        "sup_violation": res.pair_report.sup_violation,
        "u_max": u.max(),
        "u_norm_q": luxemburg_norm(u, e.q),
        "u_norm_r": luxemburg_norm(u, e.r),
        "u_norm_s": luxemburg_norm(u, e.s),
    })
    summary.update({f"param.{k}": v for k, v in res.params.items()})
    if s.message:
        summary["message"] = s.message
    for i, note in enumerate(res.notes):
        summary[f"note.{i}"] = note
    summary["wall_time"] = time.perf_counter() - t0
    write_summary(out / "summary.txt", summary)
    _report(f"{cfg.app}: {summary['status']} after {s.iterations} iterations "
            f"(residual {summary['fp_residual']:.3e}, ordering_ok={s.ordering_ok}) -> {out}", quiet)
    return code


def _report(msg, quiet, error=False):
    if error:
        print(msg, file=sys.stderr)
    elif not quiet:
        print(msg)


def _worker(name, app, out, quiet):
    try:
        cfg = load_config(name)
    except ConfigError as exc:
        _report(f"config: {exc}", quiet, error=True)
        return 1
    if app:
        cfg.app = app
    return run(cfg, Path(out), quiet)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VAREXP_THREADS", "1")))
    except ValueError:
        return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="varexp", description=__doc__.splitlines()[0])
    ap.add_argument("--config", action="append", required=True,
                    help="INI file or bundled name (%s); repeatable" % ", ".join(bundled_configs()))
    ap.add_argument("--out", default=None, help="output directory (default: [output] dir or ./varexp-out)")
    ap.add_argument("--app", choices=APPS, help="override [application] name")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")

    if len(args.config) == 1:
        name = args.config[0]
        try:
            cfg = load_config(name)
        except ConfigError as exc:
            _report(f"config: {exc}", args.quiet, error=True)
            return 1
        if args.app:
            cfg.app = args.app
        return run(cfg, Path(args.out or cfg.out_dir or "varexp-out"), args.quiet)

    # several configs: one sub-directory each, optionally in parallel
    base = Path(args.out or "varexp-out")
    jobs = [(name, args.app, str(base / Path(name).stem), args.quiet) for name in args.config]
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_worker, *zip(*jobs)))
    else:
        codes = [_worker(*job) for job in jobs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
