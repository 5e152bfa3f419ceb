"""Maximum (simulated) likelihood estimation and standard errors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dataset import CaseControlDataset
from .likelihood import (
    LikelihoodProblem,
    ModelSpec,
    ParameterVector,
    prepare_draws,
)
from .quasirandom import DrawMatrix

__all__ = [
    "OptimOptions",
    "OptimizeOutcome",
    "EstimationResult",
    "LineSearchError",
    "maximize_bfgs",
    "standard_errors",
    "fit",
]

log = logging.getLogger(__name__)

# information matrices less well conditioned than this are treated as singular
MAX_CONDITION = 1e10


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimOptions:
    max_iterations: int = 500
    grad_tolerance: float = 1e-5
    ll_rel_tolerance: float = 1e-8
    initial_params: ParameterVector | None = None
    hessian_step: float = 1e-4
    restarts: int = 1
    restart_scale: float = 0.1
    restart_seed: int = 0
    sigma_start: float = 0.1

    def __post_init__(self):
        if self.grad_tolerance <= 0 or self.ll_rel_tolerance <= 0 or self.hessian_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 0 or self.restarts < 1:
            raise ValueError("max_iterations must be >= 0 and restarts >= 1")


@dataclass
class OptimizeOutcome:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)


def _backtrack(f, x, fx, g, direction, c1=1e-4, shrink=0.5, max_halvings=60):
    slope = float(g @ direction)
    step = 1.0
    for _ in range(max_halvings):
        cand = x + step * direction
        fc = f(cand)
        if np.isfinite(fc) and fc >= fx + c1 * step * slope:
            return step, cand, fc
        step *= shrink
    raise LineSearchError("backtracking failed to find an ascent step")


def maximize_bfgs(
    fun_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0,
    max_iterations: int = 500,
    grad_tolerance: float = 1e-5,
    ll_rel_tolerance: float = 1e-8,
) -> OptimizeOutcome:
    """Maximize a smooth function by BFGS with Armijo backtracking.

    Stops when the gradient's infinity norm falls below ``grad_tolerance``
    or an accepted step changes the objective by less than
    ``ll_rel_tolerance`` relative to ``max(1, |f|)``.
    """
    x = np.array(x0, dtype=np.float64)
    fx, g = fun_and_grad(x)
    if not np.isfinite(fx):
        raise FloatingPointError("objective is not finite at the starting point")
    f_only = lambda z: fun_and_grad(z)[0]  # noqa: E731
    n = x.size
    H = np.eye(n)  # inverse of the negative Hessian
    history = [fx]
    if np.max(np.abs(g), initial=0.0) < grad_tolerance:
        return OptimizeOutcome(x, fx, g, 0, True, "gradient below tolerance", history)

    for it in range(1, max_iterations + 1):
        direction = H @ g
        if direction @ g <= 0:
            H = np.eye(n)
            direction = g.copy()
        try:
            step, x_new, f_new = _backtrack(f_only, x, fx, g, direction)
        except LineSearchError as exc:
            if not np.allclose(H, np.eye(n)):
                H = np.eye(n)
                try:
                    step, x_new, f_new = _backtrack(f_only, x, fx, g, g.copy())
                except LineSearchError:
                    return OptimizeOutcome(x, fx, g, it, False, str(exc), history)
            else:
                return OptimizeOutcome(x, fx, g, it, False, str(exc), history)
        _, g_new = fun_and_grad(x_new)
        s = x_new - x
        yv = g - g_new  # gradient change of the minimization problem -f
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            if it == 1:
                H = np.eye(n) * sy / float(yv @ yv)
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (
                rho * rho * float(yv @ Hy) + rho
            ) * np.outer(s, s)
        change = f_new - fx
        x, fx, g = x_new, f_new, g_new
        history.append(fx)
        if np.max(np.abs(g)) < grad_tolerance:
            return OptimizeOutcome(x, fx, g, it, True, "gradient below tolerance", history)
        # a heavily backtracked step can change f by little far from the optimum,
        # so the quasi-Newton predicted gain must be small as well
        tol = ll_rel_tolerance * max(1.0, abs(fx))
        if abs(change) < tol and 0.5 * float(g @ H @ g) < tol:
            return OptimizeOutcome(x, fx, g, it, True, "relative change below tolerance", history)
    return OptimizeOutcome(x, fx, g, max_iterations, False, "iteration limit reached", history)


def _hessian(problem: LikelihoodProblem, theta: np.ndarray, rel_step: float) -> np.ndarray:
    k = theta.size
    H = np.empty((k, k))
    for j in range(k):
        h = rel_step * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        H[:, j] = (problem.gradient(up) - problem.gradient(down)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _newton_polish(problem: LikelihoodProblem, out: OptimizeOutcome, options: OptimOptions,
                   max_steps: int = 20) -> OptimizeOutcome:
    """Newton steps from a BFGS optimum until the gradient test passes.

    BFGS may stop on the relative-change rule while its inverse-Hessian
    estimate is still poor along weakly curved directions (badly scaled
    covariates); a few Newton steps with the finite-difference Hessian
    finish the job.
    """
    x, fx, g = out.x, out.fun, out.grad
    history = list(out.history)
    for _ in range(max_steps):
        if np.max(np.abs(g), initial=0.0) < options.grad_tolerance:
            break
        H = _hessian(problem, x, options.hessian_step)
        try:
            direction = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(direction)) or direction @ g <= 0:
            break
        try:
            _, x_new, f_new = _backtrack(problem.loglik, x, fx, g, direction, max_halvings=30)
        except LineSearchError:
            break
        if f_new < fx:
            break
        x, fx = x_new, f_new
        g = problem.gradient(x)
        history.append(fx)
    return OptimizeOutcome(x, fx, g, out.iterations, out.converged, out.message, history)


@dataclass
class StandardErrors:
    covariance: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    ok: bool
    diagnostics: dict


def standard_errors(
    problem: LikelihoodProblem, theta, hessian_step: float = 1e-4
) -> StandardErrors:
    """Inverse observed information from a finite-difference Hessian.

    Scale parameters are reported as absolute values; the covariance rows
    of negative raw scales are sign-flipped to match.
    """
    theta = np.asarray(theta, dtype=np.float64)
    k = theta.size
    H = _hessian(problem, theta, hessian_step)
    info = -H
    eig = np.linalg.eigvalsh(info) if k else np.array([])
    diag = {
        "min_eigenvalue": float(eig.min()) if k else math.nan,
        "max_eigenvalue": float(eig.max()) if k else math.nan,
        "condition": float(eig.max() / eig.min()) if k and eig.min() > 0 else math.inf,
    }
    nan = np.full(k, np.nan)
    if k and (not np.all(np.isfinite(info)) or eig.min() <= MAX_CONDITION ** -1 * eig.max()):
        log.warning("information matrix is singular or not positive definite: %s", diag)
        return StandardErrors(np.full((k, k), np.nan), nan, nan.copy(), False, diag)
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    reported = _reported(problem.spec, theta)
    sign = np.where(reported == theta, 1.0, -1.0)
    cov = cov * np.outer(sign, sign)
    se = np.sqrt(np.diag(cov))
    t = np.where(se > 0, reported / np.where(se > 0, se, 1.0), np.nan)
    return StandardErrors(cov, se, t, True, diag)


def _reported(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    out = np.array(theta, dtype=np.float64)
    if spec.n_random:
        out[-spec.n_random :] = np.abs(out[-spec.n_random :])
    return out


def _to_jsonable(x):
    if isinstance(x, np.ndarray):
        return [_to_jsonable(v) for v in x.tolist()]
    if isinstance(x, list):
        return [_to_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _from_jsonable(x):
    return np.array([np.nan if v is None else v for v in x], dtype=np.float64)


@dataclass(eq=False)
class EstimationResult:
    spec: ModelSpec
    kernel: str
    names: list[str]
    params: ParameterVector
    covariance: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    ll_converged: float
    ll_constant_only: float
    n: int
    n_strata: int
    k: int
    converged: bool
    iterations: int
    message: str
    draws_fingerprint: dict | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def estimates(self) -> np.ndarray:
        return self.params.pack()

    def coefficient(self, name: str) -> float:
        return float(self.estimates[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.std_errors[self.names.index(name)])

    def to_dict(self) -> dict:
        cov = [_to_jsonable(row) for row in self.covariance]
        return {
            "format": "ccmixlogit-result",
            "version": 1,
            "spec": self.spec.to_dict(),
            "kernel": self.kernel,
            "names": list(self.names),
            "estimates": _to_jsonable(self.estimates),
            "std_errors": _to_jsonable(self.std_errors),
            "t_stats": _to_jsonable(self.t_stats),
            "covariance": cov,
            "ll_converged": _to_jsonable(float(self.ll_converged)),
            "ll_constant_only": _to_jsonable(float(self.ll_constant_only)),
            "n": self.n,
            "n_strata": self.n_strata,
            "k": self.k,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "draws_fingerprint": self.draws_fingerprint,
            "diagnostics": {k: _to_jsonable(float(v)) for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationResult":
        spec = ModelSpec.from_dict(d["spec"])
        est = _from_jsonable(d["estimates"])
        k = int(d["k"])
        cov = np.array([_from_jsonable(r) for r in d["covariance"]]).reshape(k, k)
        nanify = lambda v: math.nan if v is None else float(v)  # noqa: E731
        return cls(
            spec=spec,
            kernel=d["kernel"],
            names=list(d["names"]),
            params=ParameterVector.unpack(spec, est),
            covariance=cov,
            std_errors=_from_jsonable(d["std_errors"]),
            t_stats=_from_jsonable(d["t_stats"]),
            ll_converged=nanify(d["ll_converged"]),
            ll_constant_only=nanify(d["ll_constant_only"]),
            n=int(d["n"]),
            n_strata=int(d["n_strata"]),
            k=k,
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            message=d.get("message", ""),
            draws_fingerprint=d.get("draws_fingerprint"),
            diagnostics={k: nanify(v) for k, v in d.get("diagnostics", {}).items()},
        )


def _initial_theta(dataset, spec: ModelSpec, options: OptimOptions) -> np.ndarray:
    """Fixed-coefficient MLE for the means, sigma at a small value, xi at zero."""
    if options.initial_params is not None:
        return options.initial_params.pack().copy()
    theta = np.zeros(spec.k)
    if not spec.n_random:
        return theta
    base = spec.without_randomness()
    if spec.conditional:
        base = replace(base, constant=False)
    start = LikelihoodProblem(dataset, base)
    out = maximize_bfgs(start.loglik_and_grad, np.zeros(base.k), max_iterations=200)
    est = dict(zip(base.parameter_names(), out.x))
    p = ParameterVector.zeros(spec)
    bf = np.array([est.get(n, 0.0) for n in spec.fixed_names])
    means = []
    for t in spec.random_terms:
        b = est.get(t.name, 0.0)
        if t.kind == "lognormal":
            b = math.log(max(abs(b), 1e-2))
        means.append(b)
    sigma = np.full(spec.n_random, options.sigma_start)
    return ParameterVector(bf, np.array(means), p.xi, sigma).pack()


def fit(
    dataset: CaseControlDataset,
    spec: ModelSpec,
    options: OptimOptions | None = None,
    draws: DrawMatrix | None = None,
) -> EstimationResult:
    """Estimate ``spec`` on ``dataset`` by maximizing its kernel."""
    options = options or OptimOptions()
    if spec.n_random and draws is None:
        draws = prepare_draws(dataset, spec)
    problem = LikelihoodProblem(dataset, spec, draws)
    theta0 = _initial_theta(dataset, spec, options)
    if not np.isfinite(problem.loglik(theta0)):
        raise FloatingPointError("log-likelihood is not finite at the starting values")

    rng = np.random.default_rng(options.restart_seed)
    best: OptimizeOutcome | None = None
    for attempt in range(options.restarts):
        start = theta0 if attempt == 0 else theta0 + options.restart_scale * rng.standard_normal(theta0.size)
        try:
            out = maximize_bfgs(
                problem.loglik_and_grad,
                start,
                max_iterations=options.max_iterations,
                grad_tolerance=options.grad_tolerance,
                ll_rel_tolerance=options.ll_rel_tolerance,
            )
        except FloatingPointError:
            continue
        if out.converged:
            out = _newton_polish(problem, out, options)
        if best is None or out.fun > best.fun:
            best = out
    if best is None:
        raise FloatingPointError("no restart produced a finite log-likelihood")

    se = standard_errors(problem, best.x, options.hessian_step)
    reported = _reported(spec, best.x)
    fingerprint = None
    if draws is not None:
        fingerprint = draws.fingerprint()
    return EstimationResult(
        spec=spec,
        kernel=problem.kernel,
        names=spec.parameter_names(),
        params=ParameterVector.unpack(spec, reported),
        covariance=se.covariance,
        std_errors=se.std_errors,
        t_stats=se.t_stats,
        ll_converged=best.fun,
        ll_constant_only=problem.constant_only_loglik(),
        n=dataset.n,
        n_strata=dataset.n_strata,
        k=spec.k,
        converged=best.converged,
        iterations=best.iterations,
        message=best.message,
        draws_fingerprint=fingerprint,
        diagnostics=se.diagnostics,
    )
