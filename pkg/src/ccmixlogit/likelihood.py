"""Log-likelihood kernels for binary logit models on matched case-control data.

Five kernels share one parameter layout (see :class:`ParameterVector`):

``fixed``
    Independent binary logit, every coefficient fixed.
``conditional``
    Conditional (fixed-effects) logit: one case per stratum, the
    probability that the observed case is the case among its stratum.
``simulated``
    Binary logit with random coefficients drawn independently per
    observation; the integral over the mixing law is replaced by an
    average over R quasi-random draws.
``grouped``
    Binary logit with random coefficients shared by every member of a
    stratum; the members' probabilities are multiplied inside the draw
    average.
``simulated_conditional``
    Conditional logit with random coefficients shared per stratum
    (``grouping stratum`` is required).

Heterogeneity in means shifts the location of a random coefficient by
``xi . Z`` using raw covariate values.  For stratum-shared coefficients the
shifter is the stratum mean of ``Z`` so that it is a stratum attribute.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit, logsumexp, ndtr, ndtri

from .dataset import CaseControlDataset
from .mixing import KINDS, NORMAL_PATHWAY, realize_with_derivatives
from .quasirandom import DrawMatrix, HaltonConfig, build_draws

__all__ = [
    "CONSTANT",
    "KERNELS",
    "SpecError",
    "RandomTerm",
    "ModelSpec",
    "ParameterVector",
    "LikelihoodProblem",
    "logit_probability",
    "loglik_fixed",
    "loglik_conditional",
    "conditional_loglik_from_index",
    "simulated_loglik",
    "simulated_loglik_grouped",
    "simulated_loglik_conditional",
    "prepare_draws",
    "numerical_gradient",
    "gradient",
]

log = logging.getLogger(__name__)

CONSTANT = "constant"
KERNELS = ("fixed", "conditional", "simulated", "grouped", "simulated_conditional")
GROUPINGS = ("individual", "stratum")


class SpecError(ValueError):
    """Inconsistent model specification."""


@dataclass(frozen=True)
class RandomTerm:
    name: str
    kind: str = "normal"
    negative: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown mixing distribution {self.kind!r}")
        if self.negative and self.kind != "lognormal":
            raise SpecError("sign=- is only valid for lognormal coefficients")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model: which covariates are fixed, random, and how.

    ``random_intercept`` turns the constant into a normal random
    coefficient.  With ``conditional`` the constant cancels and is dropped.
    """

    fixed: tuple[str, ...] = ()
    random: tuple[RandomTerm, ...] = ()
    constant: bool = True
    random_intercept: bool = False
    hm_links: tuple[tuple[str, tuple[str, ...]], ...] = ()
    grouping: str = "individual"
    conditional: bool = False
    draws: int = 1000
    halton: HaltonConfig = field(default_factory=HaltonConfig)

    def __post_init__(self):
        object.__setattr__(self, "fixed", tuple(self.fixed))
        object.__setattr__(self, "random", tuple(self.random))
        links = self.hm_links.items() if isinstance(self.hm_links, Mapping) else self.hm_links
        object.__setattr__(self, "hm_links", tuple((k, tuple(v)) for k, v in links))
        if self.grouping not in GROUPINGS:
            raise SpecError(f"unknown grouping {self.grouping!r}")
        if self.draws < 1:
            raise SpecError("draws must be >= 1")
        names = list(self.fixed) + [t.name for t in self.random]
        if CONSTANT in names:
            raise SpecError(f"{CONSTANT!r} is reserved; use constant/random_intercept")
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SpecError(f"covariate declared twice: {', '.join(sorted(dup))}")
        rnames = [t.name for t in self.random_terms]
        keys = [k for k, _ in self.hm_links]
        if len(set(keys)) != len(keys):
            raise SpecError("duplicate hm link")
        for key, zs in self.hm_links:
            if key not in rnames:
                raise SpecError(f"hm link on {key!r}, which is not a random coefficient")
            if not zs:
                raise SpecError(f"hm link on {key!r} lists no shifters")
            if len(set(zs)) != len(zs):
                raise SpecError(f"hm link on {key!r} repeats a shifter")
        if self.conditional and self.random_intercept:
            raise SpecError("a random intercept is not identified in a conditional model")
        if self.conditional and self.random and self.grouping != "stratum":
            # member blocks of one Halton sequence are R indices apart and so
            # strongly correlated; a within-stratum softmax over them is biased
            raise SpecError("a conditional model with random coefficients needs grouping stratum")

    @property
    def random_terms(self) -> tuple[RandomTerm, ...]:
        head = (RandomTerm(CONSTANT, "normal"),) if self.random_intercept else ()
        return head + self.random

    @property
    def fixed_names(self) -> tuple[str, ...]:
        lead = self.constant and not self.random_intercept and not self.conditional
        return ((CONSTANT,) if lead else ()) + self.fixed

    @property
    def n_random(self) -> int:
        return len(self.random_terms)

    @property
    def kernel(self) -> str:
        if self.conditional:
            return "simulated_conditional" if self.n_random else "conditional"
        if not self.n_random:
            return "fixed"
        return "grouped" if self.grouping == "stratum" else "simulated"

    @property
    def draw_level(self) -> str:
        return "stratum" if self.grouping == "stratum" else "individual"

    def links_for(self, name: str) -> tuple[str, ...]:
        return dict(self.hm_links).get(name, ())

    def parameter_names(self) -> list[str]:
        names = list(self.fixed_names)
        names += [t.name for t in self.random_terms]
        names += [f"hm({k}; {z})" for k, zs in self.hm_links for z in zs]
        names += [f"sd({t.name})" for t in self.random_terms]
        return names

    @property
    def k(self) -> int:
        return len(self.parameter_names())

    def covariates_used(self) -> list[str]:
        seen: list[str] = []
        for n in list(self.fixed) + [t.name for t in self.random] + [
            z for _, zs in self.hm_links for z in zs
        ]:
            if n not in seen:
                seen.append(n)
        return seen

    def halton_config(self) -> HaltonConfig:
        return replace(self.halton, dimension=self.n_random)

    def without_randomness(self) -> "ModelSpec":
        """Same covariates with every random coefficient made fixed."""
        fixed = tuple(t.name for t in self.random) + self.fixed
        return replace(
            self, fixed=fixed, random=(), random_intercept=False, hm_links=(),
            constant=self.constant or self.random_intercept,
        )

    def to_dict(self) -> dict:
        return {
            "fixed": list(self.fixed),
            "random": [
                {"name": t.name, "kind": t.kind, "negative": t.negative} for t in self.random
            ],
            "constant": self.constant,
            "random_intercept": self.random_intercept,
            "hm_links": [[k, list(zs)] for k, zs in self.hm_links],
            "grouping": self.grouping,
            "conditional": self.conditional,
            "draws": self.draws,
            "halton": {
                "skip": self.halton.skip,
                "scramble": self.halton.scramble,
                "seed": self.halton.seed,
                "max_dimension": self.halton.max_dimension,
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        h = d.get("halton", {})
        return cls(
            fixed=tuple(d.get("fixed", ())),
            random=tuple(
                RandomTerm(r["name"], r.get("kind", "normal"), bool(r.get("negative", False)))
                for r in d.get("random", ())
            ),
            constant=bool(d.get("constant", True)),
            random_intercept=bool(d.get("random_intercept", False)),
            hm_links=tuple((k, tuple(zs)) for k, zs in d.get("hm_links", ())),
            grouping=d.get("grouping", "individual"),
            conditional=bool(d.get("conditional", False)),
            draws=int(d.get("draws", 1000)),
            halton=HaltonConfig(
                skip=int(h.get("skip", 50)),
                scramble=bool(h.get("scramble", True)),
                seed=int(h.get("seed", HaltonConfig.seed)),
                max_dimension=int(h.get("max_dimension", 20)),
            ),
        )


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Free parameters in packing order: fixed, random means, xi, sigma."""

    beta_fixed: np.ndarray
    beta_random_means: np.ndarray
    xi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        for name in ("beta_fixed", "beta_random_means", "xi", "sigma"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            )

    def pack(self) -> np.ndarray:
        return np.concatenate([self.beta_fixed, self.beta_random_means, self.xi, self.sigma])

    @classmethod
    def unpack(cls, spec: ModelSpec, theta) -> "ParameterVector":
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != spec.k:
            raise ValueError(f"expected {spec.k} parameters, got {theta.size}")
        kf, kr = len(spec.fixed_names), spec.n_random
        kx = sum(len(zs) for _, zs in spec.hm_links)
        cuts = np.cumsum([kf, kr, kx])
        return cls(theta[: cuts[0]], theta[cuts[0] : cuts[1]], theta[cuts[1] : cuts[2]],
                   theta[cuts[2] :])

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "ParameterVector":
        return cls.unpack(spec, np.zeros(spec.k))

    def __eq__(self, other):
        if not isinstance(other, ParameterVector):
            return NotImplemented
        return np.array_equal(self.pack(), other.pack())


def _as_theta(spec: ModelSpec, params) -> np.ndarray:
    if isinstance(params, ParameterVector):
        theta = params.pack()
    else:
        theta = np.asarray(params, dtype=np.float64).reshape(-1)
    if theta.size != spec.k:
        raise ValueError(f"expected {spec.k} parameters, got {theta.size}")
    return theta


def logit_probability(x):
    """P(outcome = 1) = 1 / (1 + exp(-x)), overflow-safe."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("logit_probability requires finite input")
    out = expit(arr)
    return float(out) if out.ndim == 0 else out


def _log_prob_observed(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """log P(observed outcome) for linear index ``v`` (broadcasts)."""
    q = (2.0 * y - 1.0).reshape(y.shape + (1,) * (v.ndim - y.ndim))
    return -np.logaddexp(0.0, -q * v)


def _column(dataset: CaseControlDataset, name: str) -> np.ndarray:
    if name == CONSTANT:
        return np.ones(dataset.n)
    try:
        return dataset.column(name)
    except KeyError:
        raise SpecError(f"covariate {name!r} not in data") from None


def _check_one_case(dataset: CaseControlDataset) -> None:
    per = np.bincount(dataset.stratum_codes, weights=dataset.outcome, minlength=dataset.n_strata)
    bad = [dataset.stratum_labels[j] for j in np.flatnonzero(per != 1)]
    if bad:
        shown = ", ".join(bad[:5]) + (" ..." if len(bad) > 5 else "")
        raise ValueError(f"strata without exactly one case: {shown}")


def loglik_fixed(dataset: CaseControlDataset, spec: ModelSpec, params) -> float:
    """Sum over observations of y ln P + (1 - y) ln(1 - P)."""
    if spec.n_random:
        raise SpecError("loglik_fixed needs a spec without random coefficients")
    theta = _as_theta(spec, params)
    X = np.column_stack([_column(dataset, n) for n in spec.fixed_names] or [np.zeros(dataset.n)])
    v = X @ theta if spec.fixed_names else np.zeros(dataset.n)
    return float(np.sum(_log_prob_observed(dataset.outcome.astype(float), v)))


def conditional_loglik_from_index(v, stratum_codes, outcome) -> float:
    """Conditional-logit log-likelihood given each member's linear index."""
    v = np.asarray(v, dtype=np.float64)
    codes = np.asarray(stratum_codes)
    S = int(codes.max()) + 1 if codes.size else 0
    vmax = np.full(S, -np.inf)
    np.maximum.at(vmax, codes, v)
    denom = np.zeros(S)
    np.add.at(denom, codes, np.exp(v - vmax[codes]))
    case = np.asarray(outcome) == 1
    v_case = np.zeros(S)
    v_case[codes[case]] = v[case]
    return float(np.sum(v_case - vmax - np.log(denom)))


def loglik_conditional(dataset: CaseControlDataset, spec: ModelSpec, params) -> float:
    """Sum over strata of ln[exp(x_case b) / sum_i exp(x_i b)]."""
    if spec.n_random:
        raise SpecError("loglik_conditional needs a spec without random coefficients")
    _check_one_case(dataset)
    theta = _as_theta(spec, params)
    names = [n for n in spec.fixed_names if n != CONSTANT]
    offset = len(spec.fixed_names) - len(names)
    v = np.zeros(dataset.n)
    for j, name in enumerate(names):
        v = v + theta[offset + j] * _column(dataset, name)
    return conditional_loglik_from_index(v, dataset.stratum_codes, dataset.outcome)


def prepare_draws(dataset: CaseControlDataset, spec: ModelSpec, R: int | None = None) -> DrawMatrix:
    """Uniform Halton draws sized for ``spec`` on ``dataset``."""
    units = dataset.n_strata if spec.draw_level == "stratum" else dataset.n
    return build_draws(
        spec.halton_config(), units, R or spec.draws, level=spec.draw_level, space="uniform01"
    )


def _route(spec: ModelSpec, draws: DrawMatrix) -> np.ndarray:
    """Convert each column of ``draws`` to the space its coefficient consumes."""
    K = spec.n_random
    if draws.dimension < K:
        raise ValueError(f"draws have {draws.dimension} dimensions, spec needs {K}")
    out = np.empty(draws.values.shape[:2] + (K,))
    for k, term in enumerate(spec.random_terms):
        col = draws.values[:, :, k]
        wants_normal = term.kind in NORMAL_PATHWAY
        if wants_normal and draws.space == "uniform01":
            col = ndtri(col)
        elif not wants_normal and draws.space == "standard_normal":
            col = ndtr(col)
        out[:, :, k] = col
    return out


class LikelihoodProblem:
    """A (dataset, spec, draws) triple with cached design arrays.

    ``loglik(theta)`` and ``loglik_and_grad(theta)`` evaluate the kernel
    named by ``spec.kernel`` (or ``kernel`` if given) at the flat
    parameter vector ``theta``.
    """

    def __init__(
        self,
        dataset: CaseControlDataset,
        spec: ModelSpec,
        draws: DrawMatrix | None = None,
        kernel: str | None = None,
    ):
        self.dataset = dataset
        self.spec = spec
        self.kernel = kernel or spec.kernel
        if self.kernel not in KERNELS:
            raise SpecError(f"unknown kernel {self.kernel!r}")
        self.k = spec.k
        self.names = spec.parameter_names()
        n = dataset.n
        self.y = dataset.outcome.astype(np.float64)
        self.Xf = np.column_stack(
            [_column(dataset, c) for c in spec.fixed_names] or [np.zeros((n, 0))]
        ).reshape(n, len(spec.fixed_names))
        self.Xr = np.column_stack(
            [_column(dataset, t.name) for t in spec.random_terms] or [np.zeros((n, 0))]
        ).reshape(n, spec.n_random)
        self.terms = spec.random_terms

        stratum_level = spec.grouping == "stratum"
        if stratum_level:
            counts = np.bincount(dataset.stratum_codes, minlength=dataset.n_strata)
        self.Z = []
        for t in self.terms:
            cols = []
            for z in spec.links_for(t.name):
                col = _column(dataset, z)
                if stratum_level:
                    sums = np.bincount(dataset.stratum_codes, weights=col,
                                       minlength=dataset.n_strata)
                    col = (sums / counts)[dataset.stratum_codes]
                cols.append(col)
            self.Z.append(np.column_stack(cols) if cols else np.zeros((n, 0)))

        self.codes = dataset.stratum_codes
        self.order = np.argsort(self.codes, kind="stable")
        sorted_codes = self.codes[self.order]
        self.starts = np.flatnonzero(np.r_[True, sorted_codes[1:] != sorted_codes[:-1]])

        conditional = self.kernel in ("conditional", "simulated_conditional")
        if conditional:
            _check_one_case(dataset)
        self.conditional = conditional
        self.by_stratum = conditional or self.kernel == "grouped"

        self._draws = None
        self.draws = draws
        if self.kernel in ("simulated", "grouped", "simulated_conditional"):
            if draws is None:
                draws = prepare_draws(dataset, spec)
                self.draws = draws
            level = "stratum" if stratum_level else "individual"
            expected = dataset.n_strata if stratum_level else n
            if draws.level != level:
                raise ValueError(f"kernel needs {level}-level draws, got {draws.level}")
            if draws.units != expected:
                raise ValueError(f"draws cover {draws.units} units, need {expected}")
            routed = _route(spec, draws)
            self._draws = routed[self.codes] if stratum_level else routed

    # -- helpers -----------------------------------------------------------
    def _stratum_sum(self, a: np.ndarray) -> np.ndarray:
        return np.add.reduceat(a[self.order], self.starts, axis=0)

    def _stratum_max(self, a: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(a[self.order], self.starts, axis=0)

    def split(self, theta):
        return ParameterVector.unpack(self.spec, theta)

    # -- kernels ------------------------------------------------------------
    def loglik(self, theta) -> float:
        return self.loglik_and_grad(theta, need_grad=False)[0]

    def gradient(self, theta) -> np.ndarray:
        return self.loglik_and_grad(theta)[1]

    def loglik_and_grad(self, theta, need_grad: bool = True):
        theta = _as_theta(self.spec, theta)
        if self.kernel == "fixed":
            return self._fixed(theta, need_grad)
        if self.kernel == "conditional":
            return self._conditional(theta, need_grad)
        return self._simulated(theta, need_grad)

    def _fixed(self, theta, need_grad):
        if self.spec.n_random:
            raise SpecError("the fixed kernel needs a spec without random coefficients")
        v = self.Xf @ theta
        ll = float(np.sum(_log_prob_observed(self.y, v)))
        grad = self.Xf.T @ (self.y - expit(v)) if need_grad else None
        return ll, grad

    def _conditional(self, theta, need_grad):
        if self.spec.n_random:
            raise SpecError("the conditional kernel needs a spec without random coefficients")
        v = self.Xf @ theta
        vmax = self._stratum_max(v)
        e = np.exp(v - vmax[self.codes])
        denom = self._stratum_sum(e)
        ll = float(self._stratum_sum(self.y * v).sum() - np.sum(vmax + np.log(denom)))
        grad = None
        if need_grad:
            pi = e / denom[self.codes]
            grad = self.Xf.T @ (self.y - pi)
        return ll, grad

    def _simulated(self, theta, need_grad):
        p = self.split(theta)
        d = self._draws
        R = d.shape[1]
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.repeat((self.Xf @ p.beta_fixed)[:, None], R, axis=1)
            dloc, dscale = [], []
            xi_at = 0
            for k, term in enumerate(self.terms):
                nz = self.Z[k].shape[1]
                loc = p.beta_random_means[k] + self.Z[k] @ p.xi[xi_at : xi_at + nz]
                xi_at += nz
                b, bl, bs = realize_with_derivatives(
                    term.kind, loc[:, None], abs(p.sigma[k]), d[:, :, k], term.negative
                )
                v = v + self.Xr[:, k : k + 1] * b
                dloc.append(bl)
                dscale.append(bs)

            if self.conditional:
                vmax = self._stratum_max(v)
                shifted = np.exp(v - vmax[self.codes])
                lse = vmax + np.log(self._stratum_sum(shifted))
                ell = self._stratum_sum(self.y[:, None] * v) - lse
                resid = self.y[:, None] - shifted / np.exp(lse - vmax)[self.codes]
            else:
                logp = _log_prob_observed(self.y, v)
                ell = self._stratum_sum(logp) if self.by_stratum else logp
                resid = self.y[:, None] - expit(v)

            group_ll = logsumexp(ell, axis=1) - np.log(R)
            ll = float(np.sum(group_ll))

        if not np.isfinite(ll):
            bad = np.flatnonzero(~np.isfinite(group_ll))
            unit = "strata" if self.by_stratum else "observations"
            labels = (
                [self.dataset.stratum_labels[j] for j in bad]
                if self.by_stratum
                else [self.dataset.unit_ids[i] for i in bad]
            )
            log.warning("simulated probability is zero for %s %s", unit, labels[:10])
            return -np.inf, (np.full(self.k, np.nan) if need_grad else None)
        if not need_grad:
            return ll, None

        w = np.exp(ell - group_ll[:, None] - np.log(R))
        if self.by_stratum:
            w = w[self.codes]
        wr = w * resid
        g_fixed = self.Xf.T @ wr.sum(axis=1)
        g_mean, g_xi, g_sd = [], [], []
        for k in range(len(self.terms)):
            a = self.Xr[:, k] * np.sum(wr * dloc[k], axis=1)
            g_mean.append(a.sum())
            g_xi.append(self.Z[k].T @ a)
            s = np.sign(p.sigma[k])
            g_sd.append(s * np.sum(self.Xr[:, k] * np.sum(wr * dscale[k], axis=1)))
        grad = np.concatenate(
            [g_fixed, np.array(g_mean), *g_xi, np.array(g_sd)]
        ).astype(np.float64)
        return ll, grad

    def numerical_gradient(self, theta) -> np.ndarray:
        return numerical_gradient(self.loglik, theta)

    def constant_only_loglik(self) -> float:
        """Log-likelihood of the constant-only model on the same data.

        Conditional kernels: sum of ln(1 / stratum size), the value at
        which every member is equally likely to be the case.  All other
        kernels: the Bernoulli log-likelihood at the sample case share.
        """
        if self.conditional:
            sizes = np.bincount(self.codes)
            return float(-np.sum(np.log(sizes)))
        n1 = float(self.y.sum())
        n0 = self.y.size - n1
        out = 0.0
        if n1 > 0:
            out += n1 * np.log(n1 / self.y.size)
        if n0 > 0:
            out += n0 * np.log(n0 / self.y.size)
        return float(out)


def _expect_kernel(spec: ModelSpec, allowed: Sequence[str], name: str) -> None:
    if spec.kernel not in allowed:
        raise SpecError(f"{name} does not apply to a {spec.kernel} spec")


def simulated_loglik(dataset, spec: ModelSpec, params, draws: DrawMatrix) -> float:
    """Log of the draw-averaged probability of each observed outcome, summed."""
    if spec.grouping != "individual" or spec.conditional:
        raise SpecError("simulated_loglik needs grouping=individual, unconditional")
    return LikelihoodProblem(dataset, spec, draws, kernel="simulated").loglik(params)


def simulated_loglik_grouped(dataset, spec: ModelSpec, params, draws: DrawMatrix) -> float:
    """Stratum-shared coefficients; member probabilities multiplied per draw."""
    if spec.grouping != "stratum" or spec.conditional:
        raise SpecError("simulated_loglik_grouped needs grouping=stratum, unconditional")
    return LikelihoodProblem(dataset, spec, draws, kernel="grouped").loglik(params)


def simulated_loglik_conditional(dataset, spec: ModelSpec, params, draws: DrawMatrix) -> float:
    """Conditional logit with random coefficients, averaged over draws."""
    if not spec.conditional:
        raise SpecError("simulated_loglik_conditional needs a conditional spec")
    return LikelihoodProblem(dataset, spec, draws, kernel="simulated_conditional").loglik(params)


def numerical_gradient(f: Callable[[np.ndarray], float], theta) -> np.ndarray:
    """Central differences with step max(1e-6, 1e-6 |theta_k|)."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        h = max(1e-6, 1e-6 * abs(theta[k]))
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        fu, fd = f(up), f(down)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise FloatingPointError(f"kernel not finite in the stencil of coordinate {k}")
        grad[k] = (fu - fd) / (2.0 * h)
    return grad


def gradient(kernel, dataset=None, spec=None, params=None, draws=None, method="analytic"):
    """Gradient of a kernel at ``params``.

    ``kernel`` is a kernel name (see :data:`KERNELS`) or any callable
    ``f(theta) -> float``; callables are differentiated numerically and
    ``params`` is then the point.
    """
    if callable(kernel):
        return numerical_gradient(kernel, params)
    problem = LikelihoodProblem(dataset, spec, draws, kernel=kernel)
    theta = _as_theta(spec, params)
    if method == "numeric":
        return problem.numerical_gradient(theta)
    return problem.gradient(theta)
