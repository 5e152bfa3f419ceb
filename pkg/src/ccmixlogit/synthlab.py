"""Synthetic matched case-control data with known truth, plus oracles.

The oracles here deliberately avoid the simulation machinery in
:mod:`ccmixlogit.likelihood`: :func:`quadrature_loglik` integrates the
mixing law by Gauss-Hermite quadrature and :func:`brute_force_conditional`
enumerates which stratum member is the case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import CaseControlDataset
from .likelihood import CONSTANT, ModelSpec, ParameterVector, SpecError
from .mixing import NORMAL_PATHWAY, realize_with_derivatives

__all__ = [
    "CovariateLaw",
    "SyntheticTruth",
    "PoolExhaustedError",
    "generate",
    "quadrature_loglik",
    "brute_force_conditional",
]


class PoolExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True)
class CovariateLaw:
    """``normal`` (mean, sd), ``bernoulli`` (q) or ``fixed`` (value)."""

    law: str = "normal"
    mean: float = 0.0
    sd: float = 1.0
    q: float = 0.5
    value: float = 0.0

    def __post_init__(self):
        if self.law not in ("normal", "bernoulli", "fixed"):
            raise ValueError(f"unknown covariate law {self.law!r}")
        if self.law == "bernoulli" and not 0.0 <= self.q <= 1.0:
            raise ValueError("bernoulli q must lie in [0, 1]")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.law == "normal":
            return rng.normal(self.mean, self.sd, size)
        if self.law == "bernoulli":
            return (rng.random(size) < self.q).astype(np.float64)
        return np.full(size, float(self.value))

    def to_dict(self) -> dict:
        if self.law == "normal":
            return {"law": "normal", "mean": self.mean, "sd": self.sd}
        if self.law == "bernoulli":
            return {"law": "bernoulli", "q": self.q}
        return {"law": "fixed", "value": self.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CovariateLaw":
        return cls(**{k: d[k] for k in ("law", "mean", "sd", "q", "value") if k in d})


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    spec: ModelSpec
    true_params: ParameterVector
    n_strata: int
    covariates: Mapping[str, CovariateLaw] = field(default_factory=dict)
    seed: int = 0
    mode: str = "conditional"
    controls_per_case: int = 2
    pool_factor: float = 20.0

    def __post_init__(self):
        if self.n_strata < 1:
            raise ValueError("n_strata must be >= 1")
        if self.mode not in ("conditional", "population"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.true_params.pack().size != self.spec.k:
            raise ValueError("true_params does not match the model spec")

    def covariate_names(self) -> list[str]:
        names = list(self.spec.covariates_used())
        names += [n for n in self.covariates if n not in names]
        return names

    def law(self, name: str) -> CovariateLaw:
        return self.covariates.get(name, CovariateLaw())

    def to_dict(self) -> dict:
        names = self.spec.parameter_names()
        return {
            "spec": self.spec.to_dict(),
            "params": dict(zip(names, self.true_params.pack().tolist())),
            "n_strata": self.n_strata,
            "controls_per_case": self.controls_per_case,
            "covariates": {n: self.law(n).to_dict() for n in self.covariate_names()},
            "seed": self.seed,
            "mode": self.mode,
            "pool_factor": self.pool_factor,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticTruth":
        spec = ModelSpec.from_dict(d["spec"])
        given = d.get("params", {})
        unknown = set(given) - set(spec.parameter_names())
        if unknown:
            raise SpecError(f"unknown parameter(s) in truth: {', '.join(sorted(unknown))}")
        theta = np.array([float(given.get(n, 0.0)) for n in spec.parameter_names()])
        return cls(
            spec=spec,
            true_params=ParameterVector.unpack(spec, theta),
            n_strata=int(d["n_strata"]),
            covariates={n: CovariateLaw.from_dict(v) for n, v in d.get("covariates", {}).items()},
            seed=int(d.get("seed", 0)),
            mode=d.get("mode", "conditional"),
            controls_per_case=int(d.get("controls_per_case", 2)),
            pool_factor=float(d.get("pool_factor", 20.0)),
        )


def _covariate(X: Mapping[str, np.ndarray], name: str, n: int) -> np.ndarray:
    return np.ones(n) if name == CONSTANT else X[name]


def _linear_index(truth: SyntheticTruth, X, codes, rng, shared: bool) -> np.ndarray:
    spec, p = truth.spec, truth.true_params
    n = codes.size
    v = np.zeros(n)
    for b, name in zip(p.beta_fixed, spec.fixed_names):
        v += b * _covariate(X, name, n)
    xi_at = 0
    S = int(codes.max()) + 1
    for k, term in enumerate(spec.random_terms):
        loc = np.full(n, p.beta_random_means[k])
        for z in spec.links_for(term.name):
            col = X[z]
            if shared:
                col = (np.bincount(codes, weights=col, minlength=S) / np.bincount(codes, minlength=S))[codes]
            loc += p.xi[xi_at] * col
            xi_at += 1
        size = S if shared else n
        if term.kind in NORMAL_PATHWAY:
            d = rng.standard_normal(size)
        else:
            d = rng.random(size)
        if shared:
            d = d[codes]
        coef, _, _ = realize_with_derivatives(term.kind, loc, abs(p.sigma[k]), d, term.negative)
        v += coef * _covariate(X, term.name, n)
    return v


def generate(truth: SyntheticTruth) -> CaseControlDataset:
    """Draw a matched dataset from ``truth``; same truth, same dataset."""
    rng = np.random.default_rng(truth.seed)
    names = truth.covariate_names()
    m, S = truth.controls_per_case, truth.n_strata
    size = m + 1

    if truth.mode == "conditional":
        n = S * size
        codes = np.repeat(np.arange(S), size)
        X = {name: truth.law(name).sample(rng, n) for name in names}
        v = _linear_index(truth, X, codes, rng, shared=truth.spec.grouping == "stratum")
        # Gumbel-max: argmax of v + Gumbel noise is a draw from the softmax
        noisy = (v + rng.gumbel(size=n)).reshape(S, size)
        case_pos = np.argmax(noisy, axis=1)
        y = np.zeros((S, size), dtype=np.int64)
        y[np.arange(S), case_pos] = 1
        y = y.reshape(-1)
        cols = np.column_stack([X[c] for c in names]) if names else np.zeros((n, 0))
        stratum_ids = tuple(f"s{j + 1}" for j in codes)
        unit_ids = tuple(f"s{j + 1}-{r + 1}" for j in range(S) for r in range(size))
        return CaseControlDataset(unit_ids, stratum_ids, y, cols, tuple(names), m)

    # population mode: simulate outcomes on a pool, then sample 1 case + m controls
    N = int(math.ceil(truth.pool_factor * S * size))
    X = {name: truth.law(name).sample(rng, N) for name in names}
    v = _linear_index(truth, X, np.arange(N), rng, shared=False)
    y_pool = (rng.random(N) < 1.0 / (1.0 + np.exp(-v))).astype(np.int64)
    cases = np.flatnonzero(y_pool == 1)
    controls = np.flatnonzero(y_pool == 0)
    if cases.size < S or controls.size < S * m:
        raise PoolExhaustedError(
            f"pool of {N} has {cases.size} cases and {controls.size} controls; "
            f"need {S} and {S * m}"
        )
    pick_cases = rng.choice(cases, S, replace=False)
    pick_controls = rng.choice(controls, S * m, replace=False).reshape(S, m)
    idx = np.column_stack([pick_cases, pick_controls]).reshape(-1)
    cols = np.column_stack([X[c][idx] for c in names]) if names else np.zeros((idx.size, 0))
    unit_ids = tuple(f"p{i}" for i in idx)
    stratum_ids = tuple(f"s{j + 1}" for j in np.repeat(np.arange(S), size))
    return CaseControlDataset(unit_ids, stratum_ids, y_pool[idx], cols, tuple(names), m)


def _gauss_hermite(nodes: int, dim: int):
    x, w = np.polynomial.hermite.hermgauss(nodes)
    z = math.sqrt(2.0) * x
    w = w / math.sqrt(math.pi)
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    if dim == 1:
        return z[:, None], w
    zz = np.array([(a, b) for a in z for b in z])
    ww = np.array([a * b for a in w for b in w])
    return zz, ww


def quadrature_loglik(dataset: CaseControlDataset, spec: ModelSpec, params, nodes: int = 64) -> float:
    """Gauss-Hermite log-likelihood for specs with at most 2 normal random terms.

    Handles the individual, stratum-grouped and stratum-shared
    conditional kernels.
    """
    terms = spec.random_terms
    if len(terms) > 2:
        raise SpecError("quadrature oracle supports at most 2 random coefficients")
    if any(t.kind != "normal" for t in terms):
        raise SpecError("quadrature oracle supports normal random coefficients only")
    if nodes < 16:
        raise ValueError("use at least 16 quadrature nodes")
    if spec.conditional and spec.grouping != "stratum" and terms:
        raise SpecError("quadrature oracle needs stratum-shared coefficients for conditional specs")
    p = params if isinstance(params, ParameterVector) else ParameterVector.unpack(spec, params)
    z, w = _gauss_hermite(nodes, len(terms))

    data = {name: dataset.column(name) for name in spec.covariates_used()}
    n = dataset.n
    codes = dataset.stratum_codes
    y = dataset.outcome
    shared = spec.grouping == "stratum"

    members: dict[int, list[int]] = {}
    for i, c in enumerate(codes):
        members.setdefault(int(c), []).append(i)

    def zval(name, i):
        if not shared:
            return data[name][i]
        return sum(data[name][j] for j in members[int(codes[i])]) / len(members[int(codes[i])])

    # linear index of each observation at every node, shape (n, nodes)
    V = np.zeros((n, w.size))
    for i in range(n):
        base = 0.0
        for b, name in zip(p.beta_fixed, spec.fixed_names):
            base += b * (1.0 if name == CONSTANT else data[name][i])
        V[i] += base
        xi_at = 0
        for k, term in enumerate(terms):
            loc = p.beta_random_means[k]
            for zname in spec.links_for(term.name):
                loc += p.xi[xi_at] * zval(zname, i)
                xi_at += 1
            x = 1.0 if term.name == CONSTANT else data[term.name][i]
            V[i] += x * (loc + abs(p.sigma[k]) * z[:, k])

    logp = -np.logaddexp(0.0, -(2.0 * y[:, None] - 1.0) * V)
    total = 0.0
    if spec.conditional:
        for idx in members.values():
            block = V[idx]
            case = [r for r, i in enumerate(idx) if y[i] == 1]
            if len(case) != 1:
                raise ValueError("each stratum needs exactly one case")
            top = block.max(axis=0)
            prob = np.exp(block[case[0]] - top) / np.exp(block - top).sum(axis=0)
            total += math.log(float(np.dot(w, prob)))
    elif shared:
        for idx in members.values():
            total += math.log(float(np.dot(w, np.exp(logp[idx].sum(axis=0)))))
    else:
        for i in range(n):
            total += math.log(float(np.dot(w, np.exp(logp[i]))))
    return total


def brute_force_conditional(X, beta) -> np.ndarray:
    """Probability that each stratum member is the case, by enumeration."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if X.shape[0] < 2:
        raise ValueError("a stratum needs at least 2 members")
    scores = [math.fsum(float(a) * float(b) for a, b in zip(row, beta)) for row in X]
    top = max(scores)
    weights = [math.exp(s - top) for s in scores]
    total = math.fsum(weights)
    return np.array([wt / total for wt in weights])
