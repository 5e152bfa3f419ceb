import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from conftest import singletons

from ccmixlogit.dataset import CaseControlDataset
from ccmixlogit.estimate import (
    EstimationResult,
    OptimOptions,
    fit,
    maximize_bfgs,
)
from ccmixlogit.likelihood import LikelihoodProblem, ModelSpec, ParameterVector, RandomTerm
from ccmixlogit.synthlab import CovariateLaw, SyntheticTruth, generate


def logit_data(n=600, seed=0, betas=(0.3, 1.0, -0.7)):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, len(betas) - 1))
    y = (rng.random(n) < expit(betas[0] + X @ np.array(betas[1:]))).astype(int)
    return singletons(y, X, tuple(f"x{j + 1}" for j in range(X.shape[1])))


class TestMaximizer:
    def test_quadratic(self):
        c = np.array([1.0, -2.0, 3.5, 0.25])
        f = lambda t: (-np.sum((t - c) ** 2), -2 * (t - c))  # noqa: E731
        out = maximize_bfgs(f, np.zeros(4), grad_tolerance=1e-10)
        assert out.converged and out.iterations <= 30
        np.testing.assert_allclose(out.x, c, atol=1e-8)

    def test_ill_conditioned_quadratic(self):
        A = np.diag([1.0, 100.0, 1e4])
        c = np.array([0.5, -0.5, 2.0])
        f = lambda t: (-0.5 * (t - c) @ A @ (t - c), -A @ (t - c))  # noqa: E731
        out = maximize_bfgs(f, np.zeros(3), grad_tolerance=1e-8, ll_rel_tolerance=1e-16)
        assert out.converged
        np.testing.assert_allclose(out.x, c, atol=1e-6)

    def test_rosenbrock(self):
        def f(t):
            x, y = t
            val = -(100 * (y - x * x) ** 2 + (1 - x) ** 2)
            g = -np.array([-400 * x * (y - x * x) - 2 * (1 - x), 200 * (y - x * x)])
            return val, g

        out = maximize_bfgs(f, np.array([-1.2, 1.0]), grad_tolerance=1e-8, ll_rel_tolerance=1e-16)
        np.testing.assert_allclose(out.x, [1.0, 1.0], atol=1e-5)

    def test_monotone_ascent(self):
        ds = logit_data(300, 3)
        p = LikelihoodProblem(ds, ModelSpec(fixed=("x1", "x2")))
        out = maximize_bfgs(p.loglik_and_grad, np.zeros(3))
        assert np.all(np.diff(out.history) >= -1e-12)

    def test_iteration_limit(self):
        f = lambda t: (-np.sum((t - 5) ** 4), -4 * (t - 5) ** 3)  # noqa: E731
        out = maximize_bfgs(f, np.zeros(3), max_iterations=2, grad_tolerance=1e-12, ll_rel_tolerance=1e-16)
        assert not out.converged and out.iterations == 2

    def test_nonfinite_start(self):
        with pytest.raises(FloatingPointError):
            maximize_bfgs(lambda t: (-np.inf, np.zeros(1)), np.zeros(1))


class TestConstantOnly:
    def test_constant_only_anchor(self, crash_triplets):
        r = fit(crash_triplets, ModelSpec())
        assert r.converged
        assert abs(r.coefficient("constant") - math.log(351 / 702)) < 1e-6
        assert abs(r.ll_converged + 670.24) < 0.01
        assert r.ll_constant_only == pytest.approx(r.ll_converged, abs=1e-9)

    def test_standard_error(self, crash_triplets):
        r = fit(crash_triplets, ModelSpec())
        p = 1 / 3
        assert abs(r.std_error("constant") - 1 / math.sqrt(1053 * p * (1 - p))) < 1e-3
        assert abs(r.std_error("constant") - 0.06537) < 1e-4

    def test_t_formula(self):
        # published row: beta 1.38, t 3.04 -> implied SE
        se = 1.38 / 3.04
        assert round(se, 4) == 0.4539
        assert round(1.38 / 0.4539, 2) == 3.04


class TestFixedLogit:
    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        ds = logit_data(800, 1)
        r = fit(ds, ModelSpec(fixed=("x1", "x2")))
        ref = sm.Logit(ds.outcome, sm.add_constant(ds.X)).fit(disp=0)
        np.testing.assert_allclose(r.estimates, ref.params, atol=1e-5)
        np.testing.assert_allclose(r.std_errors, ref.bse, rtol=1e-4)
        assert r.ll_converged == pytest.approx(ref.llf, abs=1e-8)

    def test_duplication_shrinks_se(self):
        ds = logit_data(400, 2)
        n = ds.n
        dup = CaseControlDataset(
            ds.unit_ids + tuple(u + "b" for u in ds.unit_ids),
            ds.stratum_ids + tuple(s + "b" for s in ds.stratum_ids),
            np.concatenate([ds.outcome, ds.outcome]),
            np.vstack([ds.X, ds.X]),
            ds.covariate_names,
        )
        spec = ModelSpec(fixed=("x1", "x2"))
        a, b = fit(ds, spec), fit(dup, spec)
        assert dup.n == 2 * n
        np.testing.assert_allclose(b.std_errors / a.std_errors, 1 / math.sqrt(2), atol=1e-3)

    @pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
    def test_scaling_invariance(self, c):
        ds = logit_data(500, 4)
        X = ds.X.copy()
        X[:, 0] *= c
        scaled = CaseControlDataset(ds.unit_ids, ds.stratum_ids, ds.outcome, X, ds.covariate_names)
        spec = ModelSpec(fixed=("x1", "x2"))
        a, b = fit(ds, spec), fit(scaled, spec)
        assert abs(a.ll_converged - b.ll_converged) < 1e-6
        assert b.coefficient("x1") == pytest.approx(a.coefficient("x1") / c, rel=1e-4)
        np.testing.assert_allclose(a.t_stats, b.t_stats, atol=1e-3)

    def test_conditional_matches_statsmodels(self):
        cl = pytest.importorskip("statsmodels.discrete.conditional_models")
        rng = np.random.default_rng(5)
        X = rng.normal(size=(600, 2))
        v = X @ np.array([0.8, -0.5])
        y = np.zeros(600, dtype=int)
        for j in range(200):
            w = np.exp(v[3 * j : 3 * j + 3])
            y[3 * j + rng.choice(3, p=w / w.sum())] = 1
        ds = CaseControlDataset(tuple(map(str, range(600))), tuple(str(i // 3) for i in range(600)), y, X, ("a", "b"))
        r = fit(ds, ModelSpec(fixed=("a", "b"), conditional=True))
        ref = cl.ConditionalLogit(y, X, groups=np.arange(600) // 3).fit(
            method="newton", gtol=1e-12, maxiter=100, disp=0
        )
        np.testing.assert_allclose(r.estimates, ref.params, atol=1e-5)
        np.testing.assert_allclose(r.std_errors, ref.bse, rtol=1e-4)


@pytest.fixture(scope="module")
def mixed():
    spec = ModelSpec(fixed=("x1",), random=(RandomTerm("x2"),), draws=100)
    truth = SyntheticTruth(
        spec, ParameterVector.unpack(spec, np.array([-0.3, 0.8, 1.0, 1.5])), n_strata=300,
        covariates={"x1": CovariateLaw(), "x2": CovariateLaw()}, seed=2, mode="population",
    )
    ds = generate(truth)
    return ds, spec, fit(ds, spec)


class TestMixedFit:
    def test_converges(self, mixed):
        _, _, r = mixed
        assert r.converged and np.all(np.isfinite(r.std_errors))
        assert r.draws_fingerprint == {"seed": 20170510, "R": 100, "skip": 50, "scramble": True}

    def test_sigma_reported_positive(self, mixed):
        _, _, r = mixed
        assert r.coefficient("sd(x2)") > 0

    def test_t_is_ratio(self, mixed):
        _, _, r = mixed
        np.testing.assert_allclose(r.t_stats, r.estimates / r.std_errors, rtol=1e-12)

    def test_covariance_symmetric(self, mixed):
        _, _, r = mixed
        np.testing.assert_array_equal(r.covariance, r.covariance.T)
        assert np.all(np.diag(r.covariance) >= 0)

    def test_nesting(self, mixed):
        ds, spec, r = mixed
        restricted = fit(ds, ModelSpec(fixed=("x1", "x2")))
        assert r.ll_converged >= restricted.ll_converged - 1e-6

    def test_reproducible(self, mixed):
        ds, spec, r = mixed
        again = fit(ds, spec)
        assert json.dumps(again.to_dict()) == json.dumps(r.to_dict())

    def test_negative_start_sigma(self, mixed):
        ds, spec, r = mixed
        start = ParameterVector.unpack(spec, r.estimates * np.array([1, 1, 1, -1]))
        again = fit(ds, spec, OptimOptions(initial_params=start))
        assert again.coefficient("sd(x2)") == pytest.approx(r.coefficient("sd(x2)"), rel=1e-3)
        np.testing.assert_allclose(again.std_errors, r.std_errors, rtol=1e-2)

    def test_restarts_never_worse(self, mixed):
        ds, spec, r = mixed
        more = fit(ds, spec, OptimOptions(restarts=3, restart_scale=0.5))
        assert more.ll_converged >= r.ll_converged - 1e-6

    def test_json_round_trip(self, mixed):
        _, _, r = mixed
        back = EstimationResult.from_dict(json.loads(json.dumps(r.to_dict())))
        assert back.to_dict() == r.to_dict()


class TestNonConvergence:
    def test_flagged(self):
        ds = logit_data(300, 6)
        r = fit(ds, ModelSpec(fixed=("x1", "x2")), OptimOptions(max_iterations=1))
        assert not r.converged

    def test_singular_information_withholds_se(self):
        ds = logit_data(200, 7)
        X = np.column_stack([ds.X[:, 0], ds.X[:, 0]])
        clone = CaseControlDataset(ds.unit_ids, ds.stratum_ids, ds.outcome, X, ("a", "b"))
        r = fit(clone, ModelSpec(fixed=("a", "b")))
        assert np.all(np.isnan(r.std_errors))
        assert "min_eigenvalue" in r.diagnostics
        json.dumps(r.to_dict())  # NaNs serialize as null

    @given(st.floats(1e-9, 1e-1), st.floats(1e-9, 1e-1))
    @settings(max_examples=10)
    def test_options_validated(self, a, b):
        OptimOptions(grad_tolerance=a, ll_rel_tolerance=b)
        with pytest.raises(ValueError):
            OptimOptions(grad_tolerance=-a)
