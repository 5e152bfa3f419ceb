import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import triplets

from ccmixlogit.dataset import load_dataset, write_dataset
from ccmixlogit.likelihood import (
    ModelSpec,
    ParameterVector,
    RandomTerm,
    SpecError,
    conditional_loglik_from_index,
    loglik_fixed,
)
from ccmixlogit.synthlab import (
    CovariateLaw,
    PoolExhaustedError,
    SyntheticTruth,
    brute_force_conditional,
    generate,
    quadrature_loglik,
)


def truth_for(spec, theta, n_strata=351, **kw):
    return SyntheticTruth(spec, ParameterVector.unpack(spec, np.asarray(theta, float)), n_strata, **kw)


class TestGenerate:
    def test_crash_sized(self):
        ds = generate(truth_for(ModelSpec(), [0.0]))
        assert (ds.n_cases, ds.n_controls, ds.n_strata) == (351, 702, 351)
        assert ds.matched_valid

    def test_deterministic(self):
        spec = ModelSpec(fixed=("x",), random=(RandomTerm("w"),))
        t = truth_for(spec, [0.0, 0.5, 0.2, 1.0], 50, seed=9)
        assert generate(t) == generate(t)
        other = truth_for(spec, [0.0, 0.5, 0.2, 1.0], 50, seed=10)
        assert not generate(t) == generate(other)

    def test_covariate_laws(self):
        spec = ModelSpec(fixed=("a", "b", "c"))
        laws = {"a": CovariateLaw("bernoulli", q=0.3), "b": CovariateLaw("fixed", value=2.5),
                "c": CovariateLaw("normal", mean=1.0, sd=2.0)}
        ds = generate(truth_for(spec, [0, 0, 0, 0], 3000, covariates=laws))
        a, b, c = ds.column("a"), ds.column("b"), ds.column("c")
        assert set(np.unique(a)) <= {0.0, 1.0}
        assert abs(a.mean() - 0.3) < 4 * math.sqrt(0.21 / a.size)
        assert np.all(b == 2.5)
        assert abs(c.mean() - 1.0) < 4 * 2.0 / math.sqrt(c.size)

    def test_extra_covariates_recorded(self):
        ds = generate(truth_for(ModelSpec(fixed=("a",)), [0, 0], 5,
                                covariates={"noise": CovariateLaw()}))
        assert ds.covariate_names == ("a", "noise")

    @pytest.mark.parametrize("beta", [1.0, 3.0])
    def test_selection_share_rises(self, beta):
        # share of strata where the case has the largest x, against beta = 0
        def share(b):
            ds = generate(truth_for(ModelSpec(constant=False, fixed=("x",)), [b], 10_000, seed=3))
            x = ds.column("x").reshape(-1, 3)
            case = ds.outcome.reshape(-1, 3).argmax(axis=1)
            return float(np.mean(x.argmax(axis=1) == case))

        s0, s1 = share(0.0), share(beta)
        assert abs(s0 - 1 / 3) < 4 * math.sqrt(2 / 9 / 10_000)
        assert s1 > s0
        if beta == 3.0:
            assert s1 > share(1.0)

    def test_selection_law(self):
        # empirical case frequency by member rank matches the softmax average
        spec = ModelSpec(constant=False, fixed=("x",))
        ds = generate(truth_for(spec, [1.5], 20_000, seed=4))
        x = ds.column("x").reshape(-1, 3)
        y = ds.outcome.reshape(-1, 3)
        order = np.argsort(x, axis=1)
        p = np.exp(1.5 * x)
        p /= p.sum(axis=1, keepdims=True)
        rows = np.arange(x.shape[0])[:, None]
        np.testing.assert_allclose(y[rows, order].mean(axis=0), p[rows, order].mean(axis=0), atol=0.015)

    def test_round_trip(self, tmp_path):
        spec = ModelSpec(fixed=("a",), random=(RandomTerm("b"),))
        ds = generate(truth_for(spec, [0.1, 0.2, 0.3, 0.4], 20,
                                covariates={"a": CovariateLaw("bernoulli", q=0.4)}))
        path = tmp_path / "d.csv"
        write_dataset(ds, path)
        assert load_dataset(path) == ds


class TestPopulation:
    def test_matched(self):
        t = truth_for(ModelSpec(fixed=("x",)), [-1.0, 0.5], 100, mode="population")
        ds = generate(t)
        assert ds.matched_valid and ds.n_strata == 100

    def test_pool_exhausted(self):
        t = truth_for(ModelSpec(), [-12.0], 50, mode="population", pool_factor=1.0)
        with pytest.raises(PoolExhaustedError):
            generate(t)

    def test_prevalence(self):
        # with no covariates the pool outcomes are the first N uniforms of the
        # seeded stream; rebuild the pool and tie it to generate via unit ids
        b0, S, seed = -1.2, 200, 5
        t = truth_for(ModelSpec(), [b0], S, mode="population", pool_factor=10.0, seed=seed)
        ds = generate(t)
        N = int(math.ceil(10.0 * S * 3))
        q = 1 / (1 + math.exp(-b0))
        pool = np.random.default_rng(seed).random(N) < q
        idx = np.array([int(u[1:]) for u in ds.unit_ids])
        np.testing.assert_array_equal(pool[idx], ds.outcome.astype(bool))
        assert abs(pool.mean() - q) < 3 * math.sqrt(q * (1 - q) / N)


class TestTruth:
    def test_json_round_trip(self):
        spec = ModelSpec(fixed=("a",), random=(RandomTerm("b", "lognormal", True),),
                         hm_links=(("b", ("z",)),))
        t = truth_for(spec, np.arange(spec.k) / 10, 12, covariates={"a": CovariateLaw("bernoulli", q=0.2)},
                      seed=2**63, mode="population")
        back = SyntheticTruth.from_dict(json.loads(json.dumps(t.to_dict())))
        assert back.to_dict() == t.to_dict()
        assert back.true_params == t.true_params

    def test_unknown_parameter(self):
        d = truth_for(ModelSpec(), [0.0], 3).to_dict()
        d["params"]["bogus"] = 1.0
        with pytest.raises(SpecError):
            SyntheticTruth.from_dict(d)

    def test_bad_fields(self):
        with pytest.raises(ValueError):
            truth_for(ModelSpec(), [0.0], 0)
        with pytest.raises(ValueError):
            truth_for(ModelSpec(), [0.0], 3, mode="cohort")
        with pytest.raises(ValueError):
            CovariateLaw("poisson")
        with pytest.raises(ValueError):
            CovariateLaw("bernoulli", q=1.5)


class TestBruteForce:
    def test_uniform(self):
        np.testing.assert_allclose(brute_force_conditional(np.zeros((3, 1)), [0.0]), [1 / 3] * 3, atol=1e-15)

    def test_saturation(self):
        p = brute_force_conditional([[20.0], [0.0], [0.0]], [1.0])
        assert p[0] > 1 - 1e-8

    def test_too_small(self):
        with pytest.raises(ValueError):
            brute_force_conditional([[1.0]], [1.0])

    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    @settings(max_examples=100)
    def test_matches_conditional_kernel(self, xs, beta):
        X = np.array(xs).reshape(3, 2)
        p = brute_force_conditional(X, beta)
        assert abs(p.sum() - 1) < 1e-12
        v = X @ np.array(beta)
        term = conditional_loglik_from_index(v, np.zeros(3, dtype=int), np.array([1, 0, 0]))
        assert abs(math.log(p[0]) - term) < 1e-12


class TestQuadratureErrors:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.ds = triplets(2, rng.normal(size=(6, 3)), ("a", "b", "c"))

    def test_too_many_dimensions(self):
        spec = ModelSpec(random=(RandomTerm("a"), RandomTerm("b"), RandomTerm("c")))
        with pytest.raises(SpecError):
            quadrature_loglik(self.ds, spec, np.zeros(spec.k))

    def test_non_normal(self):
        spec = ModelSpec(random=(RandomTerm("a", "triangular"),))
        with pytest.raises(SpecError):
            quadrature_loglik(self.ds, spec, np.zeros(spec.k))

    def test_few_nodes(self):
        spec = ModelSpec(random=(RandomTerm("a"),))
        with pytest.raises(ValueError):
            quadrature_loglik(self.ds, spec, np.zeros(spec.k), nodes=8)

    def test_point_mass(self):
        spec = ModelSpec(fixed=("b",), random=(RandomTerm("a"),))
        theta = np.array([0.2, -0.4, 0.7, 0.0])
        fixed = ModelSpec(fixed=("b", "a"))
        ref = loglik_fixed(self.ds, fixed, np.array([0.2, -0.4, 0.7]))
        assert abs(quadrature_loglik(self.ds, spec, theta) - ref) < 1e-10
