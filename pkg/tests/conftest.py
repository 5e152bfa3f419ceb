import numpy as np
import pytest

from ccmixlogit.dataset import CaseControlDataset
from ccmixlogit.likelihood import ModelSpec, RandomTerm


def triplets(n_strata, X=None, names=(), case_first=True):
    """Matched 1:2 dataset with ``n_strata`` strata; case is member 0."""
    n = 3 * n_strata
    y = np.tile([1, 0, 0], n_strata)
    if X is None:
        X = np.zeros((n, 0))
    units = tuple(f"u{i}" for i in range(n))
    strata = tuple(f"s{i // 3}" for i in range(n))
    return CaseControlDataset(units, strata, y, np.asarray(X, dtype=float), tuple(names))


def singletons(y, X, names):
    n = len(y)
    ids = tuple(f"u{i}" for i in range(n))
    return CaseControlDataset(ids, ids, np.asarray(y), np.asarray(X, dtype=float), tuple(names))


def mixed_strata(seed=0, sizes=(3, 3, 2, 2), names=("x1", "x2", "x3")):
    """Small dataset, one case per stratum, unequal stratum sizes."""
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    strata = tuple(f"s{j}" for j, s in enumerate(sizes) for _ in range(s))
    y = np.concatenate([[1] + [0] * (s - 1) for s in sizes])
    X = rng.normal(size=(n, len(names)))
    return CaseControlDataset(tuple(f"u{i}" for i in range(n)), strata, y, X, names)


KERNEL_SPECS = {
    "fixed": ModelSpec(fixed=("x1", "x2", "x3")),
    "conditional": ModelSpec(fixed=("x1", "x2", "x3"), conditional=True),
    "simulated": ModelSpec(
        fixed=("x1",), random=(RandomTerm("x2"), RandomTerm("x3", "lognormal", True)),
        hm_links=(("x2", ("x1",)),), draws=40,
    ),
    "simulated_intercept": ModelSpec(
        fixed=("x1",), random=(RandomTerm("x2", "uniform"),), random_intercept=True,
        hm_links=(("constant", ("x3",)),), draws=40,
    ),
    "grouped": ModelSpec(
        fixed=("x1",), random=(RandomTerm("x2", "triangular"), RandomTerm("x3", "weibull")),
        hm_links=(("x2", ("x1", "x3")),), grouping="stratum", draws=40,
    ),
    "simulated_conditional": ModelSpec(
        fixed=("x1",), random=(RandomTerm("x2"), RandomTerm("x3", "uniform")),
        hm_links=(("x2", ("x3",)),), grouping="stratum", conditional=True, draws=40,
    ),
}


@pytest.fixture
def crash_triplets():
    """351 strata of 1 case and 2 controls, no covariates."""
    return triplets(351)


@pytest.fixture
def small_random():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(12, 3))
    return triplets(4, X, ("x1", "x2", "x3"))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        with capsys.disabled():
            print(f"\n{line}")
        request.config.stash.setdefault(_ACCEPTANCE, []).append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
