"""Fit statistics, model comparison and post-estimation effect tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Sequence

from scipy.stats import chi2, norm

from .dataset import DescriptiveRow
from .estimate import EstimationResult
from .likelihood import CONSTANT
from .mixing import MixingDistribution, distribution_mean, share_above_zero

__all__ = [
    "NotNestedError",
    "OptimizerFailureError",
    "FitStatistics",
    "LRTest",
    "EffectRow",
    "fit_statistics",
    "lr_test",
    "lr_test_values",
    "is_nested",
    "percent_relative_risk",
    "odds_ratio_interval",
    "effects_table",
    "render_fit_table",
    "render_coefficients",
    "render_effects",
    "render_shares",
    "render_descriptive",
    "render_report",
    "report_json",
    "report_csv",
]


class NotNestedError(ValueError):
    pass


class OptimizerFailureError(RuntimeError):
    """Likelihood-ratio statistic is negative beyond tolerance."""


@dataclass(frozen=True)
class FitStatistics:
    aic: float
    aic_finite_sample: float
    mcfadden_r2: float
    chi_square: float
    df: int
    n: int
    ll_converged: float
    ll_constant_only: float


def fit_statistics(L0: float, Lc: float, k: int, n: int) -> FitStatistics:
    if not (math.isfinite(L0) and math.isfinite(Lc)):
        raise ValueError("log-likelihoods must be finite")
    if n <= k + 1:
        raise ValueError("finite-sample AIC needs n > k + 1")
    aic = 2.0 * k - 2.0 * Lc
    return FitStatistics(
        aic=aic,
        aic_finite_sample=aic + 2.0 * k * (k + 1) / (n - k - 1),
        mcfadden_r2=1.0 - Lc / L0 if L0 != 0 else math.nan,
        chi_square=2.0 * (Lc - L0),
        df=k,
        n=n,
        ll_converged=Lc,
        ll_constant_only=L0,
    )


@dataclass(frozen=True)
class LRTest:
    statistic: float
    df: int
    p_value: float


def lr_test_values(ll_restricted: float, ll_full: float, df: int, slack: float = 1e-6) -> LRTest:
    stat = 2.0 * (ll_full - ll_restricted)
    if stat < -slack:
        raise OptimizerFailureError(
            f"restricted model fits better than the full model (LR = {stat:.6g})"
        )
    stat = max(stat, 0.0)
    return LRTest(stat, df, float(chi2.sf(stat, df)) if df > 0 else 1.0)


def is_nested(restricted: EstimationResult, full: EstimationResult) -> bool:
    same_data = restricted.n == full.n and restricted.n_strata == full.n_strata
    same_family = (
        restricted.spec.conditional == full.spec.conditional
        and (restricted.spec.grouping == full.spec.grouping
             or not restricted.spec.n_random or not full.spec.n_random)
    )
    return (
        same_data and same_family and set(restricted.names) <= set(full.names)
        and restricted.k <= full.k
    )


def lr_test(result_restricted: EstimationResult, result_full: EstimationResult) -> LRTest:
    if not is_nested(result_restricted, result_full):
        raise NotNestedError("restricted model is not nested in the full model")
    return lr_test_values(
        result_restricted.ll_converged,
        result_full.ll_converged,
        result_full.k - result_restricted.k,
    )


def percent_relative_risk(beta: float) -> float:
    """Percent change in the odds per unit change: 100 (exp(beta) - 1)."""
    return 100.0 * math.expm1(beta)


def odds_ratio_interval(beta: float, se: float, level: float = 0.95) -> tuple[float, float, float]:
    """Wald interval for the odds ratio exp(beta)."""
    if se < 0:
        raise ValueError("se must be >= 0")
    z = float(norm.ppf(0.5 + level / 2.0))
    return math.exp(beta), math.exp(beta - z * se), math.exp(beta + z * se)


@dataclass(frozen=True)
class EffectRow:
    variable: str
    beta: float
    pct_relative_risk: float
    direction: str
    share_above: float | None = None
    share_below: float | None = None
    hm_note: str | None = None


def effects_table(result: EstimationResult) -> list[EffectRow]:
    """Relative risks for every covariate and sign shares for random ones."""
    spec = result.spec
    est = dict(zip(result.names, result.estimates))
    rows = []
    for name in spec.fixed_names:
        if name == CONSTANT:
            continue
        b = est[name]
        rows.append(EffectRow(name, b, percent_relative_risk(b), "up" if b >= 0 else "down"))
    for term in spec.random_terms:
        if term.name == CONSTANT:
            continue
        dist = MixingDistribution(term.kind, est[term.name], abs(est[f"sd({term.name})"]),
                                  term.negative)
        b = distribution_mean(dist)
        above = 100.0 * share_above_zero(dist)
        below = 100.0 - above
        if 0.0 < above < 100.0:
            direction = "mixed"
        else:
            direction = "up" if above == 100.0 else "down"
        links = spec.links_for(term.name)
        note = None
        if links:
            note = ", ".join(
                f"{z} ({'+' if est[f'hm({term.name}; {z})'] >= 0 else '-'})" for z in links
            )
        rows.append(EffectRow(term.name, b, percent_relative_risk(b), direction, above, below, note))
    return rows


# -- rendering ------------------------------------------------------------------

def _fmt(v, digits=2):
    if v is None:
        return "---"
    if isinstance(v, float) and not math.isfinite(v):
        return "n/a"
    return f"{v:.{digits}f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(  # noqa: E731
        str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
    )
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])


def _result_fit(result: EstimationResult) -> FitStatistics:
    return fit_statistics(result.ll_constant_only, result.ll_converged, result.k, result.n)


def render_fit_table(results: Sequence[EstimationResult], labels: Sequence[str] | None = None) -> str:
    labels = list(labels or [f"Model {i + 1}" for i in range(len(results))])
    stats = [_result_fit(r) for r in results]
    rows = [
        ["Number of observations"] + [str(r.n) for r in results],
        ["Number of strata"] + [str(r.n_strata) for r in results],
        ["Degrees of freedom"] + [str(r.k) for r in results],
        ["Log-likelihood with constant only, L0"] + [_fmt(s.ll_constant_only) for s in stats],
        ["Log-likelihood at convergence, Lc"] + [_fmt(s.ll_converged) for s in stats],
        ["Chi-square statistic [2(Lc - L0)]"] + [_fmt(s.chi_square) for s in stats],
        ["AIC"] + [_fmt(s.aic) for s in stats],
        ["Finite sample AIC"] + [_fmt(s.aic_finite_sample) for s in stats],
        ["McFadden pseudo R2"] + [_fmt(s.mcfadden_r2, 3) for s in stats],
    ]
    return _table(["Goodness of fit"] + labels, rows)


def render_coefficients(result: EstimationResult) -> str:
    rows = [
        [name, _fmt(b, 3), _fmt(se, 3), _fmt(t, 2)]
        for name, b, se, t in zip(result.names, result.estimates, result.std_errors, result.t_stats)
    ]
    return _table(["Variable", "beta", "s.e.", "t-stat"], rows)


def render_effects(rows: Sequence[EffectRow]) -> str:
    arrows = {"up": "up", "down": "down", "mixed": "[mixed]"}
    body = [[r.variable, arrows[r.direction], _fmt(r.pct_relative_risk)] for r in rows]
    return _table(["Variable", "Direction", "% change in risk"], body)


def render_shares(result: EstimationResult, rows: Sequence[EffectRow]) -> str:
    est = dict(zip(result.names, result.estimates))
    body = []
    for r in rows:
        if r.share_above is None:
            continue
        body.append([
            r.variable, _fmt(est[r.variable], 3), _fmt(est[f"sd({r.variable})"], 3),
            _fmt(r.share_above) + "%", _fmt(r.share_below) + "%", r.hm_note or "",
        ])
    return _table(["Variable", "mu", "SD", "Above zero", "Below zero", "Mean shifters"], body)


def render_descriptive(rows: Sequence[DescriptiveRow]) -> str:
    body = [
        [r.variable, _fmt(r.mean_case), _fmt(r.sd_case), f"{_fmt(r.min_case)}/{_fmt(r.max_case)}",
         _fmt(r.mean_control), _fmt(r.sd_control), f"{_fmt(r.min_control)}/{_fmt(r.max_control)}",
         _fmt(r.t_statistic), r.verdict]
        for r in rows
    ]
    return _table(
        ["Variable", "mean case", "SD", "min/max", "mean control", "SD", "min/max", "t", "H0"],
        body,
    )


def render_report(result: EstimationResult, timestamp: str | None = None) -> str:
    rows = effects_table(result)
    parts = []
    if timestamp:
        parts.append(f"generated: {timestamp}")
    parts += [
        f"kernel: {result.kernel}   converged: {result.converged}   iterations: {result.iterations}",
        "",
        render_fit_table([result], ["Model"]),
        "",
        render_coefficients(result),
        "",
        render_effects(rows),
    ]
    if any(r.share_above is not None for r in rows):
        parts += ["", render_shares(result, rows)]
    return "\n".join(parts) + "\n"


def report_json(result: EstimationResult) -> dict:
    fs = _result_fit(result)
    return {
        "fit_statistics": asdict(fs),
        "effects": [asdict(r) for r in effects_table(result)],
    }


def report_csv(result: EstimationResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    fs = asdict(_result_fit(result))
    w.writerow(["table", "key", "value"])
    for key, value in fs.items():
        w.writerow(["fit", key, repr(value)])
    w.writerow([])
    w.writerow(["variable", "beta", "pct_relative_risk", "direction", "share_above",
                "share_below", "hm_note"])
    for r in effects_table(result):
        w.writerow([r.variable, repr(r.beta), repr(r.pct_relative_risk), r.direction,
                    "" if r.share_above is None else repr(r.share_above),
                    "" if r.share_below is None else repr(r.share_below), r.hm_note or ""])
    return out.getvalue()
