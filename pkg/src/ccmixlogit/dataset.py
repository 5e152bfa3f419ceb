"""Matched case-control data: loading, validation and descriptive comparisons.

CSV layout: header row, then ``unit_id, stratum_id, outcome, <covariates...>``.
Outcome is ``1`` for a case and ``0`` for a control.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

__all__ = [
    "DataFormatError",
    "Observation",
    "CaseControlDataset",
    "StratumCount",
    "ValidationReport",
    "DescriptiveRow",
    "load_dataset",
    "write_dataset",
    "validate_matching",
    "mean_comparison",
    "describe",
]

REQUIRED_COLUMNS = ("unit_id", "stratum_id", "outcome")


class DataFormatError(ValueError):
    """Malformed case-control input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Observation:
    unit_id: str
    stratum_id: str
    outcome: int
    covariates: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class CaseControlDataset:
    """Immutable table of observations grouped into matched strata."""

    unit_ids: tuple[str, ...]
    stratum_ids: tuple[str, ...]
    outcome: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...]
    controls_per_case: int = 2
    stratum_codes: np.ndarray = field(init=False, repr=False)
    stratum_labels: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.unit_ids)
        y = np.asarray(self.outcome, dtype=np.int64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64).reshape(n, len(self.covariate_names))
        if len(self.stratum_ids) != n or y.shape[0] != n:
            raise ValueError("unit_ids, stratum_ids and outcome must have equal length")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("outcome must be 0 or 1")
        if len(set(self.unit_ids)) != n:
            raise ValueError("duplicate unit_id")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise ValueError("duplicate covariate name")
        labels: dict[str, int] = {}
        codes = np.array(
            [labels.setdefault(s, len(labels)) for s in self.stratum_ids], dtype=np.int64
        )
        y.setflags(write=False)
        X.setflags(write=False)
        codes.setflags(write=False)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "stratum_codes", codes)
        object.__setattr__(self, "stratum_labels", tuple(labels))

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def n_cases(self) -> int:
        return int(self.outcome.sum())

    @property
    def n_controls(self) -> int:
        return self.n - self.n_cases

    @property
    def n_strata(self) -> int:
        return len(self.stratum_labels)

    @property
    def strata(self) -> dict[str, tuple[str, ...]]:
        members: dict[str, list[str]] = {s: [] for s in self.stratum_labels}
        for uid, sid in zip(self.unit_ids, self.stratum_ids):
            members[sid].append(uid)
        return {s: tuple(m) for s, m in members.items()}

    @property
    def matched_valid(self) -> bool:
        return validate_matching(self).valid

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(
            Observation(u, s, int(y), tuple(float(v) for v in row))
            for u, s, y, row in zip(self.unit_ids, self.stratum_ids, self.outcome, self.X)
        )

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise KeyError(f"unknown covariate {name!r}") from None
        return self.X[:, j]

    def __eq__(self, other):
        if not isinstance(other, CaseControlDataset):
            return NotImplemented
        return (
            self.unit_ids == other.unit_ids
            and self.stratum_ids == other.stratum_ids
            and self.covariate_names == other.covariate_names
            and self.controls_per_case == other.controls_per_case
            and np.array_equal(self.outcome, other.outcome)
            and np.array_equal(self.X, other.X)
        )

    @classmethod
    def from_observations(
        cls,
        observations: Iterable[Observation],
        covariate_names: Sequence[str],
        controls_per_case: int = 2,
    ) -> "CaseControlDataset":
        obs = list(observations)
        for o in obs:
            if len(o.covariates) != len(covariate_names):
                raise ValueError(f"unit {o.unit_id}: wrong number of covariates")
        return cls(
            unit_ids=tuple(o.unit_id for o in obs),
            stratum_ids=tuple(o.stratum_id for o in obs),
            outcome=np.array([o.outcome for o in obs], dtype=np.int64),
            X=np.array([o.covariates for o in obs], dtype=np.float64).reshape(
                len(obs), len(covariate_names)
            ),
            covariate_names=tuple(covariate_names),
            controls_per_case=controls_per_case,
        )


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary file-like object
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def load_dataset(source, controls_per_case: int = 2) -> CaseControlDataset:
    """Read a case-control CSV from a path, bytes, or a file object."""
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file: header row required", 1) from None
        if tuple(header[:3]) != REQUIRED_COLUMNS:
            raise DataFormatError(
                f"header must start with {','.join(REQUIRED_COLUMNS)}", 1
            )
        names = header[3:]
        unit_ids, stratum_ids, outcome, rows = [], [], [], []
        seen: set[str] = set()
        for lineno, fields in enumerate(reader, start=2):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, found {len(fields)}", lineno
                )
            uid, sid, y = fields[0].strip(), fields[1].strip(), fields[2].strip()
            if y not in ("0", "1"):
                raise DataFormatError(f"non-binary outcome {y!r}", lineno)
            if uid in seen:
                raise DataFormatError(f"duplicate unit_id {uid!r}", lineno)
            seen.add(uid)
            try:
                values = [float(v) for v in fields[3:]]
            except ValueError:
                bad = next(v for v in fields[3:] if not _is_float(v))
                raise DataFormatError(f"non-numeric covariate {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise DataFormatError("non-finite covariate value", lineno)
            unit_ids.append(uid)
            stratum_ids.append(sid)
            outcome.append(int(y))
            rows.append(values)
    finally:
        if owned:
            fh.close()
    return CaseControlDataset(
        unit_ids=tuple(unit_ids),
        stratum_ids=tuple(stratum_ids),
        outcome=np.array(outcome, dtype=np.int64),
        X=np.array(rows, dtype=np.float64).reshape(len(rows), len(names)),
        covariate_names=tuple(names),
        controls_per_case=controls_per_case,
    )


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_dataset(dataset: CaseControlDataset, target) -> None:
    """Write ``dataset`` in the CSV layout read by :func:`load_dataset`.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    own = isinstance(target, (str, os.PathLike))
    fh = open(target, "w", encoding="utf-8", newline="") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS + dataset.covariate_names)
        for uid, sid, y, row in zip(
            dataset.unit_ids, dataset.stratum_ids, dataset.outcome, dataset.X
        ):
            writer.writerow([uid, sid, int(y)] + [repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


@dataclass(frozen=True)
class StratumCount:
    stratum_id: str
    cases: int
    controls: int


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    controls_per_case: int
    counts: tuple[StratumCount, ...]
    offending: tuple[StratumCount, ...]
    n_cases: int
    n_controls: int

    def summary(self) -> str:
        lines = [
            f"strata: {len(self.counts)}  cases: {self.n_cases}  "
            f"controls: {self.n_controls}  m: {self.controls_per_case}",
            f"verdict: {'valid' if self.valid else 'INVALID'}",
        ]
        for c in self.offending:
            lines.append(
                f"  stratum {c.stratum_id}: {c.cases} case(s), {c.controls} control(s)"
            )
        return "\n".join(lines)


def validate_matching(dataset: CaseControlDataset) -> ValidationReport:
    """Check that every stratum holds one case and ``m`` controls."""
    m = dataset.controls_per_case
    cases = np.bincount(dataset.stratum_codes, weights=dataset.outcome, minlength=dataset.n_strata)
    sizes = np.bincount(dataset.stratum_codes, minlength=dataset.n_strata)
    counts = tuple(
        StratumCount(label, int(c), int(s - c))
        for label, c, s in zip(dataset.stratum_labels, cases, sizes)
    )
    offending = tuple(c for c in counts if c.cases != 1 or c.controls != m)
    return ValidationReport(
        valid=not offending,
        controls_per_case=m,
        counts=counts,
        offending=offending,
        n_cases=dataset.n_cases,
        n_controls=dataset.n_controls,
    )


@dataclass(frozen=True)
class DescriptiveRow:
    variable: str
    mean_case: float
    sd_case: float
    min_case: float
    max_case: float
    mean_control: float
    sd_control: float
    min_control: float
    max_control: float
    t_statistic: float
    verdict: str


def mean_comparison(
    mean_case: float,
    sd_case: float,
    n_case: int,
    mean_control: float,
    sd_control: float,
    n_control: int,
    confidence: float = 0.95,
    pooled: bool = True,
) -> tuple[float, str]:
    """Two-sample t statistic for H0: mean_control - mean_case = 0.

    Returns ``(t, verdict)`` where verdict is ``"Fail"`` when H0 is rejected
    at ``confidence`` (two-sided, normal critical value) and ``"Pass"``
    otherwise.  ``pooled=False`` gives the Welch statistic.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if n_case < 2 or n_control < 2:
        raise ValueError("each group needs at least 2 observations")
    diff = mean_control - mean_case
    if pooled:
        sp2 = ((n_case - 1) * sd_case**2 + (n_control - 1) * sd_control**2) / (
            n_case + n_control - 2
        )
        var = sp2 * (1.0 / n_case + 1.0 / n_control)
    else:
        var = sd_case**2 / n_case + sd_control**2 / n_control
    if var == 0.0:
        t = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    else:
        t = diff / math.sqrt(var)
    critical = float(norm.ppf(0.5 + confidence / 2.0))
    return t, ("Fail" if abs(t) > critical else "Pass")


def describe(
    dataset: CaseControlDataset, confidence: float = 0.95, pooled: bool = True
) -> list[DescriptiveRow]:
    """Case-versus-control summary with a mean-comparison test per covariate."""
    case = dataset.outcome == 1
    rows = []
    for j, name in enumerate(dataset.covariate_names):
        a, b = dataset.X[case, j], dataset.X[~case, j]
        if a.size < 2 or b.size < 2:
            raise ValueError("each group needs at least 2 observations")
        sd_a, sd_b = float(a.std(ddof=1)), float(b.std(ddof=1))
        t, verdict = mean_comparison(
            float(a.mean()), sd_a, a.size, float(b.mean()), sd_b, b.size, confidence, pooled
        )
        rows.append(
            DescriptiveRow(
                variable=name,
                mean_case=float(a.mean()),
                sd_case=sd_a,
                min_case=float(a.min()),
                max_case=float(a.max()),
                mean_control=float(b.mean()),
                sd_control=sd_b,
                min_control=float(b.min()),
                max_control=float(b.max()),
                t_statistic=t,
                verdict=verdict,
            )
        )
    return rows
