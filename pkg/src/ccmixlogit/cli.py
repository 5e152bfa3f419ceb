"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 data validation failure,
3 non-convergence.

Model files are line oriented; ``#`` starts a comment::

    constant on
    fixed age helmet_partial
    random miles normal
    random speed_gt_50 lognormal sign=-
    hm miles: origin_work single_rider
    grouping individual
    draws 1000
    halton skip=50 scramble=on seed=42
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .dataset import DataFormatError, describe, load_dataset, validate_matching, write_dataset
from .estimate import EstimationResult, OptimOptions, fit
from .inference import (
    fit_statistics,
    is_nested,
    lr_test,
    render_descriptive,
    render_fit_table,
    render_report,
    report_csv,
    report_json,
)
from .likelihood import ModelSpec, RandomTerm, SpecError
from .mixing import KINDS
from .quasirandom import HaltonConfig
from .synthlab import PoolExhaustedError, SyntheticTruth, generate

__all__ = ["ModelFileError", "RunManifest", "parse_model_file", "format_model_file", "run", "main"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3


class ModelFileError(ValueError):
    def __init__(self, message: str, line: int, token: str | None = None):
        self.line = line
        self.token = token
        where = f"line {line}" + (f", token {token!r}" if token is not None else "")
        super().__init__(f"{where}: {message}")


def _on_off(value: str, lineno: int) -> bool:
    if value not in ("on", "off"):
        raise ModelFileError("expected on|off", lineno, value)
    return value == "on"


def parse_model_file(source: str) -> ModelSpec:
    """Parse the line-oriented model grammar into a :class:`ModelSpec`."""
    fixed: list[str] = []
    random: list[RandomTerm] = []
    hm: list[tuple[str, tuple[str, ...]]] = []
    opts: dict = {}
    halton: dict = {}
    roles: dict[str, int] = {}

    def claim(name: str, lineno: int):
        if name in roles:
            raise ModelFileError(f"covariate already declared on line {roles[name]}", lineno, name)
        roles[name] = lineno

    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        head, *args = text.split()
        if head == "fixed":
            if not args:
                raise ModelFileError("fixed needs at least one covariate", lineno, head)
            for a in args:
                claim(a, lineno)
                fixed.append(a)
        elif head == "random":
            if len(args) not in (2, 3):
                raise ModelFileError("usage: random <name> <dist> [sign=-]", lineno, head)
            name, kind = args[0], args[1]
            if kind not in KINDS:
                raise ModelFileError(f"unknown distribution (expected {'|'.join(KINDS)})", lineno, kind)
            negative = False
            if len(args) == 3:
                if args[2] not in ("sign=-", "sign=+"):
                    raise ModelFileError("expected sign=- or sign=+", lineno, args[2])
                if kind != "lognormal":
                    raise ModelFileError("sign= applies to lognormal only", lineno, args[2])
                negative = args[2] == "sign=-"
            claim(name, lineno)
            random.append(RandomTerm(name, kind, negative))
        elif head == "hm":
            rest = " ".join(args)
            if ":" not in rest:
                raise ModelFileError("usage: hm <name>: <z1> <z2> ...", lineno, head)
            key, zs = rest.split(":", 1)
            key, zs = key.strip(), zs.split()
            if not key or not zs:
                raise ModelFileError("usage: hm <name>: <z1> <z2> ...", lineno, head)
            if any(k == key for k, _ in hm):
                raise ModelFileError("duplicate hm link", lineno, key)
            hm.append((key, tuple(zs)))
        elif head == "grouping":
            if args not in (["individual"], ["stratum"]):
                raise ModelFileError("expected individual|stratum", lineno, " ".join(args) or head)
            opts["grouping"] = args[0]
        elif head == "draws":
            if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 1:
                raise ModelFileError("draws needs a positive integer", lineno, " ".join(args) or head)
            opts["draws"] = int(args[0])
        elif head in ("constant", "random_intercept", "conditional"):
            if len(args) != 1:
                raise ModelFileError("expected on|off", lineno, head)
            opts[head] = _on_off(args[0], lineno)
        elif head == "halton":
            for a in args:
                key, sep, value = a.partition("=")
                if not sep:
                    raise ModelFileError("expected key=value", lineno, a)
                try:
                    if key == "skip":
                        halton["skip"] = int(value)
                    elif key == "seed":
                        halton["seed"] = int(value)
                    elif key == "scramble":
                        halton["scramble"] = _on_off(value, lineno)
                    else:
                        raise ModelFileError("unknown halton option", lineno, key)
                except ValueError as exc:
                    if isinstance(exc, ModelFileError):
                        raise
                    raise ModelFileError("expected an integer", lineno, a) from None
        else:
            raise ModelFileError("unknown keyword", lineno, head)

    rnames = {t.name for t in random}
    for key, _ in hm:
        if key not in rnames and not (key == "constant" and opts.get("random_intercept")):
            raise ModelFileError("hm link on a covariate that is not random", 0, key)
    try:
        return ModelSpec(
            fixed=tuple(fixed),
            random=tuple(random),
            hm_links=tuple(hm),
            halton=HaltonConfig(**halton),
            **opts,
        )
    except (SpecError, ValueError) as exc:
        raise ModelFileError(str(exc), 0) from None


def format_model_file(spec: ModelSpec) -> str:
    lines = [f"constant {'on' if spec.constant else 'off'}"]
    if spec.random_intercept:
        lines.append("random_intercept on")
    if spec.conditional:
        lines.append("conditional on")
    if spec.fixed:
        lines.append("fixed " + " ".join(spec.fixed))
    for t in spec.random:
        lines.append(f"random {t.name} {t.kind}" + (" sign=-" if t.negative else ""))
    for key, zs in spec.hm_links:
        lines.append(f"hm {key}: " + " ".join(zs))
    lines.append(f"grouping {spec.grouping}")
    lines.append(f"draws {spec.draws}")
    h = spec.halton
    lines.append(f"halton skip={h.skip} scramble={'on' if h.scramble else 'off'} seed={h.seed}")
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    command: str
    data: Path | None = None
    model: Path | None = None
    out: Path | None = None
    format: str = "text"
    seed: int | None = None
    draws: int | None = None
    confidence: float = 0.95
    welch: bool = False
    controls_per_case: int = 2
    max_iterations: int = 500
    restarts: int = 1
    results: list[Path] = field(default_factory=list)
    truth: Path | None = None
    timestamps: bool = True


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _cmd_validate(m: RunManifest) -> int:
    ds = load_dataset(m.data, m.controls_per_case)
    report = validate_matching(ds)
    _emit(report.summary() + "\n", m.out)
    return EXIT_OK if report.valid else EXIT_DATA


def _cmd_describe(m: RunManifest) -> int:
    ds = load_dataset(m.data, m.controls_per_case)
    rows = describe(ds, m.confidence, pooled=not m.welch)
    if m.format == "json":
        text = json.dumps([dataclasses.asdict(r) for r in rows], indent=2) + "\n"
    elif m.format == "csv":
        fields = [f.name for f in dataclasses.fields(rows[0])] if rows else []
        lines = [",".join(fields)] + [
            ",".join(repr(v) if isinstance(v, float) else str(v) for v in dataclasses.astuple(r))
            for r in rows
        ]
        text = "\n".join(lines) + "\n"
    else:
        text = render_descriptive(rows) + "\n"
    _emit(text, m.out)
    return EXIT_OK


def _cmd_fit(m: RunManifest) -> int:
    spec = parse_model_file(Path(m.model).read_text(encoding="utf-8"))
    if m.draws is not None:
        spec = dataclasses.replace(spec, draws=m.draws)
    if m.seed is not None:
        spec = dataclasses.replace(spec, halton=dataclasses.replace(spec.halton, seed=m.seed))
    ds = load_dataset(m.data, m.controls_per_case)
    missing = [c for c in spec.covariates_used() if c not in ds.covariate_names]
    if missing:
        print(f"error: model references unknown covariate(s): {', '.join(missing)}", file=sys.stderr)
        return EXIT_DATA
    if spec.grouping == "stratum" or spec.conditional:
        report = validate_matching(ds)
        if not report.valid:
            print("error: data fail the matched-strata check\n" + report.summary(), file=sys.stderr)
            return EXIT_DATA
    options = OptimOptions(max_iterations=m.max_iterations, restarts=m.restarts)
    result = fit(ds, spec, options)

    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(result.to_dict(), out / "result.json")
    if m.format == "json":
        _dump_json(report_json(result), out / "report.json")
    elif m.format == "csv":
        (out / "report.csv").write_text(report_csv(result), encoding="utf-8")
    else:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if m.timestamps else None
        (out / "report.txt").write_text(render_report(result, stamp), encoding="utf-8")
    if not result.converged:
        print(f"warning: not converged ({result.message})", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_compare(m: RunManifest) -> int:
    if len(m.results) < 2:
        print("error: compare needs at least two result documents", file=sys.stderr)
        return EXIT_USAGE
    results = [
        EstimationResult.from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
        for p in m.results
    ]
    specs = [json.dumps(r.spec.to_dict(), sort_keys=True) for r in results]
    if len(set(specs)) == 1:
        print("error: all result documents share one spec; nothing to compare", file=sys.stderr)
        return EXIT_USAGE
    labels = [Path(p).parent.name or Path(p).stem for p in m.results]
    tests = []
    for i, a in enumerate(results):
        for j, b in enumerate(results):
            if i != j and a.k < b.k and is_nested(a, b):
                t = lr_test(a, b)
                tests.append({"restricted": labels[i], "full": labels[j],
                              "statistic": t.statistic, "df": t.df, "p_value": t.p_value})
    if m.format == "json":
        doc = {
            "models": [
                {"label": lab, **dataclasses.asdict(
                    fit_statistics(r.ll_constant_only, r.ll_converged, r.k, r.n))}
                for lab, r in zip(labels, results)
            ],
            "lr_tests": tests,
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = render_fit_table(results, labels) + "\n"
        if tests:
            text += "\nLikelihood ratio tests (nested pairs)\n"
            for t in tests:
                text += (f"  {t['restricted']} vs {t['full']}: LR = {t['statistic']:.2f}, "
                         f"df = {t['df']}, p = {t['p_value']:.4g}\n")
    _emit(text, m.out)
    return EXIT_OK


def _cmd_simulate(m: RunManifest) -> int:
    truth = SyntheticTruth.from_dict(json.loads(Path(m.truth).read_text(encoding="utf-8")))
    ds = generate(truth)
    out = Path(m.out)
    write_dataset(ds, out)
    _dump_json(truth.to_dict(), out.with_suffix(".truth.json"))
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "describe": _cmd_describe,
    "fit": _cmd_fit,
    "compare": _cmd_compare,
    "simulate": _cmd_simulate,
}


def run(manifest: RunManifest) -> int:
    """Execute one command; returns the process exit code."""
    try:
        return _COMMANDS[manifest.command](manifest)
    except ModelFileError as exc:
        print(f"error: model file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, PoolExhaustedError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SpecError, KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ccmixlogit", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check the 1-case-to-m-controls structure")
    v.add_argument("--data", required=True, type=Path)
    v.add_argument("--controls-per-case", type=int, default=2)
    v.add_argument("--out", type=Path)

    d = sub.add_parser("describe", help="case/control summary with mean-comparison tests")
    d.add_argument("--data", required=True, type=Path)
    d.add_argument("--confidence", type=float, default=0.95)
    d.add_argument("--welch", action="store_true", help="unequal-variance t statistic")
    d.add_argument("--controls-per-case", type=int, default=2)
    d.add_argument("--format", choices=("text", "json", "csv"), default="text")
    d.add_argument("--out", type=Path)

    f = sub.add_parser("fit", help="estimate a model")
    f.add_argument("--data", required=True, type=Path)
    f.add_argument("--model", required=True, type=Path)
    f.add_argument("--out", required=True, type=Path)
    f.add_argument("--draws", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--format", choices=("text", "json", "csv"), default="text")
    f.add_argument("--max-iterations", type=int, default=500)
    f.add_argument("--restarts", type=int, default=1)
    f.add_argument("--controls-per-case", type=int, default=2)
    f.add_argument("--no-timestamp", action="store_true")

    c = sub.add_parser("compare", help="fit statistics and LR tests for saved results")
    c.add_argument("results", nargs="+", type=Path)
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.add_argument("--out", type=Path)

    s = sub.add_parser("simulate", help="generate a synthetic dataset from a truth file")
    s.add_argument("--truth", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    manifest = RunManifest(command=args.command)
    for key, value in vars(args).items():
        if key == "no_timestamp":
            manifest.timestamps = not value
        elif hasattr(manifest, key):
            setattr(manifest, key, value)
    return run(manifest)


if __name__ == "__main__":
    sys.exit(main())
