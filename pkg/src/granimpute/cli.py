"""Command-line front end: stats, impute, mask-bench and pipeline subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .baselines_eval import IMPUTERS, impurity_sweep
from .classifiers import KINDS
from .data_model import (DataError, build_mask, encode_categoricals, load_path, write_csv)
from .granular_imputer import impute_table
from .granule import DEFAULT_CELL_BUDGET, DEFAULT_DELTA, DEFAULT_ETA
from .pipeline import PipelineConfig, run_pipeline
from .semantics import correlation_matrix

log = logging.getLogger("granimpute")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    subcommand: str
    input: str
    output: str | None = None
    delta: int = DEFAULT_DELTA
    eta: int = DEFAULT_ETA
    k_features: int = 16
    rates: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3)
    imputers: tuple[str, ...] = IMPUTERS
    classifiers: tuple[str, ...] = KINDS
    seed: int = 42
    missing_tokens: tuple[str, ...] | None = None
    report: str | None = None
    dumps: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.delta < 1:
            raise UsageError("--delta must be >= 1")
        if self.eta < 2:
            raise UsageError("--eta must be >= 2")
        if self.delta * self.eta > DEFAULT_CELL_BUDGET:
            raise UsageError(f"delta*eta must not exceed {DEFAULT_CELL_BUDGET}")
        if any(not 0 < r < 1 for r in self.rates):
            raise UsageError("--rates must lie strictly between 0 and 1")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("--seed must fit in 64 bits")
        if self.k_features < 1:
            raise UsageError("--k-features must be >= 1")


def _csv_list(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _rates(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in _csv_list(s))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid rate list {s!r}") from None


def _build_parser() -> _Parser:
    p = _Parser(prog="granimpute", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--input", required=True, help="CSV or ARFF file")
        sp.add_argument("--format", choices=("csv", "arff"), help="default: from extension")
        sp.add_argument("--missing-tokens", type=_csv_list,
                        help="comma-separated missing markers (default: '',?,NaN,na)")
        sp.add_argument("--label", default="auto",
                        help="label column name; 'auto' picks class/label/target, 'none' disables")

    def granular(sp):
        sp.add_argument("--delta", type=int, default=DEFAULT_DELTA, help="correlated features per granule")
        sp.add_argument("--eta", type=int, default=DEFAULT_ETA, help="reliable rows per granule")

    sp = sub.add_parser("stats", help="dataset summary: size, missing counts, class balance")
    common(sp)
    sp.add_argument("--report", help="write the summary as JSON")

    sp = sub.add_parser("impute", help="fill missing cells with the granular imputer")
    common(sp)
    granular(sp)
    sp.add_argument("--output", required=True, help="imputed CSV")
    sp.add_argument("--dump-provenance", help="JSON-lines record per imputed cell")
    sp.add_argument("--dump-granules", help="JSON-lines record per granule")
    sp.add_argument("--dump-corr", help="feature correlation matrix as CSV")

    sp = sub.add_parser("mask-bench", help="synthetic masking benchmark of imputers")
    common(sp)
    granular(sp)
    sp.add_argument("--rates", type=_rates, default=(0.05, 0.1, 0.2, 0.3))
    sp.add_argument("--imputers", type=_csv_list, default=IMPUTERS)
    sp.add_argument("--knn-k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--report", required=True, help="JSON report path")
    sp.add_argument("--dump-errors", help="per-cell errors as CSV")

    sp = sub.add_parser("pipeline", help="impute, select, balance and evaluate classifiers")
    common(sp)
    granular(sp)
    sp.add_argument("--classifiers", type=_csv_list, default=KINDS)
    sp.add_argument("--k-features", type=int, default=16)
    sp.add_argument("--select-trees", type=int, default=200,
                    help="trees in the feature-selection forest")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--report", required=True, help="JSON report path")
    sp.add_argument("--dump-roc", help="directory for per-classifier ROC CSVs")
    sp.add_argument("--set", action="append", default=[], metavar="KIND.PARAM=VALUE",
                    help="classifier hyperparameter override, e.g. rforest.n_trees=50")
    return p


def _hyperparams(items) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for item in items:
        try:
            key, raw = item.split("=", 1)
            kind, param = key.split(".", 1)
        except ValueError:
            raise UsageError(f"malformed --set {item!r}; expected KIND.PARAM=VALUE") from None
        if kind not in KINDS:
            raise UsageError(f"unknown classifier {kind!r} in --set")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.setdefault(kind, {})[param] = value
    return out


def _label_arg(s):
    if s is None or s.lower() == "auto":
        return "auto"
    if s.lower() == "none":
        return None
    return s


def _load(args):
    try:
        return load_path(args.input, args.format, args.missing_tokens, _label_arg(args.label))
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror or exc}") from None


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summarize(t) -> dict:
    mask = build_mask(t)
    feats = t.feature_cols
    per_col = mask.missing_per_column()
    summary = {
        "n_rows": t.n_rows,
        "n_features": len(feats),
        "total_missing": mask.n_missing(feats),
        "missing_per_column": {t.feature_names[j]: int(per_col[j]) for j in feats},
        "complete_rows": int(mask.observed[:, feats].all(axis=1).sum()),
    }
    if t.label_col is not None:
        try:
            vals, cnt = np.unique(t.labels(), return_counts=True)
            summary["class_balance"] = {str(int(v)): int(c) for v, c in zip(vals, cnt)}
        except DataError as exc:
            summary["class_balance"] = None
            log.warning("class balance unavailable: %s", exc)
    return summary


def cmd_stats(args) -> int:
    t = _load(args)
    s = summarize(t)
    out = sys.stdout
    out.write(f"rows: {s['n_rows']}\n")
    out.write(f"features: {s['n_features']}\n")
    out.write(f"data points: {s['n_rows']}x{s['n_features']}\n")
    out.write(f"missing: {s['total_missing']}\n")
    out.write(f"complete rows: {s['complete_rows']}\n")
    if s.get("class_balance"):
        out.write("class balance: " + ", ".join(f"{k}={v}" for k, v in s["class_balance"].items()) + "\n")
    out.write("missing per column:\n")
    for name, n in s["missing_per_column"].items():
        if n:
            out.write(f"  {name}: {n}\n")
    if args.report:
        _write_json(args.report, s)
    return EXIT_OK


def cmd_impute(args) -> int:
    cfg = RunConfig("impute", args.input, args.output, delta=args.delta, eta=args.eta)
    cfg.validate()
    t, _ = encode_categoricals(_load(args))
    if args.dump_corr:
        corr = correlation_matrix(t, build_mask(t))
        with open(args.dump_corr, "w", encoding="utf-8") as fh:
            corr.to_csv(t.feature_names, fh)
    granules = []
    sink = granules.append if args.dump_granules else None
    result = impute_table(t, args.delta, args.eta, granule_sink=sink)
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        write_csv(result.table, fh)
    if args.dump_provenance:
        with open(args.dump_provenance, "w", encoding="utf-8") as fh:
            for p in result.provenance:
                fh.write(json.dumps(p.to_record(), sort_keys=True) + "\n")
    if args.dump_granules:
        granules.sort(key=lambda g: (g.spec.alpha, g.spec.beta))
        with open(args.dump_granules, "w", encoding="utf-8") as fh:
            for g in granules:
                fh.write(json.dumps(g.spec.to_record(), sort_keys=True) + "\n")
    log.info("impute: %d cells filled, fallbacks %s", len(result.provenance),
             result.fallback_counts())
    return EXIT_OK


def cmd_mask_bench(args) -> int:
    cfg = RunConfig("mask-bench", args.input, delta=args.delta, eta=args.eta,
                    rates=args.rates, imputers=args.imputers, seed=args.seed)
    cfg.validate()
    bad = [i for i in cfg.imputers if i not in IMPUTERS]
    if bad:
        raise UsageError(f"unknown imputer(s): {', '.join(bad)}")
    t, _ = encode_categoricals(_load(args))
    reports = impurity_sweep(t, cfg.rates, cfg.imputers, cfg.seed, cfg.delta, cfg.eta, args.knn_k)
    _write_json(args.report, [r.to_record() for r in reports])
    if args.dump_errors:
        with open(args.dump_errors, "w", encoding="utf-8") as fh:
            fh.write("rate,imputer,row,col,error\n")
            for r in reports:
                for (a, b), e in zip(r.cells, r.errors):
                    fh.write(f"{r.rate!r},{r.imputer},{a},{b},{float(e)!r}\n")
    for r in reports:
        sys.stdout.write(f"rate={r.rate:g} imputer={r.imputer} n={r.n_cells} "
                         f"mean={r.mean_err:.6g} median={r.median_err:.6g} p90={r.p90_err:.6g}\n")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = RunConfig("pipeline", args.input, delta=args.delta, eta=args.eta,
                    k_features=args.k_features, classifiers=args.classifiers, seed=args.seed)
    cfg.validate()
    bad = [c for c in cfg.classifiers if c not in KINDS]
    if bad:
        raise UsageError(f"unknown classifier(s): {', '.join(bad)}")
    pcfg = PipelineConfig(classifiers=tuple(cfg.classifiers), k_features=cfg.k_features,
                          seed=cfg.seed, delta=cfg.delta, eta=cfg.eta,
                          select_trees=args.select_trees, hyperparams=_hyperparams(args.set))
    t = _load(args)
    if cfg.classifiers and t.label_col is None:
        raise DataError("pipeline needs a label column (see --label)")
    result = run_pipeline(t, pcfg)
    _write_json(args.report, [r.to_record() for r in result.reports])
    if args.dump_roc:
        os.makedirs(args.dump_roc, exist_ok=True)
        for r in result.reports:
            with open(os.path.join(args.dump_roc, f"roc_{r.classifier}.csv"), "w") as fh:
                fh.write("fpr,tpr\n")
                for f, tp in r.roc:
                    fh.write(f"{f!r},{tp!r}\n")
    for r in result.reports:
        sys.stdout.write(f"{r.classifier}: accuracy={r.accuracy:.4f} auc={r.auc:.4f} "
                         f"tp={r.tp} fp={r.fp} tn={r.tn} fn={r.fn}\n")
    return EXIT_OK


COMMANDS = {"stats": cmd_stats, "impute": cmd_impute,
            "mask-bench": cmd_mask_bench, "pipeline": cmd_pipeline}


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('level=%(levelname)s logger=%(name)s msg="%(message)s"'))
    root = logging.getLogger("granimpute")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
