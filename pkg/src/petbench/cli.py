"""Command-line front end: fetch datasets, apply treatments, run the grid,
and render reports.

Exit codes: 0 on success, 1 on a usage error, 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness, synthesis, tradeoff
from .anonymity import anonymize, suppression_ratio
from .data import SplitSpec, split, write_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; remap that to the usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="petbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="download a dataset and pin its digests")
    p.add_argument("dataset", choices=sorted(harness.DATASETS))
    p.add_argument("--dest", default="data", help="directory for the files (default: data)")

    p = sub.add_parser("prep", help="split a dataset into train/test CSVs")
    p.add_argument("dataset", choices=sorted(harness.DATASETS))
    p.add_argument("--data-dir", default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--fraction", type=float, default=SplitSpec().fraction)
    p.add_argument("--seed", type=int, default=SplitSpec().seed)

    p = sub.add_parser("anonymize", help="k-anonymize a dataset and report suppression")
    p.add_argument("dataset", choices=sorted(harness.DATASETS))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--budget", type=float, default=1.0,
                   help="maximum record-suppression fraction (default: 1.0, unbounded)")
    p.add_argument("--k-plus-one", action="store_true",
                   help="require classes strictly larger than k")

    p = sub.add_parser("synth", help="fit a synthesizer and sample a synthetic table")
    p.add_argument("dataset", choices=sorted(harness.DATASETS))
    p.add_argument("--data-dir", default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--rows", type=int, default=None, help="sample size (default: input size)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="run the treatment/model grid under the meter")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--dataset", default=None, choices=sorted(harness.DATASETS),
                   help="run the default grid on this dataset instead of a config file")
    p.add_argument("--log", required=True, help="JSON-lines run log to append to")
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--meter", choices=("sysfs", "simulated"), default=None,
                   help="override the configured meter backend")
    p.add_argument("--overwrite", action="store_true",
                   help="replace existing records for this configuration hash")
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("report", help="aggregate a run log into tables")
    p.add_argument("--log", required=True)
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    p.add_argument("--out", default="report", help="output directory")

    p = sub.add_parser("pareto", help="Pareto front and scenario ranking from a run log")
    p.add_argument("--log", required=True)
    p.add_argument("--dataset", default=None, help="restrict to one dataset")
    p.add_argument("--scenario", type=int, choices=sorted(tradeoff.scenario_presets()),
                   default=None, help="also rank under a preset weighting")
    p.add_argument("--weights", default=None,
                   help="custom accuracy,energy,privacy weights, e.g. 0.5,0.3,0.2")
    return parser


def _cmd_fetch(args) -> int:
    paths = harness.fetch_dataset(args.dataset, args.dest)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_prep(args) -> int:
    loaded = harness.load_dataset(args.dataset, args.data_dir)
    train, test = split(loaded.table, SplitSpec(fraction=args.fraction, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_path = out / f"{args.dataset}_train.csv"
    test_path = out / f"{args.dataset}_test.csv"
    write_csv(train, train_path, dialect=loaded.spec.dialect)
    write_csv(test, test_path, dialect=loaded.spec.dialect)
    print(f"{train_path} ({train.n_rows} rows)")
    print(f"{test_path} ({test.n_rows} rows)")
    return EXIT_OK


def _cmd_anonymize(args) -> int:
    loaded = harness.load_dataset(args.dataset, args.data_dir)
    anonymized, report = anonymize(
        loaded.table, loaded.schema, loaded.hierarchies, args.k,
        max_record_suppression=args.budget, k_plus_one=args.k_plus_one,
    )
    write_csv(anonymized, args.out, dialect=loaded.spec.dialect)
    summary = {
        "requested_k": report.requested_k,
        "min_class_size": report.min_class_size,
        "generalization": report.state.as_dict(),
        "suppressed_records": report.suppressed_records,
        "suppressed_cell_fraction": report.suppressed_cell_fraction,
        "identifying_removed": list(report.identifying_removed),
        "suppression_ratio": suppression_ratio(loaded.table, anonymized, report),
        "rows": anonymized.n_rows,
        "output": str(args.out),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_synth(args) -> int:
    loaded = harness.load_dataset(args.dataset, args.data_dir)
    model = synthesis.fit(loaded.table)
    n = loaded.table.n_rows if args.rows is None else args.rows
    synthetic = synthesis.sample(model, n, args.seed)
    write_csv(synthetic, args.out, dialect=loaded.spec.dialect)
    report = synthesis.utility_report(loaded.table, synthetic)
    summary = dataclasses.asdict(report)
    summary.update({"rows": n, "seed": args.seed, "output": str(args.out)})
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_bench(args, parser: _Parser) -> int:
    if (args.config is None) == (args.dataset is None):
        parser.error("bench needs exactly one of --config and --dataset")
    if args.config is not None:
        config = harness.ExperimentConfig.from_json_file(args.config)
    else:
        config = harness.ExperimentConfig(dataset=args.dataset)
    if args.repetitions is not None:
        config = dataclasses.replace(config, repetitions=args.repetitions)
    if args.meter is not None:
        config = dataclasses.replace(
            config, meter=dataclasses.replace(config.meter, backend=args.meter)
        )
    progress = (lambda text: print(text, file=sys.stderr)) if args.verbose else None
    records = harness.run_experiment(
        config, log_path=args.log, overwrite=args.overwrite, progress=progress
    )
    errors = sum(1 for r in records if r.status == "error")
    print(f"{len(records)} records ({errors} errors) -> {args.log} "
          f"[config {config.config_hash}]")
    return EXIT_OK


def _cmd_report(args) -> int:
    records = harness.read_log(args.log)
    tables = harness.build_report(records)
    for path in harness.render(tables, fmt=args.format, out_dir=args.out):
        print(path)
    return EXIT_OK


def _cmd_pareto(args, parser: _Parser) -> int:
    records = harness.read_log(args.log)
    keys = list(dict.fromkeys(
        r["treatment"] for r in records
        if r.get("treatment") is not None and r.get("model") is not None
    ))
    if not keys:
        raise harness.EmptyLogError("the run log holds no model records")
    scale = harness.privacy_scale_for(keys)
    points = tradeoff.collect_points(records, scale, dataset=args.dataset)
    front = tradeoff.pareto_front(points)
    front_set = {(p.dataset, p.treatment, p.model) for p in front}
    result = {
        "points": [dataclasses.asdict(p) for p in points],
        "front": [dataclasses.asdict(p) for p in front],
    }
    if args.weights is not None:
        parts = args.weights.split(",")
        if len(parts) != 3:
            parser.error("--weights needs three comma-separated numbers")
        weights = tradeoff.ScenarioWeights(*(float(p) for p in parts))
    elif args.scenario is not None:
        weights = tradeoff.scenario_presets()[args.scenario]
    else:
        weights = None
    if weights is not None:
        ranked = tradeoff.scenario_rank(points, weights)
        result["weights"] = dataclasses.asdict(weights)
        result["ranking"] = [
            {
                "rank": s.rank,
                "score": s.score,
                "on_front": (s.point.dataset, s.point.treatment, s.point.model) in front_set,
                **dataclasses.asdict(s.point),
            }
            for s in ranked
        ]
    print(json.dumps(result, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fetch":
            return _cmd_fetch(args)
        if args.command == "prep":
            return _cmd_prep(args)
        if args.command == "anonymize":
            return _cmd_anonymize(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "bench":
            return _cmd_bench(args, parser)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "pareto":
            return _cmd_pareto(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"petbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
