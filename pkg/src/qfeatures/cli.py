"""Command line interface.

Subcommands: fetch, run, grid, kernel-check, basis, replay. Every run flag
mirrors an ``ExperimentConfig`` field; ``--config file.json`` supplies a
base and flags override it.

Exit codes: 0 success, 1 usage error, 2 data error, 3 run failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import typing
from pathlib import Path

from . import fetch
from .ansatz import AnsatzParams, sample_basis
from .experiment import (DEFAULT_GRID, DataError, ExperimentConfig, RunFailure, grid_search,
                         kernel_check, replay, run_experiment, summarize)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    hints = typing.get_type_hints(ExperimentConfig)
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        flags = [flag] if flag == flag.lower() else [flag, flag.lower()]
        hint = hints[f.name]
        if hint is bool:
            p.add_argument(*flags, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif f.name == "digits":
            p.add_argument(*flags, dest=f.name, type=int, nargs=2, default=None)
        elif f.name == "reg_C_grid":
            p.add_argument(*flags, dest=f.name, type=float, nargs="*", default=None)
        elif hint in (int, float):
            p.add_argument(*flags, dest=f.name, type=hint, default=None)
        else:
            p.add_argument(*flags, dest=f.name, default=None)


def config_from_args(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            doc[f.name] = v
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qfeatures", description="Quantum-sampled random Fourier feature experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="download and verify MNIST")
    p.add_argument("--data-dir")
    p.add_argument("--mirror", help="mirror name from the lockfile or a URL")
    p.add_argument("--mirror-format", choices=["npm-tarball", "idx-gz"])

    p = sub.add_parser("run", help="one end-to-end experiment")
    _add_config_flags(p)

    p = sub.add_parser("grid", help="grid search over ansatz hyperparameters")
    _add_config_flags(p)
    p.add_argument("--grid", dest="grid_spec",
                   help="JSON object or file mapping config fields to value lists")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("kernel-check", help="kernel approximation error versus basis size")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--basis-sizes", type=int, nargs="+", default=[100, 1000, 10000])
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV path (default: stdout)")

    p = sub.add_parser("basis", help="sample a feature basis and save it")
    for f in dataclasses.fields(AnsatzParams):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default), default=f.default)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", required=True)

    p = sub.add_parser("replay", help="re-run a recorded run from runs.jsonl")
    p.add_argument("records", help="runs.jsonl file")
    p.add_argument("--line", type=int, default=-1, help="record index (default: last)")
    return parser


def _load_grid(spec: str | None) -> dict:
    if spec is None:
        return DEFAULT_GRID
    path = Path(spec)
    text = path.read_text() if path.is_file() else spec
    try:
        grid = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"grid spec is neither a file nor JSON: {exc}") from exc
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    if not isinstance(grid, dict) or not grid or set(grid) - names:
        raise UsageError("grid must be a non-empty object keyed by config fields")
    return grid


def _cmd_fetch(args) -> int:
    paths = fetch.fetch_data(args.data_dir, args.mirror, args.mirror_format)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    result = run_experiment(config_from_args(args))
    print(result.to_json())
    return EXIT_OK


def _cmd_grid(args) -> int:
    base = config_from_args(args)
    grid = _load_grid(args.grid_spec)
    rows = grid_search(grid, base, jobs=args.jobs, output_dir=base.output_dir)
    failed = sum(1 for r in rows if r["error"])
    for s in summarize(rows):
        print(json.dumps(s))
    if failed:
        print(f"{failed} of {len(rows)} runs failed", file=sys.stderr)
    return EXIT_OK if failed < len(rows) else EXIT_RUN


def _cmd_kernel_check(args) -> int:
    rows = kernel_check(args.dim, args.basis_sizes, args.bandwidth, args.pairs, args.seed)
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=["D", "max_error", "mean_error"])
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def _cmd_basis(args) -> int:
    try:
        params = AnsatzParams(**{f.name: getattr(args, f.name) for f in dataclasses.fields(AnsatzParams)})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    basis = sample_basis(params, workers=args.workers, keep_circuits=False)
    basis.save(args.output)
    print(f"{basis.fingerprint()}\t{args.output}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    lines = [ln for ln in Path(args.records).read_text().splitlines() if ln.strip()]
    try:
        record = json.loads(lines[args.line])
    except IndexError as exc:
        raise UsageError(f"no record {args.line} in {args.records}") from exc
    result = replay(record)
    same = (result.train_accuracy == record["train_accuracy"]
            and result.test_accuracy == record["test_accuracy"])
    print(json.dumps({"train_accuracy": result.train_accuracy, "test_accuracy": result.test_accuracy,
                      "matches_record": same}))
    return EXIT_OK if same else EXIT_RUN


COMMANDS = {"fetch": _cmd_fetch, "run": _cmd_run, "grid": _cmd_grid,
            "kernel-check": _cmd_kernel_check, "basis": _cmd_basis, "replay": _cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qfeatures: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, fetch.FetchError) as exc:
        print(f"qfeatures: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RunFailure as exc:
        print(f"qfeatures: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, (DataError, fetch.FetchError)) else EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
