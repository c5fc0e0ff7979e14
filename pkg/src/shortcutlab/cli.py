"""Command-line entry point: run, verify-formats, score, plot, sweep.

Exit codes: 0 success, 1 grammar counterexample, 2 config error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Mapping, Sequence

from .env import ToyTask
from .formats import Dfa, FormatId, parse, render
from .harness import Experiment, RunConfig, load_config, run_experiment, run_pair_kl_study
from .optimizers import DivergenceError
from .plotting import PlotFormat, PlotSpec, make_plot
from .rewards import ConfigError, RewardScheme, SchemeKind, total_reward
from .verify import DEFAULT_BOUND, DEFAULT_SAMPLES, EnumerationBoundError, verify_exclusivity, verify_nesting

EXIT_OK, EXIT_COUNTEREXAMPLE, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="override the run seed")
    p.add_argument("--out", default=None, help="output directory or file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="shortcutlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted override, JSON value")

    ver = sub.add_parser("verify-formats", parents=[common], help="prove nesting and exclusivity up to a length bound")
    ver.add_argument("--max-len", type=int, default=DEFAULT_BOUND)
    ver.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    score = sub.add_parser("score", parents=[common], help="score one token sequence")
    score.add_argument("sequence", help='token notation, e.g. "<answer> \\boxed{ 12 } </answer>"')
    who = score.add_mutually_exclusive_group(required=True)
    who.add_argument("--task", type=int, help="task id 0..99")
    who.add_argument("--truth", help="ground-truth answer digits")
    score.add_argument("--scheme", default=SchemeKind.HIERARCHY_FLAT.value, choices=[k.value for k in SchemeKind])

    plot = sub.add_parser("plot", parents=[common], help="plot or export run logs")
    plot.add_argument("runs", nargs="+", help="log.jsonl paths")
    plot.add_argument("--metrics", nargs="*", default=[])
    plot.add_argument("--smoothing", type=int, default=20)
    plot.add_argument("--format", default="SVG", type=str.upper, choices=[f.value for f in PlotFormat])

    sweep = sub.add_parser("sweep", parents=[common], help="run a list of configs")
    sweep.add_argument("configs", nargs="+")
    sweep.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel processes")
    return parser


def _resolve(path: str, sets: Sequence[str], seed: int | None, out: str | None) -> RunConfig:
    extra = list(sets)
    if seed is not None:
        extra.append(f"seed={seed}")
    if out is not None:
        extra.append(f"out_dir={json.dumps(out)}")
    return load_config(path, extra)


def _execute(config: RunConfig) -> dict:
    if config.experiment is Experiment.KL_LEASH:
        return run_pair_kl_study(config)["comparison"]
    return run_experiment(config).summary


def _print_summary(summary: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary, sort_keys=True))
        return
    for key, value in sorted(summary.items()):
        print(f"{key}: {json.dumps(value, sort_keys=True)}")


def cmd_run(args) -> int:
    config = _resolve(args.config, args.set, args.seed, args.out)
    _print_summary(_execute(config), args.json)
    return EXIT_OK


def cmd_verify_formats(args, recognizers: Mapping[FormatId, Dfa] | None = None) -> int:
    try:
        reports = [
            check(args.max_len, recognizers=recognizers, n_samples=args.samples, seed=args.seed or 0)
            for check in (verify_nesting, verify_exclusivity)
        ]
    except EnumerationBoundError as exc:
        raise ConfigError(str(exc)) from exc
    if args.json:
        print(json.dumps({"ok": all(r.ok for r in reports), "reports": [r.to_dict() for r in reports]}, sort_keys=True))
    else:
        for r in reports:
            print(r.to_text())
    return EXIT_OK if all(r.ok for r in reports) else EXIT_COUNTEREXAMPLE


def cmd_score(args) -> int:
    try:
        seq = parse(args.sequence)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        truth = ToyTask.from_id(args.task).answer if args.task is not None else args.truth
        bd = total_reward(seq, truth, RewardScheme.default(args.scheme))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = {
        "sequence": render(seq),
        "truth": truth,
        "parsed_answer": bd.parsed_answer,
        "correctness": bd.correctness,
        "per_format": {f.value: v for f, v in bd.per_format.items()},
        "satisfied": sorted(f.value for f in bd.satisfied),
        "penalty": bd.penalty,
        "total": bd.total,
    }
    _print_summary(out, args.json)
    return EXIT_OK


def cmd_plot(args) -> int:
    out = args.out or ("plot.svg" if args.format == "SVG" else "plot.csv")
    spec = PlotSpec(runs=args.runs, metrics=args.metrics, smoothing=args.smoothing, out=out, format=PlotFormat(args.format))
    path = make_plot(spec)
    print(path)
    return EXIT_OK


def _sweep_one(item: tuple[str, list[str], int | None, str | None]) -> tuple[str, dict | str]:
    path, sets, seed, out = item
    try:
        return path, _execute(_resolve(path, sets, seed, out))
    except (ConfigError, DivergenceError) as exc:
        return path, f"{type(exc).__name__}: {exc}"


def cmd_sweep(args) -> int:
    items = []
    for i, path in enumerate(args.configs):
        out = str(Path(args.out) / f"{i:02d}_{Path(path).stem}") if args.out else None
        items.append((path, list(args.set), args.seed, out))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, items))
    else:
        results = [_sweep_one(it) for it in items]
    failed = [(p, r) for p, r in results if isinstance(r, str)]
    if args.json:
        print(json.dumps({p: r for p, r in results}, sort_keys=True))
    else:
        for p, r in results:
            print(f"{p}: {r if isinstance(r, str) else 'ok'}")
    if failed:
        return EXIT_DIVERGED if any(r.startswith("DivergenceError") for _, r in failed) else EXIT_CONFIG
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify-formats": cmd_verify_formats,
    "score": cmd_score,
    "plot": cmd_plot,
    "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
