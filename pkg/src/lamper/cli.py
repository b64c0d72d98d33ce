"""Command-line interface.

Subcommands:
  run       execute a configured benchmark and write report files
  features  print the feature vector of one series file
  render    print the sub-prompts for one series file
  list      print dataset names under an archive root
  cd        recompute rank statistics from a per-dataset report

Exit codes: 0 success, 1 run-level failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import re
import sys

import numpy as np

from .config import load_config
from .datasets import list_datasets
from .embedding import MockBackend, build_prompts
from .errors import ConfigError, LamperError
from .features import extract_features
from .prompts import PromptKind, RenderConfig
from .runner import run_benchmark
from .stats import compute_report, read_per_dataset_csv, render_cd_diagram

# separates sub-prompts on render output; a whole line so text stays readable
RS_LINE = "\x1e"


def read_series_file(path) -> np.ndarray:
    """Numbers separated by commas, whitespace, or newlines; no label field."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise LamperError(f"cannot read series file {path}: {exc}") from None
    tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not tokens:
        raise LamperError(f"{path}: no values found")
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise LamperError(f"{path}: not a number: {tok!r}") from None
    return np.asarray(values, dtype=np.float64)


def _cmd_run(args) -> int:
    config = load_config(args.config)
    run_benchmark(config)
    return 0


def _cmd_features(args) -> int:
    values = read_series_file(args.file)
    fv = extract_features(values)
    for name, value in fv.entries:
        print(f"{name},{value:.6g}")
    return 0


def _cmd_render(args) -> int:
    values = read_series_file(args.file)
    kind = PromptKind.parse(args.kind)
    cfg = RenderConfig(precision=args.precision)
    backend = MockBackend(max_tokens=args.budget)
    subprompts = build_prompts(values, kind, cfg, args.budget, backend.count_tokens)
    out = f"\n{RS_LINE}\n".join(sp.text for sp in subprompts)
    print(out)
    return 0


def _cmd_list(args) -> int:
    for name in list_datasets(args.root):
        print(name)
    return 0


def _cmd_cd(args) -> int:
    matrix = read_per_dataset_csv(args.summary)
    report = compute_report(matrix)
    width = max(len(m) for m in report.methods) + 2
    print(f"{'method':<{width}}average_accuracy  average_rank")
    for i, name in enumerate(report.methods):
        print(f"{name:<{width}}{report.average_accuracy[i]:<18.6f}"
              f"{report.average_rank[i]:.6f}")
    skipped = ", ".join(report.skipped) if report.skipped else "none"
    print(f"datasets ranked: {report.n_datasets_ranked} (skipped: {skipped})")
    print(f"friedman chi-square: {report.friedman:.4f}")
    print(f"critical difference (alpha={report.alpha}): {report.cd:.4f}")
    groups = " ".join("{" + ", ".join(report.methods[i] for i in c) + "}"
                      for c in report.cliques)
    print(f"cliques: {groups}")
    if args.svg:
        with open(args.svg, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_cd_diagram(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lamper",
        description="Serialize time series into prompts, embed them with a frozen "
                    "language model, classify with an SVM, and rank methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a configured benchmark run")
    p.add_argument("--config", required=True, help="path to a run config file")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("features", help="print name,value feature rows for a series")
    p.add_argument("file", help="text file of numbers (comma/whitespace separated)")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("render", help="print the sub-prompts for a series")
    p.add_argument("file", help="text file of numbers (comma/whitespace separated)")
    p.add_argument("--kind", required=True, choices=["sdp", "ddp", "fp"],
                   help="prompt kind to render")
    p.add_argument("--precision", type=int, default=4,
                   help="fractional digits per value (default 4)")
    p.add_argument("--budget", type=int, default=512,
                   help="token budget under the mock counter (default 512)")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("list", help="print dataset names under a root directory")
    p.add_argument("--root", required=True, help="archive root directory")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("cd", help="recompute rank statistics from a prior run")
    p.add_argument("--summary", required=True,
                   help="path to a per_dataset.csv written by `lamper run`")
    p.add_argument("--svg", help="also write the critical-difference diagram here")
    p.set_defaults(func=_cmd_cd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LamperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
