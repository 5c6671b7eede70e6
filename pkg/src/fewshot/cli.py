"""Command-line front end.

Subcommands: synth, pairs, train-soe, evaluate, ttest, report. Every run
is a pure function of its arguments and input files (reports carry a
timestamp field, nothing else varies). Exit codes: 0 success, 2 invalid
configuration or flags, 3 data errors, 4 numeric failures, 5 degenerate
zero-variance t-test.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .embeddings import load_dataset, save_dataset, synth_fixture
from .errors import ConfigError, DataError, FewshotError, NumericError, ZeroVarianceError
from .evaluation import EvalConfig, evaluate, load_report_triple, paired_ttest
from .numkit import AdamWHyper, HEAD_KINDS
from .snn import AGGREGATORS, SoeHyper, export_pairs, save_model, train_soe

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_ZERO_VARIANCE = 5


def _write_text_atomic(path: Path, text: str) -> None:
    # write to a sibling temp file, then rename: no partial outputs
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _write_json_atomic(path: Path, payload: dict) -> None:
    _write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Configuration merging
# ---------------------------------------------------------------------------

_EVALUATE_DEFAULTS = {
    "method": None,  # required
    "train": None,  # required
    "test": None,  # required
    "out": None,  # required
    "k": 4,
    "m_runs": 3,
    "aggregator": "mean",
    "head": "weighted-l1",
    "hidden_size": 16,
    "epochs": 200,
    "batch_size": None,
    "lr": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "weight_decay": 0.01,
    "seed_base": 0,
}

_EVALUATE_PARSERS = {
    "k": int,
    "m_runs": int,
    "hidden_size": int,
    "epochs": int,
    "batch_size": int,
    "seed_base": int,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "weight_decay": float,
}


def _read_config_file(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment; keys may use '-' or '_'."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merged_evaluate_config(args: argparse.Namespace) -> dict:
    merged = dict(_EVALUATE_DEFAULTS)
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in merged:
                raise ConfigError(f"unknown config key {key!r}")
            parse = _EVALUATE_PARSERS.get(key, str)
            try:
                merged[key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
    for key in merged:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    for key in ("method", "train", "test", "out"):
        if merged[key] is None:
            raise ConfigError(f"missing required setting {key.replace('_', '-')!r}")
    if merged["aggregator"] not in AGGREGATORS:
        raise ConfigError(f"aggregator must be one of {AGGREGATORS}")
    if merged["head"] not in HEAD_KINDS:
        raise ConfigError(f"head must be one of {HEAD_KINDS}")
    if merged["method"] not in ("ptsnn", "soesnn", "probe"):
        raise ConfigError("method must be ptsnn, soesnn, or probe")
    if merged["k"] < 1 or merged["m_runs"] < 1:
        raise ConfigError("k and m-runs must be at least 1")
    return merged


def _optimizer_from(merged: dict) -> AdamWHyper:
    try:
        return AdamWHyper(
            lr=merged["lr"],
            beta1=merged["beta1"],
            beta2=merged["beta2"],
            eps=merged["eps"],
            weight_decay=merged["weight_decay"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        dataset = synth_fixture(args.classes, args.per_class, args.dimension, args.separation, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} records ({args.classes} classes, d={args.dimension}) to {args.out}")
    return 0


def _cmd_pairs(args: argparse.Namespace) -> int:
    train = load_dataset(args.train)
    pairs = export_pairs(train, args.out)
    same = sum(1 for p in pairs if p.target == 0)
    print(f"wrote {len(pairs)} pairs ({same} same-class, {len(pairs) - same} different-class) to {args.out}")
    return 0


def _cmd_train_soe(args: argparse.Namespace) -> int:
    train = load_dataset(args.train)
    try:
        hyper = SoeHyper(
            optimizer=AdamWHyper(
                lr=args.lr,
                beta1=args.beta1,
                beta2=args.beta2,
                eps=args.eps,
                weight_decay=args.weight_decay,
            ),
            epochs=args.epochs,
            hidden_size=args.hidden_size,
            head=args.head,
            batch_size=args.batch_size,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = train_soe(train, hyper, seed=args.seed)
    save_model(model, args.out)
    print(
        f"trained pair model on {len(train)} records: "
        f"loss {model.initial_loss:.6f} -> {model.final_loss:.6f}; saved to {args.out}"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    merged = _merged_evaluate_config(args)
    config = EvalConfig(
        aggregator=merged["aggregator"],
        head=merged["head"],
        hidden_size=merged["hidden_size"],
        epochs=merged["epochs"],
        optimizer=_optimizer_from(merged),
        batch_size=merged["batch_size"],
        seed_base=merged["seed_base"],
    )
    train_pool = load_dataset(merged["train"])
    test = load_dataset(merged["test"])
    report = evaluate(train_pool, test, merged["method"], merged["k"], merged["m_runs"], config)
    payload = report.to_json_dict()
    payload["created_at"] = datetime.now(timezone.utc).isoformat()
    payload["config"]["train"] = str(merged["train"])
    payload["config"]["test"] = str(merged["test"])
    out = Path(merged["out"])
    _write_json_atomic(out, payload)
    p, r, f = report.averaged
    print(f"{merged['method']} k={merged['k']} m={merged['m_runs']}: "
          f"precision={p:.4f} recall={r:.4f} fscore={f:.4f}")
    print(f"report written to {out}")
    return 0


def _cmd_ttest(args: argparse.Namespace) -> int:
    triple_a = load_report_triple(args.report_a)
    triple_b = load_report_triple(args.report_b)
    result = paired_ttest(triple_a, triple_b)
    print(f"d = [{result.d[0]:+.4f}, {result.d[1]:+.4f}, {result.d[2]:+.4f}]")
    print(f"t = {result.t:.4f}")
    print(f"p = {result.p:.4f}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
        config = payload["config"]
        per_run = payload["per_run"]
        averaged = payload["averaged"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{args.report}: invalid report: {exc}") from None
    print(f"model: {config.get('model', '?')}   k={config.get('k', '?')}  m_runs={config.get('m_runs', '?')}  "
          f"aggregator={config.get('aggregator', '?')}")
    print(f"{'run':>4} {'seed':>5} {'precision':>10} {'recall':>10} {'fscore':>10}")
    for i, run in enumerate(per_run):
        print(f"{i:>4} {run.get('seed', '?'):>5} {run['precision']:>10.4f} {run['recall']:>10.4f} {run['fscore']:>10.4f}")
    print(f"{'avg':>4} {'':>5} {averaged['precision']:>10.4f} {averaged['recall']:>10.4f} {averaged['fscore']:>10.4f}")
    if args.verbose:
        for i, run in enumerate(per_run):
            print(f"run {i} per-class:")
            for label, triple in sorted(run.get("per_class", {}).items()):
                print(f"  {label:>12} precision={triple['precision']:.4f} "
                      f"recall={triple['recall']:.4f} fscore={triple['fscore']:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fewshot",
        description="Few-shot classification over precomputed embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="emit a deterministic Gaussian-cluster fixture")
    p_synth.add_argument("--classes", type=int, required=True)
    p_synth.add_argument("--per-class", type=int, required=True)
    p_synth.add_argument("--dimension", type=int, required=True)
    p_synth.add_argument("--separation", type=float, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_pairs = sub.add_parser("pairs", help="dump the same/different pair set of a dataset")
    p_pairs.add_argument("--train", required=True)
    p_pairs.add_argument("--out", required=True)
    p_pairs.set_defaults(func=_cmd_pairs)

    p_train = sub.add_parser("train-soe", help="train the recurrent pair model and save it")
    p_train.add_argument("--train", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--hidden-size", type=int, default=16)
    p_train.add_argument("--head", choices=HEAD_KINDS, default="weighted-l1")
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--beta1", type=float, default=0.9)
    p_train.add_argument("--beta2", type=float, default=0.999)
    p_train.add_argument("--eps", type=float, default=1e-8)
    p_train.add_argument("--weight-decay", type=float, default=0.01)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=_cmd_train_soe)

    p_eval = sub.add_parser("evaluate", help="run the M-episode protocol and write a report")
    p_eval.add_argument("--config", help="key=value file; explicit flags win on conflict")
    p_eval.add_argument("--train")
    p_eval.add_argument("--test")
    p_eval.add_argument("--method", choices=("ptsnn", "soesnn", "probe"))
    p_eval.add_argument("--k", type=int)
    p_eval.add_argument("--m-runs", type=int)
    p_eval.add_argument("--aggregator", choices=AGGREGATORS)
    p_eval.add_argument("--head", choices=HEAD_KINDS)
    p_eval.add_argument("--hidden-size", type=int)
    p_eval.add_argument("--epochs", type=int)
    p_eval.add_argument("--batch-size", type=int)
    p_eval.add_argument("--lr", type=float)
    p_eval.add_argument("--beta1", type=float)
    p_eval.add_argument("--beta2", type=float)
    p_eval.add_argument("--eps", type=float)
    p_eval.add_argument("--weight-decay", type=float)
    p_eval.add_argument("--seed-base", type=int)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_ttest = sub.add_parser("ttest", help="compare two report files' averaged metrics")
    p_ttest.add_argument("report_a")
    p_ttest.add_argument("report_b")
    p_ttest.set_defaults(func=_cmd_ttest)

    p_report = sub.add_parser("report", help="pretty-print a report file")
    p_report.add_argument("report")
    p_report.add_argument("--verbose", action="store_true", help="include per-class metrics")
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ZeroVarianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_VARIANCE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FewshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
