"""Episode sampling, macro metrics, multi-run evaluation, and the t-test.

An experiment draws M support episodes from the training pool (seeds
``seed_base + 0 .. seed_base + M-1``), classifies the entire test set
with each, and averages the per-run macro precision/recall/F-score.
Two averaged metric triples can then be compared with a small-sample
one-sample t-test on their component-wise differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from . import __version__
from .embeddings import Dataset, record_sequence, record_vector
from .errors import DataError, ZeroVarianceError
from .numkit import AdamWHyper, HEAD_WEIGHTED_L1
from .prng import SplitMix64, derive_seed
from .probe import ProbeHyper, probe_classify, train_probe
from .snn import (
    AGGREGATOR_MEAN,
    AGGREGATORS,
    SoeHyper,
    ptsnn_classify,
    soesnn_classify,
    train_soe,
)

METHODS = ("ptsnn", "soesnn", "probe")

MetricTriple = tuple[float, float, float]


@dataclass(frozen=True)
class Episode:
    """A deterministic K-per-class support sample from a training pool."""

    support_ids: tuple[str, ...]
    seed: int
    k: int


def sample_episode(pool: Dataset, k: int, seed: int) -> Episode:
    """Select exactly k record ids per class, deterministically.

    Per class, record ids are sorted lexicographically and k are chosen
    by a partial Fisher-Yates shuffle whose PRNG stream is keyed by
    (seed, class label); classes contribute in sorted-label order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    by_label: dict[str, list[str]] = {}
    for record in pool.records:
        by_label.setdefault(record.label, []).append(record.id)
    support: list[str] = []
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        if len(ids) < k:
            raise DataError(
                f"class {label!r} has {len(ids)} records but k={k} are required"
            )
        rng = SplitMix64(derive_seed(seed, label))
        support.extend(rng.shuffle_prefix(ids, k))
    return Episode(support_ids=tuple(support), seed=seed, k=k)


def compute_metrics(predictions: Sequence[str], gold: Sequence[str]) -> MetricTriple:
    """Macro precision, recall, and F1 over the classes present in gold.

    Per class: precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their
    harmonic mean; zero denominators yield 0.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not gold:
        raise ValueError("empty input")
    per_class = per_class_metrics(predictions, gold)
    n = len(per_class)
    precision = sum(triple[0] for triple in per_class.values()) / n
    recall = sum(triple[1] for triple in per_class.values()) / n
    fscore = sum(triple[2] for triple in per_class.values()) / n
    return (precision, recall, fscore)


def per_class_metrics(
    predictions: Sequence[str], gold: Sequence[str]
) -> dict[str, MetricTriple]:
    """Per-class (precision, recall, F1) for every class present in gold."""
    classes = sorted(set(gold))
    result: dict[str, MetricTriple] = {}
    for cls in classes:
        tp = sum(1 for p, g in zip(predictions, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predictions, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predictions, gold) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        fscore = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        result[cls] = (precision, recall, fscore)
    return result


def average_triples(per_run: Sequence[MetricTriple]) -> MetricTriple:
    """Component-wise 64-bit arithmetic mean of per-run metric triples."""
    if not per_run:
        raise ValueError("need at least one run to average")
    m = len(per_run)
    return (
        sum(triple[0] for triple in per_run) / m,
        sum(triple[1] for triple in per_run) / m,
        sum(triple[2] for triple in per_run) / m,
    )


@dataclass(frozen=True)
class EvalConfig:
    """Knobs shared by all methods plus training knobs for the fitted ones."""

    aggregator: str = AGGREGATOR_MEAN
    head: str = HEAD_WEIGHTED_L1
    hidden_size: int = 16
    epochs: int = 200
    optimizer: AdamWHyper = field(default_factory=AdamWHyper)
    batch_size: int | None = None
    seed_base: int = 0

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")


@dataclass
class MetricsReport:
    """Per-run and averaged macro metrics plus the configuration echo."""

    per_run: list[MetricTriple]
    averaged: MetricTriple
    per_class: list[dict[str, MetricTriple]]
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "schema": "fewshot-report/1",
            "engine_version": __version__,
            "config": self.config,
            "per_run": [
                {
                    "seed": self.config["seeds"][i],
                    "precision": p,
                    "recall": r,
                    "fscore": f,
                    "per_class": {
                        label: {"precision": cp, "recall": cr, "fscore": cf}
                        for label, (cp, cr, cf) in self.per_class[i].items()
                    },
                }
                for i, (p, r, f) in enumerate(self.per_run)
            ],
            "averaged": {
                "precision": self.averaged[0],
                "recall": self.averaged[1],
                "fscore": self.averaged[2],
            },
        }


def _classify_all(method: str, support_set: Dataset, test: Dataset, config: EvalConfig, seed: int) -> list[str]:
    if method == "ptsnn":
        support = [(record_vector(r), r.label) for r in support_set.records]
        return [
            ptsnn_classify(support, record_vector(r), config.aggregator)[0]
            for r in test.records
        ]
    if method == "soesnn":
        hyper = SoeHyper(
            optimizer=config.optimizer,
            epochs=config.epochs,
            hidden_size=config.hidden_size,
            head=config.head,
            batch_size=config.batch_size,
        )
        model = train_soe(support_set, hyper, seed=seed)
        support = [(record_sequence(r), r.label) for r in support_set.records]
        return [
            soesnn_classify(model, support, record_sequence(r), config.aggregator)[0]
            for r in test.records
        ]
    if method == "probe":
        hyper = ProbeHyper(optimizer=config.optimizer, epochs=config.epochs)
        support = [(record_vector(r), r.label) for r in support_set.records]
        model = train_probe(support, hyper, seed=seed)
        return [probe_classify(model, record_vector(r))[0] for r in test.records]
    raise ValueError(f"unknown method {method!r}")


def evaluate(
    train_pool: Dataset,
    test: Dataset,
    method: str,
    k: int,
    m_runs: int,
    config: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Run the M-episode protocol and average the per-run macro metrics.

    Every run uses the entire test set. Run i samples its episode with
    seed ``seed_base + i`` and, for fitted methods, trains with the same
    seed. The averaged triple is the exact 64-bit arithmetic mean of the
    per-run triples.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if m_runs < 1:
        raise ValueError("m_runs must be at least 1")
    if len(test) == 0:
        raise DataError("test set is empty")
    gold = [record.label for record in test.records]
    per_run: list[MetricTriple] = []
    per_class: list[dict[str, MetricTriple]] = []
    seeds = [config.seed_base + i for i in range(m_runs)]
    for seed in seeds:
        episode = sample_episode(train_pool, k, seed)
        support_set = train_pool.subset(episode.support_ids)
        predictions = _classify_all(method, support_set, test, config, seed)
        per_run.append(compute_metrics(predictions, gold))
        per_class.append(per_class_metrics(predictions, gold))
    averaged = average_triples(per_run)
    config_echo = {
        "method": method,
        "model": _model_tag(method, config),
        "k": k,
        "m_runs": m_runs,
        "aggregator": config.aggregator,
        "seeds": seeds,
        "seed_base": config.seed_base,
        "head": config.head,
        "hidden_size": config.hidden_size,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "optimizer": {
            "lr": config.optimizer.lr,
            "beta1": config.optimizer.beta1,
            "beta2": config.optimizer.beta2,
            "eps": config.optimizer.eps,
            "weight_decay": config.optimizer.weight_decay,
        },
    }
    return MetricsReport(per_run=per_run, averaged=averaged, per_class=per_class, config=config_echo)


def _model_tag(method: str, config: EvalConfig) -> str:
    if method == "ptsnn":
        return f"ptsnn({config.aggregator})"
    if method == "soesnn":
        return (
            f"soesnn(h={config.hidden_size}, head={config.head}, "
            f"epochs={config.epochs}, {config.aggregator})"
        )
    # the probe never updates encoder weights; say so wherever it is reported
    return f"probe(frozen embeddings, epochs={config.epochs})"


# ---------------------------------------------------------------------------
# Significance testing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    d: tuple[float, float, float]

    def to_json_dict(self) -> dict:
        return {"t": self.t, "p": self.p, "d": list(self.d)}


def student_t_two_sided_p_df2(t: float) -> float:
    """Two-sided tail probability of Student's t with 2 degrees of freedom.

    The df = 2 distribution admits the closed form
    ``P(|T| > t) = 1 - |t| / sqrt(t^2 + 2)``.
    """
    return 1.0 - abs(t) / math.sqrt(t * t + 2.0)


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """One-sample t-test on the component-wise difference of two
    (precision, recall, fscore) triples.

    With d = a - b: t = mean(d) / (sd(d) / sqrt(3)), sample (n-1)
    standard deviation, df = 2, two-sided p.
    """
    a = tuple(float(x) for x in a)
    b = tuple(float(x) for x in b)
    if len(a) != 3 or len(b) != 3:
        raise ValueError("expected (precision, recall, fscore) triples")
    if not all(math.isfinite(x) for x in a + b):
        raise ValueError("metric components must be finite")
    d = tuple(x - y for x, y in zip(a, b))
    mean = sum(d) / 3.0
    variance = sum((x - mean) ** 2 for x in d) / 2.0
    sd = math.sqrt(variance)
    if sd == 0.0:
        raise ZeroVarianceError(
            f"difference vector {list(d)} has zero sample variance; t is undefined"
        )
    t = mean / (sd / math.sqrt(3.0))
    return TTestResult(t=t, p=student_t_two_sided_p_df2(t), d=d)


def averaged_triple_from_report(payload: dict) -> MetricTriple:
    """Extract the averaged metric triple from a report JSON payload."""
    try:
        averaged = payload["averaged"]
        return (
            float(averaged["precision"]),
            float(averaged["recall"]),
            float(averaged["fscore"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"report lacks a valid averaged metric triple: {exc}") from None


def load_report_triple(path) -> MetricTriple:
    from pathlib import Path

    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read report: {exc}") from None
    if not isinstance(payload, dict):
        raise DataError(f"{path}: report is not a JSON object")
    return averaged_triple_from_report(payload)
