"""Pairwise training-set construction and the two siamese-style classifiers.

The cosine classifier scores a query against every support item and
aggregates per class; the trained classifier first recasts the support
set as all unordered same/different pairs, fits a shared bidirectional
GRU encoder plus a comparison head on them with binary cross entropy,
and then scores query-support pairs with the trained model.

Pair targets are 0 for same-class and 1 for different-class, so the
trained head output reads as a dissimilarity; affinity = 1 - output puts
both classifiers under one argmax-of-aggregated-affinity rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numkit
from .embeddings import Dataset, record_sequence
from .errors import DataError, NumericError
from .numkit import AdamWHyper, GruParams, PairHeadParams
from .prng import SplitMix64

AGGREGATOR_MEAN = "mean"
AGGREGATOR_MAX = "max"
AGGREGATORS = (AGGREGATOR_MEAN, AGGREGATOR_MAX)


@dataclass(frozen=True)
class PairExample:
    """Unordered record pair; target 0 if same class, 1 if different."""

    index_a: int
    index_b: int
    target: int

    def __post_init__(self):
        if not self.index_a < self.index_b:
            raise ValueError("pair indices must satisfy index_a < index_b")
        if self.target not in (0, 1):
            raise ValueError("target must be 0 or 1")


def pair_count(total: int) -> int:
    """Number of unordered pairs among ``total`` items: total*(total-1)/2."""
    if total < 0:
        raise ValueError("total must be non-negative")
    return total * (total - 1) // 2


def build_pairs(train: Dataset) -> list[PairExample]:
    """All unordered record pairs, lexicographic by (index_a, index_b).

    An empty or single-record dataset yields the empty list.
    """
    labels = [record.label for record in train.records]
    return [
        PairExample(index_a=i, index_b=j, target=0 if labels[i] == labels[j] else 1)
        for i in range(len(labels))
        for j in range(i + 1, len(labels))
    ]


def export_pairs(train: Dataset, path: str | Path) -> list[PairExample]:
    """Dump the pair set as JSON Lines {"a": id, "b": id, "target": 0|1}."""
    pairs = build_pairs(train)
    with Path(path).open("w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(
                json.dumps(
                    {
                        "a": train.records[pair.index_a].id,
                        "b": train.records[pair.index_b].id,
                        "target": pair.target,
                    }
                )
            )
            handle.write("\n")
    return pairs


def _aggregate(per_class: dict[str, list[float]], aggregator: str) -> dict[str, float]:
    if aggregator not in AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}")
    if aggregator == AGGREGATOR_MEAN:
        return {label: float(np.mean(np.asarray(values, dtype=np.float64))) for label, values in per_class.items()}
    return {label: max(values) for label, values in per_class.items()}


def _argmax_label(scores: dict[str, float]) -> str:
    # ties broken by lexicographically smallest label
    return min(scores.items(), key=lambda item: (-item[1], item[0]))[0]


def ptsnn_classify(
    support: Sequence[tuple[np.ndarray, str]],
    query: np.ndarray,
    aggregator: str = AGGREGATOR_MEAN,
) -> tuple[str, dict[str, float]]:
    """Classify by aggregated cosine similarity against the support set.

    Affinity of the query to each support item is cosine similarity; the
    per-class score is the mean (or max) of that class's affinities and
    the argmax class wins.
    """
    if len(support) == 0:
        raise ValueError("support set must be non-empty")
    per_class: dict[str, list[float]] = {}
    for embedding, label in support:
        per_class.setdefault(label, []).append(numkit.cosine_similarity(query, embedding))
    scores = _aggregate(per_class, aggregator)
    return _argmax_label(scores), scores


# ---------------------------------------------------------------------------
# Trained pair model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoeHyper:
    """Training configuration for the recurrent pair model."""

    optimizer: AdamWHyper = field(default_factory=AdamWHyper)
    epochs: int = 200
    hidden_size: int = 16
    head: str = numkit.HEAD_WEIGHTED_L1
    batch_size: int | None = None  # None = full batch

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.hidden_size <= 0:
            raise ValueError("hidden_size must be positive")
        if self.head not in numkit.HEAD_KINDS:
            raise ValueError(f"unknown head kind {self.head!r}")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ValueError("batch_size must be positive when set")


@dataclass
class SoeModel:
    gru: GruParams
    head: PairHeadParams
    seed: int
    hyper: SoeHyper
    initial_loss: float
    final_loss: float


def _model_arrays(gru: GruParams, head: PairHeadParams) -> list[np.ndarray]:
    return gru.arrays() + head.arrays()


def _split_arrays(gru: GruParams, head: PairHeadParams, arrays: list[np.ndarray]):
    return gru.with_arrays(arrays[:18]), head.with_arrays(arrays[18:])


def _batch_loss_and_grads(
    gru: GruParams,
    head: PairHeadParams,
    sequences: list[np.ndarray],
    pairs: Sequence[PairExample],
) -> tuple[float, list[np.ndarray]]:
    """Mean pair BCE and its gradients over one batch.

    Each record is encoded once; gradients flowing into a record's
    embedding are accumulated over all pairs touching it and pushed
    through the encoder in a single backward pass per record.
    """
    needed = sorted({index for pair in pairs for index in (pair.index_a, pair.index_b)})
    embeddings: dict[int, np.ndarray] = {}
    caches: dict[int, numkit.BiGruCache] = {}
    for index in needed:
        embeddings[index], caches[index] = numkit.bigru_forward(gru, sequences[index])
    d_embeddings = {index: np.zeros_like(embeddings[index]) for index in needed}
    head_grad_arrays = [np.zeros(a.shape, dtype=np.float64) for a in head.arrays()]
    total_loss = 0.0
    scale = 1.0 / len(pairs)
    for pair in pairs:
        out, head_cache = numkit.head_forward(head, embeddings[pair.index_a], embeddings[pair.index_b])
        total_loss += numkit.bce_loss(out, pair.target)
        d_out = scale * numkit.bce_grad(out, pair.target)
        head_grads, d_e1, d_e2 = numkit.head_backward(head_cache, d_out)
        for accumulator, grad in zip(head_grad_arrays, head_grads.arrays()):
            accumulator += grad
        d_embeddings[pair.index_a] += d_e1
        d_embeddings[pair.index_b] += d_e2
    gru_grad_arrays = [np.zeros(a.shape, dtype=np.float64) for a in gru.arrays()]
    for index in needed:
        record_grads = numkit.bigru_backward(caches[index], d_embeddings[index])
        for accumulator, grad in zip(gru_grad_arrays, record_grads.arrays()):
            accumulator += grad
    return total_loss * scale, gru_grad_arrays + head_grad_arrays


def _mean_pair_loss(
    gru: GruParams,
    head: PairHeadParams,
    sequences: list[np.ndarray],
    pairs: Sequence[PairExample],
) -> float:
    embeddings = {}
    total = 0.0
    for pair in pairs:
        for index in (pair.index_a, pair.index_b):
            if index not in embeddings:
                embeddings[index] = numkit.bigru_forward(gru, sequences[index])[0]
        out, _ = numkit.head_forward(head, embeddings[pair.index_a], embeddings[pair.index_b])
        total += numkit.bce_loss(out, pair.target)
    return total / len(pairs)


def train_soe(train: Dataset, hyper: SoeHyper, seed: int) -> SoeModel:
    """Fit the pair model on all unordered support pairs with AdamW.

    Full-batch by default; with ``hyper.batch_size`` set, pair order is
    reshuffled every epoch from the run's PRNG stream. Parameters are
    stored as 32-bit floats (rounded after every step); all math runs in
    64-bit. Deterministic given (data, hyper, seed).
    """
    if len(train) < 2:
        raise DataError("training a pair model needs at least 2 records")
    if len(train.labels) < 2:
        raise DataError(
            "single-class training set: every pair would carry the same target"
        )
    sequences = [np.asarray(record_sequence(r), dtype=np.float64) for r in train.records]
    pairs = build_pairs(train)
    rng = SplitMix64(seed)
    gru = numkit.init_gru(hyper.hidden_size, train.dimension, rng).astype(np.float32)
    head = numkit.init_head(hyper.head, hyper.hidden_size, rng)
    if head.kind == numkit.HEAD_WEIGHTED_L1:
        head = PairHeadParams(kind=head.kind, w=head.w.astype(np.float32), b=float(np.float32(head.b)))
    params = _model_arrays(gru, head)
    state = numkit.adamw_init(params)
    initial_loss = _mean_pair_loss(gru, head, sequences, pairs)
    if not np.isfinite(initial_loss):
        raise NumericError("non-finite training loss at initialization")
    for _epoch in range(hyper.epochs):
        if hyper.batch_size is None:
            batches = [pairs]
        else:
            order = rng.shuffle_prefix(list(range(len(pairs))), len(pairs))
            batches = [
                [pairs[i] for i in order[start : start + hyper.batch_size]]
                for start in range(0, len(order), hyper.batch_size)
            ]
        for batch in batches:
            loss, grads = _batch_loss_and_grads(gru, head, sequences, batch)
            if not np.isfinite(loss):
                raise NumericError("non-finite training loss")
            params, state = numkit.adamw_step(params, grads, state, hyper.optimizer)
            gru, head = _split_arrays(gru, head, params)
    final_loss = _mean_pair_loss(gru, head, sequences, pairs)
    return SoeModel(
        gru=gru,
        head=head,
        seed=seed,
        hyper=hyper,
        initial_loss=float(initial_loss),
        final_loss=float(final_loss),
    )


def soe_affinity(model: SoeModel, seq_a: np.ndarray, seq_b: np.ndarray) -> float:
    """Same-class affinity in (0, 1): one minus the pair dissimilarity."""
    out, _ = numkit.soe_pair_forward(model.gru, model.head, seq_a, seq_b)
    return 1.0 - out


def soesnn_classify(
    model: SoeModel,
    support: Sequence[tuple[np.ndarray, str]],
    query: np.ndarray,
    aggregator: str = AGGREGATOR_MEAN,
) -> tuple[str, dict[str, float]]:
    """Classify a query sequence against support sequences with the model."""
    if len(support) == 0:
        raise ValueError("support set must be non-empty")
    per_class: dict[str, list[float]] = {}
    for sequence, label in support:
        per_class.setdefault(label, []).append(soe_affinity(model, query, sequence))
    scores = _aggregate(per_class, aggregator)
    return _argmax_label(scores), scores


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------
#
# JSON layout (all parameter arrays flat, row-major, 32-bit values):
# {
#   "kind": "soe-pair-model", "version": 1,
#   "hidden_size": h, "input_size": d,
#   "head": {"kind": ..., "w": [...], "b": ...},        # w/b absent for euclidean
#   "gru": {"fwd": {"w_z": [...], ...}, "bwd": {...}},
#   "seed": ..., "training": {"epochs": ..., "batch_size": ...,
#        "optimizer": {"lr": ..., "beta1": ..., "beta2": ..., "eps": ...,
#                      "weight_decay": ...},
#        "initial_loss": ..., "final_loss": ...}
# }

_GATE_FIELDS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


def _direction_to_json(direction) -> dict:
    return {
        name: [float(x) for x in getattr(direction, name).ravel()]
        for name in _GATE_FIELDS
    }


def _direction_from_json(payload: dict, hidden_size: int, input_size: int):
    arrays = []
    for name in _GATE_FIELDS:
        flat = np.asarray(payload[name], dtype=np.float32)
        if name.startswith("w_"):
            arrays.append(flat.reshape(hidden_size, input_size))
        elif name.startswith("u_"):
            arrays.append(flat.reshape(hidden_size, hidden_size))
        else:
            arrays.append(flat)
    return arrays


def save_model(model: SoeModel, path: str | Path) -> None:
    head_payload: dict = {"kind": model.head.kind}
    if model.head.kind == numkit.HEAD_WEIGHTED_L1:
        head_payload["w"] = [float(x) for x in model.head.w]
        head_payload["b"] = float(model.head.b)
    payload = {
        "kind": "soe-pair-model",
        "version": 1,
        "hidden_size": model.gru.hidden_size,
        "input_size": model.gru.input_size,
        "head": head_payload,
        "gru": {
            "fwd": _direction_to_json(model.gru.fwd),
            "bwd": _direction_to_json(model.gru.bwd),
        },
        "seed": model.seed,
        "training": {
            "epochs": model.hyper.epochs,
            "batch_size": model.hyper.batch_size,
            "optimizer": {
                "lr": model.hyper.optimizer.lr,
                "beta1": model.hyper.optimizer.beta1,
                "beta2": model.hyper.optimizer.beta2,
                "eps": model.hyper.optimizer.eps,
                "weight_decay": model.hyper.optimizer.weight_decay,
            },
            "initial_loss": model.initial_loss,
            "final_loss": model.final_loss,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SoeModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("kind") != "soe-pair-model":
            raise ValueError("not a pair-model file")
        hidden_size = int(payload["hidden_size"])
        input_size = int(payload["input_size"])
        from .numkit import GruDirection

        fwd = GruDirection(*_direction_from_json(payload["gru"]["fwd"], hidden_size, input_size))
        bwd = GruDirection(*_direction_from_json(payload["gru"]["bwd"], hidden_size, input_size))
        head_payload = payload["head"]
        if head_payload["kind"] == numkit.HEAD_WEIGHTED_L1:
            head = PairHeadParams(
                kind=head_payload["kind"],
                w=np.asarray(head_payload["w"], dtype=np.float32),
                b=float(np.float32(head_payload["b"])),
            )
        else:
            head = PairHeadParams(kind=head_payload["kind"])
        training = payload["training"]
        hyper = SoeHyper(
            optimizer=AdamWHyper(**training["optimizer"]),
            epochs=int(training["epochs"]),
            hidden_size=hidden_size,
            head=head.kind,
            batch_size=training["batch_size"],
        )
        return SoeModel(
            gru=GruParams(fwd=fwd, bwd=bwd),
            head=head,
            seed=int(payload["seed"]),
            hyper=hyper,
            initial_loss=float(training["initial_loss"]),
            final_loss=float(training["final_loss"]),
        )
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: invalid model file: {exc}") from None
