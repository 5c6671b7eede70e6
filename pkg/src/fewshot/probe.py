"""Linear softmax probe over frozen embeddings.

Desk-scale stand-in for fine-tuning a full encoder with a classification
layer: only the linear layer exists here, trained on the episode's
support vectors. Zero-initialized, so an untrained probe predicts the
uniform distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numkit
from .errors import DataError, NumericError
from .numkit import AdamWHyper


@dataclass(frozen=True)
class ProbeHyper:
    optimizer: AdamWHyper = field(default_factory=AdamWHyper)
    epochs: int = 200

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class ProbeModel:
    """weights: n_classes x d, bias: n_classes; labels sorted lexicographically."""

    weights: np.ndarray
    bias: np.ndarray
    labels: tuple[str, ...]


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _stack_support(support: Sequence[tuple[np.ndarray, str]]):
    if len(support) == 0:
        raise DataError("probe training needs a non-empty support set")
    labels = tuple(sorted({label for _, label in support}))
    if len(labels) < 2:
        raise DataError("probe training needs at least 2 classes")
    dims = {np.asarray(vec).shape for vec, _ in support}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValueError(f"support vectors must share one 1-D shape, got {dims}")
    x = np.stack([np.asarray(vec, dtype=np.float64) for vec, _ in support])
    index = {label: i for i, label in enumerate(labels)}
    y = np.array([index[label] for _, label in support], dtype=np.int64)
    return x, y, labels


def support_loss(model: ProbeModel, support: Sequence[tuple[np.ndarray, str]]) -> float:
    """Mean cross-entropy of the model on a support set."""
    x, y, labels = _stack_support(support)
    if labels != model.labels:
        raise ValueError("support labels differ from the model's label set")
    probs = softmax(x @ np.asarray(model.weights, dtype=np.float64).T + np.asarray(model.bias, dtype=np.float64))
    picked = np.clip(probs[np.arange(len(y)), y], 1e-300, None)
    return float(-np.log(picked).mean())


def train_probe(
    support: Sequence[tuple[np.ndarray, str]],
    hyper: ProbeHyper,
    seed: int = 0,
) -> ProbeModel:
    """Full-batch AdamW on mean softmax cross-entropy, zero-initialized.

    Zero init plus full-batch updates make the run independent of
    ``seed``; the argument is accepted for interface symmetry with the
    other trained method and echoed nowhere.
    """
    del seed
    x, y, labels = _stack_support(support)
    n_classes, dim = len(labels), x.shape[1]
    weights = np.zeros((n_classes, dim), dtype=np.float32)
    bias = np.zeros(n_classes, dtype=np.float32)
    params = [weights, bias]
    state = numkit.adamw_init(params)
    one_hot = np.zeros((len(y), n_classes), dtype=np.float64)
    one_hot[np.arange(len(y)), y] = 1.0
    for _epoch in range(hyper.epochs):
        logits = x @ params[0].astype(np.float64).T + params[1].astype(np.float64)
        probs = softmax(logits)
        d_logits = (probs - one_hot) / len(y)
        grads = [d_logits.T @ x, d_logits.sum(axis=0)]
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise NumericError("non-finite probe gradient")
        params, state = numkit.adamw_step(params, grads, state, hyper.optimizer)
    return ProbeModel(weights=params[0], bias=params[1], labels=labels)


def probe_classify(model: ProbeModel, embedding: np.ndarray) -> tuple[str, dict[str, float]]:
    """Softmax probabilities and the argmax label (ties: lexicographic)."""
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != (model.weights.shape[1],):
        raise ValueError(
            f"embedding dimension {embedding.shape} != probe dimension ({model.weights.shape[1]},)"
        )
    logits = np.asarray(model.weights, dtype=np.float64) @ embedding + np.asarray(model.bias, dtype=np.float64)
    probs = softmax(logits)
    best = int(np.argmax(probs))  # argmax returns the first (lexicographically smallest) tie
    return model.labels[best], {label: float(p) for label, p in zip(model.labels, probs)}


def save_probe(model: ProbeModel, path: str | Path) -> None:
    payload = {
        "kind": "linear-probe",
        "version": 1,
        "labels": list(model.labels),
        "dimension": int(model.weights.shape[1]),
        "weights": [float(x) for x in np.asarray(model.weights).ravel()],
        "bias": [float(x) for x in np.asarray(model.bias)],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_probe(path: str | Path) -> ProbeModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("kind") != "linear-probe":
            raise ValueError("not a linear-probe file")
        labels = tuple(payload["labels"])
        dim = int(payload["dimension"])
        weights = np.asarray(payload["weights"], dtype=np.float32).reshape(len(labels), dim)
        bias = np.asarray(payload["bias"], dtype=np.float32)
        return ProbeModel(weights=weights, bias=bias, labels=labels)
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: invalid probe file: {exc}") from None
