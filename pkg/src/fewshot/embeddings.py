"""Embedding data model, JSON Lines persistence, and subword pooling.

A dataset is a list of labeled records, each carrying a pooled vector
and/or a sequence of token vectors with optional word-span alignment.
Vectors are stored as 32-bit floats; reductions (means) accumulate in
64-bit and round once at the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .prng import SplitMix64


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class EmbeddingRecord:
    """One labeled sample: pooled vector and/or token vectors with spans.

    ``word_spans`` are half-open [start, end) index ranges into ``tokens``,
    non-overlapping and ascending; each marks the subwords of one word.
    """

    id: str
    label: str
    pooled: np.ndarray | None = None
    tokens: np.ndarray | None = None
    word_spans: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be a non-empty string")
        if self.pooled is None and self.tokens is None:
            raise ValueError("record needs at least one of pooled/tokens")
        if self.pooled is not None:
            pooled = _freeze(np.asarray(self.pooled, dtype=np.float32))
            if pooled.ndim != 1 or pooled.size == 0:
                raise ValueError("pooled must be a non-empty 1-D vector")
            object.__setattr__(self, "pooled", pooled)
        if self.tokens is not None:
            tokens = _freeze(np.asarray(self.tokens, dtype=np.float32))
            if tokens.ndim != 2 or tokens.shape[0] == 0 or tokens.shape[1] == 0:
                raise ValueError("tokens must be a non-empty T x d matrix")
            object.__setattr__(self, "tokens", tokens)
        if self.word_spans is not None:
            if self.tokens is None:
                raise ValueError("word_spans require tokens")
            spans = tuple((int(s), int(e)) for s, e in self.word_spans)
            n_tokens = self.tokens.shape[0]
            previous_end = 0
            for start, end in spans:
                if not 0 <= start < end <= n_tokens:
                    raise ValueError(f"span [{start}, {end}) out of bounds for {n_tokens} tokens")
                if start < previous_end:
                    raise ValueError(f"span [{start}, {end}) overlaps or is out of order")
                previous_end = end
            object.__setattr__(self, "word_spans", spans)
        if self.pooled is not None and self.tokens is not None:
            if self.pooled.shape[0] != self.tokens.shape[1]:
                raise ValueError("pooled and tokens disagree on dimension")

    @property
    def dimension(self) -> int:
        if self.pooled is not None:
            return int(self.pooled.shape[0])
        return int(self.tokens.shape[1])


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of records sharing one embedding dimension."""

    records: tuple[EmbeddingRecord, ...]
    dimension: int
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen_ids = set()
        seen_labels: list[str] = []
        for record in self.records:
            if record.id in seen_ids:
                raise ValueError(f"duplicate record id {record.id!r}")
            seen_ids.add(record.id)
            if record.dimension != self.dimension:
                raise ValueError(
                    f"record {record.id!r} has dimension {record.dimension}, expected {self.dimension}"
                )
            if record.label not in seen_labels:
                seen_labels.append(record.label)
        if self.labels:
            if set(self.labels) != set(seen_labels):
                raise ValueError("labels field disagrees with record labels")
        else:
            object.__setattr__(self, "labels", tuple(seen_labels))
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, records: Iterable[EmbeddingRecord]) -> "Dataset":
        records = tuple(records)
        if not records:
            raise ValueError("cannot build a dataset from zero records")
        return cls(records=records, dimension=records[0].dimension)

    def subset(self, ids: Sequence[str]) -> "Dataset":
        """New dataset with the given records, in the given id order."""
        by_id = {record.id: record for record in self.records}
        try:
            picked = tuple(by_id[record_id] for record_id in ids)
        except KeyError as exc:
            raise DataError(f"unknown record id {exc.args[0]!r}") from None
        return Dataset.from_records(picked)


def _record_to_json(record: EmbeddingRecord) -> str:
    payload: dict = {"id": record.id, "label": record.label}
    if record.pooled is not None:
        payload["pooled"] = [float(x) for x in record.pooled]
    if record.tokens is not None:
        payload["tokens"] = [[float(x) for x in row] for row in record.tokens]
    if record.word_spans is not None:
        payload["word_spans"] = [[s, e] for s, e in record.word_spans]
    return json.dumps(payload)


def _record_from_json(payload: dict) -> EmbeddingRecord:
    record_id = payload.get("id")
    label = payload.get("label")
    if not isinstance(record_id, str) or not isinstance(label, str):
        raise ValueError("'id' and 'label' must be strings")
    pooled = payload.get("pooled")
    tokens = payload.get("tokens")
    spans = payload.get("word_spans")
    return EmbeddingRecord(
        id=record_id,
        label=label,
        pooled=np.asarray(pooled, dtype=np.float32) if pooled is not None else None,
        tokens=np.asarray(tokens, dtype=np.float32) if tokens is not None else None,
        word_spans=tuple((s, e) for s, e in spans) if spans is not None else None,
    )


def load_dataset(path: str | Path) -> Dataset:
    """Load a JSON Lines embedding file, validating all invariants.

    Raises :class:`DataError` with a 1-based line number on malformed
    lines, dimension mismatches, duplicate ids, and empty files.
    """
    path = Path(path)
    records: list[EmbeddingRecord] = []
    seen_ids: set[str] = set()
    dimension: int | None = None
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
                if not isinstance(payload, dict):
                    raise ValueError("line is not a JSON object")
                record = _record_from_json(payload)
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{line_number}: {exc}") from None
            if record.id in seen_ids:
                raise DataError(f"{path}:{line_number}: duplicate record id {record.id!r}")
            seen_ids.add(record.id)
            if dimension is None:
                dimension = record.dimension
            elif record.dimension != dimension:
                raise DataError(
                    f"{path}:{line_number}: dimension {record.dimension} != {dimension}"
                )
            records.append(record)
    if not records:
        raise DataError(f"{path}: empty dataset file")
    return Dataset(records=tuple(records), dimension=dimension)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write one JSON object per record; reloads bitwise-identical vectors."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in dataset.records:
            handle.write(_record_to_json(record))
            handle.write("\n")


def average_subwords(tokens: np.ndarray, span: tuple[int, int]) -> np.ndarray:
    """Component-wise mean of tokens[start:end), accumulated in 64-bit."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 2:
        raise ValueError("tokens must be a T x d matrix")
    start, end = int(span[0]), int(span[1])
    if not 0 <= start < end <= tokens.shape[0]:
        raise ValueError(f"span [{start}, {end}) invalid for {tokens.shape[0]} tokens")
    mean = tokens[start:end].astype(np.float64).mean(axis=0)
    return mean.astype(np.float32)


def pool_words(record: EmbeddingRecord) -> list[tuple[int, np.ndarray]]:
    """One (word index, mean vector) per word span, in span order."""
    if record.tokens is None or record.word_spans is None:
        raise ValueError(f"record {record.id!r} lacks tokens or word_spans")
    return [
        (index, average_subwords(record.tokens, span))
        for index, span in enumerate(record.word_spans)
    ]


def record_vector(record: EmbeddingRecord) -> np.ndarray:
    """Single-vector view of a record, for vector-based classifiers.

    Preference order: the pooled vector; else the mean of the token rows
    covered by word spans (excludes unspanned positions, e.g. special
    tokens); else the mean of all token rows.
    """
    if record.pooled is not None:
        return record.pooled
    if record.word_spans is not None:
        covered = np.concatenate([record.tokens[s:e] for s, e in record.word_spans])
        return covered.astype(np.float64).mean(axis=0).astype(np.float32)
    return record.tokens.astype(np.float64).mean(axis=0).astype(np.float32)


def record_sequence(record: EmbeddingRecord) -> np.ndarray:
    """Token-sequence view of a record; pooled-only records become length 1."""
    if record.tokens is not None:
        return record.tokens
    return record.pooled.reshape(1, -1)


def synth_fixture(
    n_classes: int,
    per_class: int,
    dimension: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Deterministic Gaussian-cluster dataset for tests and demos.

    Class c ("C0", "C1", ...) is N(separation * e_c, I) where e_c is the
    c-th standard basis vector, so class means are exactly orthogonal.
    All noise comes from one SplitMix64 stream seeded with ``seed``,
    drawn class-major, record-minor, coordinate-innermost; two calls with
    equal arguments produce identical datasets.
    """
    if n_classes <= 0 or per_class <= 0 or dimension <= 0:
        raise ValueError("n_classes, per_class, and dimension must be positive")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    if dimension < n_classes:
        raise ValueError(
            f"dimension {dimension} < n_classes {n_classes}: orthogonal class directions need dimension >= n_classes"
        )
    rng = SplitMix64(seed)
    records = []
    for class_index in range(n_classes):
        label = f"C{class_index}"
        for sample_index in range(per_class):
            noise = np.array([rng.normal() for _ in range(dimension)], dtype=np.float64)
            noise[class_index] += separation
            records.append(
                EmbeddingRecord(
                    id=f"{label}-{sample_index:04d}",
                    label=label,
                    pooled=noise.astype(np.float32),
                )
            )
    return Dataset(records=tuple(records), dimension=dimension)
