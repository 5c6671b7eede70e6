"""Extraction jobs: run an encoder over a corpus and write embedding files.

Output is the neutral JSON Lines embedding format: ``pooled`` vectors at
sentence level; ``tokens`` (hidden states) plus ``word_spans`` at word
level. Values are 32-bit floats serialized with full round-trip
precision. Inputs longer than the length budget are skipped and logged,
never truncated silently.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .align import AlignmentError, word_spans_from_offsets
from .corpus import CorpusItem, load_corpus

logger = logging.getLogger("embed_extract")

LEVELS = ("sentence", "word")


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    model: str
    input: str
    level: str
    out: str
    max_len: int | None = None
    layer: int = -1
    batch_size: int = 16
    device: str = "cpu"
    word_means_out: str | None = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if not self.model or not self.input or not self.out:
            raise ValueError("model, input, and out must be non-empty")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_len is not None and self.max_len < 3:
            raise ValueError("max_len must leave room for content plus special tokens")


@dataclass
class ExtractionStats:
    written: int
    skipped: int
    dimension: int


def _load_encoder(job: ExtractionJob):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(job.model)
        model = AutoModel.from_pretrained(job.model)
    except Exception as exc:
        raise ExtractionError(f"cannot load model {job.model!r}: {exc}") from None
    if not tokenizer.is_fast:
        raise ExtractionError(
            f"model {job.model!r} has no fast tokenizer; offset mappings are required"
        )
    try:
        device = torch.device(job.device)
        model = model.to(device)
    except (RuntimeError, ValueError) as exc:
        raise ExtractionError(f"cannot use device {job.device!r}: {exc}") from None
    model.eval()
    return tokenizer, model, device


def _length_budget(job: ExtractionJob, tokenizer) -> int:
    if job.max_len is not None:
        return job.max_len
    limit = getattr(tokenizer, "model_max_length", 512)
    # some tokenizers advertise a sentinel "unlimited" length
    if not isinstance(limit, int) or limit > 100_000:
        return 512
    return limit


def _float_list(vector: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(vector, dtype=np.float32)]


def run_extraction(job: ExtractionJob) -> ExtractionStats:
    """Execute one job; returns counts of written and skipped records."""
    items = load_corpus(job.input)
    tokenizer, model, device = _load_encoder(job)
    budget = _length_budget(job, tokenizer)
    out_path = Path(job.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    means_handle = None
    if job.word_means_out is not None:
        means_handle = Path(job.word_means_out).open("w", encoding="utf-8")
    written = 0
    skipped = 0
    dimension = 0
    try:
        with out_path.open("w", encoding="utf-8") as out_handle:
            for start in range(0, len(items), job.batch_size):
                batch = items[start : start + job.batch_size]
                kept, encoded = _encode_batch(batch, tokenizer, budget)
                skipped += len(batch) - len(kept)
                if not kept:
                    continue
                hidden = _hidden_states(model, encoded, device, job.layer)
                dimension = hidden.shape[-1]
                for row, item in enumerate(kept):
                    record = _build_record(job, item, row, encoded, hidden, means_handle)
                    out_handle.write(json.dumps(record))
                    out_handle.write("\n")
                    written += 1
    finally:
        if means_handle is not None:
            means_handle.close()
    if written == 0:
        raise ExtractionError("every record was skipped; nothing written")
    logger.info("wrote %d records (%d skipped) to %s", written, skipped, job.out)
    return ExtractionStats(written=written, skipped=skipped, dimension=dimension)


def _encode_batch(batch: list[CorpusItem], tokenizer, budget: int):
    texts = [item.text for item in batch]
    probe = tokenizer(texts, add_special_tokens=True)
    kept = []
    kept_texts = []
    for item, ids in zip(batch, probe["input_ids"]):
        if len(ids) > budget:
            logger.warning("skipping %r: %d tokens exceed the limit of %d", item.id, len(ids), budget)
            continue
        kept.append(item)
        kept_texts.append(item.text)
    if not kept:
        return [], None
    encoded = tokenizer(
        kept_texts,
        padding=True,
        return_tensors="pt",
        return_offsets_mapping=True,
        return_special_tokens_mask=True,
    )
    return kept, encoded


def _hidden_states(model, encoded, device, layer: int) -> torch.Tensor:
    inputs = {
        "input_ids": encoded["input_ids"].to(device),
        "attention_mask": encoded["attention_mask"].to(device),
    }
    with torch.no_grad():
        outputs = model(**inputs, output_hidden_states=True)
    try:
        hidden = outputs.hidden_states[layer]
    except IndexError:
        raise ExtractionError(
            f"layer {layer} out of range for {len(outputs.hidden_states)} hidden-state layers"
        ) from None
    return hidden.cpu()


def _build_record(job, item, row, encoded, hidden, means_handle) -> dict:
    mask = encoded["attention_mask"][row].bool()
    states = hidden[row][mask].numpy().astype(np.float32)
    record: dict = {"id": item.id, "label": item.label}
    if job.level == "sentence":
        pooled = states.astype(np.float64).mean(axis=0)
        record["pooled"] = _float_list(pooled)
        return record
    offsets = [tuple(pair) for pair in encoded["offset_mapping"][row][mask].tolist()]
    special = [bool(flag) for flag in encoded["special_tokens_mask"][row][mask].tolist()]
    try:
        spans = word_spans_from_offsets(item.text, offsets, special)
    except AlignmentError as exc:
        raise ExtractionError(f"record {item.id!r}: {exc}") from None
    record["tokens"] = [_float_list(state) for state in states]
    record["word_spans"] = [[start, end] for start, end in spans]
    if means_handle is not None:
        for word_index, (start, end) in enumerate(spans):
            mean = states[start:end].astype(np.float64).mean(axis=0)
            means_handle.write(
                json.dumps(
                    {"id": item.id, "word_index": word_index, "vector": _float_list(mean)}
                )
            )
            means_handle.write("\n")
    return record
