"""Alignment of subword tokens to whitespace-delimited words.

Tokenizers split on their own rules (punctuation, word pieces), so a
whitespace word like ``proto-potato.`` may cover several tokens. Spans
are derived purely from the tokenizer's character-offset mapping: a
token belongs to the whitespace word whose character range contains the
token's start offset. Special and padding tokens belong to no word.
"""

from __future__ import annotations

import bisect
import re

_WORD_PATTERN = re.compile(r"\S+")


class AlignmentError(ValueError):
    pass


def whitespace_word_ranges(text: str) -> list[tuple[int, int]]:
    """Character ranges [start, end) of the whitespace-delimited words."""
    return [match.span() for match in _WORD_PATTERN.finditer(text)]


def word_spans_from_offsets(
    text: str,
    offsets: list[tuple[int, int]],
    special: list[bool],
) -> list[tuple[int, int]]:
    """Half-open token-index spans, one per whitespace word with tokens.

    ``offsets[i]`` is token i's character range in ``text``; ``special[i]``
    marks tokens (CLS/SEP/PAD) that belong to no word. Words that produce
    no tokens are skipped; each returned span is a contiguous token run.
    """
    if len(offsets) != len(special):
        raise AlignmentError("offsets and special mask lengths differ")
    words = whitespace_word_ranges(text)
    starts = [start for start, _ in words]
    token_words: list[int | None] = []
    for index, ((token_start, token_end), is_special) in enumerate(zip(offsets, special)):
        if is_special:
            token_words.append(None)
            continue
        if token_end <= token_start:
            raise AlignmentError(f"token {index} has an empty offset range and is not special")
        word_index = bisect.bisect_right(starts, token_start) - 1
        if word_index < 0 or token_start >= words[word_index][1]:
            raise AlignmentError(
                f"token {index} at offset {token_start} falls outside every word"
            )
        token_words.append(word_index)
    spans: list[tuple[int, int]] = []
    current_word: int | None = None
    span_start = 0
    for index, word_index in enumerate(token_words):
        if word_index == current_word:
            continue
        if current_word is not None:
            spans.append((span_start, index))
        current_word = word_index
        span_start = index
    if current_word is not None:
        spans.append((span_start, len(token_words)))
    spans = [span for span, word in zip(spans, _span_words(token_words, spans)) if word is not None]
    _check_one_span_per_word(token_words, spans)
    return spans


def _span_words(token_words, spans):
    return [token_words[start] for start, _ in spans]


def _check_one_span_per_word(token_words, spans) -> None:
    # a word split across non-adjacent token runs cannot be expressed as
    # one contiguous span; no wordpiece tokenizer does this, so fail loudly
    seen: set[int] = set()
    for start, _ in spans:
        word = token_words[start]
        if word in seen:
            raise AlignmentError(f"word {word} covers non-contiguous token runs")
        seen.add(word)
