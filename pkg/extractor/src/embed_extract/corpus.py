"""Input corpus handling: JSON Lines with id, text, and label per line."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusItem:
    id: str
    text: str
    label: str


def load_corpus(path: str | Path) -> list[CorpusItem]:
    """Parse a {"id", "text", "label"} JSON Lines corpus.

    Raises :class:`CorpusError` with a 1-based line number on malformed
    lines, duplicate ids, and empty files.
    """
    path = Path(path)
    items: list[CorpusItem] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
                if not isinstance(payload, dict):
                    raise ValueError("line is not a JSON object")
                item = CorpusItem(
                    id=str(payload["id"]),
                    text=str(payload["text"]),
                    label=str(payload["label"]),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise CorpusError(f"{path}:{line_number}: {exc}") from None
            if item.id in seen:
                raise CorpusError(f"{path}:{line_number}: duplicate id {item.id!r}")
            seen.add(item.id)
            if not item.text.strip():
                raise CorpusError(f"{path}:{line_number}: empty text")
            items.append(item)
    if not items:
        raise CorpusError(f"{path}: empty corpus")
    return items
