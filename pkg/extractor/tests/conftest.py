import json
import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

# plain-English word bank; the long words guarantee wordpiece splits
# under the deliberately small test vocabulary
_WORDS = [
    "the", "a", "this", "that", "every", "some",
    "patient", "report", "summary", "note", "record", "letter",
    "mentions", "describes", "lists", "shows", "contains", "reviews",
    "mild", "severe", "recurring", "stable", "unremarkable", "persistent",
    "headaches", "symptoms", "observations", "measurements", "complications",
    "hospitalization", "rehabilitation", "documentation", "immunization",
    "radiograph", "thermometer", "stethoscope", "prescription",
    "during", "after", "before", "without", "within", "throughout",
    "morning", "evening", "winter", "spring", "yesterday", "today.",
    "improvement,", "follow-up", "self-care", "well-being",
]

_LABELS = ["news", "sports", "science"]


def build_corpus_lines(n_sentences: int = 100):
    lines = []
    for i in range(n_sentences):
        length = 4 + (i * 7) % 6
        words = [_WORDS[(i * 13 + j * 5) % len(_WORDS)] for j in range(length)]
        lines.append(
            {"id": f"s{i:03d}", "text": " ".join(words), "label": _LABELS[i % len(_LABELS)]}
        )
    return lines


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for line in build_corpus_lines():
            handle.write(json.dumps(line))
            handle.write("\n")
    return path


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory, corpus_path):
    from embed_extract.corpus import load_corpus
    from embed_extract.tinymodel import build_tiny_model

    texts = [item.text for item in load_corpus(corpus_path)]
    out = tmp_path_factory.mktemp("model") / "tiny"
    # vocab is kept small so that the long bank words split into subwords
    build_tiny_model(out, texts, vocab_size=90, hidden_size=24, num_layers=2, num_heads=2, seed=7)
    return out
