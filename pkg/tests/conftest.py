import numpy as np
import pytest

from fewshot.embeddings import Dataset, EmbeddingRecord


@pytest.fixture
def two_class_records():
    return [
        EmbeddingRecord(id="a0", label="A", pooled=np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32)),
        EmbeddingRecord(id="a1", label="A", pooled=np.array([0.9, 0.1, 0.0, 0.0], dtype=np.float32)),
        EmbeddingRecord(id="b0", label="B", pooled=np.array([0.0, 1.0, 0.0, 0.0], dtype=np.float32)),
        EmbeddingRecord(id="b1", label="B", pooled=np.array([0.1, 0.9, 0.0, 0.0], dtype=np.float32)),
    ]


@pytest.fixture
def two_class_dataset(two_class_records):
    return Dataset.from_records(two_class_records)
