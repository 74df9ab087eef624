import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from indexing.vocab import Vocabulary


@dataclass
class TfIdfDoc:
    # vocabulary index -> weight; only strictly positive weights are stored
    weights: dict[int, float] = field(default_factory=dict)

    def dense(self, size: int) -> np.ndarray:
        v = np.zeros(size)
        for i, w in self.weights.items():
            v[i] = w
        return v


def compute_tfidf(documents: Sequence[Sequence[str]], vocab: Vocabulary) -> list[TfIdfDoc]:
    """weight(w, d) = count(w, d) * log(N / (1 + df(w))), clamped at 0."""
    counts = [Counter(vocab.index(t) for t in doc if t in vocab) for doc in documents]
    n_docs = len(documents)
    df = Counter(i for c in counts for i in c)

    out = []
    for c in counts:
        weights = {}
        for i, count in c.items():
            w = count * math.log(n_docs / (1 + df[i]))
            if w > 0:
                weights[i] = w
        out.append(TfIdfDoc(weights))
    return out


def tfidf_matrix(docs: Sequence[TfIdfDoc], size: int) -> np.ndarray:
    return np.stack([d.dense(size) for d in docs]) if docs else np.zeros((0, size))
