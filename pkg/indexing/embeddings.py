import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from indexing.vocab import Vocabulary

logger = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)

    def init_matrix(self, vocab: Vocabulary, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
        """Rows for `vocab`: pretrained where available, uniform(-scale, scale) otherwise."""
        matrix = rng.uniform(-scale, scale, size=(len(vocab), self.dim))
        hits = 0
        for i, tok in enumerate(vocab.itos):
            vec = self.vectors.get(tok)
            if vec is not None:
                matrix[i] = vec
                hits += 1
        logger.info("[EMBED] %d/%d vocabulary rows initialised from pretrained vectors", hits, len(vocab))
        return matrix


def load_embeddings(path, vocab: Vocabulary | None = None) -> EmbeddingTable:
    """Text format: `<token> <v1> ... <vD>` per line. Tokens outside `vocab` are skipped."""
    dim = None
    vectors = {}
    with Path(path).open(encoding="utf-8") as f:
        for line_index, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) < 2:
                raise EmbeddingFormatError(f"{path}: line {line_index} has no vector values")
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise EmbeddingFormatError(
                    f"{path}: line {line_index} has {len(parts) - 1} values, expected {dim}"
                )
            token = parts[0]
            if vocab is not None and token not in vocab:
                continue
            try:
                vectors[token] = np.array([float(x) for x in parts[1:]])
            except ValueError as e:
                raise EmbeddingFormatError(f"{path}: line {line_index} has a non-numeric value") from e

    if dim is None:
        raise EmbeddingFormatError(f"{path}: no embedding lines")
    logger.info("[EMBED] loaded %d vectors of dim %d from %s", len(vectors), dim, path)
    return EmbeddingTable(dim=dim, vectors=vectors)


def embed_tokens(tokens: Sequence[str], table: EmbeddingTable) -> list[np.ndarray]:
    return [table.vectors[t] for t in tokens if t in table.vectors]
