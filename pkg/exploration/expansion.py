"""
Persona exploration: extend a dialogue's persona vocabulary with the words
closest to it in topic space. Ranking everywhere is score descending, then
token ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from exploration.topic import TopicWordVector
from indexing.personachat import Conversation, DialogueExample
from indexing.stopwords import is_stopword
from indexing.vocab import Vocabulary


class ExpansionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int = Field(20, ge=0)
    n_w: int = Field(100, ge=0)


@dataclass
class ExpansionResult:
    words: list[tuple[str, float]] = field(default_factory=list)
    conversation_id: int = 0

    @property
    def tokens(self) -> list[str]:
        return [tok for tok, _ in self.words]


def _rank(scored: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    return sorted(scored, key=lambda ts: (-ts[1], ts[0]))


def persona_vocab(example: DialogueExample | Conversation, topic_vocab: Vocabulary | Iterable[str]) -> set[str]:
    return {
        tok
        for sent in example.persona_sentences
        for tok in sent
        if not is_stopword(tok) and tok in topic_vocab
    }


def cosine(u1: np.ndarray, u2: np.ndarray) -> float:
    n1, n2 = np.linalg.norm(u1), np.linalg.norm(u2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(np.clip(np.dot(u1, u2) / (n1 * n2), -1.0, 1.0))


def nearest_words(
    w: str,
    vectors: Mapping[str, TopicWordVector],
    m: int,
    exclude: Iterable[str] = (),
) -> list[tuple[str, float]]:
    """Top-m tokens by cosine to `w`, skipping `w` itself and everything in `exclude`."""
    if w not in vectors:
        raise KeyError(f"{w!r} is not in the topic vocabulary")
    skip = set(exclude) | {w}
    query = vectors[w].u
    scored = [(tok, cosine(query, vec.u)) for tok, vec in vectors.items() if tok not in skip]
    return _rank(scored)[:m]


def expand(
    example: DialogueExample | Conversation,
    vectors: Mapping[str, TopicWordVector],
    m: int,
    n_w: int,
    topic_vocab: Vocabulary | Iterable[str] | None = None,
) -> ExpansionResult:
    """
    Union of nearest_words over the persona vocabulary, each token kept once at its best score,
    ranked, truncated to n_w.
    """
    if topic_vocab is None:
        topic_vocab = vectors.keys()
    persona = persona_vocab(example, topic_vocab)
    best: dict[str, float] = {}
    for w in sorted(persona):
        for tok, score in nearest_words(w, vectors, m, exclude=persona):
            if tok not in best or score > best[tok]:
                best[tok] = score

    ranked = _rank(best.items())
    return ExpansionResult(words=ranked[:n_w], conversation_id=example.conversation_id)
