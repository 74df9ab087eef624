"""Automatic response metrics: corpus BLEU, token F1, embedding similarities, persona use ratio."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np
from nltk.util import ngrams
from pydantic import BaseModel, ConfigDict, Field

from exploration.expansion import cosine
from indexing.embeddings import EmbeddingTable, embed_tokens
from indexing.stopwords import is_stopword


class EvalReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    bleu1: float = Field(0.0, alias="BLEU1")
    bleu2: float = Field(0.0, alias="BLEU2")
    bleu3: float = Field(0.0, alias="BLEU3")
    bleu4: float = Field(0.0, alias="BLEU4")
    f1: float = Field(0.0, alias="F1")
    emb_average: float = Field(0.0, alias="Average")
    emb_extrema: float = Field(0.0, alias="Extrema")
    emb_greedy: float = Field(0.0, alias="Greedy")
    persona_use_ratio: float = Field(0.0, alias="PersonaUseRatio")


# -----------------------------
# BLEU
# -----------------------------

def bleu_n(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]], n: int) -> float:
    """
    Corpus BLEU over orders 1..n with uniform weights: clipped n-gram counts pooled
    over the corpus, geometric mean, brevity penalty. Returned as a percentage.

    A non-empty corpus whose candidates all equal their references scores 100 at
    every order, even when some sentences are too short to hold an n-gram of the
    highest order (where pooled counts alone would give 0).
    """
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates for {len(references)} references")
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")

    matched = [0] * n
    total = [0] * n
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for order in range(1, n + 1):
            cand_counts = Counter(ngrams(cand, order))
            ref_counts = Counter(ngrams(ref, order))
            matched[order - 1] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            total[order - 1] += sum(cand_counts.values())

    if cand_len > 0 and all(list(c) == list(r) for c, r in zip(candidates, references)):
        return 100.0
    if cand_len == 0 or any(m == 0 for m in matched):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, total)) / n
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * brevity * math.exp(log_precision)


# -----------------------------
# TOKEN F1
# -----------------------------

def f1_tokens(candidate: Sequence[str], reference: Sequence[str]) -> float:
    if not candidate or not reference:
        return 0.0
    common = sum((Counter(candidate) & Counter(reference)).values())
    if common == 0:
        return 0.0
    precision = common / len(candidate)
    recall = common / len(reference)
    return 2 * precision * recall / (precision + recall)


# -----------------------------
# EMBEDDING SIMILARITIES
# -----------------------------

def emb_average(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float:
    c, r = embed_tokens(candidate, table), embed_tokens(reference, table)
    if not c or not r:
        return 0.0
    return cosine(np.mean(c, axis=0), np.mean(r, axis=0))


def _extrema(vectors: list[np.ndarray]) -> np.ndarray:
    stacked = np.stack(vectors)
    pick = np.argmax(np.abs(stacked), axis=0)
    return stacked[pick, np.arange(stacked.shape[1])]


def emb_extrema(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float:
    c, r = embed_tokens(candidate, table), embed_tokens(reference, table)
    if not c or not r:
        return 0.0
    return cosine(_extrema(c), _extrema(r))


def _greedy_match(source: list[np.ndarray], target: list[np.ndarray]) -> float:
    return float(np.mean([max(cosine(s, t) for t in target) for s in source]))


def emb_greedy(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float:
    c, r = embed_tokens(candidate, table), embed_tokens(reference, table)
    if not c or not r:
        return 0.0
    return 0.5 * (_greedy_match(c, r) + _greedy_match(r, c))


# -----------------------------
# PERSONA USE
# -----------------------------

def persona_use_ratio(persona_sentences: Sequence[Sequence[str]], responses: Sequence[Sequence[str]]) -> float:
    """Distinct non-stop persona words that appear in any response / distinct non-stop persona words."""
    persona = {t for sent in persona_sentences for t in sent if not is_stopword(t)}
    if not persona:
        return 0.0
    used = {t for resp in responses for t in resp} & persona
    return len(used) / len(persona)


def evaluate(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    table: EmbeddingTable | None = None,
    conversations: Sequence[tuple[Sequence[Sequence[str]], Sequence[Sequence[str]]]] = (),
) -> EvalReport:
    """
    Corpus-level report. Sentence-level scores are averaged over pairs; the persona
    use ratio is averaged over `conversations` given as (persona sentences, responses).
    """
    def mean(values):
        return float(np.mean(values)) if len(values) else 0.0

    report = EvalReport(
        bleu1=bleu_n(candidates, references, 1),
        bleu2=bleu_n(candidates, references, 2),
        bleu3=bleu_n(candidates, references, 3),
        bleu4=bleu_n(candidates, references, 4),
        f1=mean([f1_tokens(c, r) for c, r in zip(candidates, references)]),
        persona_use_ratio=mean([persona_use_ratio(p, rs) for p, rs in conversations]),
    )
    if table is not None:
        pairs = list(zip(candidates, references))
        report.emb_average = mean([emb_average(c, r, table) for c, r in pairs])
        report.emb_extrema = mean([emb_extrema(c, r, table) for c, r in pairs])
        report.emb_greedy = mean([emb_greedy(c, r, table) for c, r in pairs])
    return report
