"""
Training objectives.

    L = L_NLL + gamma1 * L_P-Match + gamma2 * L_P-BoWs

Every log argument is clamped to [1e-12, 1 - 1e-12] (P-BoWs) or >= 1e-12 (others).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from indexing.stopwords import is_stopword
from indexing.vocab import Vocabulary
from numkit import tensor as nk
from numkit.tensor import ContractError, Tensor, as_tensor

PROB_FLOOR = 1e-12


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma1: float = Field(0.1, ge=0)
    gamma2: float = Field(0.1, ge=0)
    lam: float = Field(1.0, gt=0)
    theta_a: float = Field(0.03, ge=0)


def content_tokens(tokens: Iterable[str]) -> set[str]:
    return {t for t in tokens if not is_stopword(t)}


def jaccard(set1: set, set2: set) -> float:
    union = set1 | set2
    if not union:
        return 0.0
    return len(set1 & set2) / len(union)


def p_match_targets(persona_sentences: Sequence[Sequence[str]], response: Sequence[str], theta_a: float) -> np.ndarray:
    """a_i = 1 iff the Jaccard index of the non-stop-word sets of P_i and Y is >= theta_a."""
    if theta_a < 0:
        raise ContractError(f"theta_a must be non-negative, got {theta_a}")
    target = content_tokens(response)
    return np.array([
        1.0 if jaccard(content_tokens(sent), target) >= theta_a else 0.0
        for sent in persona_sentences
    ])


def p_match_loss(a_s, a: np.ndarray) -> Tensor:
    """-sum_i a_i log w_i over the persona sentence weights w."""
    a_s = as_tensor(a_s)
    a = np.asarray(a, dtype=float)
    if a_s.shape != a.shape:
        raise ContractError(f"P-Match weights {a_s.shape} and labels {a.shape} differ in length")
    return -nk.sum(nk.log(a_s, lo=PROB_FLOOR) * a)


def p_bows_targets(
    response: Sequence[str],
    persona_word_set: Iterable[str],
    vocab: Vocabulary,
    lam: float,
) -> np.ndarray:
    """b_w = 1 for non-stop response words in the vocabulary, 1 + lam when also a persona word."""
    if lam <= 0:
        raise ContractError(f"lambda must be positive, got {lam}")
    persona = set(persona_word_set)
    b = np.zeros(len(vocab))
    for tok in content_tokens(response):
        if tok in vocab:
            b[vocab.index(tok)] = 1.0 + lam if tok in persona else 1.0
    return b


def p_bows_loss(logits: Sequence[Tensor], b: np.ndarray) -> Tensor:
    """
    p_b = sigmoid(sum_t s~_t); loss = -mean_i [b_i log p_i + (1 - b_i) log(1 - p_i)],
    taken literally for b_i = 1 + lam as well.
    """
    if len(logits) == 0:
        raise ContractError("P-BoWs loss needs at least one decoding step")
    b = np.asarray(b, dtype=float)
    p = nk.sigmoid(nk.sum(nk.stack(logits), axis=0))
    log_p = nk.log(p, lo=PROB_FLOOR, hi=1.0 - PROB_FLOOR)
    log_not_p = nk.log(1.0 - p, lo=PROB_FLOOR, hi=1.0 - PROB_FLOOR)
    return -nk.mean(log_p * b + log_not_p * (1.0 - b))


def nll_loss(probs: Sequence, targets: Sequence[int]) -> Tensor:
    """-(1/|Y|) sum_t log p_t[y_t]."""
    if len(probs) != len(targets) or not targets:
        raise ContractError(f"{len(probs)} distributions for {len(targets)} targets")
    picked = nk.stack([as_tensor(p)[int(y)] for p, y in zip(probs, targets)])
    return -nk.mean(nk.log(picked, lo=PROB_FLOOR))


def joint_loss(nll, p_match, p_bows, gamma1: float, gamma2: float):
    if gamma1 < 0 or gamma2 < 0:
        raise ContractError("loss weights must be non-negative")
    return nll + gamma1 * p_match + gamma2 * p_bows
