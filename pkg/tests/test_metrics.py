import math

import numpy as np
import pytest
from nltk.translate.bleu_score import corpus_bleu

from evaluation.metrics import (
    EvalReport,
    bleu_n,
    emb_average,
    emb_extrema,
    emb_greedy,
    evaluate,
    f1_tokens,
    persona_use_ratio,
)
from indexing.embeddings import EmbeddingTable


def cos(u, v):
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


@pytest.fixture
def table():
    vectors = {"a": [1.0, -2.0], "b": [-3.0, 1.0], "c": [2.0, 3.0]}
    return EmbeddingTable(dim=2, vectors={k: np.array(v) for k, v in vectors.items()})


def random_pairs(n=20, seed=0):
    rng = np.random.default_rng(seed)
    words = ["a", "b", "c", "d", "e"]
    pairs = []
    for _ in range(n):
        cand = list(rng.choice(words, size=rng.integers(4, 9)))
        ref = list(rng.choice(words, size=rng.integers(4, 9)))
        pairs.append(([str(w) for w in cand], [str(w) for w in ref]))
    return pairs


# -----------------------------
# BLEU
# -----------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_identity_scores_100(n):
    sents = [["the", "cat", "sat", "on", "the", "mat"], ["a", "dog", "ran", "far", "away"]]
    assert bleu_n(sents, sents, n) == pytest.approx(100.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_identity_of_short_sentences_scores_100(n):
    sents = [["hi"], ["ok", "then"]]
    assert bleu_n(sents, sents, n) == 100.0
    assert bleu_n([["hi"]], [["hi"]], n) == 100.0


def test_no_overlap_is_zero():
    assert bleu_n([["x", "y"]], [["a", "b"]], 1) == 0.0


def test_brevity_penalty_example():
    score = bleu_n([["the", "cat"]], [["the", "cat", "sat"]], 1)
    assert score == pytest.approx(100 * math.exp(1 - 3 / 2), abs=1e-9)
    assert score == pytest.approx(60.65, abs=5e-3)


def test_empty_candidate_is_zero():
    assert bleu_n([[]], [["a", "b"]], 2) == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_bleu_agrees_with_nltk(n):
    pairs = random_pairs()
    candidates = [c for c, _ in pairs]
    references = [r for _, r in pairs]
    expected = corpus_bleu([[r] for r in references], candidates, weights=tuple([1.0 / n] * n))
    assert bleu_n(candidates, references, n) / 100.0 == pytest.approx(expected, abs=1e-9)


def test_bleu_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bleu_n([["a"]], [], 1)
    with pytest.raises(ValueError):
        bleu_n([["a"]], [["a"]], 5)


# -----------------------------
# F1
# -----------------------------

def brute_f1(cand, ref):
    if not cand or not ref:
        return 0.0
    remaining = list(ref)
    common = 0
    for tok in cand:
        if tok in remaining:
            remaining.remove(tok)
            common += 1
    if common == 0:
        return 0.0
    p, r = common / len(cand), common / len(ref)
    return 2 * p * r / (p + r)


def test_f1_cases():
    assert f1_tokens(["a", "b"], ["a", "b"]) == 1.0
    assert f1_tokens(["a"], ["b"]) == 0.0
    assert f1_tokens(["a", "b"], ["b", "c"]) == pytest.approx(0.5)
    assert f1_tokens([], ["a"]) == 0.0


def test_f1_agrees_with_brute_force():
    for cand, ref in random_pairs(seed=3):
        assert f1_tokens(cand, ref) == pytest.approx(brute_f1(cand, ref), abs=1e-9)


def test_metrics_ignore_reindexing():
    pairs = random_pairs(seed=5)
    rename = {w: w.upper() * 2 for w in "abcde"}
    renamed = [([rename[t] for t in c], [rename[t] for t in r]) for c, r in pairs]
    for n in (1, 2):
        assert bleu_n(*zip(*pairs), n) == pytest.approx(bleu_n(*zip(*renamed), n))
    assert [f1_tokens(c, r) for c, r in pairs] == [f1_tokens(c, r) for c, r in renamed]


# -----------------------------
# Embedding similarities
# -----------------------------

def test_identical_sentences_score_one(table):
    sent = ["a", "b", "c"]
    for metric in (emb_average, emb_extrema, emb_greedy):
        assert metric(sent, sent, table) == pytest.approx(1.0)


def test_out_of_vocabulary_side_scores_zero(table):
    for metric in (emb_average, emb_extrema, emb_greedy):
        assert metric(["zzz"], ["a"], table) == 0.0


def test_embedding_hand_values(table):
    a, b, c = (table.vectors[k] for k in "abc")
    cand, ref = ["a", "b"], ["c", "a"]

    assert emb_average(cand, ref, table) == pytest.approx(cos((a + b) / 2, (c + a) / 2))
    # per dimension, the value with the largest magnitude
    assert emb_extrema(cand, ref, table) == pytest.approx(cos(np.array([-3.0, -2.0]), np.array([2.0, 3.0])))
    forward = (max(cos(a, c), cos(a, a)) + max(cos(b, c), cos(b, a))) / 2
    backward = (max(cos(c, a), cos(c, b)) + max(cos(a, a), cos(a, b))) / 2
    assert emb_greedy(cand, ref, table) == pytest.approx((forward + backward) / 2)


def test_average_is_symmetric(table):
    assert emb_average(["a", "b"], ["c"], table) == pytest.approx(emb_average(["c"], ["a", "b"], table))


# -----------------------------
# Persona use
# -----------------------------

def test_persona_use_ratio_cases():
    persona = [["i", "like", "music"], ["i", "play", "guitar"]]
    assert persona_use_ratio(persona, [["hello", "there"]]) == 0.0
    assert persona_use_ratio(persona, [["like", "music"], ["play", "guitar"]]) == 1.0


def test_repeated_use_counts_once():
    persona = [["music"], ["guitar"], ["vegan"]]
    assert persona_use_ratio(persona, [["vegan", "vegan"], ["i", "am", "vegan"]]) == pytest.approx(1 / 3)


def test_stopword_only_persona_is_zero():
    assert persona_use_ratio([["i", "am"]], [["i", "am"]]) == 0.0


# -----------------------------
# Report
# -----------------------------

def test_report_identity_and_field_names(table):
    sents = [["a", "b", "c"], ["c", "a"]]
    report = evaluate(sents, sents, table=table, conversations=[([["b"]], sents)])
    assert report.bleu1 == pytest.approx(100.0)
    assert report.f1 == 1.0
    assert report.persona_use_ratio == 1.0
    dumped = report.model_dump(by_alias=True)
    assert list(dumped) == ["BLEU1", "BLEU2", "BLEU3", "BLEU4", "F1", "Average", "Extrema", "Greedy", "PersonaUseRatio"]
    assert EvalReport.model_validate(dumped) == report
