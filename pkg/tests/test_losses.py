import math

import numpy as np
import pytest

from exploitation.losses import (
    LossConfig,
    jaccard,
    joint_loss,
    nll_loss,
    p_bows_loss,
    p_bows_targets,
    p_match_loss,
    p_match_targets,
)
from indexing.preprocess import tokenize
from indexing.vocab import Vocabulary
from numkit import tensor as nk
from numkit.tensor import ContractError, Tape, Tensor, backward


def test_default_weights():
    cfg = LossConfig()
    assert (cfg.gamma1, cfg.gamma2, cfg.lam, cfg.theta_a) == (0.1, 0.1, 1.0, 0.03)


# -----------------------------
# Jaccard labels
# -----------------------------

@pytest.mark.parametrize("a, b, expected", [
    ({"x", "y"}, {"x", "y"}, 1.0),
    ({"x"}, {"y"}, 0.0),
    ({"a", "b"}, {"b", "c"}, 1 / 3),
    (set(), set(), 0.0),
])
def test_jaccard(a, b, expected):
    assert jaccard(a, b) == pytest.approx(expected, abs=1e-12)


def test_vegan_persona_sentence_is_labeled(vegan_examples):
    last = vegan_examples[-1]
    labels = p_match_targets(last.persona_sentences, last.response, 0.03)
    # i like music / skateboard / the guitar share nothing with the response
    assert labels.tolist() == [0.0, 0.0, 0.0, 1.0]


def test_zero_threshold_labels_everything_with_content():
    personas = [tokenize("i like tea"), tokenize("dogs bark")]
    assert p_match_targets(personas, tokenize("cats sleep"), 0.0).tolist() == [1.0, 1.0]


# -----------------------------
# P-Match
# -----------------------------

def test_p_match_hand_values():
    assert p_match_loss(Tensor([0.5, 0.5]), np.array([1.0, 0.0])).item() == pytest.approx(math.log(2))
    assert p_match_loss(Tensor([0.2, 0.8]), np.zeros(2)).item() == 0.0
    assert p_match_loss(Tensor([0.0, 1.0]), np.array([0.0, 1.0])).item() == 0.0


def test_p_match_clamps_zero_weight():
    loss = p_match_loss(Tensor([0.0, 1.0]), np.array([1.0, 0.0])).item()
    assert loss == pytest.approx(-math.log(1e-12))


def test_p_match_length_mismatch():
    with pytest.raises(ContractError):
        p_match_loss(Tensor([1.0]), np.array([1.0, 0.0]))


# -----------------------------
# P-BoWs
# -----------------------------

def test_p_bows_targets_hand_construction():
    vocab = Vocabulary(["music", "jazz"])
    b = p_bows_targets(["music", "jazz"], {"jazz"}, vocab, lam=1.0)
    expected = np.zeros(len(vocab))
    expected[vocab.index("music")] = 1.0
    expected[vocab.index("jazz")] = 2.0
    np.testing.assert_array_equal(b, expected)


def test_p_bows_targets_ignore_stopwords():
    vocab = Vocabulary(["the", "a"])
    assert not p_bows_targets(["the", "a", "."], set(), vocab, 1.0).any()


def test_p_bows_saturated_rejection_costs_nothing():
    logits = [Tensor(np.full(5, -50.0))]
    assert p_bows_loss(logits, np.zeros(5)).item() == pytest.approx(0.0, abs=1e-9)


def test_p_bows_half_probability_term():
    # one word at p = 0.5 with b = 1, the rest saturated where b = 0
    s = np.full(4, -50.0)
    s[0] = 0.0
    b = np.array([1.0, 0.0, 0.0, 0.0])
    assert p_bows_loss([Tensor(s)], b).item() == pytest.approx(math.log(2) / 4, rel=1e-9)


def test_p_bows_persona_words_pull_harder():
    def grad_at_half(weight):
        p = Tensor([0.5], requires_grad=True)
        with Tape() as tape:
            loss = -nk.sum(nk.log(p, lo=1e-12) * weight + nk.log(1.0 - p, lo=1e-12) * (1.0 - weight))
        return backward(loss, tape)[p][0]

    assert grad_at_half(2.0) < grad_at_half(1.0) < 0


def test_p_bows_needs_a_step():
    with pytest.raises(ContractError):
        p_bows_loss([], np.zeros(3))


# -----------------------------
# NLL / joint
# -----------------------------

def test_nll_perfect_prediction():
    probs = [Tensor(np.eye(3)[i]) for i in (2, 0)]
    assert nll_loss(probs, [2, 0]).item() == 0.0


def test_nll_uniform_is_log_v():
    probs = [Tensor(np.full(10, 0.1))] * 3
    assert nll_loss(probs, [1, 4, 9]).item() == pytest.approx(math.log(10), abs=1e-12)


def test_nll_single_token():
    assert nll_loss([Tensor([0.2, 0.8])], [1]).item() == pytest.approx(-math.log(0.8))


def test_nll_length_mismatch():
    with pytest.raises(ContractError):
        nll_loss([Tensor([1.0])], [0, 0])


def test_joint_hand_value():
    assert joint_loss(2.0, 0.5, 1.0, 0.1, 0.1) == pytest.approx(2.15, abs=1e-12)


def test_joint_without_auxiliary_terms_is_nll():
    nll = Tensor(1.234)
    assert joint_loss(nll, Tensor(9.0), Tensor(7.0), 0.0, 0.0).item() == 1.234


def test_joint_rejects_negative_weights():
    with pytest.raises(ContractError):
        joint_loss(1.0, 1.0, 1.0, -0.1, 0.1)


def test_joint_is_linear_in_the_weights():
    nll, p_match, p_bows = Tensor(1.7), Tensor(0.4), Tensor(2.3)
    base = joint_loss(nll, p_match, p_bows, 0.1, 0.2).item()
    scaled = joint_loss(nll, p_match, p_bows, 0.3, 0.6).item()
    assert scaled - 1.7 == pytest.approx(3 * (base - 1.7), abs=1e-12)
    only_match = joint_loss(nll, p_match, p_bows, 0.5, 0.0).item()
    only_bows = joint_loss(nll, p_match, p_bows, 0.0, 0.5).item()
    both = joint_loss(nll, p_match, p_bows, 0.5, 0.5).item()
    assert both - 1.7 == pytest.approx((only_match - 1.7) + (only_bows - 1.7), abs=1e-12)
