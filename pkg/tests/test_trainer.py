import dataclasses

import numpy as np
import pytest

from exploitation.generation import GREEDY, generate
from exploitation.losses import LossConfig
from exploitation.net import ModelConfig, PeeModel, encode_example
from exploitation.trainer import TrainingDivergedError, example_loss, labeled_persona_mass, train
from indexing.vocab import EOS_ID, Vocabulary
from numkit import tensor as nk
from numkit.gradcheck import grad_check

# Several joint-loss entries (attention scores through a saturated softmax) have
# gradients near 1e-9, where central differences only agree to about 1e-12 in
# absolute terms. A floor of 1e-5 keeps those comparisons meaningful.
JOINT_FLOOR = 1e-5


def joint_of(examples, model, cfg):
    return lambda: nk.mean(nk.stack([example_loss(ex, model, cfg).joint for ex in examples]))


def test_joint_loss_gradient_on_sampled_parameters(tiny_model, toy_encoded):
    m = tiny_model
    params = [
        m.persona.fwd.b_r,
        m.persona.sentence_key.layers[0].bias,
        m.persona.word_value.layers[-1].bias,
        m.persona.external_key.layers[-1].bias,
        m.history.utterance_fwd.b_z,
        m.history.project.bias,
        m.decoder.gru.b_h,
        m.decoder.attn_v,
        m.decoder.init.bias,
    ]
    error = grad_check(joint_of(toy_encoded[:1], m, LossConfig()), params, floor=JOINT_FLOOR)
    assert error < 1e-4


@pytest.mark.slow
def test_joint_loss_gradient_on_every_parameter(toy_conversations):
    first = toy_conversations[0].examples()[0]
    example = dataclasses.replace(first, response=first.response[:3])
    tokens = [tok for sent in example.persona_sentences for tok in sent]
    tokens += [tok for utt in example.history for tok in utt] + example.response + ["jazz", "music"]
    vocab = Vocabulary(tokens)
    cfg = ModelConfig(hidden=4, encoder_hidden=2, embedding_dim=3, vocab_size=200, hops=3)
    model = PeeModel(vocab, cfg, seed=0)
    for p in model.store.tensors():
        p.data *= 3.0
    encoded = [encode_example(example, vocab, ["jazz", "music"])]
    assert len(encoded[0].response) == 3
    error = grad_check(joint_of(encoded, model, LossConfig()), model.store.tensors(), floor=JOINT_FLOOR)
    assert error < 1e-4


def test_zero_auxiliary_weights_report_nll(tiny_model, toy_encoded):
    trace = train(tiny_model, toy_encoded, LossConfig(gamma1=0.0, gamma2=0.0), seed=1)
    assert len(trace) == tiny_model.config.epochs
    for record in trace:
        assert record["joint"] == pytest.approx(record["nll"], abs=1e-12)


def test_training_is_deterministic(toy_vocab, tiny_config, toy_encoded):
    traces = [
        train(PeeModel(toy_vocab, tiny_config, seed=5), toy_encoded, LossConfig(), valid_set=toy_encoded[:2], seed=5)
        for _ in range(2)
    ]
    assert traces[0] == traces[1]
    assert "valid_joint" in traces[0][0]


def test_best_epoch_callback(tiny_model, toy_encoded):
    improved = []
    train(tiny_model, toy_encoded, LossConfig(), seed=0, on_improved=lambda epoch, rec: improved.append(epoch))
    assert improved and improved[0] == 1


def test_divergence_names_the_batch(tiny_model, toy_encoded):
    tiny_model.decoder.f_o.bias.data[0] = np.inf
    with pytest.raises(TrainingDivergedError) as err:
        train(tiny_model, toy_encoded, LossConfig(), seed=0)
    assert err.value.batch_id == 0
    assert err.value.example is not None
    components = err.value.components
    assert set(components) == {"joint", "nll", "p_match", "p_bows"}
    # the infinite logit poisons the output softmax but not the persona weights
    # or the clamped bag-of-words likelihood
    assert np.isnan(components["nll"])
    assert np.isnan(components["joint"])
    assert np.isfinite(components["p_match"]) and components["p_match"] >= 0.0
    assert np.isfinite(components["p_bows"]) and components["p_bows"] > 0.0
    assert "nan" in str(err.value)


# -----------------------------
# end-to-end on the toy dialogues
# -----------------------------

OVERFIT = dict(hidden=32, encoder_hidden=16, embedding_dim=16, vocab_size=200,
               batch_size=4, lr=1e-2, epochs=150, hops=3, max_len=12)


def overfit_config(**update):
    return ModelConfig(**{**OVERFIT, **update})


def test_overfit_config_accepts_overrides():
    cfg = overfit_config(epochs=60, hops=2)
    assert (cfg.epochs, cfg.hops, cfg.hidden) == (60, 2, 32)


@pytest.mark.slow
def test_overfits_toy_dialogues(toy_examples, toy_vocab):
    expansions = {0: ["jazz", "music"], 1: ["pasta", "cook"], 2: ["dog"], 3: ["spain"]}
    encoded = [encode_example(ex, toy_vocab, expansions[ex.conversation_id]) for ex in toy_examples]
    model = PeeModel(toy_vocab, overfit_config(), seed=0)
    trace = train(model, encoded, LossConfig(), seed=0)
    assert len(encoded) == 8
    assert trace[-1]["nll"] < 0.5

    hits = total = 0
    for ex in encoded:
        target = ex.response + [EOS_ID]
        out = generate(ex, model, mode=GREEDY, max_len=len(target))
        hits += sum(a == b for a, b in zip(out, target))
        total += len(target)
    assert hits / total >= 0.9


@pytest.mark.slow
def test_persona_matching_raises_labeled_mass(toy_examples, toy_vocab):
    encoded = [encode_example(ex, toy_vocab) for ex in toy_examples]
    masses = {}
    for name, losses in (("pee", LossConfig()), ("ped+pe", LossConfig(gamma1=0.0, gamma2=0.0))):
        model = PeeModel(toy_vocab, overfit_config(epochs=60), seed=0)
        train(model, encoded, losses, seed=0)
        masses[name] = labeled_persona_mass(model, encoded, LossConfig())
    assert masses["pee"] > masses["ped+pe"]
