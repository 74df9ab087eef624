"""
VAE topic model over tf-idf document vectors.

    h_v = softplus(f_h(v))           mu = f_mu(h_v)      log_var = f_sigma(h_v)
    z = mu + exp(0.5 * log_var) * eps
    h' = softplus(f_h'(z))           v' = softmax(f_v'(h'))

f_v' is a K -> |V'| linear layer without bias, so its weight matrix *is* the
word-topic matrix W (K x |V'|); column j is the topic representation of the j-th
topic word.
The model works over the regular (non-reserved) entries of its vocabulary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from indexing.tfidf import TfIdfDoc
from indexing.vocab import SPECIALS, Vocabulary
from numkit import tensor as nk
from numkit.optim import AdamState, adam_step, clip_grad_norm
from numkit.params import Affine, ParamStore
from numkit.tensor import NonFiniteError, Tape, Tensor

logger = logging.getLogger(__name__)

OFFSET = len(SPECIALS)


class TopicConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_topics: int = Field(50, ge=1)
    vocab_size: int = Field(10000, gt=len(SPECIALS))
    hidden: int = Field(256, ge=1)
    epochs: int = Field(50, ge=0)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(1e-3, gt=0)
    clip_norm: float = Field(5.0, gt=0)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TopicWordVector:
    token: str
    u: np.ndarray


class TopicModel:
    def __init__(self, vocab: Vocabulary, n_topics: int, hidden: int, seed: int = 0):
        self.vocab = vocab
        self.n_topics = n_topics
        self.hidden = hidden
        self.size = len(vocab) - OFFSET
        self.store = ParamStore(seed)
        self.f_h = Affine(self.store, "topic.f_h", self.size, hidden)
        self.f_mu = Affine(self.store, "topic.f_mu", hidden, n_topics)
        self.f_sigma = Affine(self.store, "topic.f_sigma", hidden, n_topics)
        self.f_h_dec = Affine(self.store, "topic.f_h_dec", n_topics, n_topics)
        self.f_v_dec = Affine(self.store, "topic.f_v_dec", n_topics, self.size, bias=False)

    @property
    def word_topic_matrix(self) -> np.ndarray:
        """W, shape K x |V'|."""
        return self.f_v_dec.weight.data

    def as_input(self, v) -> Tensor:
        """TfIdfDoc, a list of them, or a dense array (one row per document) -> Tensor."""
        if isinstance(v, Tensor):
            return v
        if isinstance(v, TfIdfDoc):
            return Tensor(v.dense(len(self.vocab))[OFFSET:])
        if isinstance(v, (list, tuple)) and v and isinstance(v[0], TfIdfDoc):
            return Tensor(np.stack([d.dense(len(self.vocab))[OFFSET:] for d in v]))
        return Tensor(np.asarray(v, dtype=float))


def encode(v, model: TopicModel) -> tuple[Tensor, Tensor, Tensor]:
    """Returns (mu, log_var, h_v)."""
    x = model.as_input(v)
    h_v = nk.softplus(model.f_h(x))
    return model.f_mu(h_v), model.f_sigma(h_v), h_v


def reparameterize(mu: Tensor, log_var: Tensor, eps) -> Tensor:
    return mu + nk.exp(log_var * 0.5) * eps


def decode_logits(z: Tensor, model: TopicModel) -> Tensor:
    return model.f_v_dec(nk.softplus(model.f_h_dec(z)))


def decode(z: Tensor, model: TopicModel) -> Tensor:
    return nk.softmax(decode_logits(z, model))


def kl_divergence(mu: Tensor, log_var: Tensor) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)), summed over all entries."""
    return nk.sum(mu * mu + nk.exp(log_var) - 1.0 - log_var) * 0.5


def elbo_loss(v, model: TopicModel, eps) -> Tensor:
    """Negative ELBO, averaged over documents when `v` is a batch."""
    x = model.as_input(v)
    mu, log_var, _ = encode(x, model)
    z = reparameterize(mu, log_var, eps)
    reconstruction = nk.cross_entropy(decode_logits(z, model), x.data)
    n_docs = x.shape[0] if x.ndim == 2 else 1
    return (reconstruction + kl_divergence(mu, log_var)) / n_docs


def train_topic_model(
    docs: Sequence[TfIdfDoc],
    vocab: Vocabulary,
    config: TopicConfig,
    seed: int = 0,
    progress: bool = False,
) -> tuple[TopicModel, list[dict]]:
    """Adam over shuffled mini-batches. Returns the model and one {epoch, mean_loss} record per epoch."""
    if not docs:
        raise ValueError("train_topic_model needs at least one document")

    model = TopicModel(vocab, config.n_topics, config.hidden, seed=seed)
    rng = np.random.default_rng(seed)
    data = np.stack([d.dense(len(vocab))[OFFSET:] for d in docs])
    params = dict(model.store.items())
    state = AdamState(lr=config.lr)
    trace = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        batches = [order[i:i + config.batch_size] for i in range(0, len(order), config.batch_size)]
        total = 0.0
        for batch_id, idx in enumerate(tqdm(batches, desc=f"topic epoch {epoch}", disable=not progress)):
            eps = rng.standard_normal((len(idx), config.n_topics))
            try:
                with Tape() as tape:
                    loss = elbo_loss(data[idx], model, eps)
            except NonFiniteError as e:
                raise TrainingDivergedError(f"topic loss diverged at epoch {epoch}, batch {batch_id}: {e}") from e
            grads = nk.backward(loss, tape, model.store.tensors())
            named = {p.name: g for p, g in grads.items()}
            named, _ = clip_grad_norm(named, config.clip_norm)
            adam_step(params, named, state)
            total += loss.item() * len(idx)

        mean_loss = total / len(data)
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(f"topic loss is not finite at epoch {epoch}")
        trace.append({"epoch": epoch, "mean_loss": mean_loss})
        logger.info("[TOPIC] epoch %d mean_loss=%.6f", epoch, mean_loss)

    return model, trace


def word_topic_vectors(model: TopicModel) -> dict[str, TopicWordVector]:
    W = model.word_topic_matrix
    return {
        tok: TopicWordVector(token=tok, u=W[:, j].copy())
        for j, tok in enumerate(model.vocab.regular_tokens)
    }


def top_words(model: TopicModel, k: int) -> list[list[str]]:
    """The k highest-weight words of each topic (rows of W)."""
    tokens = model.vocab.regular_tokens
    out = []
    for row in model.word_topic_matrix:
        order = sorted(range(len(row)), key=lambda j: (-row[j], tokens[j]))
        out.append([tokens[j] for j in order[:k]])
    return out
