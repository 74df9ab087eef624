"""
Persona-oriented encoder-decoder.

Dimensions: E = embedding_dim, He = encoder_hidden (per direction), d = hidden.
Memory keys/values, the PIR query and the decoder state all live in R^d so the
additive query updates are well typed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from pydantic import BaseModel, ConfigDict, Field

from indexing.embeddings import EmbeddingFormatError, EmbeddingTable
from indexing.personachat import DialogueExample
from indexing.vocab import SOS_ID, UNK_ID, Vocabulary
from numkit import tensor as nk
from numkit.params import Affine, Mlp, ParamStore
from numkit.rnn import GruParams, bigru_encode, gru_cell
from numkit.tensor import ContractError, Tensor
from exploitation.memory import (
    KeyValueMemory,
    PirTrace,
    build_memory,
    multihop,
    persona_information_retrieval,
)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hidden: int = Field(512, ge=1)
    encoder_hidden: int = Field(256, ge=1)
    embedding_dim: int = Field(300, ge=1)
    attention_dim: int | None = Field(None, ge=1)
    vocab_size: int = Field(20000, gt=4)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(1e-4, gt=0)
    epochs: int = Field(20, ge=0)
    clip_norm: float = Field(5.0, gt=0)
    hops: int = Field(3, ge=1)
    beam: int = Field(2, ge=1)
    max_len: int = Field(30, ge=1)
    use_expansion: bool = True


# -----------------------------
# PARAMETER GROUPS
# -----------------------------

class PersonaEncoderParams:
    def __init__(self, store: ParamStore, cfg: ModelConfig):
        e, he, d = cfg.embedding_dim, cfg.encoder_hidden, cfg.hidden
        self.fwd = GruParams.create(store, "persona.gru_fwd", e, he)
        self.bwd = GruParams.create(store, "persona.gru_bwd", e, he)
        self.sentence_key = Mlp(store, "persona.sentence_key", (2 * he, d, d))
        self.sentence_value = Mlp(store, "persona.sentence_value", (2 * he, d, d))
        self.word_key = Mlp(store, "persona.word_key", (2 * he, d, d))
        self.word_value = Mlp(store, "persona.word_value", (2 * he, d, d))
        # extended persona words go in through their embeddings
        self.external_key = Mlp(store, "persona.external_key", (e, d, d))
        self.external_value = Mlp(store, "persona.external_value", (e, d, d))


class HistoryEncoderParams:
    def __init__(self, store: ParamStore, cfg: ModelConfig):
        e, he, d = cfg.embedding_dim, cfg.encoder_hidden, cfg.hidden
        self.word_fwd = GruParams.create(store, "history.word_fwd", e, he)
        self.word_bwd = GruParams.create(store, "history.word_bwd", e, he)
        self.utterance_fwd = GruParams.create(store, "history.utterance_fwd", 2 * he, he)
        self.utterance_bwd = GruParams.create(store, "history.utterance_bwd", 2 * he, he)
        # C_i (2He) -> memory space (d) for persona information retrieval
        self.project = Affine(store, "history.project", 2 * he, d)


class DecoderParams:
    def __init__(self, store: ParamStore, cfg: ModelConfig, vocab_size: int):
        e, he, d = cfg.embedding_dim, cfg.encoder_hidden, cfg.hidden
        a = cfg.attention_dim or d
        self.gru = GruParams.create(store, "decoder.gru", e, d)
        self.w_s = Affine(store, "decoder.attn_w_s", d, a, bias=False)
        self.w_t = Affine(store, "decoder.attn_w_t", 2 * he, a, bias=False)
        self.attn_b = store.add("decoder.attn_b", (a,), init="zeros")
        self.attn_v = store.add("decoder.attn_v", (a,))
        self.f_o = Affine(store, "decoder.f_o", 3 * d + 2 * he, vocab_size)
        self.init = Affine(store, "decoder.init", 2 * he + d, d)


class PeeModel:
    def __init__(
        self,
        vocab: Vocabulary,
        config: ModelConfig,
        seed: int = 0,
        embeddings: EmbeddingTable | None = None,
    ):
        if embeddings is not None and embeddings.dim != config.embedding_dim:
            raise EmbeddingFormatError(
                f"pretrained embeddings have dim {embeddings.dim}, config expects {config.embedding_dim}"
            )
        self.vocab = vocab
        self.config = config
        self.store = ParamStore(seed)
        self.source_embedding = self.store.add("embedding.source", (len(vocab), config.embedding_dim))
        self.target_embedding = self.store.add("embedding.target", (len(vocab), config.embedding_dim))
        if embeddings is not None:
            self.source_embedding.data[...] = embeddings.init_matrix(vocab, self.store.rng)
            self.target_embedding.data[...] = embeddings.init_matrix(vocab, self.store.rng)
        self.persona = PersonaEncoderParams(self.store, config)
        self.history = HistoryEncoderParams(self.store, config)
        self.decoder = DecoderParams(self.store, config, len(vocab))

    def embed(self, ids: Sequence[int]) -> list[Tensor]:
        return [nk.embedding(self.source_embedding, i) for i in ids]


# -----------------------------
# INPUTS
# -----------------------------

@dataclass
class EncodedExample:
    persona: list[list[int]]
    history: list[list[int]]
    response: list[int]
    external: list[int] = field(default_factory=list)
    source: DialogueExample | None = None
    expansion: list[str] = field(default_factory=list)


def encode_example(
    example: DialogueExample,
    vocab: Vocabulary,
    expansion: Sequence[str] = (),
) -> EncodedExample:
    """Token lists -> ids. Empty persona sentences are dropped, empty utterances become <unk>."""
    persona = [vocab.encode(s) for s in example.persona_sentences if s]
    if not persona:
        raise ValueError(f"conversation {example.conversation_id} has no persona tokens")
    return EncodedExample(
        persona=persona,
        history=[vocab.encode(u) or [UNK_ID] for u in example.history],
        response=vocab.encode(example.response),
        external=[vocab.index(w) for w in expansion if w in vocab],
        source=example,
        expansion=list(expansion),
    )


# -----------------------------
# ENCODERS
# -----------------------------

def encode_persona(persona_sentences: Sequence[Sequence[int]], model: PeeModel) -> tuple[KeyValueMemory, KeyValueMemory]:
    """(sentence memory, word memory): one slot per persona sentence and one per persona token."""
    if len(persona_sentences) == 0:
        raise ContractError("encode_persona needs at least one persona sentence")
    p = model.persona
    sentence_reps, word_reps = [], []
    for ids in persona_sentences:
        steps, final = bigru_encode(model.embed(ids), p.fwd, p.bwd)
        sentence_reps.append(final)
        word_reps.extend(steps)
    mem_s = build_memory(sentence_reps, p.sentence_key, p.sentence_value)
    mem_w = build_memory(word_reps, p.word_key, p.word_value)
    return mem_s, mem_w


def encode_external(word_ids: Sequence[int], model: PeeModel) -> KeyValueMemory:
    """External memory from the extended persona words (may be empty)."""
    p = model.persona
    return build_memory(model.embed(word_ids), p.external_key, p.external_value)


def encode_history(history: Sequence[Sequence[int]], model: PeeModel) -> tuple[Tensor, list[Tensor], list[Tensor]]:
    """(e_X, [C_1..C_k], word states over every history token in order)."""
    if len(history) == 0:
        raise ContractError("encode_history needs at least one utterance")
    h = model.history
    sentence_vectors, word_states = [], []
    for ids in history:
        steps, final = bigru_encode(model.embed(ids), h.word_fwd, h.word_bwd)
        sentence_vectors.append(final)
        word_states.extend(steps)
    _, e_x = bigru_encode(sentence_vectors, h.utterance_fwd, h.utterance_bwd)
    return e_x, sentence_vectors, word_states


# -----------------------------
# DECODER
# -----------------------------

@dataclass
class DecoderState:
    hidden: Tensor
    step: int = 0


@dataclass
class StepOutput:
    probs: Tensor
    logits: Tensor
    state: DecoderState
    attention: Tensor
    memory_weights: list[tuple[Tensor | None, Tensor | None]]


def init_state(e_x: Tensor, o_k: Tensor, model: PeeModel) -> DecoderState:
    return DecoderState(hidden=model.decoder.init(nk.concat([e_x, o_k])), step=0)


def attention_weights(s_t: Tensor, word_states: Sequence[Tensor], model: PeeModel) -> Tensor:
    if len(word_states) == 0:
        raise ContractError("attention needs at least one history word state")
    dec = model.decoder
    states = nk.stack(word_states)
    energy = nk.tanh(dec.w_t(states) + dec.w_s(s_t) + dec.attn_b)
    return nk.softmax(energy @ dec.attn_v)


def attend_history(s_t: Tensor, word_states: Sequence[Tensor], model: PeeModel) -> Tensor:
    return attention_weights(s_t, word_states, model) @ nk.stack(word_states)


def decode_step(
    prev_token: int,
    state: DecoderState,
    mem_w: KeyValueMemory,
    mem_e: KeyValueMemory,
    word_states: Sequence[Tensor],
    model: PeeModel,
    hops: int,
) -> StepOutput:
    if not 0 <= prev_token < len(model.vocab):
        raise ContractError(f"token index {prev_token} outside vocabulary of {len(model.vocab)}")
    dec = model.decoder
    s_t = gru_cell(nk.embedding(model.target_embedding, prev_token), state.hidden, dec.gru)
    a = attention_weights(s_t, word_states, model)
    u_x = a @ nk.stack(word_states)
    hop_trace: list = []
    o_w, o_e, _ = multihop(s_t, mem_w, mem_e, hops, trace=hop_trace)
    logits = dec.f_o(nk.concat([s_t, u_x, o_w, o_e]))
    return StepOutput(
        probs=nk.softmax(logits),
        logits=logits,
        state=DecoderState(hidden=s_t, step=state.step + 1),
        attention=a,
        memory_weights=hop_trace,
    )


# -----------------------------
# FULL CONTEXT
# -----------------------------

@dataclass
class Context:
    mem_s: KeyValueMemory
    mem_w: KeyValueMemory
    mem_e: KeyValueMemory
    word_states: list[Tensor]
    pir: PirTrace
    state: DecoderState


def encode_context(ex: EncodedExample, model: PeeModel) -> Context:
    """Everything the decoder needs before its first step."""
    mem_s, mem_w = encode_persona(ex.persona, model)
    external = ex.external if model.config.use_expansion else []
    mem_e = encode_external(external, model)
    e_x, sentence_vectors, word_states = encode_history(ex.history, model)
    queries = [model.history.project(c) for c in sentence_vectors]
    o_k, pir = persona_information_retrieval(queries, mem_s)
    return Context(mem_s, mem_w, mem_e, word_states, pir, init_state(e_x, o_k, model))


def teacher_forced(ex: EncodedExample, model: PeeModel, context: Context | None = None) -> tuple[Context, list[StepOutput]]:
    """Decode `<sos> y_1 .. y_T` against targets `y_1 .. y_T <eos>`."""
    context = context or encode_context(ex, model)
    state = context.state
    steps = []
    for prev in [SOS_ID] + list(ex.response):
        out = decode_step(prev, state, context.mem_w, context.mem_e, context.word_states, model, model.config.hops)
        steps.append(out)
        state = out.state
    return context, steps
