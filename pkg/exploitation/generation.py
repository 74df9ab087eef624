"""
Greedy and beam-search decoding.

Beam hypotheses are ranked by the sum of token log-probabilities (no length
normalisation); ties go to the lower token index. A hypothesis that emits <eos>
is retired and competes with the live ones on the same score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from exploitation.losses import PROB_FLOOR
from exploitation.net import Context, DecoderState, EncodedExample, PeeModel, StepOutput, decode_step, encode_context
from indexing.vocab import EOS_ID, SOS_ID
from numkit.tensor import ContractError

GREEDY, BEAM = "greedy", "beam"


@dataclass
class Hypothesis:
    tokens: list[int]
    score: float
    state: DecoderState
    steps: list[dict] = field(default_factory=list)

    @property
    def rank_key(self):
        return (-self.score, self.tokens)


def _step_record(out: StepOutput, token: int, model: PeeModel) -> dict:
    a_w, a_e = out.memory_weights[-1]
    return {
        "token": model.vocab.token(token),
        "history_attention": out.attention.data.tolist(),
        "persona_word_weights": None if a_w is None else a_w.data.tolist(),
        "external_word_weights": None if a_e is None else a_e.data.tolist(),
    }


def _step(context: Context, hyp: Hypothesis, model: PeeModel) -> StepOutput:
    prev = hyp.tokens[-1] if hyp.tokens else SOS_ID
    return decode_step(prev, hyp.state, context.mem_w, context.mem_e, context.word_states, model, model.config.hops)


def _greedy(context: Context, model: PeeModel, max_len: int) -> Hypothesis:
    hyp = Hypothesis(tokens=[], score=0.0, state=context.state)
    for _ in range(max_len):
        out = _step(context, hyp, model)
        probs = out.probs.data
        token = int(np.argmax(probs))
        hyp.steps.append(_step_record(out, token, model))
        hyp.tokens.append(token)
        hyp.score += float(np.log(max(probs[token], PROB_FLOOR)))
        hyp.state = out.state
        if token == EOS_ID:
            break
    return hyp


def _beam(context: Context, model: PeeModel, beam_width: int, max_len: int) -> Hypothesis:
    live = [Hypothesis(tokens=[], score=0.0, state=context.state)]
    finished: list[Hypothesis] = []

    for _ in range(max_len):
        candidates = []
        for hyp in live:
            out = _step(context, hyp, model)
            log_probs = np.log(np.maximum(out.probs.data, PROB_FLOOR))
            # best first, lower index on ties
            best = np.lexsort((np.arange(len(log_probs)), -log_probs))[:beam_width]
            for token in best:
                token = int(token)
                candidates.append(Hypothesis(
                    tokens=hyp.tokens + [token],
                    score=hyp.score + float(log_probs[token]),
                    state=out.state,
                    steps=hyp.steps + [_step_record(out, token, model)],
                ))

        candidates.sort(key=lambda h: h.rank_key)
        live = []
        for hyp in candidates[:beam_width]:
            (finished if hyp.tokens[-1] == EOS_ID else live).append(hyp)

        if not live:
            break
        # scores never increase, so a retired hypothesis that beats every live one is final
        if finished and max(h.score for h in finished) >= max(h.score for h in live):
            break

    return min(finished + live, key=lambda h: h.rank_key)


def generate(
    ex: EncodedExample,
    model: PeeModel,
    mode: str = BEAM,
    beam_width: int = 2,
    max_len: int = 30,
    diagnostics: dict | None = None,
) -> list[int]:
    """
    Token ids of the response, ending with <eos> when one was produced. When
    `diagnostics` is a dict it receives the last-step persona sentence weights and
    one record per emitted token.
    """
    if max_len < 1:
        raise ContractError(f"max_len must be at least 1, got {max_len}")
    context = encode_context(ex, model)
    if mode == GREEDY:
        best = _greedy(context, model, max_len)
    elif mode == BEAM:
        if beam_width < 1:
            raise ContractError(f"beam_width must be at least 1, got {beam_width}")
        best = _beam(context, model, beam_width, max_len)
    else:
        raise ContractError(f"unknown decoding mode {mode!r}")

    if diagnostics is not None:
        diagnostics["persona_sentence_weights"] = context.pir.weights.data.tolist()
        diagnostics["steps"] = best.steps
    return best.tokens
