"""Teacher-forced joint training with periodic validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from tqdm import tqdm

from exploitation import losses as L
from exploitation.losses import LossConfig
from exploitation.net import EncodedExample, PeeModel, teacher_forced
from exploration.topic import TrainingDivergedError as TopicDivergedError
from indexing.vocab import EOS_ID
from numkit import tensor as nk
from numkit.optim import AdamState, adam_step, clip_grad_norm
from numkit.tensor import NonFiniteError, Tape, Tensor

logger = logging.getLogger(__name__)

COMPONENTS = ("joint", "nll", "p_match", "p_bows")


class TrainingDivergedError(TopicDivergedError):
    def __init__(self, message: str, batch_id: int, components: dict[str, float], example: int | None = None):
        where = f"batch {batch_id}" if example is None else f"batch {batch_id}, example {example}"
        super().__init__(f"{where}: {message}; components={components}")
        self.batch_id = batch_id
        self.example = example
        self.components = components


@dataclass
class ExampleLoss:
    joint: Tensor
    nll: Tensor
    p_match: Tensor
    p_bows: Tensor
    persona_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    persona_labels: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def floats(self) -> dict[str, float]:
        return {name: getattr(self, name).item() for name in COMPONENTS}


def persona_word_set(ex: EncodedExample, use_expansion: bool) -> set[str]:
    words = {tok for sent in ex.source.persona_sentences for tok in sent}
    if use_expansion:
        words |= set(ex.expansion)
    return words


def example_loss(ex: EncodedExample, model: PeeModel, cfg: LossConfig) -> ExampleLoss:
    context, steps = teacher_forced(ex, model)
    source = ex.source
    personas = [s for s in source.persona_sentences if s]

    nll = L.nll_loss([s.probs for s in steps], list(ex.response) + [EOS_ID])
    labels = L.p_match_targets(personas, source.response, cfg.theta_a)
    p_match = L.p_match_loss(context.pir.weights, labels)
    b = L.p_bows_targets(source.response, persona_word_set(ex, model.config.use_expansion), model.vocab, cfg.lam)
    p_bows = L.p_bows_loss([s.logits for s in steps], b)

    return ExampleLoss(
        joint=L.joint_loss(nll, p_match, p_bows, cfg.gamma1, cfg.gamma2),
        nll=nll,
        p_match=p_match,
        p_bows=p_bows,
        persona_weights=context.pir.weights.data.copy(),
        persona_labels=labels,
    )


def diverged_components(ex: EncodedExample, model: PeeModel, cfg: LossConfig) -> dict[str, float]:
    """Loss components of one example with NaN and Inf left in place."""
    with nk.allow_non_finite():
        return example_loss(ex, model, cfg).floats()


def evaluate_losses(model: PeeModel, examples: Sequence[EncodedExample], cfg: LossConfig) -> dict[str, float]:
    """Mean loss components over `examples` (no tape, no parameter change)."""
    totals = dict.fromkeys(COMPONENTS, 0.0)
    for ex in examples:
        for name, value in example_loss(ex, model, cfg).floats().items():
            totals[name] += value
    return {name: value / max(1, len(examples)) for name, value in totals.items()}


def labeled_persona_mass(model: PeeModel, examples: Sequence[EncodedExample], cfg: LossConfig) -> float:
    """Mean last-step PIR weight placed on the Jaccard-labeled persona sentences."""
    masses = []
    for ex in examples:
        result = example_loss(ex, model, cfg)
        if result.persona_labels.any():
            masses.append(float(np.dot(result.persona_weights, result.persona_labels)))
    return float(np.mean(masses)) if masses else 0.0


def train(
    model: PeeModel,
    train_set: Sequence[EncodedExample],
    cfg: LossConfig,
    valid_set: Sequence[EncodedExample] = (),
    seed: int = 0,
    progress: bool = False,
    on_improved: Callable[[int, dict], None] | None = None,
) -> list[dict]:
    """
    Runs `model.config.epochs` epochs of Adam on the mean joint loss of each batch.
    Returns one record per epoch. `on_improved(epoch, record)` fires whenever the
    validation joint loss (training loss when there is no validation set) improves.
    """
    mc = model.config
    rng = np.random.default_rng(seed)
    params = dict(model.store.items())
    state = AdamState(lr=mc.lr)
    trace = []
    best = float("inf")

    for epoch in range(1, mc.epochs + 1):
        order = rng.permutation(len(train_set))
        batches = [order[i:i + mc.batch_size] for i in range(0, len(order), mc.batch_size)]
        totals = dict.fromkeys(COMPONENTS, 0.0)

        for batch_id, idx in enumerate(tqdm(batches, desc=f"train epoch {epoch}", disable=not progress)):
            seen: dict[str, float] = dict.fromkeys(COMPONENTS, 0.0)
            current = int(idx[0])
            try:
                with Tape() as tape:
                    results = []
                    for i in idx:
                        current = int(i)
                        result = example_loss(train_set[i], model, cfg)
                        results.append(result)
                        for name, value in result.floats().items():
                            seen[name] += value
                    loss = nk.mean(nk.stack([r.joint for r in results]))
            except NonFiniteError as e:
                components = diverged_components(train_set[current], model, cfg)
                raise TrainingDivergedError(str(e), batch_id, components, example=current) from e

            grads = nk.backward(loss, tape, model.store.tensors())
            named, norm = clip_grad_norm({p.name: g for p, g in grads.items()}, mc.clip_norm)
            if not np.isfinite(norm):
                raise TrainingDivergedError("gradient norm is not finite", batch_id, seen)
            adam_step(params, named, state)
            for name in COMPONENTS:
                totals[name] += seen[name]

        record = {"epoch": epoch, **{name: totals[name] / len(train_set) for name in COMPONENTS}}
        if valid_set:
            valid = evaluate_losses(model, valid_set, cfg)
            record.update({f"valid_{name}": value for name, value in valid.items()})
            criterion = valid["joint"]
        else:
            criterion = record["joint"]
        trace.append(record)
        logger.info("[TRAIN] epoch %d joint=%.5f nll=%.5f p_match=%.5f p_bows=%.5f",
                    epoch, record["joint"], record["nll"], record["p_match"], record["p_bows"])

        if criterion < best:
            best = criterion
            if on_improved is not None:
                on_improved(epoch, record)

    return trace
