"""Adam with bias correction, plus global-norm gradient clipping."""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from numkit.tensor import ContractError, Tensor


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint L2 norm is at most `max_norm`."""
    total = float(np.sqrt(np.sum([np.sum(g * g) for g in grads.values()]))) if grads else 0.0
    if total <= max_norm or total == 0.0:
        return dict(grads), total
    scale = max_norm / total
    return {name: g * scale for name, g in grads.items()}, total


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[Mapping[str, Tensor], AdamState]:
    # Parameters without an entry in `grads` are treated as having zero gradient.
    for name, p in params.items():
        g = grads.get(name)
        if g is not None and g.shape != p.shape:
            raise ContractError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        m = state.m.get(name)
        if m is not None and m.shape != p.shape:
            raise ContractError(f"moment for {name} has shape {m.shape}, parameter has {p.shape}")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step

    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)

        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)

        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    return params, state
