"""GRU cell and the bidirectional encoder built from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from numkit import tensor as nk
from numkit.params import ParamStore
from numkit.tensor import ContractError, Tensor


@dataclass
class GruParams:
    # input-to-hidden (D x H)
    w_z: Tensor
    w_r: Tensor
    w_h: Tensor
    # hidden-to-hidden (H x H)
    u_z: Tensor
    u_r: Tensor
    u_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    def __post_init__(self):
        d, h = self.w_z.shape
        for w in (self.w_r, self.w_h):
            if w.shape != (d, h):
                raise ContractError(f"input weights must all be {(d, h)}, got {w.shape}")
        for u in (self.u_z, self.u_r, self.u_h):
            if u.shape != (h, h):
                raise ContractError(f"hidden weights must all be {(h, h)}, got {u.shape}")
        for b in (self.b_z, self.b_r, self.b_h):
            if b.shape != (h,):
                raise ContractError(f"biases must all be {(h,)}, got {b.shape}")

    @property
    def input_size(self) -> int:
        return self.w_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_z.shape[1]

    @classmethod
    def create(cls, store: ParamStore, name: str, input_size: int, hidden_size: int) -> "GruParams":
        w = {g: store.add(f"{name}.w_{g}", (input_size, hidden_size)) for g in "zrh"}
        u = {g: store.add(f"{name}.u_{g}", (hidden_size, hidden_size)) for g in "zrh"}
        b = {g: store.add(f"{name}.b_{g}", (hidden_size,), init="zeros") for g in "zrh"}
        return cls(w["z"], w["r"], w["h"], u["z"], u["r"], u["h"], b["z"], b["r"], b["h"])


def gru_cell(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    if x.shape != (p.input_size,):
        raise ContractError(f"gru_cell expects input of dim {p.input_size}, got {x.shape}")
    if h.shape != (p.hidden_size,):
        raise ContractError(f"gru_cell expects hidden of dim {p.hidden_size}, got {h.shape}")

    z = nk.sigmoid(x @ p.w_z + h @ p.u_z + p.b_z)
    r = nk.sigmoid(x @ p.w_r + h @ p.u_r + p.b_r)
    candidate = nk.tanh(x @ p.w_h + (r * h) @ p.u_h + p.b_h)
    return (1.0 - z) * h + z * candidate


def run_gru(seq: Sequence[Tensor], p: GruParams, h0: Tensor | None = None) -> list[Tensor]:
    h = h0 if h0 is not None else Tensor(np.zeros(p.hidden_size))
    states = []
    for x in seq:
        h = gru_cell(x, h, p)
        states.append(h)
    return states


def bigru_encode(seq: Sequence[Tensor], fwd: GruParams, bwd: GruParams) -> tuple[list[Tensor], Tensor]:
    """
    Per-step outputs are [forward_j ; backward_j] (dim 2H); the final state is
    [forward_last ; backward_last], where backward_last is the state after reading
    the sequence right to left, i.e. the one aligned with position 0.
    """
    if len(seq) == 0:
        raise ContractError("bigru_encode needs a non-empty sequence")
    forward = run_gru(seq, fwd)
    backward = run_gru(list(reversed(seq)), bwd)[::-1]
    steps = [nk.concat([f, b]) for f, b in zip(forward, backward)]
    final = nk.concat([forward[-1], backward[0]])
    return steps, final
