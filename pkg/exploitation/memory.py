"""
Key-value memories and the retrieval procedures over them.

retri: s_j = q . m_j, a = softmax(s), o = sum_i a_i c_i
chain: q_1 = c_1, q_i = c_i + o_{i-1}, o_i = retri(q_i, sentence memory)
hops:  o_w = retri(q, word memory), o_e = retri(q, external memory), q <- q + o_w + o_e
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from numkit import tensor as nk
from numkit.tensor import ContractError, Tensor


@dataclass
class KeyValueMemory:
    keys: list[Tensor] = field(default_factory=list)
    values: list[Tensor] = field(default_factory=list)
    key_dim: int | None = None
    value_dim: int | None = None

    def __post_init__(self):
        if len(self.keys) != len(self.values):
            raise ContractError(f"{len(self.keys)} keys but {len(self.values)} values")
        if self.keys:
            self.key_dim = self.key_dim or self.keys[0].shape[0]
            self.value_dim = self.value_dim or self.values[0].shape[0]
        if any(k.shape != (self.key_dim,) for k in self.keys):
            raise ContractError(f"all keys must have dim {self.key_dim}")
        if any(v.shape != (self.value_dim,) for v in self.values):
            raise ContractError(f"all values must have dim {self.value_dim}")

    def __len__(self) -> int:
        return len(self.keys)


@dataclass
class PirTrace:
    queries: list[Tensor] = field(default_factory=list)
    outputs: list[Tensor] = field(default_factory=list)
    step_weights: list[Tensor] = field(default_factory=list)

    @property
    def weights(self) -> Tensor:
        """Attention over persona sentences at the last step."""
        return self.step_weights[-1]


def build_memory(
    representations: Sequence[Tensor],
    key_mlp: Callable[[Tensor], Tensor],
    value_mlp: Callable[[Tensor], Tensor],
) -> KeyValueMemory:
    keys = [key_mlp(r) for r in representations]
    values = [value_mlp(r) for r in representations]
    return KeyValueMemory(
        keys=keys,
        values=values,
        key_dim=getattr(key_mlp, "out_dim", None),
        value_dim=getattr(value_mlp, "out_dim", None),
    )


def retrieve(q: Tensor, mem: KeyValueMemory) -> tuple[Tensor, Tensor | None]:
    """retri plus its attention weights (None for an empty memory)."""
    if mem.key_dim is not None and q.shape != (mem.key_dim,):
        raise ContractError(f"query dim {q.shape} does not match key dim {mem.key_dim}")
    if len(mem) == 0:
        return Tensor(np.zeros(mem.value_dim or q.shape[0])), None
    scores = nk.stack(mem.keys) @ q
    weights = nk.softmax(scores)
    return weights @ nk.stack(mem.values), weights


def retri(q: Tensor, mem: KeyValueMemory) -> Tensor:
    return retrieve(q, mem)[0]


def persona_information_retrieval(
    history_vectors: Sequence[Tensor],
    mem_s: KeyValueMemory,
) -> tuple[Tensor, PirTrace]:
    if len(history_vectors) == 0:
        raise ContractError("persona information retrieval needs at least one history vector")
    trace = PirTrace()
    o = None
    for c in history_vectors:
        q = c if o is None else c + o
        o, weights = retrieve(q, mem_s)
        trace.queries.append(q)
        trace.outputs.append(o)
        trace.step_weights.append(weights)
    return o, trace


def multihop(
    q0: Tensor,
    mem_w: KeyValueMemory,
    mem_e: KeyValueMemory,
    hops: int,
    trace: list | None = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Returns (o_w, o_e) of the final hop and the final query. When `trace` is a list,
    each hop appends its (word memory weights, external memory weights).
    """
    if hops < 1:
        raise ContractError(f"multihop needs at least one hop, got {hops}")
    q = q0
    for _ in range(hops):
        o_w, a_w = retrieve(q, mem_w)
        o_e, a_e = retrieve(q, mem_e)
        if o_w.shape != q.shape or o_e.shape != q.shape:
            raise ContractError(
                f"query {q.shape}, word value {o_w.shape} and external value {o_e.shape} must share one dim"
            )
        q = q + o_w + o_e
        if trace is not None:
            trace.append((a_w, a_e))
    return o_w, o_e, q
