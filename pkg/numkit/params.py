"""Named parameter registry and the two layer shapes the models are assembled from."""

from __future__ import annotations

from typing import Callable, Iterator, Sequence

import numpy as np

from numkit import tensor as nk
from numkit.tensor import ContractError, Tensor


class ParamStore:
    """Ordered name -> Tensor map. All initial values come from one seeded generator."""

    def __init__(self, seed: int = 0, scale: float = 0.1):
        self.rng = np.random.default_rng(seed)
        self.scale = scale
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: Sequence[int], init: str = "uniform") -> Tensor:
        if name in self._params:
            raise ContractError(f"parameter {name!r} already registered")
        shape = tuple(int(d) for d in shape)
        if init == "uniform":
            data = self.rng.uniform(-self.scale, self.scale, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        else:
            raise ContractError(f"unknown init {init!r}")
        p = Tensor(data, requires_grad=True, name=name)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ContractError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, values in state.items():
            p = self._params[name]
            if values.shape != p.shape:
                raise ContractError(f"{name}: stored shape {values.shape} != {p.shape}")
            p.data[...] = values


class Affine:
    """x @ W + b. Accepts a single vector or a batch of row vectors."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int, bias: bool = True):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = store.add(f"{name}.weight", (in_dim, out_dim))
        self.bias = store.add(f"{name}.bias", (out_dim,), init="zeros") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ContractError(f"affine expects input dim {self.in_dim}, got {x.shape[-1]}")
        out = nk.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class Mlp:
    """Stack of affine layers with `activation` between them (none after the last)."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        sizes: Sequence[int],
        activation: Callable[[Tensor], Tensor] = nk.tanh,
    ):
        if len(sizes) < 2:
            raise ContractError("an MLP needs at least input and output sizes")
        self.layers = [
            Affine(store, f"{name}.{i}", d_in, d_out)
            for i, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]
        self.activation = activation

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activation(x)
        return x
