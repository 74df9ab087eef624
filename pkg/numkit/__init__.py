from numkit.gradcheck import grad_check
from numkit.optim import AdamState, adam_step, clip_grad_norm
from numkit.params import Affine, Mlp, ParamStore
from numkit.rnn import GruParams, bigru_encode, gru_cell, run_gru
from numkit.tensor import (
    ContractError,
    NonFiniteError,
    Tape,
    Tensor,
    allow_non_finite,
    as_tensor,
    backward,
)

__all__ = [
    "Affine",
    "AdamState",
    "ContractError",
    "GruParams",
    "Mlp",
    "NonFiniteError",
    "ParamStore",
    "Tape",
    "Tensor",
    "adam_step",
    "allow_non_finite",
    "as_tensor",
    "backward",
    "bigru_encode",
    "clip_grad_norm",
    "grad_check",
    "gru_cell",
    "run_gru",
]
