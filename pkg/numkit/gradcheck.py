from typing import Callable, Sequence

import numpy as np

from numkit.tensor import ContractError, NonFiniteError, Tape, Tensor, as_tensor, backward


def _evaluate(fn: Callable[[], Tensor], param: Tensor, index: int) -> float:
    label = param.name or repr(param)
    try:
        value = as_tensor(fn()).item()
    except NonFiniteError as e:
        raise NonFiniteError(f"non-finite value while perturbing {label}[{index}]: {e}") from e
    if not np.isfinite(value):
        raise NonFiniteError(f"non-finite value while perturbing {label}[{index}]")
    return value


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-4,
    floor: float = 1e-8,
) -> float:
    """
    Compare reverse-mode gradients of the scalar `fn()` with central differences.

    Returns the max over every entry of every parameter of
    |analytic - numeric| / max(floor, |analytic| + |numeric|).

    Central differences carry an absolute error near eps**2 plus rounding of
    order 1e-16 * |fn| / eps, so entries whose true gradient sits below that
    level need a `floor` above the default to be compared meaningfully.
    """
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    if floor <= 0:
        raise ContractError(f"floor must be positive, got {floor}")

    with Tape() as tape:
        loss = as_tensor(fn())
    analytic = backward(loss, tape, params)

    worst = 0.0
    for param in params:
        flat = param.data.reshape(-1)
        grad = analytic[param].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = _evaluate(fn, param, i)
            flat[i] = original - eps
            minus = _evaluate(fn, param, i)
            flat[i] = original

            numeric = (plus - minus) / (2.0 * eps)
            denom = max(floor, abs(grad[i]) + abs(numeric))
            worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
