"""Adam optimizer over named parameter arrays.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from lcqhnn.errors import NumericalError, ShapeError

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """Moment accumulators and step counter.

    Attributes:
        beta1: Decay of the first-moment average
        beta2: Decay of the second-moment average
        eps: Denominator stabilizer
        step: Number of updates applied so far
        m: First moments, one array per parameter name
        v: Second moments, one array per parameter name
    """
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_step(params: Params, grads: Params, state: AdamState, lr: float) -> Tuple[Params, AdamState]:
    """Apply one bias-corrected Adam update.

    The input arrays are not modified; new arrays are returned. The state's
    accumulators and step counter are advanced in place.

    Args:
        params: Parameter arrays by name
        grads: Gradients with the same names and shapes
        state: Optimizer state (created lazily per name)
        lr: Learning rate

    Returns:
        (updated parameters, state)

    Raises:
        ShapeError: If names or shapes differ
        NumericalError: If a gradient is not finite
    """
    if set(params) != set(grads):
        raise ShapeError(f"gradient names {sorted(grads)} do not match parameters {sorted(params)}")
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"gradient for {name} has shape {np.shape(g)}, parameter has {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    updated: Params = {}
    for name in params:
        p, g = params[name], grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        updated[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated, state
