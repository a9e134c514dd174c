"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pixelvq.autodiff.tensor import Tensor
from pixelvq.errors import DimensionError


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], learning_rate: float = 1e-4, **kw) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p.data) for p in params],
            second_moment=[np.zeros_like(p.data) for p in params],
            **kw,
        )


def adam_step(params: Sequence[Tensor], state: AdamState) -> AdamState:
    """Apply one Adam update in place using each parameter's ``.grad``.

    Parameters without a gradient are treated as having a zero gradient.
    """
    if len(params) != len(state.first_moment):
        raise DimensionError(
            f"adam: state tracks {len(state.first_moment)} tensors but {len(params)} were given"
        )
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, m, v in zip(params, state.first_moment, state.second_moment):
        if m.shape != p.shape:
            raise DimensionError(f"adam: moment shape {m.shape} does not match parameter {p.shape}")
        if p.grad is None:
            g = np.zeros_like(p.data)
        else:
            g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (state.learning_rate / c1) * m / (np.sqrt(v / c2) + state.epsilon)
        p.data -= update.astype(p.dtype, copy=False)
    return state


class Adam:
    """Stateful wrapper around :func:`adam_step`."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, learning_rate=lr, beta1=betas[0],
                                          beta2=betas[1], epsilon=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state)
