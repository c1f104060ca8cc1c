"""Adam optimizer with per-parameter state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import UsageError


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=np.zeros_like(param.values),
            v=np.zeros_like(param.values),
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(param: Tensor, state: AdamState) -> None:
    """One bias-corrected Adam update in place; clears the gradient."""
    if param.grad is None:
        raise UsageError("adam_step: parameter has no gradient")
    if state.m.shape != param.values.shape:
        raise UsageError(f"adam_step: state shape {state.m.shape} does not match param {param.values.shape}")
    g = param.grad
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    param.values = param.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    param.grad = None


@dataclass
class Adam:
    """Drives `adam_step` over a named parameter dict."""

    params: dict[str, Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict[str, AdamState] = field(init=False)

    def __post_init__(self):
        self.states = {
            name: AdamState.for_param(p, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
            for name, p in self.params.items()
        }

    def step(self):
        for name, p in self.params.items():
            adam_step(p, self.states[name])

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
