"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .core import Tensor


class Adam:
    """Standard Adam over a dict of named parameters.

    step() consumes gradients: it raises if any parameter is missing one and
    resets all grads to None afterwards.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.second_moment = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self):
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"adam step: parameter '{name}' has no gradient")
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            m = self.first_moment[name]
            v = self.second_moment[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.grad = None

    def state_dict(self) -> dict:
        return {
            "step_count": self.step_count,
            "first_moment": {k: v.copy() for k, v in self.first_moment.items()},
            "second_moment": {k: v.copy() for k, v in self.second_moment.items()},
        }

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step_count"])
        for k in self.first_moment:
            self.first_moment[k][...] = state["first_moment"][k]
            self.second_moment[k][...] = state["second_moment"][k]
