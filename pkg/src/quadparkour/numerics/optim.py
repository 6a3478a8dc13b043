"""First-order optimizers over named parameter tensors."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Adam with bias correction, or plain SGD when mode='sgd'.

    Updates are skipped entirely (and counted) when any parameter gradient
    contains a non-finite value, so one bad minibatch cannot poison the
    moment estimates.
    """

    def __init__(self, params: dict[str, Tensor], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8, mode: str = "adam"):
        if mode not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer mode {mode!r}")
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.mode = mode
        self.t = 0
        self.skipped_updates = 0
        self._m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> bool:
        """Apply one update. Returns False if skipped due to non-finite grads."""
        lr = self.lr if lr is None else lr
        grads = {}
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                self.skipped_updates += 1
                return False
            grads[k] = g
        if self.mode == "sgd":
            for k, p in self.params.items():
                p.data = p.data - lr * grads[k]
            return True
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            m = self._m[k] = self.beta1 * self._m[k] + (1.0 - self.beta1) * g
            v = self._v[k] = self.beta2 * self._v[k] + (1.0 - self.beta2) * (g * g)
            p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return True

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "skipped_updates": self.skipped_updates,
            "m": {k: v.copy() for k, v in self._m.items()},
            "v": {k: v.copy() for k, v in self._v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.skipped_updates = int(state.get("skipped_updates", 0))
        for k in self.params:
            self._m[k] = np.asarray(state["m"][k]).copy()
            self._v[k] = np.asarray(state["v"][k]).copy()
