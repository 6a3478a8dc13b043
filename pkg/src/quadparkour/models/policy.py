"""Actor-critic with elevation and proprioception-history encoders.

Layout: a conv stack compresses the egocentric elevation map to a 32-vector,
a linear reduction plus temporal conv stack compresses the last ten
proprioception frames to a 20-vector, and both codes are concatenated with
the current 51-D proprioception to feed twin MLPs (actor mean, critic value).
The action distribution is an isotropic Gaussian with one shared scalar
log-std, capped at std = 1 after every update unless the cap is disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numerics import (
    DimensionError,
    Tensor,
    concat,
    conv1d,
    conv2d,
    elu,
    exp,
    get_default_dtype,
    matmul,
    reshape,
    swap_last_axes,
    tensor,
    tsum,
)

LOG_2PI = math.log(2.0 * math.pi)


def _conv2d_out(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out <= 0:
        raise DimensionError(f"conv output collapsed: size {size}, kernel {kernel}")
    return out


@dataclass(frozen=True)
class NetworkShape:
    """Every width/kernel choice in one place; `miniature` shrinks all of
    them while keeping the wiring identical for finite-difference tests."""

    proprio_dim: int = 51
    n_actions: int = 12
    elev_shape: tuple = (34, 31)
    elev_conv: tuple = ((16, 3, 2, 1), (32, 3, 2, 1))   # (channels, kernel, stride, pad)
    elev_code: int = 32
    history_len: int = 10
    hist_reduce: int = 30
    hist_conv: tuple = ((16, 3, 2), (16, 3, 2))         # (channels, width, stride)
    hist_code: int = 20
    hidden: tuple = (512, 256, 128)

    @property
    def actor_input(self) -> int:
        return self.proprio_dim + self.elev_code + self.hist_code

    @staticmethod
    def miniature() -> "NetworkShape":
        return NetworkShape(
            proprio_dim=5, n_actions=3, elev_shape=(6, 5),
            elev_conv=((4, 3, 2, 1), (4, 3, 2, 1)), elev_code=4,
            history_len=3, hist_reduce=3, hist_conv=((4, 2, 2),),
            hist_code=3, hidden=(8, 8, 8))


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray((gain * q[:rows, :cols]), dtype=get_default_dtype())


class Policy:
    """Parameter container plus forward passes; all parameters live in a
    name -> Tensor dict so optimizers and checkpoints can address them."""

    def __init__(self, shape: NetworkShape | None = None, seed: int = 0,
                 std_cap_enabled: bool = True):
        self.shape = shape or NetworkShape()
        self.std_cap_enabled = std_cap_enabled
        rng = np.random.default_rng(seed)
        s = self.shape
        dt = get_default_dtype()
        p: dict[str, Tensor] = {}

        def lin(name, n_in, n_out, gain=1.0):
            p[f"{name}.w"] = Tensor(_orthogonal(rng, n_in, n_out, gain),
                                    requires_grad=True)
            p[f"{name}.b"] = Tensor(np.zeros(n_out, dtype=dt), requires_grad=True)

        c_in, (h, w) = 1, s.elev_shape
        for i, (ch, k, st, pad) in enumerate(s.elev_conv):
            kern = _orthogonal(rng, ch, c_in * k * k, 1.0).reshape(ch, c_in, k, k)
            p[f"elev.conv{i}.w"] = Tensor(kern, requires_grad=True)
            p[f"elev.conv{i}.b"] = Tensor(np.zeros(ch, dtype=dt), requires_grad=True)
            h, w = _conv2d_out(h, k, st, pad), _conv2d_out(w, k, st, pad)
            c_in = ch
        self._elev_flat = c_in * h * w
        lin("elev.proj", self._elev_flat, s.elev_code)

        lin("hist.reduce", s.proprio_dim, s.hist_reduce)
        c_in, t_len = s.hist_reduce, s.history_len
        for i, (ch, width, st) in enumerate(s.hist_conv):
            kern = _orthogonal(rng, ch, c_in * width, 1.0).reshape(ch, c_in, width)
            p[f"hist.conv{i}.w"] = Tensor(kern, requires_grad=True)
            p[f"hist.conv{i}.b"] = Tensor(np.zeros(ch, dtype=dt), requires_grad=True)
            t_len = _conv2d_out(t_len, width, st, 0)
            c_in = ch
        self._hist_flat = c_in * t_len
        lin("hist.proj", self._hist_flat, s.hist_code)

        dims = (s.actor_input,) + s.hidden
        for i in range(len(s.hidden)):
            lin(f"actor.{i}", dims[i], dims[i + 1])
            lin(f"critic.{i}", dims[i], dims[i + 1])
        lin("actor.out", dims[-1], s.n_actions, gain=0.01)
        lin("critic.out", dims[-1], 1, gain=0.01)

        p["log_std"] = Tensor(np.asarray(math.log(0.5), dtype=dt),
                              requires_grad=True)
        self.params = p

    # ------------------------------------------------------------- helpers
    def _t(self, x) -> Tensor:
        return x if isinstance(x, Tensor) else tensor(np.asarray(x))

    @property
    def log_std(self) -> Tensor:
        return self.params["log_std"]

    @property
    def std(self) -> float:
        return float(np.exp(self.params["log_std"].data))

    def clamp_std(self) -> None:
        """Cap std at 1.0 (log_std at 0); a no-op when the cap is ablated."""
        if self.std_cap_enabled:
            p = self.params["log_std"]
            p.data = np.minimum(p.data, np.asarray(0.0, dtype=p.data.dtype))

    # ------------------------------------------------------------ encoders
    def encode_elevation(self, maps) -> Tensor:
        t = self._t(maps)
        single = t.data.ndim == 2
        if t.data.shape[-2:] != self.shape.elev_shape:
            raise DimensionError(
                f"elevation map must be {self.shape.elev_shape}, got {t.data.shape}")
        x = reshape(t, (-1, 1) + self.shape.elev_shape)
        for i, (_, _, st, pad) in enumerate(self.shape.elev_conv):
            x = elu(conv2d(x, self.params[f"elev.conv{i}.w"], stride=st,
                           padding=pad, bias=self.params[f"elev.conv{i}.b"]))
        x = reshape(x, (-1, self._elev_flat))
        code = matmul(x, self.params["elev.proj.w"]) + self.params["elev.proj.b"]
        return reshape(code, (self.shape.elev_code,)) if single else code

    def encode_history(self, history) -> Tensor:
        t = self._t(history)
        single = t.data.ndim == 2
        want = (self.shape.history_len, self.shape.proprio_dim)
        if t.data.shape[-2:] != want:
            raise DimensionError(f"history must be {want}, got {t.data.shape}")
        x = reshape(t, (-1,) + want)
        x = matmul(x, self.params["hist.reduce.w"]) + self.params["hist.reduce.b"]
        x = swap_last_axes(x)                       # (B, reduced, time)
        for i, (_, _, st) in enumerate(self.shape.hist_conv):
            x = elu(conv1d(x, self.params[f"hist.conv{i}.w"], stride=st,
                           bias=self.params[f"hist.conv{i}.b"]))
        x = reshape(x, (-1, self._hist_flat))
        code = matmul(x, self.params["hist.proj.w"]) + self.params["hist.proj.b"]
        return reshape(code, (self.shape.hist_code,)) if single else code

    # -------------------------------------------------------------- heads
    def _mlp(self, x: Tensor, prefix: str) -> Tensor:
        for i in range(len(self.shape.hidden)):
            x = elu(matmul(x, self.params[f"{prefix}.{i}.w"])
                    + self.params[f"{prefix}.{i}.b"])
        return matmul(x, self.params[f"{prefix}.out.w"]) + self.params[f"{prefix}.out.b"]

    def _joint_input(self, proprio, elev_code, hist_code) -> tuple[Tensor, bool]:
        pt, et, ht = self._t(proprio), self._t(elev_code), self._t(hist_code)
        single = pt.data.ndim == 1
        if single:
            pt, et, ht = (reshape(v, (1, -1)) for v in (pt, et, ht))
        x = concat([pt, et, ht], axis=1)
        if x.data.shape[1] != self.shape.actor_input:
            raise DimensionError(
                f"actor input must be {self.shape.actor_input}, got {x.data.shape[1]}")
        return x, single

    def action_mean(self, proprio, elev_code, hist_code) -> Tensor:
        x, single = self._joint_input(proprio, elev_code, hist_code)
        mean = self._mlp(x, "actor")
        return reshape(mean, (self.shape.n_actions,)) if single else mean

    def act(self, proprio, elev_code, hist_code, stochastic: bool = True,
            rng: np.random.Generator | None = None):
        """Sample (or take the mean of) the action distribution.

        Returns plain arrays; use `evaluate_actions` for differentiable
        log-probabilities during updates.
        """
        mean = self.action_mean(proprio, elev_code, hist_code).data
        std = self.std
        if stochastic:
            if rng is None:
                raise ValueError("stochastic sampling needs an rng")
            action = mean + std * rng.standard_normal(mean.shape)
        else:
            action = mean.copy()
        n = self.shape.n_actions
        z2 = np.sum(((action - mean) / std) ** 2, axis=-1)
        log_prob = -0.5 * z2 - n * math.log(std) - 0.5 * n * LOG_2PI
        return action, log_prob

    def value(self, proprio, elev_code, hist_code):
        x, single = self._joint_input(proprio, elev_code, hist_code)
        v = self._mlp(x, "critic")
        return reshape(v, ()) if single else reshape(v, (-1,))

    def evaluate_actions(self, proprio, elev_map, history, actions):
        """Differentiable (log_prob, entropy, value) for a minibatch.

        Gradients flow into both encoders from both heads, matching the
        shared-encoder design.
        """
        elev_code = self.encode_elevation(elev_map)
        hist_code = self.encode_history(history)
        x, _ = self._joint_input(proprio, elev_code, hist_code)
        mean = self._mlp(x, "actor")
        v = reshape(self._mlp(x, "critic"), (-1,))

        log_std = self.params["log_std"]
        std = exp(log_std)
        z = (self._t(np.asarray(actions)) - mean) / std
        n = self.shape.n_actions
        log_prob = (tsum(z * z, axis=1) * -0.5) - (log_std * n) - (0.5 * n * LOG_2PI)
        entropy = log_std * n + 0.5 * n * (LOG_2PI + 1.0)
        return log_prob, entropy, v
