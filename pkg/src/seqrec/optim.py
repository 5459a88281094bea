"""Named parameter collections and the Adam optimizer."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor


class ParamStore:
    """Ordered name -> Tensor mapping for one trainable parameter set."""

    def __init__(self, named: dict[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = dict(named or {})

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = tensor
        return tensor

    def update(self, named: dict[str, Tensor]) -> None:
        for name, t in named.items():
            self.add(name, t)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def fill_missing_grads(self) -> None:
        """Give zero gradients to params a loss did not touch this step."""
        for t in self._params.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            if name not in values:
                raise KeyError(f"missing value for parameter {name!r}")
            src = values[name]
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name!r}: {src.shape} vs {t.data.shape}")
            t.data = src.astype(t.data.dtype, copy=True)


class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, params: ParamStore, lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in self.m:
            out[f"m.{name}"] = self.m[name]
            out[f"v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int) -> None:
        for name in self.m:
            self.m[name] = arrays[f"m.{name}"].astype(self.m[name].dtype, copy=True)
            self.v[name] = arrays[f"v.{name}"].astype(self.v[name].dtype, copy=True)
        self.step_count = int(step_count)


def adam_step(params: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update; gradients are consumed (reset to None)."""
    missing = [name for name, t in params.items() if t.grad is None]
    if missing:
        raise ValueError(f"uninitialized gradient for parameters: {missing[:5]}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = None
