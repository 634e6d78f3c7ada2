"""Adam optimizer with global-norm gradient clipping.

Moments follow the standard bias-corrected update:

    m <- b1*m + (1-b1)*g        m_hat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2      v_hat = v / (1 - b2^t)
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)

Gradients are clipped jointly (one global norm over all parameters)
before the moment updates.  A NaN or Inf gradient aborts the step with
the offending parameter's name and the current step index.
"""

from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

from .autodiff import Tensor

__all__ = ["Adam", "OptimizerError", "clip_global_norm"]


class OptimizerError(RuntimeError):
    """Raised when a gradient is non-finite at step time."""


def clip_global_norm(grads: Dict[Tensor, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip global norm.
    """
    total_sq = 0.0
    for g in grads.values():
        total_sq += float((g * g).sum())
    norm = float(np.sqrt(total_sq))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in grads:
            grads[p] = grads[p] * scale
    return norm


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: float = 5.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self._m = {id(p): np.zeros_like(p.data) for p in self.params}
        self._v = {id(p): np.zeros_like(p.data) for p in self.params}

    def step(self, grads: Dict[Tensor, np.ndarray]) -> None:
        """Apply one update from a {param: gradient} map (see autodiff.backward)."""
        for p in self.params:
            g = grads.get(p)
            if g is not None and not np.all(np.isfinite(g)):
                raise OptimizerError(
                    f"non-finite gradient for parameter '{p.name}' at step {self.t + 1}")
        if self.clip_norm > 0:
            clip_global_norm(grads, self.clip_norm)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            g = grads.get(p)
            if g is None:
                continue
            m = self._m[id(p)]
            v = self._v[id(p)]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
