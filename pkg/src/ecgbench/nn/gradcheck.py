"""Central finite-difference verification of analytic layer gradients."""

from __future__ import annotations

import numpy as np

__all__ = ["grad_check"]


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def grad_check(layer, x: np.ndarray, eps: float = 1e-5, rng=None,
               training: bool = False) -> float:
    """Max relative error between analytic and numeric gradients.

    The scalar objective is sum(forward(x) * R) for a fixed random projection
    R; analytic gradients come from one backward pass, numeric ones from
    central differences in double precision over every input element and every
    parameter element.  Pass ``training=True`` for layers whose training-mode
    path is the one of interest (batch norm); stochastic layers are not
    checkable this way.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64)

    def loss_fn() -> float:
        return float(np.sum(layer.forward(x, training=training) * proj))

    out = layer.forward(x, training=training)
    proj = rng.standard_normal(out.shape)
    dx = layer.backward(proj.astype(np.float64))
    analytic = {"__input__": dx, **layer.grads()}

    worst = 0.0
    for name, grad in analytic.items():
        target = x if name == "__input__" else layer.params()[name]
        flat_t = target.reshape(-1)
        flat_g = np.asarray(grad, dtype=np.float64).reshape(-1)
        for idx in range(flat_t.size):
            orig = flat_t[idx]
            flat_t[idx] = orig + eps
            plus = loss_fn()
            flat_t[idx] = orig - eps
            minus = loss_fn()
            flat_t[idx] = orig
            numeric = (plus - minus) / (2.0 * eps)
            worst = max(worst, _rel_err(float(flat_g[idx]), numeric))
    return worst
