"""Finite-difference gradient verification (64-bit only).

Central differences with eps=1e-6 are meaningless in float32, so callers
must hand in float64 parameters.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward, tape


def finite_difference_grad(f, xs, eps: float = 1e-6):
    """Central-difference gradient of scalar f(*xs) w.r.t. each tensor in xs."""
    grads = []
    for x in xs:
        if x.dtype != np.float64:
            raise ValueError("finite differences require float64 tensors")
        g = np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(*xs).data)
            flat[i] = orig - eps
            lo = float(f(*xs).data)
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def rel_err(a, b, floor: float = 1e-8) -> float:
    """Entrywise relative error with a scale-aware floor.

    Central differences carry absolute roundoff noise of roughly
    |loss|*2^-52/eps, so entries far below the gradient's own scale are
    compared against that scale instead of their own magnitude; a floor
    of 1e-3 * max|grad| keeps real errors visible while ignoring noise.
    """
    scale = max(float(np.max(np.abs(a)), ), float(np.max(np.abs(b))))
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), max(floor, 1e-3 * scale))
    return float(np.max(np.abs(a - b) / denom))


def check_grad(f, xs, eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and finite differences.

    f builds a scalar loss from the tensors in xs; it is re-run under a
    fresh tape for the analytic side.
    """
    with tape():
        loss = f(*xs)
        gmap = backward(loss, params=xs)
    fd = finite_difference_grad(f, xs, eps)
    worst = 0.0
    for x, g_fd in zip(xs, fd):
        worst = max(worst, rel_err(gmap[id(x)], g_fd))
    return worst
