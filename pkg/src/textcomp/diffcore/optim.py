"""Adam with bias correction.

beta1 defaults to 0.5 (the training recipe this artifact reproduces uses
that value); beta2/eps are the usual 0.999/1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One update over named parameters; `grads` maps name -> ndarray.

    Parameter tensors get fresh data arrays (their old buffers are never
    written through), so snapshots taken before the step stay valid.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError(f"adam_step: grad shape mismatch for {name!r}")
        dt = p.data.dtype
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        g = g.astype(dt, copy=False)
        m *= dt.type(b1)
        m += dt.type(1 - b1) * g
        v *= dt.type(b2)
        v += dt.type(1 - b2) * (g * g)
        mhat = m / dt.type(c1)
        vhat = v / dt.type(c2)
        p.data = p.data - dt.type(state.lr) * mhat / (np.sqrt(vhat) + dt.type(state.eps))
