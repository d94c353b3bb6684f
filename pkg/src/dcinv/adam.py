"""Adam with bias correction, over named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter dict."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam(arrays: dict[str, np.ndarray]) -> AdamState:
    return AdamState(m={k: np.zeros_like(a) for k, a in arrays.items()},
                     v={k: np.zeros_like(a) for k, a in arrays.items()})


def adam_step(arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One update in place: arrays[k] <- arrays[k] - lr * mhat / (sqrt(vhat) + eps).

    Entries of ``arrays`` are replaced with new arrays (never mutated), so
    snapshots taken before the step stay intact.
    """
    if set(arrays) != set(grads):
        raise ValueError("gradient keys do not match parameter keys")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k, g in grads.items():
        if g.shape != arrays[k].shape:
            raise ValueError(f"gradient shape mismatch for {k}")
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        mhat = state.m[k] / c1
        vhat = state.v[k] / c2
        arrays[k] = arrays[k] - lr * mhat / (np.sqrt(vhat) + eps)
