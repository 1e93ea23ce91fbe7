"""Dense Q-network with hand-rolled backprop and Adam.

Parameters are a list of (weights, bias) pairs. The default stack is
input -> 128 -> 128 -> 128 -> 5 with rectified-linear hidden units and
a linear output head. Gradients flow only through the taken action's
output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

HIDDEN_SIZES = (128, 128, 128)

MLPParams = list[tuple[np.ndarray, np.ndarray]]


def init_params(
    rng: np.random.Generator,
    input_dim: int,
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES,
    num_outputs: int = 5,
    dtype=np.float32,
) -> MLPParams:
    """He-uniform weights, zero biases."""
    dims = [input_dim, *hidden_sizes, num_outputs]
    params: MLPParams = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        params.append((w, b))
    return params


def clone_params(params: MLPParams) -> MLPParams:
    return [(w.copy(), b.copy()) for w, b in params]


def params_equal(a: MLPParams, b: MLPParams) -> bool:
    return len(a) == len(b) and all(
        np.array_equal(wa, wb) and np.array_equal(ba, bb) for (wa, ba), (wb, bb) in zip(a, b)
    )


def forward(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Action values for one observation (D,) or a batch (B, D)."""
    x = np.asarray(x)
    if x.shape[-1] != params[0][0].shape[0]:
        raise ValueError(
            f"observation dimension {x.shape[-1]} does not match network input {params[0][0].shape[0]}"
        )
    h = x
    for w, b in params[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = params[-1]
    return h @ w + b


def loss_and_grads(
    params: MLPParams,
    obs: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, MLPParams]:
    """Mean squared TD error over the batch and its parameter gradients.

    Targets are treated as constants. Raises DivergenceError if the loss
    is not finite.
    """
    obs = np.atleast_2d(np.asarray(obs))
    if obs.shape[-1] != params[0][0].shape[0]:
        raise ValueError(
            f"observation dimension {obs.shape[-1]} does not match network input {params[0][0].shape[0]}"
        )
    actions = np.asarray(actions, dtype=np.int64).ravel()
    targets = np.asarray(targets).ravel()
    batch = obs.shape[0]

    pre: list[np.ndarray] = []  # pre-activations of hidden layers
    hs: list[np.ndarray] = [obs]
    h = obs
    for w, b in params[:-1]:
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        hs.append(h)
    w_out, b_out = params[-1]
    q = h @ w_out + b_out

    taken = q[np.arange(batch), actions]
    err = taken - targets
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise DivergenceError("non-finite loss; update aborted")

    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = (2.0 / batch) * err

    grads: MLPParams = [None] * len(params)  # type: ignore[list-item]
    grads[-1] = (hs[-1].T @ dq, dq.sum(axis=0))
    dh = dq @ w_out.T
    for layer in range(len(params) - 2, -1, -1):
        dz = dh * (pre[layer] > 0)
        grads[layer] = (hs[layer].T @ dz, dz.sum(axis=0))
        if layer > 0:
            dh = dz @ params[layer][0].T
    return loss, grads


@dataclass
class AdamState:
    """Bias-corrected moment accumulators matching the parameter shapes."""

    m: MLPParams
    v: MLPParams
    t: int = 0
    step_size: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: MLPParams, step_size: float = 1e-4) -> AdamState:
    zeros = lambda p: [(np.zeros_like(w), np.zeros_like(b)) for w, b in p]
    return AdamState(m=zeros(params), v=zeros(params), step_size=step_size)


def adam_update(params: MLPParams, adam: AdamState, grads: MLPParams) -> tuple[MLPParams, AdamState]:
    """One in-place Adam step; returns the mutated (params, adam)."""
    adam.t += 1
    bc1 = 1.0 - adam.beta1**adam.t
    bc2 = 1.0 - adam.beta2**adam.t
    for (w, b), (mw, mb), (vw, vb), (gw, gb) in zip(params, adam.m, adam.v, grads):
        for p, m, v, g in ((w, mw, vw, gw), (b, mb, vb, gb)):
            m *= adam.beta1
            m += (1.0 - adam.beta1) * g
            v *= adam.beta2
            v += (1.0 - adam.beta2) * (g * g)
            p -= adam.step_size * (m / bc1) / (np.sqrt(v / bc2) + adam.eps)
    return params, adam
