"""Squeeze-and-excitation operators with verified analytic gradients.

Two gating variants over a (C, F, T) map: channel SE squeezes each channel
to a scalar by averaging over frequency and time, frequency SE recomputes
its excitation independently for every time frame from the channel mean.
The multi-dimensional block runs frequency first, then channel. Everything
here is float64 so the central-difference checks in gradcheck are
meaningful; the backward passes are exact gradients of the forwards,
including the paths through the squeeze means and the gates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset_io import read_feature_file, write_feature_file
from .errors import SeldkitError, ShapeMismatch


@dataclass(frozen=True)
class SeParams:
    """Excitation bottleneck weights: d -> d/r -> d.

    w1 is (d/r, d), b1 (d/r,), w2 (d, d/r), b2 (d,). The reduction ratio r
    must divide the squeezed dimension d.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        if w1.ndim != 2:
            raise ShapeMismatch(f"w1 must be 2-D, got {w1.shape}")
        hidden, d = w1.shape
        if d == 0 or hidden == 0 or d % hidden != 0:
            raise SeldkitError(
                f"w1 shape {w1.shape}: the reduction ratio must divide d"
            )
        if b1.shape != (hidden,) or w2.shape != (d, hidden) or b2.shape != (d,):
            raise ShapeMismatch(
                f"inconsistent parameter shapes: w1 {w1.shape}, b1 {b1.shape}, "
                f"w2 {w2.shape}, b2 {b2.shape}"
            )
        for arr in (w1, b1, w2, b2):
            if not np.all(np.isfinite(arr)):
                raise SeldkitError("parameters contain non-finite values")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    def as_arrays(self) -> tuple:
        return self.w1, self.b1, self.w2, self.b2


def zero_params(d: int, r: int) -> SeParams:
    """All-zero excitation: the gate sits at sigmoid(0) = 0.5 everywhere."""
    hidden = _hidden_size(d, r)
    return SeParams(np.zeros((hidden, d)), np.zeros(hidden),
                    np.zeros((d, hidden)), np.zeros(d))


def random_params(rng, d: int, r: int, scale: float = 0.5) -> SeParams:
    hidden = _hidden_size(d, r)
    return SeParams(
        scale * rng.standard_normal((hidden, d)),
        scale * rng.standard_normal(hidden),
        scale * rng.standard_normal((d, hidden)),
        scale * rng.standard_normal(d),
    )


def channel_se_forward(x, p: SeParams) -> np.ndarray:
    """Gate each channel by an excitation of the global channel means."""
    x = _as_tensor3(x)
    if p.d != x.shape[0]:
        raise ShapeMismatch(f"params expect d={p.d}, input has C={x.shape[0]}")
    z = x.mean(axis=(1, 2))
    h = np.maximum(p.w1 @ z + p.b1, 0.0)
    s = expit(p.w2 @ h + p.b2)
    return s[:, None, None] * x


def channel_se_backward(x, p: SeParams, grad_y) -> tuple:
    x = _as_tensor3(x)
    grad_y = _as_tensor3(grad_y)
    if grad_y.shape != x.shape:
        raise ShapeMismatch(f"grad shape {grad_y.shape} != input {x.shape}")
    if p.d != x.shape[0]:
        raise ShapeMismatch(f"params expect d={p.d}, input has C={x.shape[0]}")
    z = x.mean(axis=(1, 2))
    a1 = p.w1 @ z + p.b1
    h = np.maximum(a1, 0.0)
    s = expit(p.w2 @ h + p.b2)

    grad_s = (grad_y * x).sum(axis=(1, 2))
    grad_a2 = grad_s * s * (1.0 - s)
    grad_w2 = np.outer(grad_a2, h)
    grad_h = p.w2.T @ grad_a2
    grad_a1 = grad_h * (a1 > 0)
    grad_w1 = np.outer(grad_a1, z)
    grad_z = p.w1.T @ grad_a1

    n_cells = x.shape[1] * x.shape[2]
    grad_x = s[:, None, None] * grad_y + grad_z[:, None, None] / n_cells
    return grad_x, SeParams(grad_w1, grad_a1, grad_w2, grad_a2)


def freq_se_forward(x, p: SeParams) -> np.ndarray:
    """Gate each frequency bin, re-exciting independently per time frame."""
    x = _as_tensor3(x)
    if p.d != x.shape[1]:
        raise ShapeMismatch(f"params expect d={p.d}, input has F={x.shape[1]}")
    z = x.mean(axis=0)
    h = np.maximum(p.w1 @ z + p.b1[:, None], 0.0)
    s = expit(p.w2 @ h + p.b2[:, None])
    return s[None, :, :] * x


def freq_se_backward(x, p: SeParams, grad_y) -> tuple:
    x = _as_tensor3(x)
    grad_y = _as_tensor3(grad_y)
    if grad_y.shape != x.shape:
        raise ShapeMismatch(f"grad shape {grad_y.shape} != input {x.shape}")
    if p.d != x.shape[1]:
        raise ShapeMismatch(f"params expect d={p.d}, input has F={x.shape[1]}")
    z = x.mean(axis=0)
    a1 = p.w1 @ z + p.b1[:, None]
    h = np.maximum(a1, 0.0)
    s = expit(p.w2 @ h + p.b2[:, None])

    grad_s = (grad_y * x).sum(axis=0)
    grad_a2 = grad_s * s * (1.0 - s)
    grad_w2 = grad_a2 @ h.T
    grad_h = p.w2.T @ grad_a2
    grad_a1 = grad_h * (a1 > 0)
    grad_w1 = grad_a1 @ z.T
    grad_z = p.w1.T @ grad_a1

    grad_x = s[None, :, :] * grad_y + grad_z[None, :, :] / x.shape[0]
    return grad_x, SeParams(grad_w1, grad_a1.sum(axis=1),
                            grad_w2, grad_a2.sum(axis=1))


def multi_dim_se_forward(x, p_freq: SeParams, p_chan: SeParams) -> np.ndarray:
    """Frequency SE first, channel SE second."""
    return channel_se_forward(freq_se_forward(x, p_freq), p_chan)


def multi_dim_se_backward(x, p_freq: SeParams, p_chan: SeParams,
                          grad_y) -> tuple:
    inner = freq_se_forward(x, p_freq)
    grad_inner, grad_p_chan = channel_se_backward(inner, p_chan, grad_y)
    grad_x, grad_p_freq = freq_se_backward(x, p_freq, grad_inner)
    return grad_x, grad_p_freq, grad_p_chan


def se_backward(x, p: SeParams, grad_y, which: str) -> tuple:
    """Dispatch to the matching backward: which is "channel" or "freq"."""
    if which == "channel":
        return channel_se_backward(x, p, grad_y)
    if which == "freq":
        return freq_se_backward(x, p, grad_y)
    raise SeldkitError(f"unknown SE variant {which!r}")


def gradcheck(forward, backward, x, params, eps: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    forward(x, params) must return a tensor y; backward(x, params, grad_y)
    must return (grad_x, param_grads) with param_grads shaped like params
    (a tuple of arrays). The scalar probe loss is L = sum(y**2). Returns
    the max over all input and parameter entries of
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if not 0.0 < eps < 1e-3:
        raise SeldkitError(f"eps {eps} outside (0, 1e-3)")
    x = np.array(x, dtype=np.float64)
    params = tuple(np.array(p, dtype=np.float64) for p in params)

    y = forward(x, params)
    grad_x, param_grads = backward(x, params, 2.0 * y)
    analytic = [np.asarray(grad_x)] + [np.asarray(g) for g in param_grads]

    worst = 0.0
    for which, arr in enumerate([x, *params]):
        grads = analytic[which]
        if grads.shape != arr.shape:
            raise ShapeMismatch(
                f"backward returned gradient of shape {grads.shape} "
                f"for an array of shape {arr.shape}"
            )
        flat = arr.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            loss_hi = float((forward(x, params) ** 2).sum())
            flat[i] = original - eps
            loss_lo = float((forward(x, params) ** 2).sum())
            flat[i] = original
            numeric = (loss_hi - loss_lo) / (2.0 * eps)
            a = float(grads.reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


def channel_gradcheck_ops() -> tuple:
    """(forward, backward) pair for gradcheck over channel SE."""
    def fwd(x, params):
        return channel_se_forward(x, SeParams(*params))

    def bwd(x, params, grad_y):
        grad_x, grad_p = channel_se_backward(x, SeParams(*params), grad_y)
        return grad_x, grad_p.as_arrays()

    return fwd, bwd


def freq_gradcheck_ops() -> tuple:
    def fwd(x, params):
        return freq_se_forward(x, SeParams(*params))

    def bwd(x, params, grad_y):
        grad_x, grad_p = freq_se_backward(x, SeParams(*params), grad_y)
        return grad_x, grad_p.as_arrays()

    return fwd, bwd


def multi_gradcheck_ops() -> tuple:
    """gradcheck pair for the composed block; params is both sets, freq first."""
    def fwd(x, params):
        return multi_dim_se_forward(x, SeParams(*params[:4]), SeParams(*params[4:]))

    def bwd(x, params, grad_y):
        grad_x, gp_freq, gp_chan = multi_dim_se_backward(
            x, SeParams(*params[:4]), SeParams(*params[4:]), grad_y
        )
        return grad_x, gp_freq.as_arrays() + gp_chan.as_arrays()

    return fwd, bwd


def save_se_params(p: SeParams, path) -> None:
    """Serialize as one flat vector: [d, d/r, w1..., b1..., w2..., b2...].

    The container payload is float32; reloaded parameters are the float32
    rounding of the originals.
    """
    hidden = p.b1.shape[0]
    flat = np.concatenate(
        [[float(p.d), float(hidden)], p.w1.ravel(), p.b1, p.w2.ravel(), p.b2]
    )
    write_feature_file(flat, path)


def load_se_params(path) -> SeParams:
    flat = np.asarray(read_feature_file(path), dtype=np.float64)
    if flat.ndim != 1 or flat.size < 2:
        raise ShapeMismatch(f"{path}: not a serialized parameter vector")
    d, hidden = int(flat[0]), int(flat[1])
    expected = 2 + 2 * d * hidden + hidden + d
    if d <= 0 or hidden <= 0 or flat.size != expected:
        raise ShapeMismatch(
            f"{path}: vector of {flat.size} entries does not hold "
            f"d={d}, d/r={hidden} parameters"
        )
    cursor = 2
    w1 = flat[cursor:cursor + hidden * d].reshape(hidden, d)
    cursor += hidden * d
    b1 = flat[cursor:cursor + hidden]
    cursor += hidden
    w2 = flat[cursor:cursor + d * hidden].reshape(d, hidden)
    cursor += d * hidden
    return SeParams(w1, b1, w2, flat[cursor:])


def _hidden_size(d: int, r: int) -> int:
    if r < 1 or d < 1 or d % r != 0:
        raise SeldkitError(f"reduction ratio {r} does not divide d={d}")
    return d // r


def _as_tensor3(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatch(f"expected a (C, F, T) tensor, got shape {arr.shape}")
    return arr
