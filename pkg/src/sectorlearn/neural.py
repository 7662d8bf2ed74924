"""Small numpy neural-network engine for Q-value regression.

Supports 'same'-padded 2-D convolutions and dense layers with ReLU or linear
activations, a squared-error loss on one selected output per sample, and a
bias-corrected Adam optimiser.  Inputs are channels-first ``(C, H, W)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArchitectureMismatch, ShapeMismatch


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv2d" | "dense"
    units: int
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    activation: str = "relu"  # "relu" | "linear"
    padding: str = "same"

    def __post_init__(self):
        if self.kind not in ("conv2d", "dense"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.padding != "same":
            raise ValueError("only 'same' padding is supported")
        if self.units < 1 or min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValueError("layer dimensions must be positive")


def conv_stack(n_outputs: int, strides=((4, 4), (2, 2), (1, 1))) -> list[LayerSpec]:
    """Three ReLU conv layers (32x8x8, 64x4x4, 64x3x3) and a linear dense head."""
    return [
        LayerSpec("conv2d", 32, (8, 8), tuple(strides[0])),
        LayerSpec("conv2d", 64, (4, 4), tuple(strides[1])),
        LayerSpec("conv2d", 64, (3, 3), tuple(strides[2])),
        LayerSpec("dense", n_outputs, activation="linear"),
    ]


def mlp_stack(n_outputs: int, hidden: Sequence[int] = (64, 64)) -> list[LayerSpec]:
    return [LayerSpec("dense", h) for h in hidden] + [LayerSpec("dense", n_outputs, activation="linear")]


@dataclass
class _Layer:
    spec: LayerSpec
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    kernel: tuple[int, int] = (1, 1)
    pad: tuple[int, int, int, int] = (0, 0, 0, 0)  # top, bottom, left, right
    W: np.ndarray | None = None
    b: np.ndarray | None = None


def _same_geometry(size: int, k: int, s: int) -> tuple[int, int, int]:
    out = math.ceil(size / s)
    total = max((out - 1) * s + k - size, 0)
    return out, total // 2, total - total // 2


class QNetwork:
    """Feed-forward Q-network; parameters live in ``layers[i].W`` / ``.b``."""

    def __init__(
        self,
        input_shape: Sequence[int],
        layers: Sequence[LayerSpec],
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ):
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = np.dtype(dtype)
        self.layers: list[_Layer] = []
        if layers[-1].activation != "linear":
            raise ValueError("output layer must be linear")
        shape = self.input_shape
        for spec in layers:
            if spec.kind == "conv2d":
                if len(shape) != 3:
                    raise ShapeMismatch("conv2d layers cannot follow a dense layer")
                C, H, W = shape
                kh, kw = min(spec.kernel[0], H), min(spec.kernel[1], W)
                Ho, pt, pb = _same_geometry(H, kh, spec.stride[0])
                Wo, pl, pr = _same_geometry(W, kw, spec.stride[1])
                layer = _Layer(spec, shape, (spec.units, Ho, Wo), (kh, kw), (pt, pb, pl, pr))
                layer.W = np.zeros((spec.units, C * kh * kw), dtype=self.dtype)
            else:
                d_in = int(np.prod(shape))
                layer = _Layer(spec, shape, (spec.units,))
                layer.W = np.zeros((d_in, spec.units), dtype=self.dtype)
            layer.b = np.zeros(spec.units, dtype=self.dtype)
            self.layers.append(layer)
            shape = layer.out_shape
        self.n_outputs = layers[-1].units
        if rng is not None:
            self.init_weights(rng)

    # -- parameters

    def init_weights(self, rng: np.random.Generator) -> None:
        """Glorot-uniform weights, zero biases."""
        for layer in self.layers:
            if layer.spec.kind == "conv2d":
                area = layer.kernel[0] * layer.kernel[1]
                fan_in = layer.in_shape[0] * area
                fan_out = layer.spec.units * area
            else:
                fan_in, fan_out = layer.W.shape
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            layer.W[...] = rng.uniform(-limit, limit, size=layer.W.shape)
            layer.b[...] = 0.0

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def architecture(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "dtype": self.dtype.str,
            "layers": [
                {"kind": l.spec.kind, "units": l.spec.units, "kernel": list(l.spec.kernel),
                 "stride": list(l.spec.stride), "activation": l.spec.activation, "padding": l.spec.padding}
                for l in self.layers
            ],
        }

    @classmethod
    def from_architecture(cls, arch: dict) -> "QNetwork":
        specs = [
            LayerSpec(d["kind"], int(d["units"]), tuple(d["kernel"]), tuple(d["stride"]),
                      d["activation"], d.get("padding", "same"))
            for d in arch["layers"]
        ]
        return cls(arch["input_shape"], specs, dtype=np.dtype(arch.get("dtype", "<f8")))

    # -- passes

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x)
        single = x.shape == self.input_shape
        if single:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"input shape {x.shape[1:]} does not match network input {self.input_shape}")
        return x.astype(self.dtype, copy=False), single

    def forward(self, x, cache: list | None = None) -> np.ndarray:
        """Q-values, shape (J,) for one input or (B, J) for a batch."""
        x, single = self._check_input(x)
        a = x
        for layer in self.layers:
            if layer.spec.kind == "conv2d":
                cols = _im2col(a, layer)
                B, _, Ho, Wo = (a.shape[0],) + layer.out_shape
                z = (cols @ layer.W.T + layer.b).reshape(B, Ho, Wo, -1).transpose(0, 3, 1, 2)
                saved = cols
            else:
                saved = a.reshape(a.shape[0], -1)
                z = saved @ layer.W + layer.b
            out = np.maximum(z, 0.0) if layer.spec.activation == "relu" else z
            if cache is not None:
                cache.append((saved, z))
            a = out
        return a[0] if single else a

    def loss_and_grads(self, x, actions, targets) -> tuple[float, list[np.ndarray]]:
        """Mean over the batch of (target - Q(x, action))^2 and its parameter gradients."""
        x, _ = self._check_input(x)
        actions = np.asarray(actions, dtype=np.int64).reshape(-1)
        targets = np.asarray(targets, dtype=self.dtype).reshape(-1)
        B = x.shape[0]
        if actions.shape[0] != B or targets.shape[0] != B:
            raise ShapeMismatch("actions/targets must have one entry per input")
        if np.any(actions < 0) or np.any(actions >= self.n_outputs):
            raise IndexError("action index out of range")
        cache: list = []
        q = self.forward(x, cache)
        rows = np.arange(B)
        err = targets - q[rows, actions]
        loss = float(np.mean(err * err))
        grad_out = np.zeros_like(q)
        grad_out[rows, actions] = -2.0 * err / B

        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            saved, z = cache[i]
            if layer.spec.activation == "relu":
                g = g * (z > 0)
            if layer.spec.kind == "conv2d":
                F = layer.spec.units
                g2 = g.transpose(0, 2, 3, 1).reshape(-1, F)
                grads[2 * i] = g2.T @ saved
                grads[2 * i + 1] = g2.sum(axis=0)
                if i > 0:
                    g = _col2im(g2 @ layer.W, layer, B)
            else:
                grads[2 * i] = saved.T @ g
                grads[2 * i + 1] = g.sum(axis=0)
                if i > 0:
                    g = (g @ layer.W.T).reshape((B,) + layer.in_shape)
        return loss, grads


def _im2col(x: np.ndarray, layer: _Layer) -> np.ndarray:
    pt, pb, pl, pr = layer.pad
    kh, kw = layer.kernel
    sh, sw = layer.spec.stride
    _, Ho, Wo = layer.out_shape
    B, C = x.shape[:2]
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr))) if any(layer.pad) else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, : sh * Ho : sh, : sw * Wo : sw]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)


def _col2im(dcols: np.ndarray, layer: _Layer, B: int) -> np.ndarray:
    pt, pb, pl, pr = layer.pad
    kh, kw = layer.kernel
    sh, sw = layer.spec.stride
    C, H, W = layer.in_shape
    _, Ho, Wo = layer.out_shape
    d = dcols.reshape(B, Ho, Wo, C, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    dxp = np.zeros((B, C, H + pt + pb, W + pl + pr), dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + sh * Ho : sh, j : j + sw * Wo : sw] += d[:, :, i, j]
    return dxp[:, :, pt : pt + H, pl : pl + W]


def forward(net: QNetwork, x) -> np.ndarray:
    return net.forward(x)


def backward(net: QNetwork, x, action_index: int, td_target: float) -> list[np.ndarray]:
    """Gradients of (td_target - Q(x, action_index))^2 for a single input."""
    x = np.asarray(x)
    if x.shape != net.input_shape:
        raise ShapeMismatch(f"expected a single input of shape {net.input_shape}, got {x.shape}")
    return net.loss_and_grads(x[None], [action_index], [td_target])[1]


@dataclass
class AdamState:
    params_shapes: list[tuple[int, ...]]
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros(s) for s in self.params_shapes]
            self.v = [np.zeros(s) for s in self.params_shapes]

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **kw) -> "AdamState":
        return cls([p.shape for p in params], **kw)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """In-place bias-corrected Adam update of ``params``; increments ``state.t``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and optimiser state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def copy_weights(src: QNetwork, dst: QNetwork) -> None:
    if src.architecture() != dst.architecture():
        raise ArchitectureMismatch("source and destination networks differ in architecture")
    for a, b in zip(src.params(), dst.params()):
        b[...] = a


# -- serialisation helpers (used by checkpoints)


def net_arrays(net: QNetwork, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for i, p in enumerate(net.params()):
        out[f"{prefix}/p{i}"] = p.astype(p.dtype.newbyteorder("<"), copy=False)
    return out


def load_net_arrays(net: QNetwork, arrays, prefix: str) -> None:
    for i, p in enumerate(net.params()):
        src = arrays[f"{prefix}/p{i}"]
        if src.shape != p.shape:
            raise ArchitectureMismatch(f"{prefix}/p{i}: stored shape {src.shape} vs {p.shape}")
        p[...] = src


def adam_arrays(state: AdamState, prefix: str) -> dict[str, np.ndarray]:
    out = {f"{prefix}/t": np.array(state.t, dtype="<i8")}
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        out[f"{prefix}/m{i}"] = m
        out[f"{prefix}/v{i}"] = v
    return out


def load_adam_arrays(state: AdamState, arrays, prefix: str) -> None:
    state.t = int(arrays[f"{prefix}/t"])
    for i in range(len(state.m)):
        state.m[i][...] = arrays[f"{prefix}/m{i}"]
        state.v[i][...] = arrays[f"{prefix}/v{i}"]


def save_network(net: QNetwork, path) -> None:
    np.savez(path, __arch__=np.frombuffer(json.dumps(net.architecture()).encode(), dtype=np.uint8),
             **net_arrays(net, "net"))


def load_network(path) -> QNetwork:
    with np.load(path) as data:
        net = QNetwork.from_architecture(json.loads(bytes(data["__arch__"]).decode()))
        load_net_arrays(net, data, "net")
    return net
