"""Dense feed-forward networks with hand-written forward and backward passes.

No autograd: every trainer composes these primitives and is checked against
central finite differences in the test suite. All parameters are float64 and
every random draw comes from an explicit generator, so training runs are
bit-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, IoError, ShapeError

NETWORK_MAGIC = b"QRDN"
ACTIVATIONS = ("linear", "elu", "sigmoid")


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "elu":
        return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))
    if name == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise ShapeError(f"unknown activation {name!r}")


def activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (a is activate(z))."""
    if name == "linear":
        return np.ones_like(z)
    if name == "elu":
        return np.where(z > 0.0, 1.0, a + 1.0)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ShapeError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str


class DenseNetwork:
    """A stack of affine layers with elementwise activations."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    @classmethod
    def create(cls, widths, activations, rng) -> "DenseNetwork":
        """Build a network with uniform fan-in scaled initial weights.

        widths includes the input width, so len(activations) must equal
        len(widths) - 1. Biases start at zero.
        """
        widths = list(widths)
        activations = list(activations)
        if len(activations) != len(widths) - 1:
            raise ShapeError("need one activation per layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {act!r}")
        layers = []
        for fan_in, fan_out, act in zip(widths, widths[1:], activations):
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers)

    @property
    def widths(self) -> list:
        return [self.layers[0].weights.shape[0]] + [l.weights.shape[1] for l in self.layers]

    @property
    def activations(self) -> list:
        return [l.activation for l in self.layers]

    def parameters(self) -> list:
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out


@dataclass
class ForwardPass:
    """Cached intermediates of one forward evaluation."""

    inputs: np.ndarray
    pre_activations: list
    activations: list

    @property
    def outputs(self) -> np.ndarray:
        return self.activations[-1]


def forward(net: DenseNetwork, x: np.ndarray) -> ForwardPass:
    """Evaluate the network on a batch, keeping per-layer intermediates."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("forward expects a batch of shape (n, width)")
    if x.shape[1] != net.layers[0].weights.shape[0]:
        raise ShapeError(
            f"input width {x.shape[1]} does not match layer width "
            f"{net.layers[0].weights.shape[0]}"
        )
    pre, acts = [], []
    a = x
    for layer in net.layers:
        z = a @ layer.weights + layer.bias
        a = activate(layer.activation, z)
        pre.append(z)
        acts.append(a)
    return ForwardPass(x, pre, acts)


def backward(net: DenseNetwork, fp: ForwardPass, grad_output: np.ndarray):
    """Backpropagate a gradient w.r.t. the outputs.

    Returns (grads, grad_input) where grads is a list of (dW, db) per layer
    and grad_input is the gradient w.r.t. the batch fed to forward.
    """
    grad = np.asarray(grad_output, dtype=np.float64)
    if grad.shape != fp.outputs.shape:
        raise ShapeError("grad_output shape must match the forward outputs")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz = grad * activation_grad(layer.activation, fp.pre_activations[i], fp.activations[i])
        below = fp.inputs if i == 0 else fp.activations[i - 1]
        grads[i] = (below.T @ dz, dz.sum(axis=0))
        grad = dz @ layer.weights.T
    return grads, grad


class Adam:
    """Adam with bias correction; one instance owns one network's state."""

    def __init__(self, net: DenseNetwork, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p) for p in net.parameters()]
        self._v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: DenseNetwork, grads) -> None:
        """Apply one update from a list of (dW, db) pairs, in place."""
        flat = []
        for dw, db in grads:
            flat.extend((dw, db))
        params = net.parameters()
        if len(flat) != len(params):
            raise ShapeError("gradient list does not match the parameter list")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, flat, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def zero_grads(net: DenseNetwork) -> list:
    return [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]


def add_grads(acc: list, extra: list, scale: float = 1.0) -> list:
    return [(aw + scale * ew, ab + scale * eb) for (aw, ab), (ew, eb) in zip(acc, extra)]


def save_network(net: DenseNetwork, path) -> None:
    """Checkpoint: JSON architecture descriptor followed by the f64 payload."""
    header = json.dumps({"widths": net.widths, "activations": net.activations}).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(NETWORK_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for p in net.parameters():
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_network(path) -> DenseNetwork:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 8 or raw[:4] != NETWORK_MAGIC:
        raise FormatError(f"{path}: not a network checkpoint")
    (hlen,) = struct.unpack_from("<I", raw, 4)
    try:
        header = json.loads(raw[8 : 8 + hlen])
        widths, activations = header["widths"], header["activations"]
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: bad checkpoint header ({exc})") from None
    net = DenseNetwork.create(widths, activations, np.random.default_rng(0))
    off = 8 + hlen
    for p in net.parameters():
        n = p.size
        if off + 8 * n > len(raw):
            raise FormatError(f"{path}: truncated parameter payload")
        p[...] = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(p.shape)
        off += 8 * n
    if off != len(raw):
        raise FormatError(f"{path}: trailing bytes after parameters")
    return net
