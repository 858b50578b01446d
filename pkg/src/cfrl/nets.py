"""Dense feed-forward networks with exact backpropagation, in plain numpy.

Hidden layers are ReLU; the output head is identity, sigmoid, tanh or
softmax. Forward returns a tape of cached activations that backward
consumes. Everything is float64 so finite-difference checks are sharp.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "tanh", "softmax")

_MAGIC = b"DNET"
_FORMAT_VERSION = 1


class DenseNet:
    """Weights stored per layer as (out, in) matrices plus bias vectors."""

    def __init__(self, layer_sizes, output_activation="identity", weights=None, biases=None):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2:
            raise ConfigError("a network needs at least input and output layers")
        if any(s <= 0 for s in layer_sizes):
            raise ConfigError("layer sizes must be positive")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation {output_activation!r}")
        self.layer_sizes = layer_sizes
        self.output_activation = output_activation
        self.weights = weights
        self.biases = biases

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def parameters(self):
        """Flat list of parameter arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_sizes),
            self.output_activation,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def copy_params_from(self, other: "DenseNet") -> None:
        """Hard parameter sync (target-network update)."""
        if other.layer_sizes != self.layer_sizes:
            raise ConfigError("cannot sync parameters between mismatched architectures")
        for dst, src in zip(self.parameters(), other.parameters()):
            np.copyto(dst, src)


def init_net(layer_sizes, output_activation="identity", seed=0) -> DenseNet:
    """Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    zero biases, fully determined by the seed."""
    net = DenseNet(layer_sizes, output_activation)
    rng = np.random.default_rng(seed)
    net.weights, net.biases = [], []
    for n_in, n_out in zip(net.layer_sizes[:-1], net.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        net.weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        net.biases.append(np.zeros(n_out))
    return net


@dataclass
class Tape:
    """Cached forward pass: inputs to every layer plus pre-activations."""

    x: np.ndarray                      # (batch, n_in)
    pre: list = field(default_factory=list)   # z_l per layer, (batch, n_l)
    post: list = field(default_factory=list)  # activations per layer incl. output
    squeezed: bool = False


def _apply_head(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "tanh":
        return np.tanh(z)
    # stable softmax
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ConfigError(f"input has shape {x.shape}, net expects {net.n_in} features")
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")
    tape = Tape(x=x, squeezed=squeezed)
    a = x
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        tape.pre.append(z)
        a = _apply_head(z, net.output_activation) if l == last else np.maximum(z, 0.0)
        tape.post.append(a)
    out = a[0] if squeezed else a
    return out, tape


@dataclass
class Gradients:
    d_weights: list
    d_biases: list
    d_input: np.ndarray

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            [g * factor for g in self.d_weights],
            [g * factor for g in self.d_biases],
            self.d_input * factor,
        )

    def add_(self, other: "Gradients") -> "Gradients":
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b
        self.d_input = self.d_input + other.d_input
        return self


def backward(net: DenseNet, tape: Tape, output_gradient: np.ndarray) -> Gradients:
    """Exact gradients of sum(output * output_gradient) w.r.t. every
    parameter and the input. ``output_gradient`` matches the forward
    output shape."""
    g = np.asarray(output_gradient, dtype=np.float64)
    if tape.squeezed:
        g = g[None, :]
    if g.shape != tape.post[-1].shape:
        raise ConfigError(f"output gradient shape {g.shape} != output shape {tape.post[-1].shape}")

    head = net.output_activation
    z_out = tape.pre[-1]
    y = tape.post[-1]
    if head == "identity":
        delta = g
    elif head == "sigmoid":
        delta = g * y * (1.0 - y)
    elif head == "tanh":
        delta = g * (1.0 - y * y)
    else:  # softmax Jacobian: p * (g - <g, p>)
        delta = y * (g - (g * y).sum(axis=1, keepdims=True))

    d_weights = [None] * net.n_layers
    d_biases = [None] * net.n_layers
    for l in range(net.n_layers - 1, -1, -1):
        a_prev = tape.x if l == 0 else tape.post[l - 1]
        d_weights[l] = delta.T @ a_prev
        d_biases[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * (tape.pre[l - 1] > 0)
        else:
            d_input = delta @ net.weights[l]
    if tape.squeezed:
        d_input = d_input[0]
    return Gradients(d_weights, d_biases, d_input)


class Optimizer:
    """SGD or Adam over a DenseNet's parameters."""

    def __init__(self, kind="adam", learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {kind!r}")
        if learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")
        self.kind = kind
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = None
        self._v = None


def apply_update(net: DenseNet, grads: Gradients, opt: Optimizer) -> None:
    """One in-place optimizer step. Aborts on non-finite gradients or
    parameters rather than silently corrupting the run."""
    gs = []
    for gw, gb in zip(grads.d_weights, grads.d_biases):
        gs.append(gw)
        gs.append(gb)
    params = net.parameters()
    if len(gs) != len(params):
        raise ConfigError("gradient/parameter structure mismatch")
    for g in gs:
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient; aborting update")

    if opt.kind == "sgd":
        for p, g in zip(params, gs):
            p -= opt.learning_rate * g
    else:
        if opt._m is None:
            opt._m = [np.zeros_like(p) for p in params]
            opt._v = [np.zeros_like(p) for p in params]
        opt.t += 1
        b1t = 1.0 - opt.beta1**opt.t
        b2t = 1.0 - opt.beta2**opt.t
        for p, g, m, v in zip(params, gs, opt._m, opt._v):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * g * g
            p -= opt.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + opt.eps)
    for p in params:
        if not np.isfinite(p).all():
            raise NumericError("non-finite parameter after update")


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_layer: int
    passed: bool


def finite_diff_check(net: DenseNet, loss_fn, x: np.ndarray, tolerance=1e-4, h=1e-5) -> GradCheckReport:
    """Compare analytic parameter gradients against central finite
    differences of ``loss_fn(output) -> (scalar, d_loss/d_output)``."""
    out, tape = forward(net, x)
    _, gout = loss_fn(out)
    grads = backward(net, tape, gout)
    analytic = []
    for gw, gb in zip(grads.d_weights, grads.d_biases):
        analytic.append(gw)
        analytic.append(gb)

    max_rel, worst = 0.0, -1
    for idx, p in enumerate(net.parameters()):
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp, _ = loss_fn(forward(net, x)[0])
            flat[j] = orig - h
            lm, _ = loss_fn(forward(net, x)[0])
            flat[j] = orig
            num = (lp - lm) / (2 * h)
            ana = analytic[idx].reshape(-1)[j]
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-6)
            if rel > max_rel:
                max_rel, worst = rel, idx // 2
    return GradCheckReport(max_rel_error=max_rel, worst_layer=worst, passed=max_rel <= tolerance)


_ACT_CODES = {name: i for i, name in enumerate(OUTPUT_ACTIVATIONS)}


def params_to_bytes(net: DenseNet) -> bytes:
    """Versioned binary layout: magic, version, activation code, layer
    count, sizes, then row-major little-endian float64 parameters."""
    parts = [
        _MAGIC,
        struct.pack("<II", _FORMAT_VERSION, _ACT_CODES[net.output_activation]),
        struct.pack("<I", len(net.layer_sizes)),
        struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes),
    ]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def params_from_bytes(blob: bytes, source="<bytes>") -> DenseNet:
    if blob[:4] != _MAGIC:
        raise ConfigError(f"{source}: not a network parameter file")
    try:
        version, act_code = struct.unpack_from("<II", blob, 4)
        if version != _FORMAT_VERSION:
            raise ConfigError(f"{source}: unsupported format version {version}")
        (n_sizes,) = struct.unpack_from("<I", blob, 12)
        sizes = list(struct.unpack_from(f"<{n_sizes}I", blob, 16))
        offset = 16 + 4 * n_sizes
        activation = OUTPUT_ACTIVATIONS[act_code]
        net = DenseNet(sizes, activation)
        net.weights, net.biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = np.frombuffer(blob, dtype="<f8", count=n_out * n_in, offset=offset).reshape(n_out, n_in)
            offset += n_out * n_in * 8
            b = np.frombuffer(blob, dtype="<f8", count=n_out, offset=offset)
            offset += n_out * 8
            net.weights.append(w.copy())
            net.biases.append(b.copy())
        if offset != len(blob):
            raise ConfigError(f"{source}: trailing bytes, file corrupt")
    except (struct.error, ValueError, IndexError) as exc:
        raise ConfigError(f"{source}: truncated or corrupt parameter file: {exc}") from exc
    return net


def save_params(net: DenseNet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(net))


def load_params(path) -> DenseNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    return params_from_bytes(blob, source=str(path))
