"""Multilayer perceptrons, Adam, and flat parameter checkpoints."""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError, NonFiniteError, ParseError

ACTIVATIONS = ("leaky_relu", "relu", "identity")


class MlpNetwork:
    """Fully connected network with per-layer activations.

    Parameters live in one Tensor per weight matrix and bias vector; the
    flat view (``params``) concatenates them layer by layer as W then b,
    with W stored row-major with shape (fan_in, fan_out).

    Args:
        layer_dims: widths ``[d_in, h_1, ..., d_out]``.
        activations: one name per layer (``len(layer_dims) - 1`` entries),
            each of ``leaky_relu`` (slope 0.2), ``relu`` or ``identity``.
        seed: seed or ``numpy.random.Generator`` for Glorot-uniform init.
    """

    def __init__(self, layer_dims, activations, seed=0, leak=0.2):
        layer_dims = [int(n) for n in layer_dims]
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ContractError(f"bad layer_dims {layer_dims}")
        activations = list(activations)
        if len(activations) != len(layer_dims) - 1:
            raise ContractError("need one activation per layer")
        for name in activations:
            if name not in ACTIVATIONS:
                raise ContractError(f"unknown activation {name!r}")
        self.layer_dims = layer_dims
        self.activations = activations
        self.leak = leak
        rng = np.random.default_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    @classmethod
    def discriminator(cls, d, width=128, depth=2, seed=0):
        dims = [d] + [width] * depth + [1]
        return cls(dims, ["leaky_relu"] * depth + ["identity"], seed=seed)

    @classmethod
    def generator(cls, noise_dim, d, width=128, depth=2, seed=0):
        dims = [noise_dim] + [width] * depth + [d]
        return cls(dims, ["relu"] * depth + ["identity"], seed=seed)

    @property
    def d_in(self):
        return self.layer_dims[0]

    @property
    def d_out(self):
        return self.layer_dims[-1]

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def num_params(self):
        return sum(i * o + o for i, o in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    @property
    def params(self):
        return np.concatenate([p.data.ravel() for p in self.parameters()])

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_params,):
            raise DimensionError(f"expected {self.num_params} parameters, got {flat.shape}")
        if not np.isfinite(flat).all():
            raise NonFiniteError("parameter vector contains NaN or Inf", source="set_params")
        offset = 0
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            n = w.size
            self.weights[k] = Tensor(flat[offset:offset + n].reshape(w.shape), requires_grad=True)
            offset += n
            self.biases[k] = Tensor(flat[offset:offset + b.size], requires_grad=True)
            offset += b.size

    def flat_grad(self, grads):
        """Concatenate per-tensor gradients (from :func:`autodiff.grad`) into one vector."""
        return np.concatenate([g.data.ravel() for g in grads])

    def copy(self):
        twin = MlpNetwork.__new__(MlpNetwork)
        twin.layer_dims = list(self.layer_dims)
        twin.activations = list(self.activations)
        twin.leak = self.leak
        twin.weights = [Tensor(w.data, requires_grad=True) for w in self.weights]
        twin.biases = [Tensor(b.data, requires_grad=True) for b in self.biases]
        return twin

    def forward(self, batch):
        x = ad.as_tensor(batch)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise DimensionError(f"expected a (k, {self.d_in}) batch, got {x.shape}")
        for w, b, act in zip(self.weights, self.biases, self.activations):
            x = x @ w + b
            if act == "leaky_relu":
                x = ad.leaky_relu(x, self.leak)
            elif act == "relu":
                x = ad.relu(x)
        return x

    __call__ = forward


@dataclass
class Adam:
    """Bias-corrected Adam on a flat parameter vector.

    Defaults follow the critic setting used throughout (beta1 = 0.5).
    """

    lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0
    source: str = field(default="adam", repr=False)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ContractError("Adam betas must lie in (0, 1)")

    def step(self, params, grads, source=None):
        """Return the updated parameter vector; moments and ``t`` advance in place."""
        params = np.asarray(params, dtype=np.float64)
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != params.shape:
            raise DimensionError(f"gradient shape {grads.shape} != parameter shape {params.shape}")
        if not np.isfinite(grads).all():
            bad = np.flatnonzero(~np.isfinite(grads))
            raise NonFiniteError(
                f"non-finite gradient at {bad.size} entries (first index {bad[0]})",
                source=source or self.source)
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * grads * grads
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(state, params, grads):
    """Functional form of :meth:`Adam.step`: returns ``(new_params, state)``."""
    return state.step(params, grads), state


def descend(net, loss, opt, source=None):
    """One optimizer step on ``net`` minimizing the scalar Tensor ``loss``."""
    grads = ad.grad(loss, net.parameters())
    net.set_params(opt.step(net.params, net.flat_grad(grads), source=source))


# --- checkpoints -------------------------------------------------------------
# Layout: 4-byte magic, uint32 version, uint64 count, then count f64 values, all little-endian.

MAGIC = b"CWGP"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def save_params(path, flat):
    flat = np.ascontiguousarray(flat, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flat.size))
        fh.write(flat.tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("checkpoint shorter than its header")
    magic, version, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ParseError(f"checkpoint declares {count} values but holds {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)
