"""Dense feed-forward networks with hand-rolled reverse-mode gradients.

Networks here are small (a few layers of a few hundred units), so everything
is plain float64 numpy: a forward pass caches its intermediates on a
single-use :class:`GradientTape`, and :meth:`Mlp.backward` replays the chain
rule to produce gradients for every weight, bias, and the input vector. The
input gradient is what lets an actor loss differentiate through a critic's
action input without touching the critic's own parameters.

Inputs may be single vectors of length ``dims[0]`` or batches of shape
``(n, dims[0])``; batched backward sums parameter gradients over rows, so a
mean loss is obtained by scaling the output gradient by ``1/n`` upstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError
from .fileio import frame, unframe

_ACTIVATIONS = ("tanh", "relu")

NETWORK_MAGIC = b"SFTN"
NETWORK_VERSION = 1


def _as_batch(x: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise UsageError(f"{what} has length {x.shape[0]}, expected {dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise UsageError(f"{what} has width {x.shape[1]}, expected {dim}")
        return x, False
    raise UsageError(f"{what} must be a vector or a 2-d batch")


class GradientTape:
    """Cached intermediates of one forward pass; consumable exactly once."""

    __slots__ = ("net", "activations", "pre_activations", "consumed")

    def __init__(self, net: "Mlp", activations: list[np.ndarray], pre_activations: list[np.ndarray]):
        self.net = net
        self.activations = activations
        self.pre_activations = pre_activations
        self.consumed = False


@dataclass
class AdamState:
    """Bias-corrected Adam accumulator for a list of parameter arrays."""

    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = 3e-4, **kwargs) -> "AdamState":
        if learning_rate <= 0:
            raise UsageError("learning_rate must be positive")
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """Apply one bias-corrected Adam update to ``params`` in place."""
    if len(params) != len(grads):
        raise UsageError("params and grads must have the same length")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter array {i}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


class Mlp:
    """Multi-layer perceptron with tanh or relu hidden activations.

    Weight ``k`` has shape ``(dims[k+1], dims[k])``; the output layer is
    always linear. Weights are Glorot-uniform initialised, biases zero.
    """

    def __init__(self, layer_dims: list[int], activation: str = "tanh", seed: int | None = None):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise UsageError("layer_dims needs at least two positive entries")
        if activation not in _ACTIVATIONS:
            raise UsageError(f"activation must be one of {_ACTIVATIONS}")
        self.layer_dims = dims
        self.activation = activation
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved per layer: [W0, b0, W1, b1, ...]."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        expected = self.parameters()
        if len(params) != len(expected):
            raise UsageError("parameter count mismatch")
        for target, source in zip(expected, params):
            if target.shape != np.asarray(source).shape:
                raise UsageError("parameter shape mismatch")
            target[...] = source

    def copy(self) -> "Mlp":
        clone = Mlp(self.layer_dims, self.activation, seed=0)
        clone.set_parameters(self.parameters())
        return clone

    def _hidden(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "tanh":
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def _hidden_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.activation == "tanh":
            return 1.0 - a * a
        return np.where(z > 0.0, 1.0, 0.0)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, GradientTape]:
        """Run the network on ``x`` and return (output, tape)."""
        batch, squeeze = _as_batch(x, self.layer_dims[0], "input")
        activations = [batch]
        pre_activations: list[np.ndarray] = []
        a = batch
        last = self.n_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            pre_activations.append(z)
            a = z if k == last else self._hidden(z)
            activations.append(a)
        tape = GradientTape(self, activations, pre_activations)
        out = activations[-1][0] if squeeze else activations[-1]
        return out, tape

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without keeping a tape."""
        return self.forward(x)[0]

    def backward(
        self, tape: GradientTape, output_grad: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        """Backpropagate ``output_grad`` through a taped forward pass.

        Returns per-layer weight gradients, bias gradients, and the gradient
        with respect to the input. Parameter gradients sum over batch rows.
        """
        if tape.net is not self:
            raise UsageError("tape belongs to a different network")
        if tape.consumed:
            raise UsageError("tape has already been consumed")
        tape.consumed = True
        grad, squeeze = _as_batch(output_grad, self.layer_dims[-1], "output_grad")
        if grad.shape[0] != tape.activations[-1].shape[0]:
            raise UsageError("output_grad batch size does not match the tape")
        weight_grads: list[np.ndarray | None] = [None] * self.n_layers
        bias_grads: list[np.ndarray | None] = [None] * self.n_layers
        delta = grad
        for k in range(self.n_layers - 1, -1, -1):
            if k != self.n_layers - 1:
                delta = delta * self._hidden_grad(tape.pre_activations[k], tape.activations[k + 1])
            weight_grads[k] = delta.T @ tape.activations[k]
            bias_grads[k] = delta.sum(axis=0)
            delta = delta @ self.weights[k]
        input_grad = delta[0] if squeeze else delta
        return weight_grads, bias_grads, input_grad  # type: ignore[return-value]

    def gradients_flat(self, weight_grads: list[np.ndarray], bias_grads: list[np.ndarray]) -> list[np.ndarray]:
        """Interleave gradients to match :meth:`parameters` ordering."""
        out: list[np.ndarray] = []
        for gw, gb in zip(weight_grads, bias_grads):
            out.append(gw)
            out.append(gb)
        return out


def save_network_bytes(net: Mlp) -> bytes:
    parts = [struct.pack("<BI", _ACTIVATIONS.index(net.activation), len(net.layer_dims))]
    parts.append(struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return frame(NETWORK_MAGIC, NETWORK_VERSION, b"".join(parts))


def load_network_bytes(data: bytes) -> Mlp:
    version, payload = unframe(data, NETWORK_MAGIC)
    if version != NETWORK_VERSION:
        raise UsageError(f"unsupported network container version {version}")
    act_idx, n_dims = struct.unpack_from("<BI", payload, 0)
    offset = 5
    dims = list(struct.unpack_from(f"<{n_dims}I", payload, offset))
    offset += 4 * n_dims
    net = Mlp(dims, activation=_ACTIVATIONS[act_idx], seed=0)
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = np.frombuffer(payload, dtype="<f8", count=fan_out * fan_in, offset=offset)
        offset += 8 * fan_out * fan_in
        b = np.frombuffer(payload, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        net.weights[k] = w.reshape(fan_out, fan_in).astype(np.float64)
        net.biases[k] = b.astype(np.float64)
    return net


def save_network(net: Mlp, path) -> None:
    from .fileio import atomic_write_bytes

    atomic_write_bytes(path, save_network_bytes(net))


def load_network(path) -> Mlp:
    with open(path, "rb") as fh:
        return load_network_bytes(fh.read())
