"""Dense layers, layer-structured reverse-mode differentiation, and Adam.

Everything is float64 and batch-first: an input batch has shape
``(n_samples, d_in)``, a layer computes ``y = x @ W + b`` with ``W`` of
shape ``(d_in, d_out)``, and activations are applied elementwise. All the
learned models in this package are plain feed-forward chains (plus a gated
recurrent cell with closed-form local gradients), so the backward pass is
implemented per layer from cached activations instead of a general tape.

Conventions fixed here for reproducibility:
  * relu gradient at exactly 0 is 0,
  * weight init is Gaussian with variance 2 / fan_in, biases start at 0,
  * Adam uses betas (0.9, 0.999), eps 1e-8, and decoupled weight decay.
"""

import numpy as np

from .exceptions import ConfigurationError, StateError, TrainingError
from .validation import as_batch

ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


def apply_activation(name, z):
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    raise ConfigurationError(f"unknown activation {name!r}")


def activation_gradient(name, out):
    """Derivative of the activation expressed through its output value."""
    if name == "linear":
        return np.ones_like(out)
    if name == "relu":
        return (out > 0.0).astype(np.float64)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "tanh":
        return 1.0 - out * out
    raise ConfigurationError(f"unknown activation {name!r}")


def kaiming_init(shape, seed):
    """Gaussian weights with variance 2 / fan_in, deterministic per seed."""
    d_in, d_out = shape
    if d_in <= 0 or d_out <= 0:
        raise ConfigurationError(f"layer shape must be positive, got {shape}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out))


class DenseLayer:
    """One fully connected layer ``y = act(x @ weights + biases)``."""

    def __init__(self, weights, biases, activation="linear"):
        weights = np.asarray(weights, dtype=np.float64)
        biases = np.asarray(biases, dtype=np.float64)
        if weights.ndim != 2:
            raise ConfigurationError("weights must be 2-D")
        if biases.shape != (weights.shape[1],):
            raise ConfigurationError(
                f"bias length {biases.shape} does not match output dim {weights.shape[1]}"
            )
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {activation!r}")
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @classmethod
    def initialized(cls, d_in, d_out, rng, activation="linear"):
        w = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out))
        return cls(w, np.zeros(d_out), activation)

    @property
    def d_in(self):
        return self.weights.shape[0]

    @property
    def d_out(self):
        return self.weights.shape[1]

    def __repr__(self):
        return f"DenseLayer({self.d_in}->{self.d_out}, {self.activation})"


class DenseNet:
    """A chain of dense layers with cached-activation backprop.

    ``forward(x, remember=True)`` stores per-layer inputs and outputs;
    ``backward(upstream)`` then returns gradients for every weight and bias
    plus the gradient with respect to the network input. A frozen net used
    for inference (``remember=False``) keeps no state and is safe to share.
    """

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ConfigurationError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.d_out != nxt.d_in:
                raise ConfigurationError(
                    f"layer chain mismatch: {prev.d_out} feeds {nxt.d_in}"
                )
        self.layers = layers
        self._cache = None

    @property
    def d_in(self):
        return self.layers[0].d_in

    @property
    def d_out(self):
        return self.layers[-1].d_out

    def forward(self, x, remember=False):
        a, was_vector = as_batch(x, width=self.d_in, name="input")
        cache = [] if remember else None
        for layer in self.layers:
            z = a @ layer.weights + layer.biases
            out = apply_activation(layer.activation, z)
            if remember:
                cache.append((a, out))
            a = out
        if remember:
            self._cache = cache
        return a[0] if was_vector else a

    def __call__(self, x):
        return self.forward(x)

    def backward(self, upstream):
        """Backpropagate ``dLoss/doutput``; returns (param_grads, dLoss/dinput).

        ``param_grads`` is a flat list [dW0, db0, dW1, db1, ...] matching
        ``parameters()``.
        """
        if self._cache is None:
            raise StateError("backward called before forward(remember=True)")
        delta, was_vector = as_batch(upstream, width=self.d_out, name="upstream")
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            a_in, out = self._cache[i]
            delta = delta * activation_gradient(layer.activation, out)
            grads[2 * i] = a_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ layer.weights.T
        return grads, (delta[0] if was_vector else delta)

    def parameters(self):
        """Flat list of parameter arrays, alternating weights and biases."""
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.biases)
        return params

    def zero_like_parameters(self):
        return [np.zeros_like(p) for p in self.parameters()]


def mlp(dims, rng, hidden_activation="relu"):
    """Feed-forward chain with linear first and last layers.

    ``dims`` lists the widths, e.g. (363, 64, 64, 20). Every layer between
    the first and the last uses ``hidden_activation``.
    """
    if len(dims) < 2:
        raise ConfigurationError("mlp needs at least input and output dims")
    layers = []
    n = len(dims) - 1
    for i in range(n):
        act = hidden_activation if 0 < i < n - 1 else "linear"
        layers.append(DenseLayer.initialized(dims[i], dims[i + 1], rng, act))
    return DenseNet(layers)


class Adam:
    """Adam with decoupled weight decay, updating arrays in place."""

    def __init__(self, params, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.step_count = 0
        self._m = [np.zeros_like(p) for p in params]
        self._v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, context=""):
        if len(params) != len(self._m) or len(grads) != len(self._m):
            raise ConfigurationError("parameter/gradient count mismatch")
        for g in grads:
            if not np.isfinite(g).all():
                where = f" ({context})" if context else ""
                raise TrainingError(f"non-finite gradient{where}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p
            p -= self.lr * update


class LrSchedule:
    """Multiply the learning rate at fixed epoch milestones."""

    def __init__(self, milestones):
        milestones = [(int(e), float(m)) for e, m in milestones]
        thresholds = [e for e, _ in milestones]
        if sorted(thresholds) != thresholds or len(set(thresholds)) != len(thresholds):
            raise ConfigurationError("milestone epochs must be strictly increasing")
        self.milestones = milestones

    def apply(self, optimizer, epoch):
        """Scale ``optimizer.lr`` by the multiplier of any milestone hit at ``epoch``."""
        for threshold, mult in self.milestones:
            if epoch == threshold:
                optimizer.lr *= mult
        return optimizer.lr
