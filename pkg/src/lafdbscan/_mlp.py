"""Small fully-connected regressor trained with mini-batch SGD (numpy only)."""

from __future__ import annotations

import numpy as np

__all__ = ["TrainingDivergedError", "Network", "fit_network"]


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch
        self.loss = loss


class Network:
    """ReLU MLP with a scalar identity output and input standardization.

    Parameters are held as float32 once training finishes, which is also
    the precision of the model file, so save/load preserves predictions
    bit for bit. Forward passes run in float64.
    """

    def __init__(self, weights, biases, x_mean, x_scale):
        self.weights = [np.asarray(w, dtype=np.float32) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float32) for b in biases]
        self.x_mean = np.asarray(x_mean, dtype=np.float32)
        self.x_scale = np.asarray(x_scale, dtype=np.float32)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def hidden_widths(self) -> list[int]:
        return [w.shape[1] for w in self.weights[:-1]]

    def forward(self, X: np.ndarray) -> np.ndarray:
        h = (np.asarray(X, dtype=np.float64) - self.x_mean) / self.x_scale
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.astype(np.float64) + b
            if k < last:
                np.maximum(h, 0.0, out=h)
        return h[:, 0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        out = [("x_mean", self.x_mean), ("x_scale", self.x_scale)]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"W{k}", w))
            out.append((f"b{k}", b))
        return out

    @classmethod
    def from_arrays(cls, arrays: dict) -> "Network":
        n_layers = sum(1 for name in arrays if name.startswith("W"))
        return cls(
            [arrays[f"W{k}"] for k in range(n_layers)],
            [arrays[f"b{k}"] for k in range(n_layers)],
            arrays["x_mean"],
            arrays["x_scale"],
        )


def fit_network(
    X: np.ndarray,
    t: np.ndarray,
    hidden_widths,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    momentum: float,
    rng: np.random.Generator,
) -> tuple[Network, list[float]]:
    """Minimize mean squared error of ``net(X)`` against ``t``.

    Returns the trained network and the per-epoch mean training loss.
    Raises :class:`TrainingDivergedError` as soon as an epoch's loss is
    not finite.
    """
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    n, d = X.shape

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale < 1e-12] = 1.0
    # round now so training sees exactly the scaling that gets saved
    x_mean = x_mean.astype(np.float32).astype(np.float64)
    x_scale = x_scale.astype(np.float32).astype(np.float64)
    Z = (X - x_mean) / x_scale

    sizes = [d, *hidden_widths, 1]
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    ]
    # the network starts out predicting the mean target
    weights[-1][:] = 0.0
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    biases[-1][0] = t.mean()
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    history: list[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, epochs + 1):
            loss = _epoch(Z, t, weights, biases, vel_w, vel_b, batch_size,
                          learning_rate, momentum, rng)
            if not np.isfinite(loss) or not all(np.isfinite(w).all() for w in weights):
                raise TrainingDivergedError(epoch, loss)
            history.append(loss)

    return Network(weights, biases, x_mean, x_scale), history


def _epoch(Z, t, weights, biases, vel_w, vel_b, batch_size, learning_rate, momentum, rng):
    """One shuffled pass of momentum SGD; returns the mean squared error seen."""
    n = len(Z)
    order = rng.permutation(n)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        xb, tb = Z[idx], t[idx]
        acts = [xb]
        h = xb
        for k in range(len(weights)):
            h = h @ weights[k] + biases[k]
            if k < len(weights) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        err = acts[-1][:, 0] - tb
        total += float(err @ err)

        grad = (2.0 / len(idx)) * err[:, None]
        for k in range(len(weights) - 1, -1, -1):
            gw = acts[k].T @ grad
            gb = grad.sum(axis=0)
            if k:
                grad = (grad @ weights[k].T) * (acts[k] > 0)
            vel_w[k] = momentum * vel_w[k] - learning_rate * gw
            vel_b[k] = momentum * vel_b[k] - learning_rate * gb
            weights[k] += vel_w[k]
            biases[k] += vel_b[k]
    return total / n
