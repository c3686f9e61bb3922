"""Single-node perceptron units and their isolated gradient-descent trainer.

A unit is a standalone micro-model: weight vector, bias, activation. Training
touches only the given unit's parameters; nothing is shared across units.
The finite-difference gradient is the verification oracle for the analytic one.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .jsonio import read_json, write_json
from .seeding import rng_for

ACTIVATIONS = ("sigmoid", "relu", "tanh")
LOSSES = ("mse", "bce")


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _activate(kind: str, z: float) -> float:
    if kind == "sigmoid":
        return _sigmoid(z)
    if kind == "relu":
        return z if z > 0 else 0.0
    return math.tanh(z)


def _activate_prime(kind: str, z: float) -> float:
    if kind == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    if kind == "relu":
        # derivative at exactly 0 defined as 0
        return 1.0 if z > 0 else 0.0
    t = math.tanh(z)
    return 1.0 - t * t


def _loss_from_z(z: float, y: int, loss: str, activation: str) -> float:
    if loss == "bce":
        # logit form of -[y log(s) + (1-y) log(1-s)]; finite for any float z
        return max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))
    diff = _activate(activation, z) - y
    return diff * diff  # not **2: squared overflow must yield inf, not OverflowError


def _check_pair(activation: str, loss: str) -> None:
    if activation not in ACTIVATIONS:
        raise TrainingError(f"unknown activation {activation!r}")
    if loss not in LOSSES:
        raise TrainingError(f"unknown loss {loss!r}")
    if loss == "bce" and activation != "sigmoid":
        raise TrainingError(f"bce loss is only defined with sigmoid units, got {activation!r}")


@dataclass(frozen=True)
class NeuronUnit:
    unit_index: int
    activation: str
    weights: tuple[float, ...]
    bias: float

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise TrainingError(f"unknown activation {self.activation!r}")

    @property
    def dim(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    loss: str = "bce"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise TrainingError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in LOSSES:
            raise TrainingError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class TrainLog:
    epoch_losses: tuple[float, ...]
    final_loss: float
    steps: int


@dataclass(frozen=True)
class Gradient:
    d_weights: tuple[float, ...]
    d_bias: float


def init_unit(dim: int, activation: str, unit_index: int, seed: int) -> NeuronUnit:
    """Fresh unit: weights uniform in [-0.5, 0.5] from the (seed, unit_index) stream, bias 0."""
    if dim < 1:
        raise TrainingError(f"unit dimension must be >= 1, got {dim}")
    weights = rng_for(seed, unit_index).uniform(-0.5, 0.5, size=dim)
    return NeuronUnit(unit_index=unit_index, activation=activation,
                      weights=tuple(float(w) for w in weights), bias=0.0)


def _preactivation(unit: NeuronUnit, x) -> float:
    if len(x) != unit.dim:
        raise TrainingError(f"unit {unit.unit_index} expects {unit.dim} features, got {len(x)}")
    return float(sum(w * xi for w, xi in zip(unit.weights, x)) + unit.bias)


def unit_forward(unit: NeuronUnit, x) -> float:
    """Activation value act(w.x + b); pure."""
    return _activate(unit.activation, _preactivation(unit, x))


def unit_gradient(unit: NeuronUnit, x, y: int, loss: str) -> Gradient:
    """Analytic gradient of loss(act(w.x + b), y) with respect to (w, b)."""
    _check_pair(unit.activation, loss)
    z = _preactivation(unit, x)
    if loss == "bce":
        dz = _sigmoid(z) - y  # canonical bce+sigmoid simplification
    else:
        yhat = _activate(unit.activation, z)
        dz = 2.0 * (yhat - y) * _activate_prime(unit.activation, z)
    return Gradient(d_weights=tuple(float(dz * xi) for xi in x), d_bias=float(dz))


def fd_gradient(unit: NeuronUnit, x, y: int, loss: str, h: float = 1e-5) -> Gradient:
    """Central-difference gradient; the verification oracle for unit_gradient.

    Unreliable at the relu kink (|w.x + b| comparable to h); callers exclude
    that neighborhood.
    """
    _check_pair(unit.activation, loss)
    if h <= 0:
        raise TrainingError(f"fd step must be > 0, got {h}")
    if len(x) != unit.dim:
        raise TrainingError(f"unit {unit.unit_index} expects {unit.dim} features, got {len(x)}")

    def loss_at(weights, bias):
        z = sum(w * xi for w, xi in zip(weights, x)) + bias
        return _loss_from_z(z, y, loss, unit.activation)

    d_weights = []
    base = list(unit.weights)
    for i in range(unit.dim):
        up, down = list(base), list(base)
        up[i] += h
        down[i] -= h
        d_weights.append((loss_at(up, unit.bias) - loss_at(down, unit.bias)) / (2 * h))
    d_bias = (loss_at(base, unit.bias + h) - loss_at(base, unit.bias - h)) / (2 * h)
    return Gradient(d_weights=tuple(d_weights), d_bias=d_bias)


def train_unit(unit: NeuronUnit, subset, config: TrainConfig) -> tuple[NeuronUnit, TrainLog]:
    """Isolated stochastic gradient descent over the unit's own subset.

    Full passes over the subset, one update per observation, epoch order drawn
    from the (config.seed, unit_index, epoch) stream when shuffling. Reads and
    writes nothing outside the given unit; deterministic in all inputs.
    """
    subset = tuple(subset)
    if not subset:
        raise TrainingError(f"unit {unit.unit_index}: empty training subset")
    _check_pair(unit.activation, config.loss)
    for obs in subset:
        if len(obs.features) != unit.dim:
            raise TrainingError(
                f"unit {unit.unit_index}: observation {obs.id} has {len(obs.features)} features, expected {unit.dim}")

    n = len(subset)
    xs = np.asarray([obs.features for obs in subset], dtype=float)
    ys = np.asarray([obs.label for obs in subset], dtype=float)
    w = np.asarray(unit.weights, dtype=float)
    b = unit.bias
    lr = config.learning_rate

    epoch_losses = []
    for epoch in range(config.epochs):
        if config.shuffle:
            order = rng_for(config.seed, unit.unit_index, epoch).permutation(n)
        else:
            order = range(n)
        total = 0.0
        for step, idx in enumerate(order):
            x = xs[idx]
            y = float(ys[idx])
            z = float(w @ x) + b
            loss = _loss_from_z(z, y, config.loss, unit.activation)
            if not math.isfinite(loss):
                raise TrainingError(
                    f"unit {unit.unit_index}: non-finite loss at epoch {epoch} step {step}")
            if config.loss == "bce":
                dz = _sigmoid(z) - y
            else:
                dz = 2.0 * (_activate(unit.activation, z) - y) * _activate_prime(unit.activation, z)
            w = w - lr * dz * x
            b = b - lr * dz
            if not (math.isfinite(b) and np.isfinite(w).all()):
                raise TrainingError(
                    f"unit {unit.unit_index}: non-finite parameters at epoch {epoch} step {step}")
            total += loss
        epoch_losses.append(float(total / n))

    trained = NeuronUnit(unit_index=unit.unit_index, activation=unit.activation,
                         weights=tuple(float(v) for v in w), bias=float(b))
    log = TrainLog(epoch_losses=tuple(epoch_losses), final_loss=epoch_losses[-1],
                   steps=config.epochs * n)
    return trained, log


def unit_to_dict(unit: NeuronUnit) -> dict:
    return {"unit_index": unit.unit_index, "activation": unit.activation,
            "weights": list(unit.weights), "bias": unit.bias}


def unit_from_dict(obj: dict) -> NeuronUnit:
    return NeuronUnit(unit_index=int(obj["unit_index"]), activation=obj["activation"],
                      weights=tuple(float(w) for w in obj["weights"]), bias=float(obj["bias"]))


def save_unit(unit: NeuronUnit, path) -> None:
    write_json(unit_to_dict(unit), path)


def load_unit(path) -> NeuronUnit:
    return unit_from_dict(read_json(Path(path)))
