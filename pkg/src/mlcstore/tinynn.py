"""Small MLP whose parameters are read back through a faulty MLC buffer.

A 64 -> 512 -> 10 ReLU network is trained on Gaussian clusters, each layer is
max-abs normalised into [-1, 1], and inference runs on parameters that went
through half conversion, encoding, fault injection and decoding.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .analysis import _write
from .codec import SYSTEMS, DecodeStats, decode_buffer, encode_buffer
from .halffloat import halves_to_reals, reals_to_halves
from .memdevice import FaultSpec, inject_faults

__all__ = [
    "ConvergenceError",
    "Dataset",
    "MlpModel",
    "AccuracyRow",
    "make_dataset",
    "train",
    "infer_through_buffer",
    "accuracy_experiment",
    "write_accuracy_csv",
    "ACCURACY_SYSTEMS",
]

N_CLASSES = 10
N_FEATURES = 64
N_TRAIN_PER_CLASS = 200
N_TEST_PER_CLASS = 50
CENTER_SCALE = 1.0  # std of cluster centres; unit-variance noise around them
HIDDEN = 512
LEARNING_RATE = 0.5
MAX_EPOCHS = 500
# Fitting the training set fully widens the margins; with an early stop at
# 95% single exponent flips decide too many test points.
TARGET_TRAIN_ACC = 1.0
MIN_TRAIN_ACC = 0.90

ERROR_FREE = "error_free"
ACCURACY_SYSTEMS = (ERROR_FREE, "unprotected", "round", "rotate", "hybrid")


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    seed: int


@dataclass(frozen=True)
class MlpModel:
    """Normalised parameters plus the scales removed from each layer.

    ``hidden_scale`` is multiplied back into the hidden activations at
    inference. ``output_scale`` does not change the argmax and is kept only
    for completeness.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    hidden_scale: float
    output_scale: float

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_parameters(self, flat) -> "MlpModel":
        flat = np.asarray(flat, dtype=np.float64)
        shapes = [self.w1.shape, self.b1.shape, self.w2.shape, self.b2.shape]
        parts, i = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            parts.append(flat[i:i + size].reshape(shape))
            i += size
        if i != len(flat):
            raise ValueError(f"expected {i} parameters, got {len(flat)}")
        return MlpModel(*parts, self.hidden_scale, self.output_scale)

    def logits(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            h = self.hidden_scale * np.maximum(x @ self.w1 + self.b1, 0.0)
            return h @ self.w2 + self.b2

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(np.argmax(self.logits(x), axis=1) == y))

    def to_half(self) -> "MlpModel":
        """Same model with every parameter rounded to half precision."""
        return self.with_parameters(halves_to_reals(reals_to_halves(self.parameters())))


def make_dataset(seed: int) -> Dataset:
    """Ten Gaussian clusters in 64 dimensions, 200 train / 50 test per class."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, CENTER_SCALE, (N_CLASSES, N_FEATURES))

    def draw(per_class):
        y = np.repeat(np.arange(N_CLASSES), per_class)
        x = centers[y] + rng.normal(0.0, 1.0, (len(y), N_FEATURES))
        order = rng.permutation(len(y))
        return x[order], y[order]

    x_train, y_train = draw(N_TRAIN_PER_CLASS)
    x_test, y_test = draw(N_TEST_PER_CLASS)
    return Dataset(x_train, y_train, x_test, y_test, seed)


def _normalise(w: np.ndarray, b: np.ndarray):
    scale = float(max(np.max(np.abs(w)), np.max(np.abs(b))))
    return w / scale, b / scale, scale


def train(ds: Dataset, seed: int) -> MlpModel:
    """Full-batch gradient descent on softmax cross-entropy.

    Stops once the training set is fitted (or after ``MAX_EPOCHS``), then
    normalises each layer. Raises :class:`ConvergenceError` below 0.90.
    """
    rng = np.random.default_rng(seed)
    x, y = ds.x_train, ds.y_train
    n = len(y)
    w1 = rng.normal(0.0, np.sqrt(2.0 / N_FEATURES), (N_FEATURES, HIDDEN))
    b1 = np.zeros(HIDDEN)
    w2 = rng.normal(0.0, np.sqrt(1.0 / HIDDEN), (HIDDEN, N_CLASSES))
    b2 = np.zeros(N_CLASSES)
    onehot = np.eye(N_CLASSES)[y]

    acc = 0.0
    for _ in range(MAX_EPOCHS):
        z1 = x @ w1 + b1
        h = np.maximum(z1, 0.0)
        z2 = h @ w2 + b2
        acc = float(np.mean(np.argmax(z2, axis=1) == y))
        if acc >= TARGET_TRAIN_ACC:
            break
        z2 -= z2.max(axis=1, keepdims=True)
        prob = np.exp(z2)
        prob /= prob.sum(axis=1, keepdims=True)
        d2 = (prob - onehot) / n
        d1 = (d2 @ w2.T) * (z1 > 0)
        w2 -= LEARNING_RATE * (h.T @ d2)
        b2 -= LEARNING_RATE * d2.sum(axis=0)
        w1 -= LEARNING_RATE * (x.T @ d1)
        b1 -= LEARNING_RATE * d1.sum(axis=0)
    if acc < MIN_TRAIN_ACC:
        raise ConvergenceError(f"training accuracy {acc:.3f} after {MAX_EPOCHS} epochs")

    w1, b1, s1 = _normalise(w1, b1)
    w2, b2, s2 = _normalise(w2, b2)
    return MlpModel(w1, b1, w2, b2, hidden_scale=s1, output_scale=s2)


def infer_through_buffer(model: MlpModel, ds: Dataset, system: Iterable,
                         spec: FaultSpec, granularity: int,
                         protect_sign: bool = True,
                         stats: DecodeStats | None = None) -> float:
    """Test accuracy after a store / corrupt / load cycle of all parameters.

    ``system`` is a set of enabled schemes, or a name from ``SYSTEMS``.
    """
    if isinstance(system, str):
        system = SYSTEMS[system]
    words = reals_to_halves(model.parameters())
    buf = encode_buffer(words, granularity, system, protect_sign=protect_sign)
    buf = inject_faults(buf, spec)
    restored = halves_to_reals(decode_buffer(buf, stats))
    return model.with_parameters(restored).accuracy(ds.x_test, ds.y_test)


@dataclass(frozen=True)
class AccuracyRow:
    system: str
    granularity: int
    p: float
    mean_accuracy: float
    stddev: float
    trials: int
    accuracies: tuple = ()


def accuracy_experiment(p: float = 0.02, granularity: int = 1, trials: int = 20,
                        seed: int = 0, workers: int = 1,
                        protect_sign: bool = True) -> list[AccuracyRow]:
    """Accuracy of each storage system over ``trials`` fault seeds.

    Dataset, training and fault seeds all derive from ``seed``; trial ``t``
    uses fault seed ``seed * 1000 + t`` for every system.
    """
    ds = make_dataset(seed)
    model = train(ds, seed)
    clean = model.to_half().accuracy(ds.x_test, ds.y_test)
    fault_seeds = [seed * 1000 + t for t in range(trials)]

    rows = [AccuracyRow(ERROR_FREE, granularity, p, clean, 0.0, trials, (clean,) * trials)]
    for name in ACCURACY_SYSTEMS[1:]:
        def run(fs, name=name):
            return infer_through_buffer(model, ds, name, FaultSpec(p, fs), granularity,
                                        protect_sign=protect_sign)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                accs = list(pool.map(run, fault_seeds))
        else:
            accs = [run(fs) for fs in fault_seeds]
        sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
        rows.append(AccuracyRow(name, granularity, p, statistics.fmean(accs), sd, trials, tuple(accs)))
    return rows


def write_accuracy_csv(rows: Iterable[AccuracyRow], fp):
    _write(fp, ("system", "granularity", "p", "mean_accuracy", "stddev", "trials"),
           ((r.system, r.granularity, r.p, r.mean_accuracy, r.stddev, r.trials) for r in rows))
