"""Cross-entropy loss, plain mini-batch SGD and the epoch loop."""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, StateError
from .network import backward, forward

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-300


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 96
    batch_size: int = 32
    dropout_rate: float = 0.1
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation fraction must lie in [0, 1), got {self.validation_fraction}"
            )


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    clamped: int = 0  # samples whose true-class probability hit the log floor

    def as_row(self):
        return asdict(self)


def cross_entropy(probs, label):
    """-log(probs[label]), with the probability floored at 1e-300."""
    p = float(probs[label])
    return -math.log(max(p, PROB_FLOOR))


def batch_cross_entropy(probs_batch, labels):
    losses = [cross_entropy(p, y) for p, y in zip(probs_batch, labels)]
    if not losses:
        raise ConfigError("empty batch")
    return sum(losses) / len(losses)


def sgd_step(model, grads, lr):
    """In place: p <- p - lr * g for every trainable tensor."""
    if set(grads) != set(model.params):
        raise StateError("gradient names do not match model parameters")
    for name, p in model.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise StateError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        p -= lr * g


def worker_count():
    cap = os.environ.get("BCNN_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _sample_pass(model, pixels, label, seed, dropout_rate):
    rng = np.random.default_rng(seed)
    trace = forward(model, pixels, "train", rng, dropout_rate)
    grads = backward(model, trace, label)
    return trace.probs, grads


def batch_gradient(model, samples, seeds, dropout_rate, workers=1):
    """Mean per-sample gradient over ``samples``.

    Per-sample passes may run on threads; their gradients are summed in
    sample order so the result does not depend on scheduling.
    Returns ``(mean_grads, probs_list)``.
    """
    def run(item):
        sample, seed = item
        return _sample_pass(model, sample.pixels, sample.label, seed, dropout_rate)

    items = list(zip(samples, seeds))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(item) for item in items]

    total = {name: np.zeros_like(p) for name, p in model.params.items()}
    for _, grads in results:
        for name in total:
            total[name] += grads[name]
    m = len(results)
    mean = {name: g / m for name, g in total.items()}
    return mean, [probs for probs, _ in results]


def train_epoch(model, train, cfg, rng):
    """One shuffled pass of mini-batch SGD. Returns ``(loss, accuracy, clamped)``.

    Loss and accuracy are accumulated during the pass, i.e. with dropout
    active and parameters changing between batches.
    """
    samples = list(train.samples if hasattr(train, "samples") else train)
    n = len(samples)
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    if cfg.batch_size > n:
        raise ConfigError(f"batch size {cfg.batch_size} exceeds dataset size {n}")
    order = rng.permutation(n)
    workers = worker_count()
    loss_sum = 0.0
    correct = 0
    clamped = 0
    for start in range(0, n, cfg.batch_size):
        batch = [samples[i] for i in order[start:start + cfg.batch_size]]
        seeds = rng.integers(0, 2**63 - 1, size=len(batch))
        grads, probs_list = batch_gradient(model, batch, seeds, cfg.dropout_rate, workers)
        for s, probs in zip(batch, probs_list):
            loss_sum += cross_entropy(probs, s.label)
            correct += int(np.argmax(probs) == s.label)
            clamped += int(probs[s.label] <= 0.0)
        sgd_step(model, grads, cfg.learning_rate)
    return loss_sum / n, correct / n, clamped


def evaluate(model, samples):
    """Inference-mode mean loss and accuracy; NaN for an empty set."""
    samples = list(samples.samples if hasattr(samples, "samples") else samples)
    if not samples:
        return math.nan, math.nan
    loss_sum = 0.0
    correct = 0
    for s in samples:
        probs = forward(model, s.pixels, "infer").probs
        loss_sum += cross_entropy(probs, s.label)
        correct += int(np.argmax(probs) == s.label)
    return loss_sum / len(samples), correct / len(samples)


def fit(model, data, cfg, on_epoch=None):
    """Train for ``cfg.epochs`` epochs with a held-out validation split.

    Returns one :class:`EpochMetrics` per epoch. ``on_epoch`` is called with
    each record as soon as it exists.
    """
    from .data import Dataset, split_shuffle

    if not isinstance(data, Dataset):
        data = Dataset(list(data), model.class_names)
    history = []
    if cfg.epochs == 0:
        return history
    train, holdout = split_shuffle(data, cfg.validation_fraction, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    for epoch in range(1, cfg.epochs + 1):
        loss, acc, clamped = train_epoch(model, train, cfg, rng)
        val_loss, val_acc = evaluate(model, holdout)
        rec = EpochMetrics(epoch, loss, acc, val_loss, val_acc, clamped)
        log.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                 epoch, loss, acc, val_loss, val_acc)
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return history
