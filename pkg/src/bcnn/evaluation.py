"""Inference, top-2 reporting and confusion-matrix evaluation."""

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .data import CLASS_NAMES
from .errors import ConfigError
from .network import forward

TABLE_LABELS = {"eosinophil": "EOSI.", "lymphocyte": "LYMP.",
                "monocyte": "MONO.", "neutrophil": "NEUTRO."}


@dataclass
class Prediction:
    probabilities: np.ndarray
    top1: tuple  # (class index, probability)
    top2: tuple
    source: str = ""


def top_two(probs, source=""):
    """Two largest probabilities; equal values go to the lower class index."""
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(-probs, kind="stable")
    first, second = int(order[0]), int(order[1])
    return Prediction(probs, (first, float(probs[first])), (second, float(probs[second])), source)


def predict(model, pixels, source=""):
    return top_two(forward(model, pixels, "infer").probs, source)


def percent(p, digits=2):
    return f"{100.0 * p:.{digits}f}%"


def format_prediction(pred, class_names=CLASS_NAMES):
    lines = [f"{name:<12s} {percent(p)}" for name, p in zip(class_names, pred.probabilities)]
    (i1, p1), (i2, p2) = pred.top1, pred.top2
    lines.append(f"top-2: {class_names[i1]} {percent(p1)}, {class_names[i2]} {percent(p2)}")
    return "\n".join(lines)


class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    def __init__(self, counts=None, class_names=CLASS_NAMES):
        n = len(class_names)
        self.class_names = tuple(class_names)
        self.counts = (np.zeros((n, n), dtype=np.int64) if counts is None
                       else np.array(counts, dtype=np.int64))
        if self.counts.shape != (n, n) or (self.counts < 0).any():
            raise ConfigError(f"confusion counts must be a non-negative {n}x{n} grid")

    @classmethod
    def from_pairs(cls, pairs, class_names=CLASS_NAMES):
        cm = cls(class_names=class_names)
        for true, pred in pairs:
            cm.add(true, pred)
        return cm

    def add(self, true, pred):
        self.counts[true, pred] += 1

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def errors(self):
        return self.total - int(np.trace(self.counts))

    def row(self, name):
        return self.counts[self.class_names.index(name)].tolist()

    def format_table(self):
        abbrev = [TABLE_LABELS.get(n, n[:5].upper() + ".") for n in self.class_names]
        width = max(8, max(len(a) for a in abbrev) + 2)
        head = " " * width + "".join(f"{a:>{width}s}" for a in abbrev)
        rows = [f"{a:<{width}s}" + "".join(f"{c:>{width}d}" for c in r)
                for a, r in zip(abbrev, self.counts)]
        return "\n".join([head, *rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\predicted", *self.class_names])
            for name, r in zip(self.class_names, self.counts):
                writer.writerow([name, *r.tolist()])


def confusion(model, test):
    samples = list(test)
    if not samples:
        raise ConfigError("cannot evaluate an empty dataset")
    cm = ConfusionMatrix(class_names=getattr(test, "class_names", CLASS_NAMES))
    for s in samples:
        cm.add(s.label, predict(model, s.pixels).top1[0])
    return cm


def accuracy(cm):
    if cm.total == 0:
        raise ConfigError("accuracy of an empty confusion matrix")
    return int(np.trace(cm.counts)) / cm.total


def exact_accuracy(cm):
    if cm.total == 0:
        raise ConfigError("accuracy of an empty confusion matrix")
    return Fraction(int(np.trace(cm.counts)), cm.total)
