"""Central finite-difference checks of the analytic gradients."""

from dataclasses import dataclass, field

import numpy as np

from .network import backward, forward
from .optim import cross_entropy


@dataclass
class TensorCheck:
    max_rel: float
    mean_rel: float
    worst_index: tuple
    n_checked: int


@dataclass
class GradReport:
    tol: float
    tensors: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(t.max_rel < self.tol for t in self.tensors.values())

    @property
    def worst(self):
        """Name of the tensor with the largest relative error (first on ties)."""
        return max(self.tensors, key=lambda n: self.tensors[n].max_rel)

    def format_table(self):
        lines = [f"{'tensor':<16s}{'checked':>8s}{'max rel':>12s}{'mean rel':>12s}  worst index"]
        for name, t in self.tensors.items():
            lines.append(f"{name:<16s}{t.n_checked:>8d}{t.max_rel:>12.3e}"
                         f"{t.mean_rel:>12.3e}  {t.worst_index}")
        lines.append(f"{'PASS' if self.passed else 'FAIL'} (tol {self.tol:g}, worst {self.worst})")
        return "\n".join(lines)


def relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def sample_loss(model, pixels, label):
    return cross_entropy(forward(model, pixels, "infer").probs, label)


def numeric_grad(model, sample, name, index, eps=1e-5):
    """(J(theta + eps e) - J(theta - eps e)) / (2 eps) for one coordinate.

    The probed parameter is restored to its original bits afterwards.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if name not in model.params:
        raise IndexError(f"no parameter named {name!r}")
    p = model.params[name]
    if np.ndim(index) == 0:
        index = np.unravel_index(int(index), p.shape) if 0 <= int(index) < p.size else None
    else:
        index = tuple(int(i) for i in index)
        if len(index) != p.ndim or any(not 0 <= i < s for i, s in zip(index, p.shape)):
            index = None
    if index is None:
        raise IndexError(f"coordinate out of range for {name} with shape {p.shape}")
    original = p[index]
    try:
        p[index] = original + eps
        plus = sample_loss(model, sample.pixels, sample.label)
        p[index] = original - eps
        minus = sample_loss(model, sample.pixels, sample.label)
    finally:
        p[index] = original
    return (plus - minus) / (2.0 * eps)


def _pool_gap(trace):
    """Smallest gap between a window maximum and the runner-up, over both pools."""
    gaps = []
    for act in (trace.conv1, trace.conv2):
        c, h, w = act.shape
        win = act.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(-1, 4)
        top = np.sort(win, axis=1)
        gaps.append(np.min(top[:, 3] - top[:, 2]))
    return float(min(gaps))


def tie_free(model, sample, rng=None, min_gap=1e-9, tries=20):
    """Return ``sample`` or a copy with tiny input noise so no pool window ties."""
    from .data import Sample

    rng = rng or np.random.default_rng(0)
    pixels = sample.pixels
    for _ in range(tries):
        if _pool_gap(forward(model, pixels, "infer")) > min_gap:
            return sample if pixels is sample.pixels else Sample(pixels, sample.label, sample.source)
        pixels = sample.pixels + 1e-6 * rng.standard_normal(sample.pixels.shape)
    raise RuntimeError("could not remove pooling ties from the sample")


def check_model(model, sample, tol=1e-4, budget=50, eps=1e-5, seed=0):
    """Compare analytic gradients with central differences.

    At most ``budget`` coordinates per tensor are probed, chosen by a seeded
    draw; smaller tensors are checked in full.
    """
    rng = np.random.default_rng(seed)
    sample = tie_free(model, sample, rng)
    analytic = backward(model, forward(model, sample.pixels, "infer"), sample.label)
    report = GradReport(tol)
    for name, p in model.params.items():
        if p.size <= budget:
            coords = np.arange(p.size)
        else:
            coords = np.sort(rng.choice(p.size, size=budget, replace=False))
        errs = []
        for flat in coords:
            idx = np.unravel_index(int(flat), p.shape)
            num = numeric_grad(model, sample, name, idx, eps)
            errs.append(relative_error(float(analytic[name][idx]), num))
        worst = int(np.argmax(errs))
        report.tensors[name] = TensorCheck(
            max_rel=float(errs[worst]),
            mean_rel=float(np.mean(errs)),
            worst_index=tuple(int(i) for i in np.unravel_index(int(coords[worst]), p.shape)),
            n_checked=len(coords),
        )
    return report
