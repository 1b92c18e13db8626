import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from bcnn.data import CLASS_NAMES, Sample  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def separable_samples(seed, shape=(1, 8, 8), per_class=2):
    """Each class lights up its own quadrant; low-amplitude noise elsewhere."""
    rng = np.random.default_rng(seed)
    c, h, w = shape
    out = []
    for k in range(4):
        for _ in range(per_class):
            x = 0.1 * rng.random(shape)
            y0, x0 = (k // 2) * (h // 2), (k % 2) * (w // 2)
            x[:, y0:y0 + h // 2, x0:x0 + w // 2] += 0.8
            out.append(Sample(x, k))
    return out


def write_image_tree(root, per_class, size=(12, 16), seed=0, fmt="png"):
    """Write a folder-per-class tree of random RGB images; returns written labels."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    labels = {}
    for k, name in enumerate(CLASS_NAMES):
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        n = per_class[k] if isinstance(per_class, (list, tuple)) else per_class
        for i in range(n):
            arr = rng.integers(0, 256, size=(*size, 3), dtype=np.uint8)
            # class-specific tint so small nets can learn something
            arr[..., k % 3] = np.clip(arr[..., k % 3].astype(int) + 60 * (k + 1), 0, 255)
            path = d / f"{name}_{i:03d}.{fmt}"
            Image.fromarray(arr).save(path)
            labels[str(path)] = k
    return labels


# rows = true class, columns = predicted class, canonical class order
REFERENCE_COUNTS = [[42, 0, 0, 3],
          [0, 63, 0, 0],
          [1, 2, 42, 1],
          [2, 1, 0, 56]]

# solid RGB colour that the colour-code model maps to each predicted class
CLASS_COLOURS = [(255, 0, 0), (0, 255, 0), (0, 0, 255), (0, 0, 0)]


def reference_pairs():
    return [(t, p) for t in range(4) for p in range(4) for _ in range(REFERENCE_COUNTS[t][p])]


def colour_code_model():
    """Hand-wired network on 3x4x4 inputs whose argmax is fixed by the image colour.

    Each conv and dense stage passes channel c through as 2*x on channel c,
    so a pure red/green/blue image drives logit 0/1/2 high; black falls back
    to class 3 through its bias.
    """
    from bcnn.network import Model, NetworkSpec

    spec = NetworkSpec(input_shape=(3, 4, 4), conv1_filters=3, conv2_filters=3, n6=3)
    p = {name: np.zeros(shape) for name, shape in spec.param_shapes().items()}
    for c in range(3):
        p["conv1.weight"][c, c, 4, 4] = 2.0
        p["conv2.weight"][c, c, 4, 4] = 2.0
        p["dense1.weight"][c, c] = 2.0
        p["dense2.weight"][c, c] = 10.0
    p["dense2.bias"][3] = 5.0
    return Model(spec, p)


def write_reference_tree(root):
    """Test images whose colour-code predictions reproduce REFERENCE_COUNTS."""
    root = Path(root)
    for t, name in enumerate(CLASS_NAMES):
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        n = 0
        for pred in range(4):
            for _ in range(REFERENCE_COUNTS[t][pred]):
                arr = np.empty((4, 4, 3), dtype=np.uint8)
                arr[:] = CLASS_COLOURS[pred]
                Image.fromarray(arr).save(d / f"{name}_{n:03d}.png")
                n += 1
    return root


def forced_output_model(probs, input_shape=(3, 4, 4)):
    """All weights zero; output bias = log(probs), so every image yields ``probs``."""
    from bcnn.network import Model, NetworkSpec

    spec = NetworkSpec(input_shape=input_shape, conv1_filters=2, conv2_filters=2, n6=2)
    p = {name: np.zeros(shape) for name, shape in spec.param_shapes().items()}
    p["dense2.bias"] = np.log(np.asarray(probs, dtype=float))
    return Model(spec, p)
