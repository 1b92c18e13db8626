"""Folder-per-class image ingestion and preprocessing.

Expected layout::

    root/
      eosinophil/  *.png|*.jpg|*.jpeg|*.bmp
      lymphocyte/
      monocyte/
      neutrophil/

Directory names match case-insensitively and may be plural.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, EmptyDatasetError, IngestionError

log = logging.getLogger(__name__)

CLASS_NAMES = ("eosinophil", "lymphocyte", "monocyte", "neutrophil")
IMAGE_SIZE = (80, 100)  # height, width
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass
class Sample:
    pixels: np.ndarray  # [3, H, W] in [0, 1]
    label: int
    source: str = ""

    def onehot(self, n_classes=len(CLASS_NAMES)):
        v = np.zeros(n_classes)
        v[self.label] = 1.0
        return v


@dataclass
class Dataset:
    samples: list
    class_names: tuple = CLASS_NAMES
    role: str = "train"
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def labels(self):
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def class_counts(self):
        return np.bincount(self.labels(), minlength=len(self.class_names))


def bilinear_resize(img, out_h, out_w):
    """Resize an ``[H, W, C]`` array with bilinear interpolation, in float64.

    Pixel centres sit at half-integer coordinates and samples beyond the
    border clamp to the edge row/column, so corner pixels are copied exactly.
    Only the source rows and columns that are actually sampled get converted,
    which keeps memory flat for very large inputs.
    """
    img = np.asarray(img)
    in_h, in_w = img.shape[:2]

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(in_h, out_h)
    x0, x1, fx = axis(in_w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    rows0 = img[y0].astype(np.float64)
    rows1 = img[y1].astype(np.float64)
    top = rows0[:, x0] * (1.0 - fx) + rows0[:, x1] * fx
    bottom = rows1[:, x0] * (1.0 - fx) + rows1[:, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _raster(image):
    """Decoded image -> (``[H, W, 3]`` array, maximum code value)."""
    if isinstance(image, Image.Image):
        if image.mode in ("I;16", "I;16B", "I;16L", "I;16N"):
            arr, top = np.asarray(image), 65535.0
        elif image.mode in ("I", "F"):
            raise IngestionError(f"unsupported image mode {image.mode}")
        else:
            arr, top = np.asarray(image.convert("RGB")), 255.0
    else:
        arr = np.asarray(image)
        top = float(np.iinfo(arr.dtype).max) if np.issubdtype(arr.dtype, np.integer) else 1.0
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        arr = np.broadcast_to(arr[:, :, None], (*arr.shape, 3))
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise IngestionError(f"cannot interpret raster of shape {arr.shape} as RGB")
    return arr, top


def preprocess(image, size=IMAGE_SIZE):
    """Decoded RGB (or grayscale) raster -> ``[3, H, W]`` tensor in [0, 1].

    Aspect ratio is not preserved: the image is stretched to ``size``.
    Grayscale input is replicated to three channels.
    """
    arr, top = _raster(image)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise IngestionError("image has a zero dimension")
    out = bilinear_resize(arr, *size) / top
    np.clip(out, 0.0, 1.0, out=out)
    return np.ascontiguousarray(out.transpose(2, 0, 1))


def load_image(path, size=IMAGE_SIZE):
    with Image.open(path) as im:
        im.load()
        return preprocess(im, size)


def _canonical(name):
    name = name.lower()
    return name[:-1] if name.endswith("s") else name


def class_directories(root, class_names=CLASS_NAMES):
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root {root} is not a directory")
    found = {_canonical(p.name): p for p in root.iterdir() if p.is_dir()}
    dirs = []
    for name in class_names:
        if _canonical(name) not in found:
            raise IngestionError(f"missing class directory for {name!r} under {root}")
        dirs.append(found[_canonical(name)])
    return dirs


def load_dataset(root, role="train", size=IMAGE_SIZE, class_names=CLASS_NAMES, workers=None):
    """Read every image under ``root`` into a :class:`Dataset`.

    Files are visited in sorted path order. Undecodable files are skipped
    with a warning and listed in ``Dataset.skipped``.
    """
    from .optim import worker_count

    entries = []
    for label, d in enumerate(class_directories(root, class_names)):
        files = sorted(p for p in d.iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        entries.extend((p, label) for p in files)

    def decode(entry):
        path, label = entry
        try:
            return Sample(load_image(path, size), label, str(path))
        except (UnidentifiedImageError, OSError, IngestionError, ValueError) as exc:
            log.warning("skipping %s: %s", path, exc)
            return path

    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        results = list(pool.map(decode, entries))
    samples = [r for r in results if isinstance(r, Sample)]
    skipped = [str(r) for r in results if not isinstance(r, Sample)]
    if not samples:
        raise EmptyDatasetError(f"empty dataset under {root}")
    ds = Dataset(samples, tuple(class_names), role, skipped)
    counts = ", ".join(f"{n}={c}" for n, c in zip(class_names, ds.class_counts()))
    log.info("loaded %d %s samples (%s), %d skipped", len(ds), role, counts, len(skipped))
    return ds


def split_shuffle(d, fraction, seed):
    """Stratified split into ``(train, holdout)``.

    Each class contributes ``round(fraction * class_count)`` samples to the
    holdout (halves round up). Both parts keep the input's sample order.
    """
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"holdout fraction must lie in [0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    labels = np.array([s.label for s in d.samples], dtype=np.int64)
    held = np.zeros(len(labels), dtype=bool)
    for cls in range(len(d.class_names)):
        idx = np.flatnonzero(labels == cls)
        k = int(np.floor(fraction * len(idx) + 0.5))
        held[rng.permutation(idx)[:k]] = True
    train = [s for s, h in zip(d.samples, held) if not h]
    holdout = [s for s, h in zip(d.samples, held) if h]
    return (Dataset(train, d.class_names, "train"),
            Dataset(holdout, d.class_names, "validation"))
