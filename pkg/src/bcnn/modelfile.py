"""Binary model files.

Layout (all integers and floats little-endian)::

    "BCNN"                          magic, 4 bytes
    u16 version
    spec block:
        u32 C, H, W, conv1_filters, conv2_filters, kernel_size, n6, n_classes
        u16 layer count, then per layer: u8 kind, u8 ndim, u32 x ndim output shape
    u16 class count, then per class: u16 byte length, utf-8 name
    u16 tensor count, then per tensor:
        u16 name length, utf-8 name, u8 ndim, u32 x ndim shape,
        float64 x prod(shape) values in row-major order
    u32 CRC-32 of every preceding byte
"""

import struct
import zlib

import numpy as np

from .errors import IntegrityError
from .network import PARAM_NAMES, Model, NetworkSpec

MAGIC = b"BCNN"
VERSION = 1

LAYER_KINDS = {"conv": 1, "tanh": 2, "maxpool": 3, "flatten": 4,
               "dropout": 5, "dense": 6, "softmax": 7}


def layer_descriptors(spec):
    """(kind, output shape) for every stage of the pipeline."""
    ch = spec.shape_chain()
    return [
        ("conv", ch[1]), ("tanh", ch[1]), ("maxpool", ch[2]),
        ("conv", ch[3]), ("tanh", ch[3]), ("maxpool", ch[4]),
        ("flatten", ch[5]), ("dropout", ch[5]),
        ("dense", ch[6]), ("tanh", ch[6]), ("dropout", ch[6]),
        ("dense", ch[7]), ("softmax", ch[7]),
    ]


def _pack_str(s):
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _pack_shape(shape):
    return struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)


def dumps(model):
    spec = model.spec
    class_names = model.class_names
    parts = [MAGIC, struct.pack("<H", VERSION)]
    parts.append(struct.pack("<8I", *spec.input_shape, spec.conv1_filters,
                             spec.conv2_filters, spec.kernel_size, spec.n6, spec.n_classes))
    layers = layer_descriptors(spec)
    parts.append(struct.pack("<H", len(layers)))
    for kind, shape in layers:
        parts.append(struct.pack("<B", LAYER_KINDS[kind]) + _pack_shape(shape))
    parts.append(struct.pack("<H", len(class_names)))
    parts.extend(_pack_str(n) for n in class_names)
    parts.append(struct.pack("<H", len(PARAM_NAMES)))
    for name in PARAM_NAMES:
        p = model.params[name]
        parts.append(_pack_str(name) + _pack_shape(p.shape))
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise IntegrityError("shape: model file ends inside a header")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def string(self):
        (n,) = self.take("<H")
        raw = self.take(f"<{n}s")[0]
        return raw.decode("utf-8")

    def shape(self):
        (ndim,) = self.take("<B")
        return tuple(self.take(f"<{ndim}I"))


def loads(buf):
    """Parse and validate model file bytes."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise IntegrityError("magic: not a BCNN model file")
    if len(buf) < 6 or struct.unpack_from("<H", buf, 4)[0] != VERSION:
        found = struct.unpack_from("<H", buf, 4)[0] if len(buf) >= 6 else None
        raise IntegrityError(f"version: unsupported format version {found}")
    if len(buf) < 10:
        raise IntegrityError("checksum: file too short to carry a checksum")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise IntegrityError("checksum: payload does not match its CRC-32")

    r = _Reader(body)
    r.pos = 6
    c, h, w, f1, f2, k, n6, ncls = r.take("<8I")
    try:
        spec = NetworkSpec((c, h, w), f1, f2, k, n6, ncls)
    except ValueError as exc:
        raise IntegrityError(f"shape: invalid spec block ({exc})") from exc
    (n_layers,) = r.take("<H")
    layers = []
    for _ in range(n_layers):
        (kind,) = r.take("<B")
        layers.append((kind, r.shape()))
    expected = [(LAYER_KINDS[kind], tuple(s)) for kind, s in layer_descriptors(spec)]
    if layers != expected:
        raise IntegrityError("shape: layer descriptors disagree with the network spec block")
    (n_cls,) = r.take("<H")
    class_names = tuple(r.string() for _ in range(n_cls))
    if len(class_names) != spec.n_classes:
        raise IntegrityError("shape: class-name count differs from the output width")
    (n_tensors,) = r.take("<H")
    shapes = spec.param_shapes()
    params = {}
    for _ in range(n_tensors):
        name = r.string()
        shape = r.shape()
        if shapes.get(name) != shape:
            raise IntegrityError(f"shape: tensor {name!r} has shape {shape}, spec says {shapes.get(name)}")
        count = int(np.prod(shape))
        if r.pos + 8 * count > len(body):
            raise IntegrityError(f"shape: payload of {name!r} is truncated")
        params[name] = np.frombuffer(body, dtype="<f8", count=count, offset=r.pos) \
            .astype(np.float64).reshape(shape)
        r.pos += 8 * count
    if set(params) != set(shapes) or r.pos != len(body):
        raise IntegrityError("shape: tensor list does not match the network spec")
    return Model(spec, params, class_names)


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
