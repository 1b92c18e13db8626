"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pykernels`` takes over. ``BCNN_BACKEND=python``
forces the fallback.
"""

import importlib
import logging
import os

log = logging.getLogger(__name__)

_MODULES = {"cython": "bcnn._ckernels", "python": "bcnn._pykernels"}


def load(name):
    """Return the kernel module for backend ``name`` ("cython" or "python")."""
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    return importlib.import_module(_MODULES[name])


def available():
    names = []
    for name in _MODULES:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    wanted = os.environ.get("BCNN_BACKEND", "").strip().lower()
    if wanted:
        return wanted, load(wanted)
    try:
        return "cython", load("cython")
    except ImportError:
        log.info("compiled kernels unavailable; using numpy fallback")
        return "python", load("python")


BACKEND, kernels = _select()
