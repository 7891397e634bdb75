"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set APUNIM_BACKEND=c or APUNIM_BACKEND=python to force a backend (the former
raises if the extension is missing). Both backends are deterministic and
produce identical integer results; float aggregates agree to ~1e-15.
"""

from __future__ import annotations

import os

from . import _kernels_py


def _load_compiled():
    from . import _kernels  # noqa: PLC0415 (optional extension)

    return _kernels


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (or the environment/default pick)."""
    if name is None:
        name = os.environ.get("APUNIM_BACKEND", "auto")
    if name == "python":
        return _kernels_py
    if name == "c":
        return _load_compiled()
    if name == "auto":
        try:
            return _load_compiled()
        except ImportError:
            return _kernels_py
    raise ValueError(f"unknown backend {name!r} (expected 'auto', 'c', or 'python')")


DEFAULT_BACKEND = get_backend()
