"""Backend selection for the minibatch kernel.

The compiled extension (``ncodlab._fast``) is used when it imports; the
numpy implementation in ``ncodlab._reference`` is the fallback. Set
``NCODLAB_BACKEND`` to ``python`` or ``compiled`` to force one.
"""

from __future__ import annotations

import os

from . import _reference

try:
    from . import _fast
except ImportError:  # extension not built
    _fast = None

BACKENDS = {"python": _reference}
if _fast is not None:
    BACKENDS["compiled"] = _fast


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (``auto`` / ``python`` / ``compiled``)."""
    name = (name or os.environ.get("NCODLAB_BACKEND") or "auto").lower()
    if name == "auto":
        return _fast if _fast is not None else _reference
    if name not in ("python", "compiled"):
        raise ValueError(f"unknown backend {name!r}")
    if name not in BACKENDS:
        raise ImportError("compiled backend requested but ncodlab._fast is not built")
    return BACKENDS[name]


def available() -> list[str]:
    return sorted(BACKENDS)
