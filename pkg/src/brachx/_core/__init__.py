"""Backend selection for the hot kernels.

The compiled extension ``_kernels`` is used when importable; otherwise the
pure-NumPy implementation in ``_fallback``.  Set ``BRACHX_BACKEND=python`` to
force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

try:  # pragma: no cover - depends on build
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def get_backend(name: str | None = None):
    name = name or os.environ.get("BRACHX_BACKEND")
    if name is None:
        return BACKENDS.get("compiled", _fallback)
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


backend = get_backend()
BACKEND = "compiled" if backend is not _fallback else "python"
