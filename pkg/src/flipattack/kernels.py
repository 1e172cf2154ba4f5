"""Backend selection for the descent kernels.

The compiled extension is used when it imports; otherwise (or when
``FLIPATTACK_BACKEND=python``) the numpy implementation takes over. Both
expose ``pack``, ``logits``, ``input_grads``, ``descend`` and ``push``.
"""
from __future__ import annotations

import os

from . import _fallback

if os.environ.get("FLIPATTACK_BACKEND", "").lower() == "python":
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _fallback

BACKEND: str = _impl.BACKEND


def available_backends() -> dict:
    out = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out


def get_backend(name: str | None = None):
    if name is None:
        return _impl
    backends = available_backends()
    if name not in backends:
        raise ValueError(f"backend {name!r} not available (have {sorted(backends)})")
    return backends[name]


def pack(model, backend=None):
    return get_backend(backend).pack(model.layers, model.spec.hidden_activation)
