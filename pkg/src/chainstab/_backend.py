"""Stepping-core backend selection.

The compiled core (``_fastcore``, Cython) is preferred when the extension
was built; otherwise the pure-Python twin is used. Both expose the same
``integrate_window`` contract and the same arithmetic. Selection can be
forced with the ``CHAINSTAB_BACKEND`` environment variable (``pure`` or
``compiled``) or at runtime with :func:`set_backend` (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

from . import _purecore

_BACKENDS = {"pure": _purecore}
try:
    from . import _fastcore

    _BACKENDS["compiled"] = _fastcore
except ImportError:
    _fastcore = None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = _BACKENDS[name]


def get_backend():
    return _active


def backend_name() -> str:
    return _active.BACKEND_NAME


_requested = os.environ.get("CHAINSTAB_BACKEND", "")
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"CHAINSTAB_BACKEND={_requested!r} but available backends are {available_backends()}"
        )
    _active = _BACKENDS[_requested]
else:
    _active = _BACKENDS.get("compiled", _purecore)
