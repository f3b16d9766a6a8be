"""Kernel backend selection.

The compiled extension `dropcae._core` is preferred when it was built; the
numpy fallback `dropcae._fallback` is used otherwise. DROPCAE_BACKEND=python
or =compiled forces the choice (the latter raises if the extension is
missing). Results are bit-reproducible per backend; the two backends agree
to rounding but accumulate in different orders, so long runs may diverge in
the last digits.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("DROPCAE_BACKEND", "").strip().lower()
if _forced == "compiled":
    if _core is None:
        raise ImportError(
            "DROPCAE_BACKEND=compiled but the dropcae._core extension is not built"
        )
    _active = _core
elif _forced == "python":
    _active = _fallback
elif _forced == "":
    _active = _core if _core is not None else _fallback
else:
    raise ImportError(f"DROPCAE_BACKEND must be 'python' or 'compiled', got {_forced!r}")

BACKEND_NAME = "compiled" if _active is not _fallback else "python"


def get_backend():
    return _active


def backend_name() -> str:
    return BACKEND_NAME


def compiled_available() -> bool:
    return _core is not None
