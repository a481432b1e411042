"""Kernel backend selection.

Tries the compiled extension first and falls back to the NumPy
implementation; set FRFLOW_BACKEND=python (or =compiled) to force a choice.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("FRFLOW_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _kernels_py
elif _requested == "compiled":
    from . import _kernels as kernels  # noqa: F401  (ImportError is the contract)
elif _requested == "":
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py
else:
    raise ValueError(
        f"unknown FRFLOW_BACKEND={_requested!r}; expected 'compiled' or 'python'"
    )

BACKEND_NAME: str = kernels.BACKEND_NAME


def get_kernels():
    return kernels
