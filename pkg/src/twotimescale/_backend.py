"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise (or with
``TWOTIMESCALE_PURE=1``) the pure-Python ``_pycore`` twin is used.
"""

from __future__ import annotations

import os

from . import _pycore

try:
    if os.environ.get("TWOTIMESCALE_PURE", "") not in ("", "0"):
        raise ImportError("pure backend forced")
    from . import _core as kernels
    BACKEND = "cython"
except ImportError:
    kernels = _pycore
    BACKEND = "python"

pure = _pycore

block_solve = kernels.block_solve
admm_solve = kernels.admm_solve
demand_sets = kernels.demand_sets
price_auction = kernels.price_auction
