"""Backend selection for the mod-q matrix kernels.

The numba build is used when available; set WT1_DISABLE_NUMBA=1 to force
the pure-numpy fallback (useful for debugging and for the benchmark).
Both backends implement identical contracts, so callers import the
functions from this package and never care which one is active.
"""

from __future__ import annotations

import os

_flag = os.environ.get("WT1_DISABLE_NUMBA", "").strip().lower()
_want_numba = _flag in ("", "0", "false", "no")

if _want_numba:
    try:
        from .numba_impl import (  # noqa: F401
            divide_series_mod,
            hecke_series_mod,
            inv_mod,
            matmul_mod,
            nullspace_mod,
            rank_mod,
            reduce_vector_mod,
            rref_mod,
        )

        BACKEND = "numba"
    except ImportError:
        _want_numba = False

if not _want_numba:
    from .numpy_impl import (  # noqa: F401
        divide_series_mod,
        hecke_series_mod,
        inv_mod,
        matmul_mod,
        nullspace_mod,
        rank_mod,
        reduce_vector_mod,
        rref_mod,
    )

    BACKEND = "numpy"

__all__ = [
    "BACKEND",
    "divide_series_mod",
    "hecke_series_mod",
    "inv_mod",
    "matmul_mod",
    "nullspace_mod",
    "rank_mod",
    "reduce_vector_mod",
    "rref_mod",
]
