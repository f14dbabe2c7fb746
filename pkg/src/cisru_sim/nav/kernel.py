"""Fast-marching kernel selection.

The compiled extension is preferred; the pure-Python implementation is the
fallback. `CISRU_SIM_FMM=py` or `=cy` forces a side (useful for the
benchmark and for cross-checking)."""

from __future__ import annotations

import os

from . import _fmm_py

_forced = os.environ.get("CISRU_SIM_FMM", "").strip().lower()

march = _fmm_py.march
KERNEL_NAME = "python"

if _forced != "py":
    try:
        from . import _fmm_cy

        march = _fmm_cy.march
        KERNEL_NAME = "cython"
    except ImportError:
        if _forced == "cy":
            raise ImportError(
                "CISRU_SIM_FMM=cy but the compiled kernel is not built; "
                "run `pip install -e . --no-build-isolation`"
            ) from None


def available_kernels() -> dict:
    kernels = {"python": _fmm_py.march}
    try:
        from . import _fmm_cy

        kernels["cython"] = _fmm_cy.march
    except ImportError:
        pass
    return kernels
