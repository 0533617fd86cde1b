"""Select the compiled kernels when available, else the numpy fallback.

Set ``DIFFBOUND_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _core_py

if os.environ.get("DIFFBOUND_PURE_PYTHON", "") not in ("", "0"):
    core = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as core  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        core = _core_py
        BACKEND = "python"

irls_logistic = core.irls_logistic
loo_cv_scores = core.loo_cv_scores
shifted_max_quantiles = core.shifted_max_quantiles

__all__ = ["BACKEND", "core", "irls_logistic", "loo_cv_scores", "shifted_max_quantiles"]
