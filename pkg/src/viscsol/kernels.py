"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set VISCSOL_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py as pure

compiled = None
if os.environ.get("VISCSOL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

pair_candidates = _impl.pair_candidates
sup_conv_1d = _impl.sup_conv_1d
mcf_step_2d = _impl.mcf_step_2d
mcf_step_3d = _impl.mcf_step_3d
