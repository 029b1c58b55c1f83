"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
fallback. Set ``DUSHAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("DUSHAP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

subset_sums = _impl.subset_sums
layer_marginal_sums = _impl.layer_marginal_sums
predecessor_masks = _impl.predecessor_masks
bernoulli_masks = _impl.bernoulli_masks

MAX_MASK_PLAYERS = 62
