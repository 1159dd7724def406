"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the NumPy
implementations when it is not built. Set DFPSCHED_PURE=1 to force the
fallback (used by the benchmark and for debugging).
"""

import os

if os.environ.get("DFPSCHED_PURE") == "1":
    from dfpsched._kernels.pure import BACKEND, earliest_fit, greedy_placement
else:
    try:
        from dfpsched._kernels._speedups import (  # type: ignore
            BACKEND,
            earliest_fit,
            greedy_placement,
        )
    except ImportError:
        from dfpsched._kernels.pure import BACKEND, earliest_fit, greedy_placement

__all__ = ["BACKEND", "earliest_fit", "greedy_placement"]
