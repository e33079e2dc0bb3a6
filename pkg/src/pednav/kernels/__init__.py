"""Window-scoring kernels: compiled extension with a numpy fallback.

The build compiles ``_native`` (Cython) when a toolchain is available; at
import time the fastest importable backend wins. ``BACKEND`` names the one in
use and ``score_windows`` dispatches to it. Both backends implement the same
contract (see ``reference.score_windows``) and return bit-identical scores.
"""

from . import reference

try:
    from . import _native

    score_windows = _native.score_windows
    BACKEND = "native"
except ImportError:  # extension not built
    score_windows = reference.score_windows
    BACKEND = "numpy"

__all__ = ["score_windows", "BACKEND", "reference"]
